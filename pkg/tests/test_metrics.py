import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from gramscope.errors import EmptyInput, InsufficientData, LengthMismatch
from gramscope.metrics import (
    accuracy,
    cohen_kappa,
    confusion,
    krippendorff_alpha_ordinal,
    mean_pairwise_kappa,
    ordinal_delta_sq,
    pcc,
    pcc_or_zero,
)


def exact_pearson(x, y):
    """Pearson correlation in exact rational arithmetic."""
    n = len(x)
    x = [Fraction(v) for v in x]
    y = [Fraction(v) for v in y]
    mx, my = sum(x) / n, sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    if vx == 0 or vy == 0:
        return None
    return float(cov) / math.sqrt(float(vx) * float(vy))


class TestPcc:
    def test_identical_with_variance(self):
        assert pcc([0, 1, 2], [0, 1, 2]) == pytest.approx(1.0, abs=1e-15)

    def test_perfect_anticorrelation(self):
        assert pcc([0, 1, 2], [2, 1, 0]) == pytest.approx(-1.0, abs=1e-15)

    def test_constant_side_undefined(self):
        assert pcc([1, 1, 1], [0, 1, 2]) is None
        assert pcc([0, 1, 2], [2, 2, 2]) is None
        assert pcc_or_zero(pcc([1, 1], [0, 2])) == 0.0

    def test_matches_exact_oracle(self):
        cases = [
            ([0, 0, 1, 2], [0, 1, 1, 2]),
            ([2, 0, 1, 1, 2, 0], [1, 0, 2, 1, 2, 0]),
            ([0, 2, 2, 0, 1], [2, 2, 0, 1, 0]),
        ]
        for x, y in cases:
            assert pcc(x, y) == pytest.approx(exact_pearson(x, y), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            pcc([1, 2], [1, 2, 3])
        with pytest.raises(LengthMismatch):
            pcc([1], [1])

    def test_permutation_invariance(self):
        x, y = [0, 1, 2, 0, 2, 1], [1, 1, 2, 0, 2, 0]
        perm = [3, 0, 5, 2, 1, 4]
        assert pcc([x[i] for i in perm], [y[i] for i in perm]) == pytest.approx(
            pcc(x, y), abs=1e-15
        )


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0

    def test_all_wrong(self):
        assert accuracy([0, 0], [1, 2]) == 0.0

    def test_majority_on_53_percent(self):
        gold = [2] * 53 + [0] * 32 + [1] * 15
        assert accuracy([2] * 100, gold) == pytest.approx(0.53, abs=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            accuracy([], [])


def exact_kappa(a, b):
    n = len(a)
    po = Fraction(sum(1 for x, y in zip(a, b) if x == y), n)
    ca, cb = Counter(a), Counter(b)
    pe = sum(Fraction(ca[v], n) * Fraction(cb.get(v, 0), n) for v in ca)
    if pe == 1:
        return None
    return float((po - pe) / (1 - pe))


class TestCohenKappa:
    def test_identical_annotators(self):
        assert cohen_kappa([0, 1, 2, 1], [0, 1, 2, 1]) == pytest.approx(1.0, abs=1e-15)

    def test_symmetric(self):
        a, b = [0, 1, 2, 2, 0], [1, 1, 2, 0, 0]
        assert cohen_kappa(a, b) == pytest.approx(cohen_kappa(b, a), abs=1e-15)

    def test_matches_exact_oracle(self):
        cases = [
            ([0, 1, 2, 2, 0, 1], [1, 1, 2, 0, 0, 1]),
            ([0, 0, 1, 1], [0, 1, 0, 1]),
        ]
        for a, b in cases:
            assert cohen_kappa(a, b) == pytest.approx(exact_kappa(a, b), abs=1e-12)

    def test_independent_labels_near_zero(self):
        rng = np.random.default_rng(7)
        a = rng.integers(0, 3, size=10000).tolist()
        b = rng.integers(0, 3, size=10000).tolist()
        assert abs(cohen_kappa(a, b)) < 0.05

    def test_undefined_when_chance_is_one(self):
        assert cohen_kappa([1, 1, 1], [1, 1, 1]) is None

    def test_mean_pairwise(self):
        a = [0, 1, 2, 1, 0]
        annotators = [a, a, [0, 1, 2, 1, 1]]
        mean, sd = mean_pairwise_kappa(annotators)
        k01 = cohen_kappa(a, a)
        k02 = cohen_kappa(a, annotators[2])
        expected = np.asarray([k01, k02, k02])
        assert mean == pytest.approx(expected.mean(), abs=1e-12)
        assert sd == pytest.approx(expected.std(), abs=1e-12)
        with pytest.raises(InsufficientData):
            mean_pairwise_kappa([a])


def alpha_oracle(matrix):
    """Literal per-unit pair formulation of ordinal alpha (separate path)."""
    units = []
    for row in matrix:
        values = [v for v in row if v is not None]
        if len(values) >= 2:
            units.append(values)
    margins = Counter()
    for unit in units:
        margins.update(unit)
    n = sum(margins.values())
    cats = sorted(margins)
    pos = {c: i for i, c in enumerate(cats)}

    def delta2(a, b):
        lo, hi = (a, b) if pos[a] <= pos[b] else (b, a)
        between = sum(margins[cats[g]] for g in range(pos[lo], pos[hi] + 1))
        d = between - (margins[lo] + margins[hi]) / 2
        return d * d

    d_obs = (
        sum(
            sum(
                delta2(u[i], u[j])
                for i in range(len(u))
                for j in range(len(u))
                if i != j
            )
            / (len(u) - 1)
            for u in units
        )
        / n
    )
    all_values = [v for u in units for v in u]
    d_exp = sum(
        delta2(all_values[p], all_values[q])
        for p in range(len(all_values))
        for q in range(len(all_values))
        if p != q
    ) / (n * (n - 1))
    if d_exp == 0:
        return None
    return 1.0 - d_obs / d_exp


class TestKrippendorffAlpha:
    def test_perfect_agreement_with_variance(self):
        matrix = [[0, 0, 0], [2, 2, 2], [1, 1, 1], [0, 0, 0]]
        assert krippendorff_alpha_ordinal(matrix) == 1.0

    def test_single_value_everywhere_undefined(self):
        assert krippendorff_alpha_ordinal([[1, 1, 1], [1, 1, 1]]) is None

    def test_toy_matrix_matches_oracle(self):
        matrix = [
            [0, 0, 1],
            [2, 2, 2],
            [1, 2, None],
            [0, 1, 2],
        ]
        mine = krippendorff_alpha_ordinal(matrix)
        assert mine == pytest.approx(alpha_oracle(matrix), abs=1e-12)

    def test_single_annotation_items_excluded(self):
        base = [[0, 1, None], [2, 2, 2]]
        with_single = base + [[1, None, None]]
        assert krippendorff_alpha_ordinal(with_single) == pytest.approx(
            krippendorff_alpha_ordinal(base), abs=1e-15
        )

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            krippendorff_alpha_ordinal([[0, 1, 2]])
        with pytest.raises(InsufficientData):
            krippendorff_alpha_ordinal([[0, None, None], [1, None, None]])

    def test_extreme_disagreement_penalized_most(self):
        # on any fixed margins, delta^2(0,2) dominates both adjacent distances
        rng = np.random.default_rng(3)
        for _ in range(50):
            margins = {c: float(rng.integers(1, 40)) for c in (0, 1, 2)}
            table = ordinal_delta_sq([0, 1, 2], margins)
            assert table[(0, 2)] >= table[(0, 1)]
            assert table[(0, 2)] >= table[(1, 2)]

    def test_known_reliability_ordering(self):
        noisy = [
            [0, 0, 1],
            [2, 1, 2],
            [0, 2, 0],
            [1, 1, 0],
            [2, 2, 1],
        ]
        near_perfect = [
            [0, 0, 0],
            [2, 2, 2],
            [0, 0, 1],
            [1, 1, 1],
            [2, 2, 2],
        ]
        assert krippendorff_alpha_ordinal(near_perfect) > krippendorff_alpha_ordinal(noisy)


class TestConfusion:
    def test_diagonal_for_perfect_predictions(self):
        cm = confusion([0, 1, 2, 2], [0, 1, 2, 2])
        assert cm.counts.tolist() == [[1, 0, 0], [0, 1, 0], [0, 0, 2]]
        assert np.allclose(np.diag(cm.normalized), 1.0)

    def test_reference_normalized_layout(self):
        # rows (true), columns (predicted); per-row normalization
        counts = np.asarray([[72, 13, 15], [17, 56, 27], [4, 9, 87]])
        preds, golds = [], []
        for t in range(3):
            for p in range(3):
                preds += [p] * counts[t, p]
                golds += [t] * counts[t, p]
        cm = confusion(preds, golds)
        assert np.allclose(
            cm.normalized,
            [[0.72, 0.13, 0.15], [0.17, 0.56, 0.27], [0.04, 0.09, 0.87]],
        )
        assert np.allclose(cm.normalized.sum(axis=1), 1.0, atol=1e-12)

    def test_zero_row_flagged(self):
        cm = confusion([2, 2], [2, 2])
        assert cm.zero_rows == [0, 1]
        assert np.allclose(cm.normalized[0], 0.0)

    def test_pooling_adds_counts(self):
        a = confusion([0, 1], [0, 1])
        b = confusion([2, 0], [2, 2])
        assert a.add(b).counts.tolist() == (a.counts + b.counts).tolist()

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([0], [0, 1])
