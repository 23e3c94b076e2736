"""Agreement and evaluation metrics over ordinal grammaticality codes.

All functions treat labels as their ordinal codes 0/1/2. Metrics that are
undefined on degenerate input (zero variance, total chance agreement)
return None; report assembly renders that as 0.00 by convention so a
constant majority baseline shows PCC 0.00 rather than crashing.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput, InsufficientData, LengthMismatch

N_CLASSES = 3


def _check_aligned(a: Sequence, b: Sequence, *, allow_empty: bool = False) -> None:
    if len(a) != len(b):
        raise LengthMismatch(f"length mismatch: {len(a)} vs {len(b)}")
    if not allow_empty and len(a) == 0:
        raise EmptyInput("empty input")


def pcc(pred: Sequence[float], gold: Sequence[float]) -> float | None:
    """Pearson correlation of the two code vectors; None if either side is constant."""
    _check_aligned(pred, gold)
    if len(pred) < 2:
        raise LengthMismatch("need at least 2 paired values")
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(gold, dtype=np.float64)
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt(np.dot(xd, xd)))
    sy = float(np.sqrt(np.dot(yd, yd)))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(np.dot(xd, yd) / (sx * sy))


def pcc_or_zero(value: float | None) -> float:
    return 0.0 if value is None else value


def accuracy(pred: Sequence, gold: Sequence) -> float:
    _check_aligned(pred, gold)
    return sum(1 for p, g in zip(pred, gold) if p == g) / len(gold)


def cohen_kappa(a: Sequence, b: Sequence) -> float | None:
    """Chance-corrected pairwise agreement with marginal-product chance.

    Returns None when expected agreement is 1 (no marginal variety on
    either side), where kappa is undefined.
    """
    _check_aligned(a, b)
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    counts_a = Counter(a)
    counts_b = Counter(b)
    expected = sum(counts_a[v] * counts_b.get(v, 0) for v in counts_a) / (n * n)
    if expected == 1.0:
        return None
    return (observed - expected) / (1.0 - expected)


def mean_pairwise_kappa(annotator_labels: list[Sequence]) -> tuple[float, float]:
    """Mean and sd of Cohen's kappa over all unordered annotator pairs."""
    if len(annotator_labels) < 2:
        raise InsufficientData("need at least 2 annotators")
    values = []
    for i in range(len(annotator_labels)):
        for j in range(i + 1, len(annotator_labels)):
            k = cohen_kappa(annotator_labels[i], annotator_labels[j])
            if k is not None:
                values.append(k)
    if not values:
        raise InsufficientData("kappa undefined for every annotator pair")
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


# ---------------------------------------------------------------------------
# Krippendorff's alpha, ordinal level of measurement
# ---------------------------------------------------------------------------


def ordinal_delta_sq(values: list, margins: dict) -> dict[tuple, float]:
    """Squared ordinal distances between rank categories.

    ``values`` are the sorted categories; ``margins[v]`` is the coincidence
    margin of category v. delta^2(c, k) sums the margins of every category
    between c and k inclusive, minus half the two endpoint margins.
    """
    table: dict[tuple, float] = {}
    for i, c in enumerate(values):
        for j in range(i, len(values)):
            k = values[j]
            between = sum(margins[values[g]] for g in range(i, j + 1))
            d = between - (margins[c] + margins[k]) / 2.0
            table[(c, k)] = table[(k, c)] = d * d
    return table


def krippendorff_alpha_ordinal(matrix: Sequence[Sequence]) -> float | None:
    """Alpha over an item x annotator matrix; None entries are missing.

    Uses the coincidence-matrix formulation: items with fewer than two
    annotations contribute nothing. Returns None (undefined) when there is
    no value variance at all (expected disagreement zero).
    """
    units = []
    for row in matrix:
        values = [v for v in row if v is not None]
        if len(values) >= 2:
            units.append(values)
    if len(units) < 2:
        raise InsufficientData("need at least 2 items with 2 or more annotations")

    # coincidence matrix: each ordered value pair within a unit, weighted
    # by 1/(m_u - 1)
    coincidence: defaultdict[tuple, float] = defaultdict(float)
    margins: defaultdict = defaultdict(float)
    for values in units:
        m = len(values)
        w = 1.0 / (m - 1)
        for i, vi in enumerate(values):
            for j, vj in enumerate(values):
                if i != j:
                    coincidence[(vi, vj)] += w
    for (vi, _vj), c in coincidence.items():
        margins[vi] += c
    n = sum(margins.values())

    categories = sorted(margins)
    delta = ordinal_delta_sq(categories, margins)

    d_observed = 0.0
    for pair, c in coincidence.items():
        d_observed += c * delta[pair]
    d_observed /= n

    d_expected = 0.0
    for c in categories:
        for k in categories:
            if c != k:
                d_expected += margins[c] * margins[k] * delta[(c, k)]
    d_expected /= n * (n - 1)

    if d_expected == 0.0:
        return None
    return 1.0 - d_observed / d_expected


# ---------------------------------------------------------------------------
# Confusion matrices
# ---------------------------------------------------------------------------


@dataclass
class ConfusionMatrix:
    """3x3 counts indexed (true, predicted) in ordinal class order."""

    counts: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        """Rows divided by row sums; all-zero rows stay zero (see zero_rows)."""
        sums = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        safe = np.where(sums == 0, 1.0, sums)
        out = self.counts / safe
        return out

    @property
    def zero_rows(self) -> list[int]:
        return [i for i in range(self.counts.shape[0]) if self.counts[i].sum() == 0]

    def add(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def to_dict(self) -> dict:
        return {
            "counts": self.counts.tolist(),
            "normalized": self.normalized.tolist(),
            "zero_rows": self.zero_rows,
        }


def confusion(pred: Sequence[int], gold: Sequence[int]) -> ConfusionMatrix:
    _check_aligned(pred, gold)
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for p, g in zip(pred, gold):
        counts[int(g), int(p)] += 1
    return ConfusionMatrix(counts)
