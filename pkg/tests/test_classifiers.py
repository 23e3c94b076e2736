import json

import numpy as np
import pytest
from scipy import sparse

from gramscope.classifiers import (
    GrammaticalityModel,
    LinearSvm,
    MajorityClassBaseline,
    Prediction,
    TrainConfig,
    balanced_weights,
    compute_class_weights,
    ensemble_vote,
    import_external_predictions,
    train_model,
    write_predictions_jsonl,
)
from gramscope.errors import (
    DegenerateData,
    DimensionMismatch,
    EmptyInput,
    MalformedRecord,
    MisalignedItems,
    MissingClass,
)
from gramscope.labels import GrammaticalityLabel
from gramscope.synthetic import gen_classification_corpus

U = GrammaticalityLabel.UNGRAMMATICAL
A = GrammaticalityLabel.AMBIGUOUS
G = GrammaticalityLabel.GRAMMATICAL


class TestClassWeights:
    def test_reference_scale_counts(self):
        labels = [U] * 1333 + [A] * 648 + [G] * 2219
        weights = compute_class_weights(labels)
        # direct arithmetic: N / (3 * n_c)
        assert weights[U] == pytest.approx(1.0503, abs=1e-4)
        assert weights[A] == pytest.approx(2.1605, abs=1e-4)
        assert weights[G] == pytest.approx(0.6309, abs=1e-4)

    def test_equal_counts_give_unit_weights(self):
        weights = compute_class_weights([U, A, G] * 7)
        assert all(weights[l] == pytest.approx(1.0) for l in (U, A, G))

    def test_missing_class(self):
        with pytest.raises(MissingClass):
            compute_class_weights([U, G, U, G])

    def test_balanced_weights_over_present(self):
        w = balanced_weights([0, 0, 2])
        assert w[0] == pytest.approx(3 / (2 * 2))
        assert w[2] == pytest.approx(3 / (2 * 1))


class TestMajorityBaseline:
    def test_imbalanced_distribution_predicts_grammatical(self):
        y = [0] * 1333 + [1] * 648 + [2] * 2219
        clf = MajorityClassBaseline().fit(None, y)
        assert clf.label_ is G
        preds = clf.predict(np.zeros((100, 1)))
        assert (preds == 2).all()

    def test_all_ungrammatical(self):
        clf = MajorityClassBaseline().fit(None, [0, 0, 0])
        assert clf.label_ is U

    def test_empty(self):
        with pytest.raises(EmptyInput):
            MajorityClassBaseline().fit(None, [])


def hinge_objective(X, y_signs, w, cost):
    """Primal value our dual solver is minimizing, bias column included."""
    margins = 1 - y_signs * (X @ w)
    return 0.5 * float(w @ w) + float(np.sum(cost * np.maximum(margins, 0.0)))


def cvxpy_svm(X, y_signs, cost):
    import cvxpy as cp

    n, d = X.shape
    w = cp.Variable(d)
    obj = 0.5 * cp.sum_squares(w) + cp.sum(
        cp.multiply(cost, cp.pos(1 - cp.multiply(y_signs, X @ w)))
    )
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL)
    return np.asarray(w.value), float(prob.value)


class TestLinearSvm:
    def separable(self):
        X = sparse.csr_matrix(
            np.asarray(
                [[1.0, 0.0], [1.0, 0.1], [0.9, 0.2], [0.0, 1.0], [0.1, 1.0], [0.2, 0.9]]
            )
        )
        y = np.asarray([0, 0, 0, 2, 2, 2])
        return X, y

    def test_separable_training_accuracy(self):
        X, y = self.separable()
        svm = LinearSvm(C=10.0, seed=0).fit(X, y)
        assert (svm.predict(X) == y).all()

    def test_bit_identical_given_seed(self):
        X, y = self.separable()
        m1 = LinearSvm(C=1.0, seed=3).fit(X, y)
        m2 = LinearSvm(C=1.0, seed=3).fit(X, y)
        assert np.array_equal(m1.coef_, m2.coef_)
        assert np.array_equal(m1.intercept_, m2.intercept_)

    def test_single_class_degenerate(self):
        X = sparse.csr_matrix(np.ones((4, 2)))
        with pytest.raises(DegenerateData):
            LinearSvm().fit(X, np.zeros(4, dtype=int))

    def test_dimension_mismatch_on_predict(self):
        X, y = self.separable()
        svm = LinearSvm(seed=0).fit(X, y)
        with pytest.raises(DimensionMismatch):
            svm.predict(sparse.csr_matrix(np.ones((2, 5))))

    def test_matches_brute_force_objective(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 6))
        y_signs = np.where(rng.random(40) < 0.4, 1.0, -1.0)
        cost = np.where(y_signs > 0, 2.5, 1.0)  # class-weighted hinge
        Xb = np.hstack([X, np.ones((40, 1))])
        _, best = cvxpy_svm(Xb, y_signs, cost)

        svm = LinearSvm(C=1.0, seed=0, max_epochs=2000, tol=1e-6)
        labels = np.where(y_signs > 0, 1, 0)
        svm.fit(sparse.csr_matrix(X), labels, class_weight={1: 2.5, 0: 1.0})
        w = np.concatenate([svm.coef_[1], [svm.intercept_[1]]])
        ours = hinge_objective(Xb, y_signs, w, cost)
        assert ours <= best * (1 + 1e-4) + 1e-8

    def test_duplication_equals_weighting(self):
        # duplicating minority rows k times with unweighted hinge gives the
        # same optimum as weighting them by k
        rng = np.random.default_rng(11)
        X = rng.normal(size=(18, 4))
        y_signs = np.where(np.arange(18) < 6, 1.0, -1.0)  # 6 minority rows
        k = 3
        Xb = np.hstack([X, np.ones((18, 1))])
        w_weighted, obj_weighted = cvxpy_svm(
            Xb, y_signs, np.where(y_signs > 0, float(k), 1.0)
        )
        X_dup = np.vstack([Xb] + [Xb[:6]] * (k - 1))
        y_dup = np.concatenate([y_signs] + [y_signs[:6]] * (k - 1))
        w_dup, obj_dup = cvxpy_svm(X_dup, y_dup, np.ones(len(y_dup)))
        assert np.allclose(w_weighted, w_dup, atol=1e-5)

        # our solver agrees with the weighted optimum
        svm = LinearSvm(C=1.0, seed=0, max_epochs=2000, tol=1e-6)
        svm.fit(
            sparse.csr_matrix(X),
            np.where(y_signs > 0, 1, 0),
            class_weight={1: float(k), 0: 1.0},
        )
        w = np.concatenate([svm.coef_[1], [svm.intercept_[1]]])
        ours = hinge_objective(Xb, y_signs, w, np.where(y_signs > 0, float(k), 1.0))
        assert ours <= obj_weighted * (1 + 1e-4) + 1e-8

    def test_count_scaling_with_rescaled_C(self):
        # scaling all feature counts by s and C by 1/s^2 preserves the
        # training-set decision argmax (exact without the bias column)
        rng = np.random.default_rng(2)
        X = sparse.csr_matrix(rng.poisson(1.0, size=(60, 8)).astype(float))
        y = rng.integers(0, 3, size=60)
        y[:3] = [0, 1, 2]
        s = 4.0
        base = LinearSvm(C=1.0, seed=0, bias=0.0, max_epochs=500, tol=1e-5).fit(X, y)
        scaled = LinearSvm(C=1.0 / s**2, seed=0, bias=0.0, max_epochs=500, tol=1e-5).fit(
            sparse.csr_matrix(X.toarray() * s), y
        )
        assert np.allclose(scaled.coef_ * s, base.coef_, atol=1e-6)
        pred_base = base.predict(X)
        pred_scaled = scaled.predict(sparse.csr_matrix(X.toarray() * s))
        assert (pred_base == pred_scaled).all()

    def test_early_stopping_tracks_validation(self):
        items, gold = gen_classification_corpus(n_items=600, seed=4)
        config = TrainConfig(
            max_n=2, early_stopping=True, patience=3, max_epochs=20, seed=0
        )
        model = train_model(items, gold, config)
        assert model.svm.best_epoch_ >= 1
        assert model.svm.best_validation_pcc_ > 0


class TestPredictionsAndEnsembles:
    def preds(self, labels, prefix="m"):
        return [
            Prediction(item_id=f"{prefix}:{i}", label=l, scores=[0.0, 0.0, 0.0])
            for i, l in enumerate(labels)
        ]

    def test_strict_majority(self):
        votes = [[G], [G], [U], [A], [G]]
        merged = ensemble_vote([self.preds(v) for v in votes])
        assert merged[0].label is G
        assert merged[0].scores == [1 / 5, 1 / 5, 3 / 5]

    def test_tie_broken_by_ordinal_median(self):
        votes = [[G], [G], [U], [U], [A]]  # codes 2,2,0,0,1 -> median 1
        merged = ensemble_vote([self.preds(v) for v in votes])
        assert merged[0].label is A

    def test_single_model_identity(self):
        one = self.preds([U, G, A])
        merged = ensemble_vote([one])
        assert [p.label for p in merged] == [U, G, A]
        assert [p.item_id for p in merged] == [p.item_id for p in one]

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        model_preds = [
            self.preds([GrammaticalityLabel(int(v)) for v in rng.integers(0, 3, 7)])
            for _ in range(5)
        ]
        base = [p.label for p in ensemble_vote(model_preds)]
        order = rng.permutation(5)
        shuffled = [model_preds[i] for i in order]
        assert [p.label for p in ensemble_vote(shuffled)] == base

    def test_misaligned(self):
        with pytest.raises(MisalignedItems):
            ensemble_vote([self.preds([G, U]), self.preds([G, U], prefix="other")])

    def test_import_valid_file(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        rows = [
            {"item_id": "a:0", "label": "grammatical", "scores": [0.1, 0.2, 0.9]},
            {"item_id": "a:1", "label": "ungrammatical"},
            {"item_id": "a:2", "label": "ambiguous"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        preds = import_external_predictions(path)
        assert len(preds) == 3
        assert preds[1].scores == [1.0, 0.0, 0.0]  # one-hot default

    def test_import_unknown_label_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"item_id": "a:0", "label": "grammatical"}\n'
            '{"item_id": "a:1", "label": "meh"}\n',
            encoding="utf-8",
        )
        with pytest.raises(MalformedRecord) as err:
            import_external_predictions(path)
        assert "line 2" in str(err.value)

    def test_import_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        assert import_external_predictions(path) == []

    def test_write_read_round_trip(self, tmp_path):
        preds = self.preds([U, A, G])
        path = tmp_path / "out.jsonl"
        write_predictions_jsonl(preds, path)
        assert [p.label for p in import_external_predictions(path)] == [U, A, G]


class TestModelBundle:
    @pytest.fixture()
    def small_corpus(self):
        return gen_classification_corpus(n_items=400, seed=1)

    def test_train_predict_deterministic(self, small_corpus):
        items, gold = small_corpus
        config = TrainConfig(max_n=2, seed=0, max_epochs=30)
        m1 = train_model(items, gold, config)
        m2 = train_model(items, gold, config)
        p1 = m1.predict_items(items[:50])
        p2 = m2.predict_items(items[:50])
        assert [(p.item_id, p.label, p.scores) for p in p1] == [
            (p.item_id, p.label, p.scores) for p in p2
        ]

    def test_empty_items_predict(self, small_corpus):
        items, gold = small_corpus
        model = train_model(items, gold, TrainConfig(max_n=1, seed=0, max_epochs=10))
        assert model.predict_items([]) == []

    def test_argmax_tie_resolves_ordinal_lower(self):
        svm = LinearSvm(bias=0.0)
        svm.coef_ = np.zeros((3, 4))
        svm.intercept_ = np.zeros(3)
        svm.classes_ = np.asarray([0, 1, 2])
        svm.n_features_in_ = 4
        X = sparse.csr_matrix(np.ones((5, 4)))
        assert (svm.predict(X) == 0).all()

    def test_save_load_round_trip(self, small_corpus, tmp_path):
        items, gold = small_corpus
        config = TrainConfig(max_n=2, seed=0, max_epochs=30)
        model = train_model(items, gold, config)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = GrammaticalityModel.load(path)
        p1 = model.predict_items(items[:40])
        p2 = loaded.predict_items(items[:40])
        assert [(p.item_id, p.label) for p in p1] == [(p.item_id, p.label) for p in p2]
        for a, b in zip(p1, p2):
            assert a.scores == pytest.approx(b.scores, abs=1e-12)

    def test_majority_bundle(self, small_corpus, tmp_path):
        items, gold = small_corpus
        model = train_model(items, gold, TrainConfig(seed=0), model="majority")
        path = tmp_path / "majority.json"
        model.save(path)
        loaded = GrammaticalityModel.load(path)
        preds = loaded.predict_items(items[:10])
        assert len({p.label for p in preds}) == 1

    def test_misaligned_gold(self, small_corpus):
        items, gold = small_corpus
        with pytest.raises(MisalignedItems):
            train_model(items, gold[:-1], TrainConfig(seed=0))
