import json

import numpy as np
import pytest

from gramscope.classifiers import Prediction, TrainConfig
from gramscope.errors import MisalignedItems, SubsampleTooSmall, TooFewGroups
from gramscope.evaluation import (
    BootstrapConfig,
    agreement_report,
    group_kfold_splits,
    per_category_recall,
    run_cross_validation,
    sweep_context_length,
    sweep_training_size,
    write_sweep_csv,
)
from gramscope.labels import ErrorCategory, GoldAnnotation, GrammaticalityLabel
from gramscope.synthetic import gen_classification_corpus

U = GrammaticalityLabel.UNGRAMMATICAL
A = GrammaticalityLabel.AMBIGUOUS
G = GrammaticalityLabel.GRAMMATICAL


def random_corpus(rng, n_transcripts):
    """Items-only corpus with uneven transcript sizes."""
    items, _ = gen_classification_corpus(
        n_items=int(rng.integers(n_transcripts * 2, n_transcripts * 12)),
        n_transcripts=n_transcripts,
        seed=int(rng.integers(0, 10_000)),
    )
    return items


class TestGroupKfold:
    def test_five_transcripts_one_per_fold(self):
        items, _ = gen_classification_corpus(n_items=50, n_transcripts=5, seed=0)
        spec = group_kfold_splits(items, n_folds=5, seed=0)
        assert sorted(spec.assignment.values()) == [0, 1, 2, 3, 4]

    def test_train_test_transcripts_disjoint(self):
        rng = np.random.default_rng(0)
        items = random_corpus(rng, 12)
        spec = group_kfold_splits(items, n_folds=5, seed=1)
        for fold in range(5):
            train = {i.transcript_id for i in items if spec.fold_of(i) != fold}
            test = {i.transcript_id for i in items if spec.fold_of(i) == fold}
            assert train and test
            assert not (train & test)

    def test_deterministic_assignment(self):
        items, _ = gen_classification_corpus(n_items=400, n_transcripts=21, seed=3)
        s1 = group_kfold_splits(items, n_folds=5, seed=0)
        s2 = group_kfold_splits(items, n_folds=5, seed=0)
        assert s1.assignment == s2.assignment

    def test_balance_within_one_transcript(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            items = random_corpus(rng, int(rng.integers(6, 25)))
            spec = group_kfold_splits(items, n_folds=5, seed=int(rng.integers(0, 99)))
            sizes = [0] * 5
            per_transcript = {}
            for item in items:
                sizes[spec.fold_of(item)] += 1
                per_transcript[item.transcript_id] = (
                    per_transcript.get(item.transcript_id, 0) + 1
                )
            assert max(sizes) - min(sizes) <= max(per_transcript.values())

    def test_too_few_groups(self):
        items, _ = gen_classification_corpus(n_items=30, n_transcripts=5, seed=0)
        with pytest.raises(TooFewGroups):
            group_kfold_splits(items, n_folds=6, seed=0)


@pytest.fixture(scope="module")
def small_corpus():
    return gen_classification_corpus(n_items=900, n_transcripts=9, seed=2)


@pytest.fixture(scope="module")
def small_config():
    return TrainConfig(max_n=2, seed=0, max_epochs=30)


class TestRunCrossValidation:
    def test_majority_reports_pcc_zero(self, small_corpus, small_config):
        items, gold = small_corpus
        report = run_cross_validation(items, gold, small_config, model="majority")
        assert report.pcc_mean == 0.0
        assert all(f.pcc == 0.0 and not f.pcc_defined for f in report.folds)
        assert report.accuracy_mean > 0.3

    def test_svm_report_invariants(self, small_corpus, small_config):
        items, gold = small_corpus
        report = run_cross_validation(items, gold, small_config, model="svm")
        pccs = [f.pcc for f in report.folds]
        accs = [f.accuracy for f in report.folds]
        assert report.pcc_mean == pytest.approx(np.mean(pccs), abs=1e-12)
        assert report.pcc_sd == pytest.approx(np.std(pccs), abs=1e-12)
        assert report.accuracy_mean == pytest.approx(np.mean(accs), abs=1e-12)
        assert sum(f.n_test for f in report.folds) == len(items)
        assert int(report.confusion.counts.sum()) == len(items)
        norm = report.confusion.normalized
        for i in range(3):
            if i not in report.confusion.zero_rows:
                assert norm[i].sum() == pytest.approx(1.0, abs=1e-12)
        assert report.category_recall is not None
        assert "overall" in report.category_recall

    def test_report_json_round_trip(self, small_corpus, small_config, tmp_path):
        items, gold = small_corpus
        report = run_cross_validation(items, gold, small_config, model="majority")
        path = tmp_path / "report.json"
        report.save(path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert payload["pcc_mean"] == 0.0
        assert len(payload["folds"]) == 5
        assert payload["config"]["max_n"] == small_config.max_n

    def test_missing_gold_rejected(self, small_corpus, small_config):
        items, gold = small_corpus
        with pytest.raises(MisalignedItems):
            run_cross_validation(items, gold[:-5], small_config)


class TestPerCategoryRecall:
    def gold_with_categories(self, hits_by_cat):
        gold, preds = [], []
        i = 0
        for cat, hits in hits_by_cat.items():
            for hit in hits:
                item_id = f"t:{i}"
                gold.append(GoldAnnotation(item_id, U, categories={cat}))
                preds.append(
                    Prediction(item_id, U if hit else G, scores=[0.0, 0.0, 0.0])
                )
                i += 1
        return preds, gold

    def test_all_correct_gives_unit_recall(self):
        preds, gold = self.gold_with_categories(
            {ErrorCategory.SUBJECT: [1] * 8, ErrorCategory.DETERMINER: [1] * 5}
        )
        out = per_category_recall(preds, gold, BootstrapConfig(seed=0))
        for key in ("subject", "determiner", "overall"):
            assert out[key]["recall"] == 1.0
            assert out[key]["ci_low"] == 1.0 and out[key]["ci_high"] == 1.0

    def test_single_item_degenerate_ci(self):
        preds, gold = self.gold_with_categories({ErrorCategory.PLURAL: [1]})
        out = per_category_recall(preds, gold, BootstrapConfig(seed=0))
        assert out["plural"]["n"] == 1
        assert {out["plural"]["ci_low"], out["plural"]["ci_high"]} <= {0.0, 1.0}

    def test_ci_width_shrinks_with_n(self):
        rng = np.random.default_rng(0)
        widths = []
        for n in (10, 100, 1000):
            hits = (rng.random(n) < 0.7).astype(int).tolist()
            preds, gold = self.gold_with_categories({ErrorCategory.VERB: hits})
            out = per_category_recall(preds, gold, BootstrapConfig(seed=1))
            widths.append(out["verb"]["ci_high"] - out["verb"]["ci_low"])
        assert widths[0] > widths[1] > widths[2]

    def test_empty_category_omitted(self):
        preds, gold = self.gold_with_categories({ErrorCategory.SUBJECT: [1, 0, 1]})
        out = per_category_recall(preds, gold, BootstrapConfig(seed=0))
        assert "plural" not in out
        assert out["overall"]["n"] == 3


class TestSweeps:
    def test_context_sweep_row_count(self, small_corpus, small_config):
        items, gold = small_corpus
        rows = sweep_context_length(
            items, gold, small_config, lengths=[0, 2, 8], model="majority"
        )
        assert [r.x for r in rows] == [0.0, 2.0, 8.0]

    def test_training_size_fraction_one_identical_to_cv(self, small_corpus, small_config):
        items, gold = small_corpus
        rows = sweep_training_size(
            items, gold, small_config, fractions=[1.0], model="svm"
        )
        report = run_cross_validation(items, gold, small_config, model="svm")
        assert rows[0].pcc_mean == report.pcc_mean
        assert rows[0].pcc_sd == report.pcc_sd

    def test_invalid_fraction(self, small_corpus, small_config):
        items, gold = small_corpus
        with pytest.raises(ValueError):
            sweep_training_size(items, gold, small_config, fractions=[0.0])

    def test_subsample_too_small(self):
        items, gold = gen_classification_corpus(n_items=600, n_transcripts=6, seed=0)
        # make ambiguous vanishingly rare so a 1% subsample drops it
        rare = [g for g in gold if g.label is A][1:]
        keep_ids = {g.item_id for g in gold} - {g.item_id for g in rare}
        items = [i for i in items if i.item_id in keep_ids]
        gold = [g for g in gold if g.item_id in keep_ids]
        with pytest.raises(SubsampleTooSmall):
            sweep_training_size(
                items, gold, TrainConfig(max_n=1, seed=0), fractions=[0.01]
            )

    def test_sweep_csv(self, small_corpus, small_config, tmp_path):
        items, gold = small_corpus
        rows = sweep_context_length(
            items, gold, small_config, lengths=[0, 2], model="majority"
        )
        path = tmp_path / "sweep.csv"
        write_sweep_csv(rows, path, x_name="context_turns")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "context_turns,pcc_mean,pcc_sd"
        assert len(lines) == 3


class TestAgreementReport:
    def test_unanimous_alpha_one(self):
        labels = {f"i{k}": GrammaticalityLabel(k % 3) for k in range(20)}
        report = agreement_report({"a": labels, "b": labels, "c": labels})
        assert report["alpha"] == 1.0
        assert report["kappa_mean"] == pytest.approx(1.0)
        assert report["n_items"] == 20

    def test_agreement_block_in_eval_report(self, small_corpus, small_config):
        from gramscope.evaluation import agreement_from_annotations

        items, gold = small_corpus
        annotations = []
        for g in gold[:40]:
            for annotator in ("a1", "a2"):
                annotations.append(
                    GoldAnnotation(g.item_id, g.label, g.categories, annotator=annotator)
                )
        report = run_cross_validation(
            items, gold, small_config, model="majority", annotations=annotations
        )
        assert report.agreement is not None
        assert report.agreement["alpha"] == 1.0
        assert report.to_dict()["agreement"]["n_annotators"] == 2
        assert agreement_from_annotations(annotations[:1]) is None
