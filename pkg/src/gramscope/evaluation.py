"""Cross-validated evaluation harness and the two ablation sweeps.

Folds partition transcripts, never items, so no transcript contributes to
both training and test data. Sweeps reuse the same fold assignment: the
context-length sweep scores on a held-out validation slice of the training
fold, the training-size sweep keeps the test folds fixed and subsamples
only the training portion.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .classifiers import Prediction, TrainConfig, train_model
from .errors import MisalignedItems, SubsampleTooSmall, TooFewGroups
from .labels import LABELS, ErrorCategory, GoldAnnotation, GrammaticalityLabel
from .metrics import (
    ConfusionMatrix,
    accuracy,
    confusion,
    cohen_kappa,
    krippendorff_alpha_ordinal,
    mean_pairwise_kappa,
    pcc,
    pcc_or_zero,
)
from .prep import AnnotationItem
from .tokenization import BpeTokenizer

log = logging.getLogger(__name__)


@dataclass
class FoldSpec:
    n_folds: int
    assignment: dict[str, int]  # transcript_id -> fold index
    seed: int

    def fold_of(self, item: AnnotationItem) -> int:
        return self.assignment[item.transcript_id]


@dataclass
class BootstrapConfig:
    n_resamples: int = 1000
    confidence: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.n_resamples < 100:
            raise ValueError("n_resamples must be at least 100")


def group_kfold_splits(
    items: list[AnnotationItem], n_folds: int = 5, seed: int = 0
) -> FoldSpec:
    """Assign transcripts to folds, greedily balancing item counts.

    Transcripts are visited in seeded shuffled order and each goes to the
    currently smallest fold, so no fold exceeds another by more than one
    transcript's worth of items.
    """
    counts: dict[str, int] = defaultdict(int)
    for item in items:
        counts[item.transcript_id] += 1
    transcripts = sorted(counts)
    if len(transcripts) < n_folds:
        raise TooFewGroups(f"{len(transcripts)} transcripts for {n_folds} folds")
    rng = np.random.default_rng(seed)
    order = [transcripts[i] for i in rng.permutation(len(transcripts))]
    sizes = [0] * n_folds
    assignment: dict[str, int] = {}
    for tid in order:
        fold = min(range(n_folds), key=lambda f: (sizes[f], f))
        assignment[tid] = fold
        sizes[fold] += counts[tid]
    return FoldSpec(n_folds=n_folds, assignment=assignment, seed=seed)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class FoldResult:
    fold: int
    pcc: float
    pcc_defined: bool
    accuracy: float
    n_test: int


@dataclass
class EvalReport:
    model: str
    config: dict
    folds: list[FoldResult]
    pcc_mean: float
    pcc_sd: float
    accuracy_mean: float
    accuracy_sd: float
    confusion: ConfusionMatrix
    category_recall: dict | None = None
    agreement: dict | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "config": self.config,
            "folds": [
                {
                    "fold": f.fold,
                    "pcc": f.pcc,
                    "pcc_defined": f.pcc_defined,
                    "accuracy": f.accuracy,
                    "n_test": f.n_test,
                }
                for f in self.folds
            ],
            "pcc_mean": self.pcc_mean,
            "pcc_sd": self.pcc_sd,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_sd": self.accuracy_sd,
            "confusion": self.confusion.to_dict(),
            "category_recall": self.category_recall,
            "agreement": self.agreement,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )


def _mean_sd(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _join_gold(
    items: list[AnnotationItem], gold: list[GoldAnnotation]
) -> dict[str, GoldAnnotation]:
    by_id = {g.item_id: g for g in gold}
    missing = [it.item_id for it in items if it.item_id not in by_id]
    if missing:
        raise MisalignedItems(
            f"{len(missing)} items lack gold labels (first: {missing[0]})"
        )
    return by_id


def _fold_seed(config: TrainConfig, fold: int) -> TrainConfig:
    return replace(config, seed=config.seed * 1000 + fold)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


def run_cross_validation(
    items: list[AnnotationItem],
    gold: list[GoldAnnotation],
    config: TrainConfig,
    model: str = "svm",
    n_folds: int = 5,
    tokenizer: BpeTokenizer | None = None,
    bootstrap: BootstrapConfig | None = None,
    train_subsample: float | None = None,
    annotations: list[GoldAnnotation] | None = None,
) -> EvalReport:
    """Transcript-grouped k-fold evaluation of one model configuration.

    Tokenizer and n-gram vocabulary are fit on each training fold only
    (unless a pretrained tokenizer is supplied). ``train_subsample`` keeps
    the test folds identical and stratified-subsamples only the training
    portion; 1.0/None leaves training untouched. Pre-adjudication
    multi-annotator records may be passed as ``annotations`` to fill the
    report's agreement block.
    """
    by_id = _join_gold(items, gold)
    folds = group_kfold_splits(items, n_folds=n_folds, seed=config.seed)

    fold_results: list[FoldResult] = []
    pooled = ConfusionMatrix(np.zeros((len(LABELS), len(LABELS)), dtype=np.int64))
    all_predictions: list[Prediction] = []

    for fold in range(n_folds):
        train_items = [it for it in items if folds.fold_of(it) != fold]
        test_items = [it for it in items if folds.fold_of(it) == fold]
        if train_subsample is not None and train_subsample < 1.0:
            train_items = _stratified_subsample(
                train_items, by_id, train_subsample, seed=config.seed * 1000 + fold
            )
        fitted = train_model(
            train_items,
            [by_id[it.item_id] for it in train_items],
            _fold_seed(config, fold),
            model=model,
            tokenizer=tokenizer,
        )
        predictions = fitted.predict_items(test_items)
        all_predictions.extend(predictions)

        pred_codes = [int(p.label) for p in predictions]
        gold_codes = [int(by_id[it.item_id].label) for it in test_items]
        r = pcc(pred_codes, gold_codes)
        fold_results.append(
            FoldResult(
                fold=fold,
                pcc=pcc_or_zero(r),
                pcc_defined=r is not None,
                accuracy=accuracy(pred_codes, gold_codes),
                n_test=len(test_items),
            )
        )
        pooled = pooled.add(confusion(pred_codes, gold_codes))

    pcc_mean, pcc_sd = _mean_sd([f.pcc for f in fold_results])
    acc_mean, acc_sd = _mean_sd([f.accuracy for f in fold_results])

    category_recall = None
    if any(g.categories for g in gold):
        category_recall = per_category_recall(
            all_predictions, gold, bootstrap or BootstrapConfig(seed=config.seed)
        )

    agreement = None
    if annotations:
        agreement = agreement_from_annotations(annotations)

    return EvalReport(
        model=model,
        config=config.to_dict(),
        folds=fold_results,
        pcc_mean=pcc_mean,
        pcc_sd=pcc_sd,
        accuracy_mean=acc_mean,
        accuracy_sd=acc_sd,
        confusion=pooled,
        category_recall=category_recall,
        agreement=agreement,
    )


def _stratified_subsample(
    train_items: list[AnnotationItem],
    by_id: dict[str, GoldAnnotation],
    fraction: float,
    seed: int,
) -> list[AnnotationItem]:
    """Subsample by label, preserving original item order."""
    rng = np.random.default_rng(seed)
    by_label: dict[GrammaticalityLabel, list[int]] = defaultdict(list)
    for i, item in enumerate(train_items):
        by_label[by_id[item.item_id].label].append(i)
    keep: list[int] = []
    for label in sorted(by_label):
        idx = by_label[label]
        k = int(round(len(idx) * fraction))
        if k < 1:
            raise SubsampleTooSmall(
                f"fraction {fraction} drops every {label.key} example"
            )
        picked = rng.choice(len(idx), size=k, replace=False)
        keep.extend(idx[int(i)] for i in picked)
    return [train_items[i] for i in sorted(keep)]


# ---------------------------------------------------------------------------
# Per-category recall with bootstrap CIs
# ---------------------------------------------------------------------------


def per_category_recall(
    predictions: list[Prediction],
    gold: list[GoldAnnotation],
    bootstrap: BootstrapConfig,
) -> dict:
    """Recall on ungrammatical items, split by error category.

    Only gold-ungrammatical items enter; a prediction counts as a hit when
    it is ungrammatical too. CIs are percentile bootstrap over items.
    """
    pred_by_id = {p.item_id: p for p in predictions}
    hits_by_cat: dict[str, list[int]] = defaultdict(list)
    overall: list[int] = []
    for g in gold:
        if g.label is not GrammaticalityLabel.UNGRAMMATICAL or g.item_id not in pred_by_id:
            continue
        hit = int(pred_by_id[g.item_id].label is GrammaticalityLabel.UNGRAMMATICAL)
        overall.append(hit)
        for cat in g.categories:
            hits_by_cat[cat.value].append(hit)

    rng = np.random.default_rng(bootstrap.seed)
    lo_q = 100 * (1 - bootstrap.confidence) / 2
    hi_q = 100 - lo_q

    def summarize(hits: list[int]) -> dict:
        arr = np.asarray(hits, dtype=np.float64)
        samples = rng.choice(arr, size=(bootstrap.n_resamples, len(arr)), replace=True)
        means = samples.mean(axis=1)
        return {
            "recall": float(arr.mean()),
            "ci_low": float(np.percentile(means, lo_q)),
            "ci_high": float(np.percentile(means, hi_q)),
            "n": len(hits),
        }

    out: dict = {}
    for cat in ErrorCategory:
        hits = hits_by_cat.get(cat.value)
        if not hits:
            log.warning("category %s has no gold items; omitted from recall", cat.value)
            continue
        out[cat.value] = summarize(hits)
    if overall:
        out["overall"] = summarize(overall)
    return out


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    x: float
    pcc_mean: float
    pcc_sd: float


def sweep_context_length(
    items: list[AnnotationItem],
    gold: list[GoldAnnotation],
    config: TrainConfig,
    lengths: list[int] = tuple(range(0, 11)),
    model: str = "svm",
    n_folds: int = 5,
) -> list[SweepRow]:
    """Validation-set PCC as a function of preceding-context turns.

    Each fold's training transcripts are split once into train/validation
    (by transcript, stratification-free); the same split serves every
    length so rows are comparable.
    """
    by_id = _join_gold(items, gold)
    folds = group_kfold_splits(items, n_folds=n_folds, seed=config.seed)

    rows = []
    for length in lengths:
        fold_pccs = []
        for fold in range(n_folds):
            train_items = [it for it in items if folds.fold_of(it) != fold]
            sub_train, validation = _validation_split(
                train_items, config.validation_fraction, seed=config.seed * 1000 + fold
            )
            fitted = train_model(
                sub_train,
                [by_id[it.item_id] for it in sub_train],
                replace(_fold_seed(config, fold), context_turns=length),
                model=model,
            )
            predictions = fitted.predict_items(validation)
            pred_codes = [int(p.label) for p in predictions]
            gold_codes = [int(by_id[it.item_id].label) for it in validation]
            fold_pccs.append(pcc_or_zero(pcc(pred_codes, gold_codes)))
        mean, sd = _mean_sd(fold_pccs)
        rows.append(SweepRow(x=float(length), pcc_mean=mean, pcc_sd=sd))
    return rows


def _validation_split(
    train_items: list[AnnotationItem], fraction: float, seed: int
) -> tuple[list[AnnotationItem], list[AnnotationItem]]:
    """Split a training fold by transcript so validation stays grouped."""
    tids = sorted({it.transcript_id for it in train_items})
    rng = np.random.default_rng(seed)
    order = [tids[i] for i in rng.permutation(len(tids))]
    target = fraction * len(train_items)
    val_tids: set[str] = set()
    n_val = 0
    counts = defaultdict(int)
    for it in train_items:
        counts[it.transcript_id] += 1
    for tid in order:
        if n_val >= target:
            break
        val_tids.add(tid)
        n_val += counts[tid]
    if len(val_tids) == len(tids):  # keep at least one training transcript
        val_tids.discard(order[0])
    train = [it for it in train_items if it.transcript_id not in val_tids]
    val = [it for it in train_items if it.transcript_id in val_tids]
    return train, val


def sweep_training_size(
    items: list[AnnotationItem],
    gold: list[GoldAnnotation],
    config: TrainConfig,
    fractions: list[float] = (0.2, 0.4, 0.6, 0.8, 1.0),
    model: str = "svm",
    n_folds: int = 5,
) -> list[SweepRow]:
    """Test PCC as a function of training-set fraction.

    Fold assignment and test folds are identical across fractions; the
    fraction 1.0 run is exactly the plain cross-validation run.
    """
    rows = []
    for fraction in fractions:
        if not (0.0 < fraction <= 1.0):
            raise ValueError(f"fraction {fraction} outside (0, 1]")
        report = run_cross_validation(
            items,
            gold,
            config,
            model=model,
            n_folds=n_folds,
            train_subsample=None if fraction >= 1.0 else fraction,
        )
        rows.append(SweepRow(x=fraction, pcc_mean=report.pcc_mean, pcc_sd=report.pcc_sd))
    return rows


def write_sweep_csv(rows: list[SweepRow], path: str | Path, x_name: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([x_name, "pcc_mean", "pcc_sd"])
        for row in rows:
            writer.writerow([f"{row.x:.10g}", f"{row.pcc_mean:.12g}", f"{row.pcc_sd:.12g}"])


# ---------------------------------------------------------------------------
# Multi-annotator agreement
# ---------------------------------------------------------------------------


def agreement_from_annotations(annotations: list[GoldAnnotation]) -> dict | None:
    """Agreement block from pre-adjudication records carrying annotator names."""
    per_annotator: dict[str, dict[str, GrammaticalityLabel]] = defaultdict(dict)
    for record in annotations:
        if record.annotator:
            per_annotator[record.annotator][record.item_id] = record.label
    if len(per_annotator) < 2:
        log.warning("agreement block needs records from at least 2 annotators")
        return None
    return agreement_report(dict(per_annotator))


def agreement_report(annotations: dict[str, dict[str, GrammaticalityLabel]]) -> dict:
    """Alpha and mean pairwise kappa over {annotator: {item_id: label}}."""
    annotators = sorted(annotations)
    item_ids = sorted({iid for by_item in annotations.values() for iid in by_item})
    matrix = [
        [
            int(annotations[a][iid]) if iid in annotations[a] else None
            for a in annotators
        ]
        for iid in item_ids
    ]
    alpha = krippendorff_alpha_ordinal(matrix)

    kappas = []
    for i in range(len(annotators)):
        for j in range(i + 1, len(annotators)):
            common = [
                iid
                for iid in item_ids
                if iid in annotations[annotators[i]] and iid in annotations[annotators[j]]
            ]
            if not common:
                continue
            k = cohen_kappa(
                [int(annotations[annotators[i]][iid]) for iid in common],
                [int(annotations[annotators[j]][iid]) for iid in common],
            )
            if k is not None:
                kappas.append(k)
    kappa_mean, kappa_sd = _mean_sd(kappas) if kappas else (None, None)
    return {
        "alpha": alpha,
        "kappa_mean": kappa_mean,
        "kappa_sd": kappa_sd,
        "n_items": len(item_ids),
        "n_annotators": len(annotators),
    }
