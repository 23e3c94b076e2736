"""Developmental trend analysis over large-scale automatic annotations.

Per-transcript label proportions versus child age, plus utterance-level
logistic fits of each label against age in months. Uncertainty comes from
a cluster bootstrap that resamples whole transcripts, an explicit stand-in
for a random-intercept mixed model; every report says so in its method
field.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifiers import Prediction
from .errors import InsufficientData, NonConvergence, Separation
from .labels import LABELS, GrammaticalityLabel
from .prep import AnnotationItem

log = logging.getLogger(__name__)

TREND_METHOD = "logistic+cluster-bootstrap"


@dataclass
class TranscriptProportion:
    transcript_id: str
    child_age_months: float
    n_items: int
    p_ungrammatical: float
    p_ambiguous: float
    p_grammatical: float


@dataclass
class LogisticFit:
    label: GrammaticalityLabel
    beta_age: float
    intercept: float
    se_beta: float
    p_value: float
    ci_low: float
    ci_high: float
    n_utterances: int
    n_clusters: int
    n_resamples: int

    def to_dict(self) -> dict:
        return {
            "label": self.label.key,
            "beta_age": self.beta_age,
            "intercept": self.intercept,
            "se": self.se_beta,
            "p": self.p_value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n_utterances,
            "n_clusters": self.n_clusters,
            "n_resamples": self.n_resamples,
            "method": TREND_METHOD,
        }


def transcript_proportions(
    predictions: list[Prediction], items: list[AnnotationItem]
) -> tuple[list[TranscriptProportion], int]:
    """Per-transcript label proportions; transcripts without age are skipped.

    Returns (proportions, n_skipped_predictions).
    """
    meta = {it.item_id: (it.transcript_id, it.child_age_months) for it in items}
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0])
    ages: dict[str, float] = {}
    skipped = 0
    for p in predictions:
        info = meta.get(p.item_id)
        if info is None or info[1] is None:
            skipped += 1
            continue
        tid, age = info
        counts[tid][int(p.label)] += 1
        ages[tid] = age
    if skipped:
        log.warning("%d predictions lacked transcript age metadata; skipped", skipped)
    out = []
    for tid in sorted(counts):
        c = counts[tid]
        n = sum(c)
        out.append(
            TranscriptProportion(
                transcript_id=tid,
                child_age_months=ages[tid],
                n_items=n,
                p_ungrammatical=c[0] / n,
                p_ambiguous=c[1] / n,
                p_grammatical=c[2] / n,
            )
        )
    return out, skipped


# ---------------------------------------------------------------------------
# Logistic regression by IRLS with cluster-bootstrap uncertainty
# ---------------------------------------------------------------------------

_MAX_COEF = 50.0
_MAX_ITER = 100
_TOL = 1e-8


def _irls(age: np.ndarray, y: np.ndarray, row_weight: np.ndarray | None = None):
    """Newton-Raphson fit of P(y) = sigmoid(b0 + b1 * age).

    Raises Separation when coefficients run away (perfectly separable or
    constant outcomes) and NonConvergence past the iteration cap.
    """
    beta = np.zeros(2)
    w = row_weight if row_weight is not None else np.ones_like(age)
    for _ in range(_MAX_ITER):
        eta = np.clip(beta[0] + beta[1] * age, -500.0, 500.0)
        mu = 1.0 / (1.0 + np.exp(-eta))
        r = w * (y - mu)
        v = w * mu * (1.0 - mu)
        # normal equations for design [1, age], solved in closed form
        s00 = float(v.sum())
        s01 = float(np.dot(v, age))
        s11 = float(np.dot(v, age * age))
        g0 = float(r.sum())
        g1 = float(np.dot(r, age))
        det = s00 * s11 - s01 * s01
        if det <= 0 or not math.isfinite(det):
            raise Separation("information matrix is singular")
        d0 = (s11 * g0 - s01 * g1) / det
        d1 = (-s01 * g0 + s00 * g1) / det
        beta = beta + np.asarray([d0, d1])
        if np.max(np.abs(beta)) > _MAX_COEF:
            raise Separation("coefficients diverged; outcomes may be separable or constant")
        if max(abs(d0), abs(d1)) < _TOL:
            return float(beta[0]), float(beta[1])
    raise NonConvergence(f"IRLS did not converge in {_MAX_ITER} iterations")


def fit_logistic_trend(
    records: list[tuple[float, bool, str]],
    label: GrammaticalityLabel = GrammaticalityLabel.GRAMMATICAL,
    n_resamples: int = 500,
    seed: int = 0,
) -> LogisticFit:
    """Fit P(outcome) = sigmoid(intercept + beta * age_months).

    ``records`` are (age_months, outcome, transcript_id) triples. The
    standard error, CI, and p-value come from resampling transcripts with
    replacement; integer cluster multiplicities enter the likelihood as
    row weights, so no rows are copied.
    """
    if not records:
        raise InsufficientData("no records")
    age = np.asarray([r[0] for r in records], dtype=np.float64)
    y = np.asarray([1.0 if r[1] else 0.0 for r in records])
    cluster_ids = sorted({r[2] for r in records})
    if len(cluster_ids) < 2:
        raise InsufficientData("need at least 2 transcripts for a cluster bootstrap")
    if y.min() == y.max():
        raise Separation("outcome is constant")
    cluster_index = {c: i for i, c in enumerate(cluster_ids)}
    row_cluster = np.asarray([cluster_index[r[2]] for r in records], dtype=np.int64)
    n_clusters = len(cluster_ids)

    intercept, beta = _irls(age, y)

    rng = np.random.default_rng(seed)
    betas = []
    failures = 0
    for _ in range(n_resamples):
        drawn = rng.integers(0, n_clusters, size=n_clusters)
        multiplicity = np.bincount(drawn, minlength=n_clusters).astype(np.float64)
        weights = multiplicity[row_cluster]
        try:
            _, b = _irls(age, y, row_weight=weights)
        except (Separation, NonConvergence):
            failures += 1
            continue
        betas.append(b)
    if len(betas) < max(10, n_resamples // 2):
        raise NonConvergence(
            f"cluster bootstrap failed on {failures}/{n_resamples} resamples"
        )
    if failures:
        log.warning("cluster bootstrap: %d/%d resamples failed", failures, n_resamples)

    betas_arr = np.asarray(betas)
    se = float(betas_arr.std(ddof=1))
    if se > 0:
        z = abs(beta) / se
        p_value = math.erfc(z / math.sqrt(2.0))
    else:
        p_value = 0.0 if beta != 0 else 1.0
    return LogisticFit(
        label=label,
        beta_age=beta,
        intercept=intercept,
        se_beta=se,
        p_value=p_value,
        ci_low=float(np.percentile(betas_arr, 2.5)),
        ci_high=float(np.percentile(betas_arr, 97.5)),
        n_utterances=len(records),
        n_clusters=n_clusters,
        n_resamples=n_resamples,
    )


def fit_all_labels(
    predictions: list[Prediction],
    items: list[AnnotationItem],
    n_resamples: int = 500,
    seed: int = 0,
) -> list[LogisticFit]:
    """One independent logistic fit per label (they need not sum to one)."""
    meta = {it.item_id: (it.transcript_id, it.child_age_months) for it in items}
    usable = [
        (p, meta[p.item_id])
        for p in predictions
        if p.item_id in meta and meta[p.item_id][1] is not None
    ]
    fits = []
    for label in LABELS:
        records = [(age, p.label is label, tid) for p, (tid, age) in usable]
        try:
            fits.append(
                fit_logistic_trend(records, label=label, n_resamples=n_resamples, seed=seed)
            )
        except (Separation, InsufficientData) as exc:
            log.warning("skipping %s trend fit: %s", label.key, exc)
    return fits


# ---------------------------------------------------------------------------
# CSV / JSON export
# ---------------------------------------------------------------------------


def export_trend_csv(
    fits: list[LogisticFit],
    proportions: list[TranscriptProportion],
    proportions_path: str | Path,
    curves_path: str | Path,
    min_items: int = 100,
    step_months: float = 0.5,
) -> None:
    """Write the scatter data and the fitted curves.

    Proportions rows with fewer than ``min_items`` utterances are dropped
    (plot clutter); curves are sampled at ``step_months`` over the observed
    age range.
    """
    kept = [p for p in proportions if p.n_items >= min_items]
    with open(proportions_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["transcript_id", "age_months", "n", "p_ungram", "p_ambig", "p_gram"]
        )
        for p in kept:
            writer.writerow(
                [
                    p.transcript_id,
                    f"{p.child_age_months:.12g}",
                    p.n_items,
                    f"{p.p_ungrammatical:.12g}",
                    f"{p.p_ambiguous:.12g}",
                    f"{p.p_grammatical:.12g}",
                ]
            )

    source = kept or proportions
    if source:
        lo = min(p.child_age_months for p in source)
        hi = max(p.child_age_months for p in source)
    else:
        lo, hi = 24.0, 60.0
    n_steps = int(round((hi - lo) / step_months)) + 1 if hi > lo else 1
    ages = [lo + i * step_months for i in range(n_steps)]

    with open(curves_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "age_months", "probability"])
        for fit in fits:
            for a in ages:
                prob = 1.0 / (1.0 + math.exp(-(fit.intercept + fit.beta_age * a)))
                writer.writerow([fit.label.key, f"{a:.12g}", f"{prob:.12g}"])


def write_trend_report(fits: list[LogisticFit], path: str | Path) -> None:
    payload = {
        "method": TREND_METHOD,
        "note": (
            "standard errors approximate a random-intercept model by "
            "resampling whole transcripts"
        ),
        "fits": [f.to_dict() for f in fits],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
