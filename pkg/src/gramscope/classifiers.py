"""Baseline classifiers: majority class and class-weighted linear SVM.

The SVM is one-vs-rest with an L1 hinge loss solved by dual coordinate
descent over a fixed seeded item order, so training is bit-reproducible.
Class imbalance is handled by weighting each example's hinge cost with the
balanced weight of its gold label.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import (
    DegenerateData,
    DimensionMismatch,
    EmptyInput,
    InvalidAnnotation,
    MalformedRecord,
    MisalignedItems,
    MissingClass,
)
from .features import NgramFeaturizer
from .labels import LABELS, GoldAnnotation, GrammaticalityLabel, majority_label
from .metrics import pcc, pcc_or_zero
from .prep import AnnotationItem
from .tokenization import BpeTokenizer


@dataclass(frozen=True)
class ClassWeights:
    """Balanced per-label hinge weights: N / (3 * n_c)."""

    weights: dict[GrammaticalityLabel, float]

    def __getitem__(self, label: GrammaticalityLabel) -> float:
        return self.weights[label]


def compute_class_weights(labels: list[GrammaticalityLabel]) -> ClassWeights:
    counts = Counter(labels)
    missing = [l.key for l in LABELS if counts.get(l, 0) == 0]
    if missing:
        raise MissingClass(f"no examples of: {', '.join(missing)}")
    n = len(labels)
    return ClassWeights({l: n / (len(LABELS) * counts[l]) for l in LABELS})


def balanced_weights(labels: list[int]) -> dict[int, float]:
    """Balanced weights over the classes actually present (for toy data)."""
    counts = Counter(labels)
    n = len(labels)
    k = len(counts)
    return {c: n / (k * counts[c]) for c in counts}


@dataclass
class TrainConfig:
    """Pipeline configuration for the n-gram SVM baselines."""

    max_n: int = 5
    C: float = 1.0
    context_turns: int = 0
    bpe_vocab_size: int = 10000
    max_epochs: int = 60
    tol: float = 0.1
    early_stopping: bool = False
    patience: int = 5
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.validation_fraction < 1.0):
            raise ValueError("validation_fraction must be in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "max_n": self.max_n,
            "C": self.C,
            "context_turns": self.context_turns,
            "bpe_vocab_size": self.bpe_vocab_size,
            "max_epochs": self.max_epochs,
            "tol": self.tol,
            "early_stopping": self.early_stopping,
            "patience": self.patience,
            "validation_fraction": self.validation_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {k: payload[k] for k in cls().to_dict() if k in payload}
        return cls(**known)


@dataclass
class Prediction:
    item_id: str
    label: GrammaticalityLabel
    scores: list[float]  # per-class decision values in ordinal order (u, a, g)


# ---------------------------------------------------------------------------
# Dual coordinate descent for the L1-hinge binary subproblem
# ---------------------------------------------------------------------------


def _cd_epoch(data, indices, indptr, y, cost, q_diag, w, alpha, order) -> float:
    """One dual coordinate descent pass; returns the projected-gradient spread."""
    pg_max = -math.inf
    pg_min = math.inf
    for i in order:
        lo, hi = indptr[i], indptr[i + 1]
        cols = indices[lo:hi]
        vals = data[lo:hi]
        yi = y[i]
        g = yi * float(np.dot(vals, w[cols])) - 1.0
        a = alpha[i]
        upper = cost[i]
        if a == 0.0:
            pg = min(g, 0.0)
        elif a == upper:
            pg = max(g, 0.0)
        else:
            pg = g
        if pg > pg_max:
            pg_max = pg
        if pg < pg_min:
            pg_min = pg
        if abs(pg) > 1e-12:
            new_a = min(max(a - g / q_diag[i], 0.0), upper)
            step = new_a - a
            if step != 0.0:
                w[cols] += (step * yi) * vals
                alpha[i] = new_a
    return pg_max - pg_min


class LinearSvm(BaseEstimator, ClassifierMixin):
    """One-vs-rest linear SVM with per-example hinge costs.

    The intercept is learned through an augmented constant column of value
    ``bias`` (liblinear-style, so it is regularized); set ``bias=0`` for a
    homogeneous model. Ties in the decision argmax resolve toward the
    ordinal-lower class.
    """

    def __init__(
        self,
        C: float = 1.0,
        max_epochs: int = 60,
        tol: float = 0.1,
        seed: int = 0,
        bias: float = 1.0,
        early_stopping: bool = False,
        patience: int = 5,
    ):
        self.C = C
        self.max_epochs = max_epochs
        self.tol = tol
        self.seed = seed
        self.bias = bias
        self.early_stopping = early_stopping
        self.patience = patience

    def _augment(self, X: sparse.csr_matrix) -> sparse.csr_matrix:
        if self.bias == 0.0:
            return X.tocsr()
        ones = np.full((X.shape[0], 1), self.bias)
        return sparse.hstack([X, sparse.csr_matrix(ones)], format="csr")

    def fit(self, X, y, class_weight: dict | None = None, validation=None) -> "LinearSvm":
        X = sparse.csr_matrix(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} rows vs {y.shape[0]} labels")
        if X.shape[0] == 0:
            raise EmptyInput("no training examples")
        classes = np.unique(y)
        if classes.size < 2:
            raise DegenerateData("training data contains a single class")
        if class_weight is None:
            class_weight = balanced_weights(y.tolist())

        Xa = self._augment(X)
        data, indices, indptr = Xa.data, Xa.indices, Xa.indptr
        n = Xa.shape[0]
        cost = self.C * np.asarray([class_weight[int(label)] for label in y])
        q_diag = np.asarray(Xa.multiply(Xa).sum(axis=1)).ravel()
        q_diag[q_diag == 0.0] = 1.0  # all-zero rows: any alpha step is a no-op

        rng = np.random.default_rng(self.seed)
        signs = [np.where(y == c, 1.0, -1.0) for c in classes]
        ws = [np.zeros(Xa.shape[1]) for _ in classes]
        alphas = [np.zeros(n) for _ in classes]

        if self.early_stopping and validation is not None:
            self._fit_early_stopping(
                data, indices, indptr, n, signs, cost, q_diag, ws, alphas, rng,
                classes, validation,
            )
        else:
            for k in range(len(classes)):
                for _ in range(self.max_epochs):
                    order = rng.permutation(n)
                    spread = _cd_epoch(
                        data, indices, indptr, signs[k], cost, q_diag, ws[k], alphas[k], order
                    )
                    if spread < self.tol:
                        break

        self.classes_ = classes
        self._store_coefs(ws, X.shape[1])
        return self

    def _fit_early_stopping(
        self, data, indices, indptr, n, signs, cost, q_diag, ws, alphas, rng,
        classes, validation,
    ):
        """Interleave per-class passes; keep the epoch with the best validation PCC."""
        X_val, y_val = validation
        best = (-math.inf, 0, [w.copy() for w in ws])
        stale = 0
        for epoch in range(1, self.max_epochs + 1):
            for k in range(len(classes)):
                order = rng.permutation(n)
                _cd_epoch(data, indices, indptr, signs[k], cost, q_diag, ws[k], alphas[k], order)
            self.classes_ = classes
            self._store_coefs(ws, X_val.shape[1])
            val_pred = self.predict(X_val)
            score = pcc_or_zero(pcc(val_pred.tolist(), np.asarray(y_val).tolist()))
            if score > best[0]:
                best = (score, epoch, [w.copy() for w in ws])
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break
        self._store_coefs(best[2], X_val.shape[1])
        self.best_epoch_ = best[1]
        self.best_validation_pcc_ = best[0]

    def _store_coefs(self, ws, dim: int):
        W = np.vstack(ws)
        if self.bias == 0.0:
            self.coef_ = W
            self.intercept_ = np.zeros(W.shape[0])
        else:
            self.coef_ = W[:, :-1]
            self.intercept_ = W[:, -1] * self.bias
        self.n_features_in_ = dim

    def decision_function(self, X) -> np.ndarray:
        if not hasattr(self, "coef_"):
            raise NotFittedError("LinearSvm is not fitted")
        X = sparse.csr_matrix(X, dtype=np.float64)
        if X.shape[1] != self.coef_.shape[1]:
            raise DimensionMismatch(
                f"model expects {self.coef_.shape[1]} features, got {X.shape[1]}"
            )
        return np.asarray(X @ self.coef_.T) + self.intercept_

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        # argmax takes the first maximum: classes_ ascending = ordinal-lower tie-break
        return self.classes_[np.argmax(scores, axis=1)]


class MajorityClassBaseline(BaseEstimator, ClassifierMixin):
    """Predicts the most frequent training label for every input."""

    def fit(self, X, y) -> "MajorityClassBaseline":
        labels = [GrammaticalityLabel(int(v)) for v in y]
        if not labels:
            raise EmptyInput("no training labels")
        self.label_ = majority_label(labels, resolve=True)
        self.classes_ = np.asarray([int(l) for l in LABELS])
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "label_"):
            raise NotFittedError("MajorityClassBaseline is not fitted")
        n = X.shape[0] if hasattr(X, "shape") else len(X)
        return np.full(n, int(self.label_), dtype=np.int64)

    def decision_function(self, X) -> np.ndarray:
        n = X.shape[0] if hasattr(X, "shape") else len(X)
        row = np.asarray([1.0 if int(l) == int(self.label_) else 0.0 for l in LABELS])
        return np.tile(row, (n, 1))


# ---------------------------------------------------------------------------
# End-to-end model bundle (tokenizer + features + classifier)
# ---------------------------------------------------------------------------


@dataclass
class GrammaticalityModel:
    """Everything needed to label new items, as a single artifact."""

    kind: str  # "svm" | "majority"
    config: TrainConfig
    tokenizer: BpeTokenizer | None = None
    featurizer: NgramFeaturizer | None = None
    svm: LinearSvm | None = None
    majority_label_: GrammaticalityLabel | None = None
    vocab_hash: str | None = None

    def _scores_matrix(self, items: list[AnnotationItem]) -> np.ndarray:
        if self.kind == "majority":
            scores = np.zeros((len(items), len(LABELS)))
            scores[:, int(self.majority_label_)] = 1.0
            return scores
        encoded = [self.tokenizer.encode_item(it, self.config.context_turns) for it in items]
        X = self.featurizer.transform(encoded)
        decisions = self.svm.decision_function(X)
        scores = np.full((len(items), len(LABELS)), -1e30)
        for j, c in enumerate(self.svm.classes_):
            scores[:, int(c)] = decisions[:, j]
        return scores

    def predict_items(self, items: list[AnnotationItem]) -> list[Prediction]:
        if not items:
            return []
        scores = self._scores_matrix(items)
        out = []
        for item, row in zip(items, scores):
            label = GrammaticalityLabel(int(np.argmax(row)))
            out.append(Prediction(item_id=item.item_id, label=label, scores=row.tolist()))
        return out

    def save(self, path: str | Path) -> None:
        payload: dict = {
            "format": "gramscope-model",
            "kind": self.kind,
            "config": self.config.to_dict(),
        }
        if self.kind == "majority":
            payload["majority_label"] = self.majority_label_.key
        else:
            payload["vocab_hash"] = self.vocab_hash
            payload["tokenizer"] = self.tokenizer.to_dict()
            payload["ngram_vocab"] = self.featurizer.to_dict()
            payload["classes"] = [int(c) for c in self.svm.classes_]
            payload["coef"] = self.svm.coef_.tolist()
            payload["intercept"] = self.svm.intercept_.tolist()
            payload["bias"] = self.svm.bias
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GrammaticalityModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        config = TrainConfig.from_dict(payload["config"])
        if payload["kind"] == "majority":
            return cls(
                kind="majority",
                config=config,
                majority_label_=GrammaticalityLabel.from_string(payload["majority_label"]),
            )
        svm = LinearSvm(C=config.C, seed=config.seed, bias=payload.get("bias", 1.0))
        svm.coef_ = np.asarray(payload["coef"], dtype=np.float64)
        svm.intercept_ = np.asarray(payload["intercept"], dtype=np.float64)
        svm.classes_ = np.asarray(payload["classes"], dtype=np.int64)
        svm.n_features_in_ = svm.coef_.shape[1]
        return cls(
            kind="svm",
            config=config,
            tokenizer=BpeTokenizer.load(payload["tokenizer"]),
            featurizer=NgramFeaturizer.load(payload["ngram_vocab"]),
            svm=svm,
            vocab_hash=payload.get("vocab_hash"),
        )


def _stratified_split(labels: np.ndarray, fraction: float, seed: int):
    """Deterministic stratified holdout; returns (train_idx, holdout_idx)."""
    rng = np.random.default_rng(seed)
    holdout: list[int] = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        k = max(1, int(round(len(idx) * fraction))) if len(idx) > 1 else 0
        picked = rng.choice(idx, size=k, replace=False) if k else np.asarray([], dtype=np.int64)
        holdout.extend(int(i) for i in picked)
    mask = np.ones(len(labels), dtype=bool)
    mask[holdout] = False
    return np.flatnonzero(mask), np.asarray(sorted(holdout), dtype=np.int64)


def train_model(
    items: list[AnnotationItem],
    gold: list[GoldAnnotation],
    config: TrainConfig,
    model: str = "svm",
    tokenizer: BpeTokenizer | None = None,
) -> GrammaticalityModel:
    """Fit a full pipeline on one training set.

    The tokenizer defaults to BPE trained on this training data's own token
    streams (no test leakage); pass a pretrained one to mirror training on
    a larger unlabeled corpus.
    """
    if len(items) != len(gold):
        raise MisalignedItems(f"{len(items)} items vs {len(gold)} gold labels")
    y = np.asarray([int(g.label) for g in gold], dtype=np.int64)

    if model == "majority":
        clf = MajorityClassBaseline().fit(None, y)
        return GrammaticalityModel(kind="majority", config=config, majority_label_=clf.label_)
    if model != "svm":
        raise ValueError(f"unknown model kind {model!r}")

    if tokenizer is None:
        streams = []
        for it in items:
            streams.append(it.target.tokens)
            streams.extend(turn.tokens for turn in it.context)
        tokenizer = BpeTokenizer(vocab_size=config.bpe_vocab_size).fit(streams)

    encoded = [tokenizer.encode_item(it, config.context_turns) for it in items]
    featurizer = NgramFeaturizer(max_n=config.max_n).fit(encoded)
    X = featurizer.transform(encoded)

    svm = LinearSvm(
        C=config.C,
        max_epochs=config.max_epochs,
        tol=config.tol,
        seed=config.seed,
        early_stopping=config.early_stopping,
        patience=config.patience,
    )
    weights = balanced_weights(y.tolist())
    if config.early_stopping:
        train_idx, val_idx = _stratified_split(y, config.validation_fraction, config.seed)
        svm.fit(
            X[train_idx], y[train_idx],
            class_weight=weights,
            validation=(X[val_idx], y[val_idx]),
        )
    else:
        svm.fit(X, y, class_weight=weights)

    return GrammaticalityModel(
        kind="svm",
        config=config,
        tokenizer=tokenizer,
        featurizer=featurizer,
        svm=svm,
        vocab_hash=featurizer.vocab_hash(),
    )


# ---------------------------------------------------------------------------
# Ensembles and prediction I/O
# ---------------------------------------------------------------------------


def ensemble_vote(per_model: list[list[Prediction]]) -> list[Prediction]:
    """Majority vote over aligned prediction lists.

    Ties break by the ordinal median of all votes; scores become per-class
    vote fractions.
    """
    if not per_model:
        raise EmptyInput("no prediction lists")
    ids = [p.item_id for p in per_model[0]]
    for preds in per_model[1:]:
        if [p.item_id for p in preds] != ids:
            raise MisalignedItems("prediction lists do not cover the same items in order")
    out = []
    n_models = len(per_model)
    for i, item_id in enumerate(ids):
        votes = [preds[i].label for preds in per_model]
        label = majority_label(votes, resolve=True)
        fractions = [sum(1 for v in votes if v is l) / n_models for l in LABELS]
        out.append(Prediction(item_id=item_id, label=label, scores=fractions))
    return out


def prediction_to_row(pred: Prediction) -> dict:
    return {"item_id": pred.item_id, "label": pred.label.key, "scores": pred.scores}


def write_predictions_jsonl(predictions: list[Prediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(prediction_to_row(p), ensure_ascii=False) + "\n")


def import_external_predictions(path: str | Path) -> list[Prediction]:
    """Read predictions produced by any external model (one JSON per line)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON: {exc}", i) from exc
            try:
                label = GrammaticalityLabel.from_string(str(row["label"]))
                item_id = row["item_id"]
            except (KeyError, InvalidAnnotation) as exc:
                raise MalformedRecord(str(exc), i) from exc
            scores = row.get("scores")
            if scores is None:
                scores = [1.0 if l is label else 0.0 for l in LABELS]
            elif len(scores) != len(LABELS):
                raise MalformedRecord(f"scores must have {len(LABELS)} entries", i)
            out.append(Prediction(item_id=item_id, label=label, scores=[float(s) for s in scores]))
    return out
