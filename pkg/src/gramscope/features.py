"""Sparse n-gram count features over encoded token-id sequences.

For each order k up to ``max_n``, the vocabulary keeps the 1000 most
frequent k-grams of the training data (ties broken lexicographically by
id sequence); the feature space is the concatenation of the per-order
vocabularies, so a k-gram configuration is at most 1000*k dimensional and
always includes the features from all smaller orders.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import EmptyCorpus


@dataclass
class FeatureVector:
    """Sparse counts: strictly increasing indices, parallel positive counts."""

    indices: list[int]
    counts: list[int]


def iter_ngrams(sequence: list[int], k: int):
    for i in range(len(sequence) - k + 1):
        yield tuple(sequence[i : i + k])


class NgramFeaturizer(BaseEstimator, TransformerMixin):
    def __init__(self, max_n: int = 1, per_order_size: int = 1000):
        self.max_n = max_n
        self.per_order_size = per_order_size

    def fit(self, encoded_corpus: list[list[int]], y=None) -> "NgramFeaturizer":
        if not encoded_corpus:
            raise EmptyCorpus("no encoded sequences to build an n-gram vocabulary from")
        per_order: list[list[tuple[int, ...]]] = []
        for k in range(1, self.max_n + 1):
            counts: Counter[tuple[int, ...]] = Counter()
            for seq in encoded_corpus:
                counts.update(iter_ngrams(seq, k))
            ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
            per_order.append([gram for gram, _ in ranked[: self.per_order_size]])
        self.per_order_ = per_order
        self._index = {}
        offset = 0
        for grams in per_order:
            for j, gram in enumerate(grams):
                self._index[gram] = offset + j
            offset += len(grams)
        self.dimension_ = offset
        return self

    def _check_fitted(self):
        if not hasattr(self, "per_order_"):
            raise NotFittedError("NgramFeaturizer is not fitted")

    def featurize(self, encoded: list[int]) -> FeatureVector:
        """Counts of every vocabulary n-gram in one sequence."""
        self._check_fitted()
        counts: Counter[int] = Counter()
        for k in range(1, self.max_n + 1):
            for gram in iter_ngrams(encoded, k):
                idx = self._index.get(gram)
                if idx is not None:
                    counts[idx] += 1
        indices = sorted(counts)
        return FeatureVector(indices=indices, counts=[counts[i] for i in indices])

    def transform(self, encoded_items: list[list[int]]) -> sparse.csr_matrix:
        self._check_fitted()
        data: list[int] = []
        indices: list[int] = []
        indptr = [0]
        for seq in encoded_items:
            fv = self.featurize(seq)
            indices.extend(fv.indices)
            data.extend(fv.counts)
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32), indptr),
            shape=(len(encoded_items), self.dimension_),
        )

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "max_n": self.max_n,
            "per_order_size": self.per_order_size,
            "per_order": [[list(g) for g in grams] for grams in self.per_order_],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, source: str | Path | dict) -> "NgramFeaturizer":
        payload = source if isinstance(source, dict) else json.loads(Path(source).read_text(encoding="utf-8"))
        feat = cls(max_n=payload["max_n"], per_order_size=payload.get("per_order_size", 1000))
        feat.per_order_ = [[tuple(g) for g in grams] for grams in payload["per_order"]]
        feat._index = {}
        offset = 0
        for grams in feat.per_order_:
            for j, gram in enumerate(grams):
                feat._index[gram] = offset + j
            offset += len(grams)
        feat.dimension_ = offset
        return feat

    def vocab_hash(self) -> str:
        """Stable fingerprint of the fitted vocabulary, for model artifacts."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()
