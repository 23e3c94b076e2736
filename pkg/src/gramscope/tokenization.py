"""Byte-pair-encoding subword tokenizer with speaker specials.

Trained on cleaned word tokens: each word type starts as its character
sequence with an end-of-word marker on the final character, and the most
frequent adjacent symbol pair is merged until the vocabulary is full or no
pair occurs at least twice. Ties break lexicographically so training is
deterministic for a fixed corpus order.
"""

from __future__ import annotations

import heapq
import json
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .chat import SpeakerRole
from .errors import EmptyCorpus
from .prep import AnnotationItem, UNK_UTTERANCE_TOKEN

EOW = "</w>"

CHILD_TOKEN = "[CHI]"
CAREGIVER_TOKEN = "[CAR]"
PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
SPECIALS = (CHILD_TOKEN, CAREGIVER_TOKEN, PAD_TOKEN, UNK_TOKEN)


def _word_symbols(word: str) -> tuple[str, ...]:
    chars = list(word)
    chars[-1] += EOW
    return tuple(chars)


def _apply_merge(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    merged = pair[0] + pair[1]
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


class BpeTokenizer(BaseEstimator):
    """Subword tokenizer; ``fit`` learns merges, ``encode_*`` applies them.

    The four specials occupy ids 0..3 and are never produced by a merge.
    Every non-child speaker encodes with the caregiver token.
    """

    def __init__(self, vocab_size: int = 10000):
        self.vocab_size = vocab_size

    # -- training -----------------------------------------------------------

    def fit(self, corpus: Iterable[list[str]]) -> "BpeTokenizer":
        word_freq: Counter[str] = Counter()
        for tokens in corpus:
            word_freq.update(tokens)
        word_freq.pop("", None)
        if not word_freq:
            raise EmptyCorpus("tokenizer training corpus has no tokens")

        words = [(freq, _word_symbols(word)) for word, freq in sorted(word_freq.items())]
        alphabet = sorted({s for _, syms in words for s in syms})

        vocab: dict[str, int] = {sp: i for i, sp in enumerate(SPECIALS)}
        for sym in alphabet:
            vocab[sym] = len(vocab)

        merges: list[tuple[str, str]] = []
        if self.vocab_size > len(vocab):
            merges = self._learn_merges(words, vocab)

        self.vocab_ = vocab
        self.merges_ = merges
        self._ranks = {pair: i for i, pair in enumerate(merges)}
        self._word_cache: dict[str, list[int]] = {}
        return self

    def _learn_merges(self, words, vocab) -> list[tuple[str, str]]:
        pair_counts: Counter[tuple[str, str]] = Counter()
        containing: defaultdict[tuple[str, str], set[int]] = defaultdict(set)
        for wi, (freq, syms) in enumerate(words):
            for pair in zip(syms, syms[1:]):
                pair_counts[pair] += freq
                containing[pair].add(wi)

        # lazy max-heap; (-count, pair) tuples give lexicographic tie-breaks
        heap = [(-c, p) for p, c in pair_counts.items()]
        heapq.heapify(heap)
        merges: list[tuple[str, str]] = []

        while len(vocab) < self.vocab_size and heap:
            neg_count, pair = heapq.heappop(heap)
            current = pair_counts.get(pair, 0)
            if current != -neg_count:
                if current >= 2:
                    heapq.heappush(heap, (-current, pair))
                continue
            if current < 2:
                break
            merged = pair[0] + pair[1]
            if merged in vocab or merged in SPECIALS:
                pair_counts.pop(pair, None)
                continue
            merges.append(pair)
            vocab[merged] = len(vocab)

            for wi in sorted(containing[pair]):
                freq, syms = words[wi]
                if pair not in set(zip(syms, syms[1:])):
                    continue  # stale index entry
                for old in zip(syms, syms[1:]):
                    pair_counts[old] -= freq
                new_syms = _apply_merge(syms, pair)
                words[wi] = (freq, new_syms)
                for new in zip(new_syms, new_syms[1:]):
                    pair_counts[new] += freq
                    containing[new].add(wi)
                    heapq.heappush(heap, (-pair_counts[new], new))
            pair_counts.pop(pair, None)
            containing.pop(pair, None)
        return merges

    # -- encoding -----------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "vocab_"):
            raise NotFittedError("BpeTokenizer is not fitted")

    def segment_word(self, word: str) -> tuple[str, ...]:
        """Apply learned merges to one word; lowest-rank pair first."""
        if not word:
            return ()
        symbols = _word_symbols(word)
        while len(symbols) >= 2:
            candidates = set(zip(symbols, symbols[1:]))
            best = min(
                candidates,
                key=lambda p: (self._ranks.get(p, len(self._ranks)), p),
            )
            if best not in self._ranks:
                break
            symbols = _apply_merge(symbols, best)
        return symbols

    def encode_word(self, word: str) -> list[int]:
        self._check_fitted()
        cached = self._word_cache.get(word)
        if cached is None:
            unk = self.vocab_[UNK_TOKEN]
            cached = [self.vocab_.get(s, unk) for s in self.segment_word(word)]
            self._word_cache[word] = cached
        return list(cached)

    def speaker_id(self, role: SpeakerRole) -> int:
        token = CHILD_TOKEN if role is SpeakerRole.CHILD else CAREGIVER_TOKEN
        return self.vocab_[token]

    def encode_tokens(self, tokens: list[str], role: SpeakerRole) -> list[int]:
        """One utterance: speaker special then the subwords of each word."""
        self._check_fitted()
        ids = [self.speaker_id(role)]
        unk = self.vocab_[UNK_TOKEN]
        for word in tokens:
            if word == UNK_UTTERANCE_TOKEN:
                ids.append(unk)
            else:
                ids.extend(self.encode_word(word))
        return ids

    def encode_item(self, item: AnnotationItem, context_turns: int | None = 0) -> list[int]:
        """Encode context turns (nearest ``context_turns``) then the target.

        ``context_turns=None`` uses every stored turn; 0 encodes the target
        in isolation.
        """
        self._check_fitted()
        if context_turns is None:
            turns = item.context
        elif context_turns <= 0:
            turns = []
        else:
            turns = item.context[-context_turns:]
        ids: list[int] = []
        for turn in turns:
            ids.extend(self.encode_tokens(turn.tokens, turn.role))
        ids.extend(self.encode_tokens(item.target.tokens, item.target.speaker))
        return ids

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        self._check_fitted()
        payload = {
            "specials": list(SPECIALS),
            "vocab": self.vocab_,
            "merges": [list(p) for p in self.merges_],
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, source: str | Path | dict) -> "BpeTokenizer":
        payload = source if isinstance(source, dict) else json.loads(Path(source).read_text(encoding="utf-8"))
        tok = cls(vocab_size=len(payload["vocab"]))
        tok.vocab_ = {str(k): int(v) for k, v in payload["vocab"].items()}
        tok.merges_ = [tuple(p) for p in payload["merges"]]
        tok._ranks = {pair: i for i, pair in enumerate(tok.merges_)}
        tok._word_cache = {}
        return tok

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "specials": list(SPECIALS),
            "vocab": dict(self.vocab_),
            "merges": [list(p) for p in self.merges_],
        }
