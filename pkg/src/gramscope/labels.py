"""Grammaticality labels, the error-category taxonomy, and vote resolution.

The three labels form an ordinal scale (ungrammatical < ambiguous <
grammatical) encoded as 0/1/2; every metric downstream leans on that
coding, so it lives here and nowhere else.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path

from .errors import EmptyInput, InvalidAnnotation, MalformedRecord


class GrammaticalityLabel(IntEnum):
    UNGRAMMATICAL = 0
    AMBIGUOUS = 1
    GRAMMATICAL = 2

    @property
    def key(self) -> str:
        return self.name.lower()

    @classmethod
    def from_string(cls, text: str) -> "GrammaticalityLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise InvalidAnnotation(f"unknown label {text!r}") from None


LABELS = tuple(GrammaticalityLabel)


class BroadGroup(str, Enum):
    SYNTACTIC = "syntactic"
    NOUN_MORPHOLOGY = "noun_morphology"
    VERB_MORPHOLOGY = "verb_morphology"
    UNBOUND_MORPHOLOGY = "unbound_morphology"
    OTHER = "other"


class ErrorCategory(str, Enum):
    SUBJECT = "subject"
    OBJECT = "object"
    VERB = "verb"
    POSSESSIVE = "possessive"
    PLURAL = "plural"
    SV_AGREEMENT = "sv_agreement"
    TENSE_ASPECT = "tense_aspect"
    DETERMINER = "determiner"
    PREPOSITION = "preposition"
    AUXILIARY = "auxiliary"
    PRESENT_PROGRESSIVE = "present_progressive"
    OTHER = "other"

    @property
    def broad_group(self) -> BroadGroup:
        return _BROAD_GROUPS[self]


_BROAD_GROUPS = {
    ErrorCategory.SUBJECT: BroadGroup.SYNTACTIC,
    ErrorCategory.OBJECT: BroadGroup.SYNTACTIC,
    ErrorCategory.VERB: BroadGroup.SYNTACTIC,
    ErrorCategory.POSSESSIVE: BroadGroup.NOUN_MORPHOLOGY,
    ErrorCategory.PLURAL: BroadGroup.NOUN_MORPHOLOGY,
    ErrorCategory.SV_AGREEMENT: BroadGroup.VERB_MORPHOLOGY,
    ErrorCategory.TENSE_ASPECT: BroadGroup.VERB_MORPHOLOGY,
    ErrorCategory.DETERMINER: BroadGroup.UNBOUND_MORPHOLOGY,
    ErrorCategory.PREPOSITION: BroadGroup.UNBOUND_MORPHOLOGY,
    ErrorCategory.AUXILIARY: BroadGroup.UNBOUND_MORPHOLOGY,
    ErrorCategory.PRESENT_PROGRESSIVE: BroadGroup.UNBOUND_MORPHOLOGY,
    ErrorCategory.OTHER: BroadGroup.OTHER,
}


@dataclass
class GoldAnnotation:
    """A resolved (or single-annotator) label for one item.

    Error categories are only meaningful on ungrammatical items; an
    utterance may carry several of them.
    """

    item_id: str
    label: GrammaticalityLabel
    categories: frozenset[ErrorCategory] = frozenset()
    annotator: str | None = None

    def __post_init__(self):
        self.categories = frozenset(self.categories)
        if self.categories and self.label is not GrammaticalityLabel.UNGRAMMATICAL:
            raise InvalidAnnotation(
                f"{self.item_id}: error categories require the ungrammatical label"
            )


def ordinal_median_label(labels: list[GrammaticalityLabel]) -> GrammaticalityLabel:
    """Median of the ordinal codes; half-way values round down (conservative)."""
    codes = sorted(int(l) for l in labels)
    n = len(codes)
    mid = (codes[(n - 1) // 2] + codes[n // 2]) / 2
    return GrammaticalityLabel(math.ceil(mid - 0.5))


def majority_label(
    labels: list[GrammaticalityLabel], resolve: bool = False
) -> GrammaticalityLabel | None:
    """Mode of the submitted labels.

    When the top count is shared, returns None unless ``resolve`` is set,
    in which case the tie is broken by the ordinal median of all codes
    (deterministic, and equal to the mode whenever one exists).
    """
    if not labels:
        raise EmptyInput("majority_label needs at least one label")
    counts = Counter(labels)
    top = max(counts.values())
    winners = [label for label, c in counts.items() if c == top]
    if len(winners) == 1:
        return winners[0]
    if not resolve:
        return None
    return ordinal_median_label(labels)


@dataclass
class LabelDistribution:
    counts: dict[GrammaticalityLabel, int]
    proportions: dict[GrammaticalityLabel, float]
    total: int


def label_distribution(gold: list) -> LabelDistribution:
    """Counts and proportions per label over GoldAnnotations or raw labels."""
    labels = [g.label if isinstance(g, GoldAnnotation) else g for g in gold]
    counts = {label: 0 for label in LABELS}
    for label in labels:
        counts[label] += 1
    total = len(labels)
    proportions = {l: c / total for l, c in counts.items()} if total else {}
    return LabelDistribution(counts=counts, proportions=proportions, total=total)


# ---------------------------------------------------------------------------
# Gold-label JSONL
# ---------------------------------------------------------------------------


def gold_to_row(gold: GoldAnnotation) -> dict:
    row = {
        "item_id": gold.item_id,
        "label": gold.label.key,
        "categories": sorted(c.value for c in gold.categories),
    }
    if gold.annotator is not None:
        row["annotator"] = gold.annotator
    return row


def gold_from_row(row: dict, line_number: int | None = None) -> GoldAnnotation:
    try:
        return GoldAnnotation(
            item_id=row["item_id"],
            label=GrammaticalityLabel.from_string(row["label"]),
            categories=frozenset(ErrorCategory(c) for c in row.get("categories", [])),
            annotator=row.get("annotator"),
        )
    except (KeyError, ValueError, InvalidAnnotation) as exc:
        raise MalformedRecord(str(exc), line_number) from exc


def write_gold_jsonl(gold: list[GoldAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in gold:
            fh.write(json.dumps(gold_to_row(g), ensure_ascii=False) + "\n")


def read_gold_jsonl(path: str | Path) -> list[GoldAnnotation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON: {exc}", i) from exc
            out.append(gold_from_row(row, i))
    return out
