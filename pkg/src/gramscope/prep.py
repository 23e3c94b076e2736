"""Corpus preparation: eligibility filtering, dialect screening, chunking,
and preceding-context windows.

An annotation item is one eligible child utterance plus the window of
utterances immediately before it, always from the same transcript and
never from after the target (following context is off limits by design).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .chat import SpeakerRole, Terminator, Transcript, Utterance
from .errors import IndexOutOfRange

log = logging.getLogger(__name__)

UNK_UTTERANCE_TOKEN = "<unk-utt>"

DEFAULT_DIALECT_BIGRAMS = (
    ("she", "don't"),
    ("he", "don't"),
    ("it", "don't"),
    ("you", "was"),
    ("we", "was"),
    ("they", "was"),
)
DEFAULT_DIALECT_THRESHOLD = 5.0  # hits per 10k caregiver utterances

_ROLE_PREFIX = {
    SpeakerRole.CHILD: "CHI",
    SpeakerRole.CAREGIVER: "CAR",
    SpeakerRole.OTHER_ADULT: "ADU",
    SpeakerRole.OTHER_CHILD: "OCH",
    SpeakerRole.UNKNOWN: "UNK",
}


@dataclass
class ContextTurn:
    role: SpeakerRole
    tokens: list[str]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass
class AnnotationItem:
    item_id: str
    transcript_id: str
    target: Utterance
    context: list[ContextTurn] = field(default_factory=list)
    child_age_months: float | None = None

    @property
    def target_text(self) -> str:
        return self.target.text


@dataclass
class Chunk:
    chunk_id: str
    items: list[AnnotationItem]
    partial: bool = False


@dataclass
class DialectScreenReport:
    corpus: str
    caregiver_utterance_count: int
    indicative_bigram_hits: int
    rate_per_10k: float
    excluded: bool


def filter_eligible(transcript: Transcript) -> list[Utterance]:
    """Child utterances that are intelligible and at least two words long."""
    return [
        u
        for u in transcript.utterances
        if u.speaker is SpeakerRole.CHILD and u.is_intelligible and len(u.tokens) >= 2
    ]


def detect_dialect_divergence(
    corpus_transcripts: list[Transcript],
    bigrams: tuple[tuple[str, str], ...] = DEFAULT_DIALECT_BIGRAMS,
    threshold: float = DEFAULT_DIALECT_THRESHOLD,
) -> DialectScreenReport:
    """Screen one corpus for dialect-indicative caregiver bigrams.

    Counts case-insensitive adjacent-token matches in caregiver utterances
    only; the corpus is flagged for exclusion when the hit rate reaches
    ``threshold`` per 10k caregiver utterances.
    """
    wanted = {(a.lower(), b.lower()) for a, b in bigrams}
    n_caregiver = 0
    hits = 0
    for t in corpus_transcripts:
        for u in t.utterances:
            if u.speaker is not SpeakerRole.CAREGIVER:
                continue
            n_caregiver += 1
            lowered = [tok.lower() for tok in u.tokens]
            hits += sum(1 for pair in zip(lowered, lowered[1:]) if pair in wanted)
    rate = 10000.0 * hits / max(1, n_caregiver)
    return DialectScreenReport(
        corpus=corpus_transcripts[0].corpus if corpus_transcripts else "",
        caregiver_utterance_count=n_caregiver,
        indicative_bigram_hits=hits,
        rate_per_10k=rate,
        excluded=rate >= threshold,
    )


def build_context_window(
    transcript: Transcript, target_index: int, n_context: int
) -> AnnotationItem:
    """One annotation item: target utterance plus its preceding window.

    Context holds the min(n_context, target_index) utterances just before
    the target, oldest first. Unintelligible turns stay in as a single
    placeholder token; they still carry turn-taking information.
    """
    if not (0 <= target_index < len(transcript.utterances)):
        raise IndexOutOfRange(
            f"{transcript.transcript_id}: index {target_index} out of range"
        )
    target = transcript.utterances[target_index]
    lo = max(0, target_index - n_context)
    context = [
        ContextTurn(
            role=u.speaker,
            tokens=list(u.tokens) if u.is_intelligible else [UNK_UTTERANCE_TOKEN],
        )
        for u in transcript.utterances[lo:target_index]
    ]
    return AnnotationItem(
        item_id=f"{transcript.transcript_id}:{target_index}",
        transcript_id=transcript.transcript_id,
        target=target,
        context=context,
        child_age_months=transcript.child_age_months,
    )


def build_chunks(
    transcripts: list[Transcript],
    chunk_size: int = 200,
    n_context: int = 10,
) -> list[Chunk]:
    """Concatenate eligible child utterances and split into fixed chunks.

    Contexts are built from each item's original transcript and never
    cross transcript boundaries. A final remainder chunk, if any, is
    flagged partial so annotation exports can drop it.
    """
    items: list[AnnotationItem] = []
    for t in transcripts:
        for u in filter_eligible(t):
            items.append(build_context_window(t, u.index, n_context))
    chunks = []
    for start in range(0, len(items), chunk_size):
        batch = items[start : start + chunk_size]
        chunks.append(
            Chunk(
                chunk_id=f"chunk-{len(chunks):04d}",
                items=batch,
                partial=len(batch) < chunk_size,
            )
        )
    return chunks


def render_context(context: list[ContextTurn], separator: str = " | ") -> str:
    return separator.join(f"{_ROLE_PREFIX[c.role]}: {c.text}" for c in context)


def export_annotation_sheet(chunk: Chunk, path: str | Path) -> None:
    """Write one chunk as a UTF-8 TSV ready for offline annotation."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["item_id", "context", "target_utterance", "label", "categories"])
        for item in chunk.items:
            writer.writerow(
                [item.item_id, render_context(item.context), item.target_text, "", ""]
            )


def read_annotation_sheet(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


# ---------------------------------------------------------------------------
# Items JSONL and chunk manifest
# ---------------------------------------------------------------------------


def item_to_row(item: AnnotationItem) -> dict:
    return {
        "item_id": item.item_id,
        "transcript_id": item.transcript_id,
        "child_age_months": item.child_age_months,
        "context": [{"role": c.role.value, "text": c.text} for c in item.context],
        "target_text": item.target_text,
    }


def item_from_row(row: dict) -> AnnotationItem:
    """Rebuild an item from its JSONL row.

    The wire format carries text only, so the target utterance is
    reconstructed with neutral terminator metadata.
    """
    tokens = row["target_text"].split()
    try:
        index = int(row["item_id"].rsplit(":", 1)[1])
    except (IndexError, ValueError):
        index = -1
    target = Utterance(
        index=index,
        speaker=SpeakerRole.CHILD,
        speaker_code="CHI",
        raw_text=row["target_text"],
        tokens=tokens,
        is_intelligible=bool(tokens),
        terminator=Terminator.OTHER,
    )
    context = [
        ContextTurn(role=SpeakerRole(c["role"]), tokens=c["text"].split())
        for c in row.get("context", [])
    ]
    return AnnotationItem(
        item_id=row["item_id"],
        transcript_id=row["transcript_id"],
        target=target,
        context=context,
        child_age_months=row.get("child_age_months"),
    )


def write_items_jsonl(items: list[AnnotationItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item_to_row(item), ensure_ascii=False) + "\n")


def read_items_jsonl(path: str | Path) -> list[AnnotationItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                items.append(item_from_row(json.loads(line)))
    return items


def write_chunks_json(chunks: list[Chunk], path: str | Path) -> None:
    payload = [
        {"chunk_id": c.chunk_id, "partial": c.partial, "item_ids": [i.item_id for i in c.items]}
        for c in chunks
    ]
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def read_chunks_json(path: str | Path, items: list[AnnotationItem]) -> list[Chunk]:
    by_id = {i.item_id: i for i in items}
    chunks = []
    for row in json.loads(Path(path).read_text(encoding="utf-8")):
        chunks.append(
            Chunk(
                chunk_id=row["chunk_id"],
                items=[by_id[iid] for iid in row["item_ids"]],
                partial=bool(row["partial"]),
            )
        )
    return chunks
