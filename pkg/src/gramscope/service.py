"""Local HTTP service for multi-annotator gold-label collection.

State is an append-only JSONL event log replayed at startup, so a crash
can never lose more than an unflushed line and the in-memory state is
always reconstructible. A single lock serializes writes; agreement runs
on a snapshot and never blocks them.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import InsufficientData, InvalidAnnotation
from .evaluation import agreement_report
from .labels import (
    ErrorCategory,
    GoldAnnotation,
    GrammaticalityLabel,
    gold_to_row,
    majority_label,
)
from .prep import AnnotationItem, Chunk

ADJUDICATOR = "<adjudication>"
DEFAULT_CONTEXT_TURNS = 8


@dataclass
class AnnotationEvent:
    event_id: int
    timestamp: float
    kind: str  # "annotation" | "adjudication"
    annotator: str
    item_id: str
    label: GrammaticalityLabel
    categories: frozenset[ErrorCategory]

    def to_row(self) -> dict:
        return {
            "event_id": self.event_id,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "annotator": self.annotator,
            "item_id": self.item_id,
            "label": self.label.key,
            "categories": sorted(c.value for c in self.categories),
        }

    @classmethod
    def from_row(cls, row: dict) -> "AnnotationEvent":
        return cls(
            event_id=int(row["event_id"]),
            timestamp=float(row["timestamp"]),
            kind=row.get("kind", "annotation"),
            annotator=row["annotator"],
            item_id=row["item_id"],
            label=GrammaticalityLabel.from_string(row["label"]),
            categories=frozenset(ErrorCategory(c) for c in row.get("categories", [])),
        )


@dataclass
class ProjectState:
    """Items, chunks, and the replayable annotation event log."""

    chunks: list[Chunk]
    queue_policy: str = "majority"  # "majority" | "unanimity"
    quorum: int = 3
    log_path: Path | None = None
    events: list[AnnotationEvent] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.queue_policy not in ("majority", "unanimity"):
            raise ValueError(f"unknown queue policy {self.queue_policy!r}")
        self.items: dict[str, AnnotationItem] = {}
        self.item_positions: dict[str, tuple[str, int]] = {}
        for chunk in self.chunks:
            for pos, item in enumerate(chunk.items):
                self.items[item.item_id] = item
                self.item_positions[item.item_id] = (chunk.chunk_id, pos)
        if self.log_path is not None:
            self.log_path = Path(self.log_path)
            if self.log_path.exists():
                self._replay()

    # -- event log ----------------------------------------------------------

    def _replay(self) -> None:
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self.events.append(AnnotationEvent.from_row(json.loads(line)))

    def _append(self, event: AnnotationEvent) -> None:
        self.events.append(event)
        if self.log_path is not None:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_row(), ensure_ascii=False) + "\n")

    def record(
        self,
        annotator: str,
        item_id: str,
        label: GrammaticalityLabel,
        categories: frozenset[ErrorCategory],
        kind: str = "annotation",
    ) -> AnnotationEvent:
        if categories and label is not GrammaticalityLabel.UNGRAMMATICAL:
            raise InvalidAnnotation("error categories require the ungrammatical label")
        with self._lock:
            event = AnnotationEvent(
                event_id=len(self.events) + 1,
                timestamp=time.time(),
                kind=kind,
                annotator=annotator,
                item_id=item_id,
                label=label,
                categories=categories,
            )
            self._append(event)
            return event

    # -- derived state (latest event wins per annotator+item) ----------------

    def labels_for(self, item_id: str) -> dict[str, AnnotationEvent]:
        latest: dict[str, AnnotationEvent] = {}
        for event in self.events:
            if event.item_id == item_id and event.kind == "annotation":
                latest[event.annotator] = event
        return latest

    def all_latest(self) -> dict[str, dict[str, AnnotationEvent]]:
        latest: dict[str, dict[str, AnnotationEvent]] = {}
        for event in self.events:
            if event.kind == "annotation":
                latest.setdefault(event.item_id, {})[event.annotator] = event
        return latest

    def adjudicated(self) -> dict[str, AnnotationEvent]:
        out: dict[str, AnnotationEvent] = {}
        for event in self.events:
            if event.kind == "adjudication":
                out[event.item_id] = event
        return out

    def resolutions(self) -> dict[str, GoldAnnotation]:
        """Final labels: explicit adjudications plus auto-resolved quorum items."""
        latest = self.all_latest()
        adjudicated = self.adjudicated()
        out: dict[str, GoldAnnotation] = {}
        for item_id in self.items:
            adj = adjudicated.get(item_id)
            if adj is not None:
                out[item_id] = GoldAnnotation(
                    item_id=item_id, label=adj.label, categories=adj.categories
                )
                continue
            events = latest.get(item_id, {})
            if len(events) < self.quorum:
                continue
            labels = [e.label for e in events.values()]
            if self.queue_policy == "unanimity" and len(set(labels)) > 1:
                continue
            resolved = majority_label(labels, resolve=False)
            if resolved is None:
                continue
            categories = frozenset()
            if resolved is GrammaticalityLabel.UNGRAMMATICAL:
                categories = frozenset().union(
                    *(e.categories for e in events.values() if e.label is resolved)
                )
            out[item_id] = GoldAnnotation(
                item_id=item_id, label=resolved, categories=categories
            )
        return out

    def adjudication_queue(self) -> list[str]:
        """Quorum items still needing discussion under the active policy."""
        latest = self.all_latest()
        adjudicated = self.adjudicated()
        queued = []
        for chunk in self.chunks:
            for item in chunk.items:
                if item.item_id in adjudicated:
                    continue
                events = latest.get(item.item_id, {})
                if len(events) < self.quorum:
                    continue
                labels = [e.label for e in events.values()]
                if self.queue_policy == "unanimity":
                    if len(set(labels)) > 1:
                        queued.append(item.item_id)
                elif majority_label(labels, resolve=False) is None:
                    queued.append(item.item_id)
        return queued

    def agreement(self) -> dict:
        latest = self.all_latest()
        complete = {
            item_id: events
            for item_id, events in latest.items()
            if len(events) >= self.quorum
        }
        if len(complete) < 2:
            raise InsufficientData(
                f"{len(complete)} items at quorum; need at least 2"
            )
        per_annotator: dict[str, dict[str, GrammaticalityLabel]] = {}
        for item_id, events in complete.items():
            for annotator, event in events.items():
                per_annotator.setdefault(annotator, {})[item_id] = event.label
        report = agreement_report(per_annotator)
        report["n_complete_items"] = len(complete)
        return report

    def progress(self) -> dict:
        latest = self.all_latest()
        per_annotator: dict[str, int] = {}
        for events in latest.values():
            for annotator in events:
                per_annotator[annotator] = per_annotator.get(annotator, 0) + 1
        return {
            "n_items": len(self.items),
            "n_resolved": len(self.resolutions()),
            "queue_length": len(self.adjudication_queue()),
            "per_annotator": dict(sorted(per_annotator.items())),
            "queue_policy": self.queue_policy,
            "quorum": self.quorum,
        }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


class AnnotationBody(BaseModel):
    annotator: str
    item_id: str
    label: str
    categories: list[str] = []


class AdjudicationBody(BaseModel):
    item_id: str
    label: str
    categories: list[str] = []


def _parse_label(text: str) -> GrammaticalityLabel:
    try:
        return GrammaticalityLabel.from_string(text)
    except InvalidAnnotation as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _parse_categories(values: list[str]) -> frozenset[ErrorCategory]:
    try:
        return frozenset(ErrorCategory(v) for v in values)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"unknown error category: {exc}") from exc


def _item_view(state: ProjectState, item: AnnotationItem) -> dict:
    chunk_id, position = state.item_positions[item.item_id]
    return {
        "item_id": item.item_id,
        "chunk_id": chunk_id,
        "position": position,
        "transcript_id": item.transcript_id,
        "target_text": item.target_text,
        "context": [{"role": c.role.value, "text": c.text} for c in item.context],
        "context_default_turns": DEFAULT_CONTEXT_TURNS,
    }


def create_app(state: ProjectState, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="gramscope annotation service")

    @app.get("/api/items")
    def get_items(annotator: str, chunk: str, all: int = 0):
        chunks = {c.chunk_id: c for c in state.chunks}
        if chunk not in chunks:
            raise HTTPException(status_code=404, detail=f"unknown chunk {chunk!r}")
        selected = chunks[chunk]
        views = []
        for item in selected.items:
            if not all and annotator in state.labels_for(item.item_id):
                continue
            views.append(_item_view(state, item))
        return {
            "chunk_id": selected.chunk_id,
            "partial": selected.partial,
            "items": views,
        }

    @app.get("/api/chunks")
    def get_chunks():
        return [
            {"chunk_id": c.chunk_id, "partial": c.partial, "n_items": len(c.items)}
            for c in state.chunks
        ]

    @app.post("/api/annotations", status_code=201)
    def post_annotation(body: AnnotationBody):
        if body.item_id not in state.items:
            raise HTTPException(status_code=404, detail=f"unknown item {body.item_id!r}")
        label = _parse_label(body.label)
        categories = _parse_categories(body.categories)
        try:
            event = state.record(body.annotator, body.item_id, label, categories)
        except InvalidAnnotation as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"event_id": event.event_id, "item_id": event.item_id}

    @app.get("/api/agreement")
    def get_agreement():
        try:
            return state.agreement()
        except InsufficientData as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.get("/api/progress")
    def get_progress():
        return state.progress()

    @app.get("/api/adjudication")
    def get_adjudication():
        queued = []
        for item_id in state.adjudication_queue():
            view = _item_view(state, state.items[item_id])
            view["labels"] = {
                annotator: {
                    "label": event.label.key,
                    "categories": sorted(c.value for c in event.categories),
                }
                for annotator, event in state.labels_for(item_id).items()
            }
            queued.append(view)
        return {"policy": state.queue_policy, "items": queued}

    @app.post("/api/adjudication", status_code=201)
    def post_adjudication(body: AdjudicationBody):
        if body.item_id not in state.items:
            raise HTTPException(status_code=404, detail=f"unknown item {body.item_id!r}")
        if len(state.labels_for(body.item_id)) < state.quorum:
            raise HTTPException(
                status_code=409, detail="item has not reached annotator quorum"
            )
        label = _parse_label(body.label)
        categories = _parse_categories(body.categories)
        try:
            event = state.record(
                ADJUDICATOR, body.item_id, label, categories, kind="adjudication"
            )
        except InvalidAnnotation as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"event_id": event.event_id, "item_id": event.item_id}

    @app.get("/api/export")
    def get_export():
        resolutions = state.resolutions()
        lines = []
        for chunk in state.chunks:
            for item in chunk.items:
                gold = resolutions.get(item.item_id)
                if gold is not None:
                    lines.append(json.dumps(gold_to_row(gold), ensure_ascii=False))
        body = "\n".join(lines)
        if body:
            body += "\n"
        return PlainTextResponse(body, media_type="application/x-ndjson")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
