"""CHAT (.cha) transcript ingestion.

Parses CHILDES CHAT files into normalized transcripts: one utterance per
main tier, with a speaker role, surface tokens cleaned of transcription
markup, and the target child's age when the @ID header provides it.

The cleaning policy is declared here rather than inherited from any other
tool: replacement targets are substituted, comment/event codes are dropped,
retraced and disfluent material is kept (classifiers must see it), and
form-marker suffixes ("word@o") are stripped. See ``clean_utterance``.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import MalformedAge, UnreadableFile

log = logging.getLogger(__name__)

DAYS_PER_MONTH = 30.4375  # 365.25 / 12


class SpeakerRole(str, Enum):
    CHILD = "child"
    CAREGIVER = "caregiver"
    OTHER_ADULT = "other_adult"
    OTHER_CHILD = "other_child"
    UNKNOWN = "unknown"


_ROLE_BY_CODE = {
    "CHI": SpeakerRole.CHILD,
    "MOT": SpeakerRole.CAREGIVER,
    "FAT": SpeakerRole.CAREGIVER,
    "GRA": SpeakerRole.CAREGIVER,
    "GRF": SpeakerRole.CAREGIVER,
    "GRM": SpeakerRole.CAREGIVER,
    "OCH": SpeakerRole.OTHER_CHILD,
    "SIB": SpeakerRole.OTHER_CHILD,
    "BRO": SpeakerRole.OTHER_CHILD,
    "SIS": SpeakerRole.OTHER_CHILD,
    "INV": SpeakerRole.OTHER_ADULT,
    "ADU": SpeakerRole.OTHER_ADULT,
    "TEA": SpeakerRole.OTHER_ADULT,
    "EXP": SpeakerRole.OTHER_ADULT,
    "OBS": SpeakerRole.OTHER_ADULT,
    "VIS": SpeakerRole.OTHER_ADULT,
    "NUR": SpeakerRole.OTHER_ADULT,
}


def role_for_code(code: str) -> SpeakerRole:
    """Map a CHAT participant code to a role. Total: unknown codes never fail."""
    return _ROLE_BY_CODE.get(code.strip().upper(), SpeakerRole.UNKNOWN)


class Terminator(str, Enum):
    PERIOD = "period"
    QUESTION = "question"
    EXCLAMATION = "exclamation"
    TRAILING_OFF = "trailing_off"
    INTERRUPTION = "interruption"
    OTHER = "other"


_TERMINATORS = {
    ".": Terminator.PERIOD,
    "?": Terminator.QUESTION,
    "!": Terminator.EXCLAMATION,
    "+...": Terminator.TRAILING_OFF,
    "+..?": Terminator.TRAILING_OFF,
    "+/.": Terminator.INTERRUPTION,
    "+/?": Terminator.INTERRUPTION,
    "+//.": Terminator.INTERRUPTION,
    "+//?": Terminator.INTERRUPTION,
}


@dataclass(frozen=True)
class AgeSpec:
    """A child age in the CHAT "Y;MM.DD" convention."""

    years: int
    months: int = 0
    days: int = 0

    def __post_init__(self):
        if self.years < 0 or not (0 <= self.months <= 11) or not (0 <= self.days <= 30):
            raise MalformedAge(f"age fields out of range: {self.years};{self.months}.{self.days}")

    @property
    def total_months(self) -> float:
        return 12 * self.years + self.months + self.days / DAYS_PER_MONTH

    def format(self) -> str:
        return f"{self.years};{self.months:02d}.{self.days:02d}"


_AGE_RE = re.compile(r"^(\d+)(?:;(\d+)(?:\.(\d+))?)?$")


def parse_age(text: str) -> AgeSpec:
    """Parse "Y;MM.DD", "Y;MM", or "Y"; missing parts default to zero."""
    m = _AGE_RE.match(text.strip())
    if not m:
        raise MalformedAge(f"cannot parse age {text!r}")
    years, months, days = (int(g) if g else 0 for g in m.groups())
    return AgeSpec(years, months, days)


@dataclass
class Utterance:
    index: int
    speaker: SpeakerRole
    speaker_code: str
    raw_text: str
    tokens: list[str]
    is_intelligible: bool
    terminator: Terminator

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass
class Transcript:
    transcript_id: str
    corpus: str
    child_age: AgeSpec | None
    utterances: list[Utterance] = field(default_factory=list)

    @property
    def child_age_months(self) -> float | None:
        return self.child_age.total_months if self.child_age else None


# ---------------------------------------------------------------------------
# Main-tier cleaning
# ---------------------------------------------------------------------------

_UNINTELLIGIBLE = {"xxx", "yyy", "www"}
_UNINTELLIGIBLE_RE = re.compile(r"(?:^|\s)(?:xxx|yyy|www)(?::\S*)?(?=\s|$)")
# "word [: replacement]" or "<several words> [: replacement]"
_REPLACEMENT_RE = re.compile(r"(?:<[^<>]*>|\S+)\s*\[:+\s*([^\]]*?)\s*\]")
_BRACKET_RE = re.compile(r"\[[^\[\]]*\]")
_PUNCT_ONLY_RE = re.compile(r"^[\W_]+$")


def _detect_terminator(raw: str) -> Terminator:
    for tok in reversed(raw.split()):
        if tok in _TERMINATORS:
            return _TERMINATORS[tok]
        if tok.startswith("+"):
            return Terminator.OTHER
        last = tok[-1]
        if last in ".?!":
            return _TERMINATORS[last]
    return Terminator.OTHER


def clean_utterance(raw: str) -> tuple[list[str], bool, Terminator]:
    """Normalize one main-tier payload to surface word tokens.

    Returns (tokens, is_intelligible, terminator). Total: never raises.
    Rules, in order: replacement codes substituted; bracketed codes and
    "&"-prefixed events/fillers/fragments deleted (retraced material kept);
    form-marker "@" suffixes stripped; case preserved; terminator read off
    the final punctuation; whitespace split. Unintelligible markers
    (xxx/yyy/www) are removed and flag the utterance, as does an empty
    token list after cleaning.
    """
    text = raw.strip()
    terminator = _detect_terminator(text)

    unintelligible = bool(_UNINTELLIGIBLE_RE.search(text))
    text = _UNINTELLIGIBLE_RE.sub(" ", text)

    text = _REPLACEMENT_RE.sub(r" \1 ", text)
    # nested groups like [% see [:= note]] resolve innermost-first
    while _BRACKET_RE.search(text):
        text = _BRACKET_RE.sub(" ", text)
    # angle brackets only scope markers; the material itself stays
    text = text.replace("<", " ").replace(">", " ")
    # parentheses mark shortened productions ("(be)cause"); keep the form
    text = text.replace("(", "").replace(")", "")

    tokens: list[str] = []
    for tok in text.split():
        if tok.startswith("&"):  # events, fillers, phonological fragments
            continue
        if tok.startswith("0"):  # omitted-word placeholders were never said
            continue
        tok = tok.split("@", 1)[0]  # form-marker suffix: vroom@o -> vroom
        tok = tok.strip(".,!?;:“”‹›„‡")
        if not tok or tok.startswith("+") or _PUNCT_ONLY_RE.match(tok):
            continue
        if tok.lower() in _UNINTELLIGIBLE:
            unintelligible = True
            continue
        tokens.append(tok)

    if not tokens:
        unintelligible = True
    return tokens, not unintelligible, terminator


# ---------------------------------------------------------------------------
# File parsing
# ---------------------------------------------------------------------------

_MAIN_TIER_RE = re.compile(r"^\*([A-Za-z0-9]+):\s?(.*)$")


def _logical_lines(text: str):
    """Join tab-indented continuation lines onto their tier line."""
    current: str | None = None
    for line in text.split("\n"):
        line = line.rstrip("\r\n")
        if line.startswith(("\t", "    ")) and current is not None:
            current += " " + line.strip()
        else:
            if current is not None:
                yield current
            current = line
    if current is not None:
        yield current


def parse_chat_file(path: str | Path, corpus: str | None = None) -> Transcript:
    """Parse one .cha file into a Transcript.

    The corpus name defaults to the @ID header's corpus field, then to the
    parent directory name. A malformed main tier is logged and skipped,
    never fatal. The child age comes from the CHI participant's @ID line;
    a transcript without one still parses (age left unset).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    text = text.lstrip("﻿")

    child_age: AgeSpec | None = None
    header_corpus: str | None = None
    utterances: list[Utterance] = []

    for line in _logical_lines(text):
        if line.startswith("@"):
            if line.startswith("@ID:"):
                fields = [f.strip() for f in line[4:].split("|")]
                if len(fields) >= 4 and fields[2].upper() == "CHI":
                    header_corpus = header_corpus or fields[1] or None
                    if fields[3]:
                        try:
                            child_age = child_age or parse_age(fields[3])
                        except MalformedAge:
                            log.warning("%s: unparseable CHI age %r", path.name, fields[3])
            continue
        if line.startswith("%") or not line.strip():
            continue
        if line.startswith("*"):
            m = _MAIN_TIER_RE.match(line)
            if not m:
                log.warning("%s: malformed main tier skipped: %r", path.name, line[:60])
                continue
            code, payload = m.group(1), m.group(2)
            tokens, intelligible, terminator = clean_utterance(payload)
            utterances.append(
                Utterance(
                    index=len(utterances),
                    speaker=role_for_code(code),
                    speaker_code=code.upper(),
                    raw_text=payload,
                    tokens=tokens,
                    is_intelligible=intelligible,
                    terminator=terminator,
                )
            )

    corpus = corpus or header_corpus or path.parent.name
    return Transcript(
        transcript_id=f"{corpus}/{path.stem}",
        corpus=corpus,
        child_age=child_age,
        utterances=utterances,
    )


# ---------------------------------------------------------------------------
# Canonical corpus JSONL
# ---------------------------------------------------------------------------


def transcript_to_rows(transcript: Transcript) -> list[dict]:
    return [
        {
            "transcript_id": transcript.transcript_id,
            "corpus": transcript.corpus,
            "child_age_months": transcript.child_age_months,
            "utt_index": u.index,
            "speaker_role": u.speaker.value,
            "tokens": u.tokens,
            "raw_text": u.raw_text,
            "intelligible": u.is_intelligible,
            "terminator": u.terminator.value,
        }
        for u in transcript.utterances
    ]


def write_corpus_jsonl(transcripts: list[Transcript], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for t in transcripts:
            for row in transcript_to_rows(t):
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
                n += 1
    return n


def _age_from_months(months: float | None) -> AgeSpec | None:
    if months is None:
        return None
    years = int(months // 12)
    rem = months - 12 * years
    whole = min(int(rem), 11)
    days = min(int(round((rem - whole) * DAYS_PER_MONTH)), 30)
    return AgeSpec(years, whole, days)


def read_corpus_jsonl(path: str | Path) -> list[Transcript]:
    """Rebuild transcripts (in file order) from the canonical corpus JSONL."""
    transcripts: dict[str, Transcript] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            tid = row["transcript_id"]
            if tid not in transcripts:
                transcripts[tid] = Transcript(
                    transcript_id=tid,
                    corpus=row.get("corpus", ""),
                    child_age=_age_from_months(row.get("child_age_months")),
                )
            t = transcripts[tid]
            t.utterances.append(
                Utterance(
                    index=row["utt_index"],
                    speaker=SpeakerRole(row["speaker_role"]),
                    speaker_code=row.get("speaker_code", ""),
                    raw_text=row.get("raw_text", ""),
                    tokens=list(row["tokens"]),
                    is_intelligible=bool(row["intelligible"]),
                    terminator=Terminator(row.get("terminator", "other")),
                )
            )
    return list(transcripts.values())
