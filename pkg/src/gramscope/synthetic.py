"""Synthetic dialog corpora with planted, known-label grammaticality.

Three generators back the acceptance suite: a template corpus where
ungrammaticality is injected by deterministic rules (dropped determiners,
dropped subjects, broken agreement), a question-answer corpus where the
same elliptical answer is grammatical or not depending on the preceding
question, and an age-trend corpus with a known per-month logistic slope.
"""

from __future__ import annotations

import numpy as np

from .chat import SpeakerRole, Terminator, Utterance
from .classifiers import Prediction
from .labels import ErrorCategory, GoldAnnotation, GrammaticalityLabel
from .prep import AnnotationItem, ContextTurn

_SUBJECTS_3SG = ["he", "she", "it"]
_SUBJECTS_PL = ["I", "you", "we", "they"]
_VERBS = [
    ("want", "wants"),
    ("see", "sees"),
    ("like", "likes"),
    ("need", "needs"),
    ("have", "has"),
    ("find", "finds"),
    ("hear", "hears"),
    ("get", "gets"),
]
_PAST_FORMS = [
    ("took", "taked"),
    ("found", "finded"),
    ("got", "getted"),
    ("saw", "seed"),
]
_DETERMINERS = ["the", "a", "my", "your", "his", "her", "that", "this"]
_ADJECTIVES = ["big", "red", "little", "blue", "funny", "old", "new", "green"]
_NOUNS = [
    "ball", "truck", "dog", "cookie", "book", "hat", "cup", "car",
    "duck", "sock", "train", "doll", "apple", "bear", "cat", "bird",
    "spoon", "chair", "shoe", "bus", "boat", "frog", "horse", "kite",
]
_ONOMATOPOEIA = ["vroom", "miaow", "moo", "beep", "woof", "quack"]
_CAREGIVER_TURNS = [
    ["what", "do", "you", "want"],
    ["look", "at", "that"],
    ["tell", "me", "about", "it"],
    ["that", "is", "nice"],
    ["what", "is", "that"],
    ["where", "is", "it"],
    ["do", "you", "like", "it"],
    ["oh", "wow"],
]

DEFAULT_PLANTED_CATEGORIES = (
    ErrorCategory.DETERMINER,
    ErrorCategory.SUBJECT,
    ErrorCategory.SV_AGREEMENT,
)


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(0, len(seq)))]


def _make_item(
    transcript_id: str,
    turn_index: int,
    target_tokens: list[str],
    context: list[ContextTurn],
    age_months: float | None,
    n_context: int,
) -> AnnotationItem:
    target = Utterance(
        index=turn_index,
        speaker=SpeakerRole.CHILD,
        speaker_code="CHI",
        raw_text=" ".join(target_tokens) + " .",
        tokens=target_tokens,
        is_intelligible=True,
        terminator=Terminator.PERIOD,
    )
    return AnnotationItem(
        item_id=f"{transcript_id}:{turn_index}",
        transcript_id=transcript_id,
        target=target,
        context=list(context[-n_context:]) if n_context else [],
        child_age_months=age_months,
    )


def _noun_phrase(rng: np.random.Generator) -> list[str]:
    tokens = [_pick(rng, _DETERMINERS)]
    if rng.random() < 0.5:
        tokens.append(_pick(rng, _ADJECTIVES))
    tokens.append(_pick(rng, _NOUNS))
    return tokens


def _grammatical_sentence(rng: np.random.Generator) -> list[str]:
    # a slice of grammatical turns are elliptical noun-phrase answers whose
    # surface form is identical to the "ambiguous" bare-NP case; target-only
    # models cannot fully separate the two, as in the real scheme
    if rng.random() < 0.15:
        return _noun_phrase(rng)
    kind = int(rng.integers(0, 5))
    det = _pick(rng, _DETERMINERS)
    noun = _pick(rng, _NOUNS)
    if kind == 0:
        subj, verb = _subject_verb(rng)
        return [subj, verb, det, noun]
    if kind == 1:
        subj, verb = _subject_verb(rng)
        return [subj, verb, det, _pick(rng, _ADJECTIVES), noun]
    if kind == 2:
        return ["that", "is", det, _pick(rng, _ADJECTIVES), noun]
    if kind == 3:
        past, _wrong = _pick(rng, _PAST_FORMS)
        return [_pick(rng, _SUBJECTS_3SG + _SUBJECTS_PL), past, det, noun]
    return ["look", "at", det, noun]


def _subject_verb(rng: np.random.Generator) -> tuple[str, str]:
    base, third = _pick(rng, _VERBS)
    if rng.random() < 0.5:
        return _pick(rng, _SUBJECTS_3SG), third
    return _pick(rng, _SUBJECTS_PL), base


def _plant_error(
    rng: np.random.Generator, category: ErrorCategory
) -> list[str]:
    noun = _pick(rng, _NOUNS)
    if category is ErrorCategory.DETERMINER:
        # "he wants ball"
        subj, verb = _subject_verb(rng)
        return [subj, verb, noun]
    det = _pick(rng, _DETERMINERS)
    base, third = _pick(rng, _VERBS)
    if category is ErrorCategory.SUBJECT:
        # "wants the ball"
        verb = third if rng.random() < 0.5 else base
        return [verb, det, noun]
    if category is ErrorCategory.SV_AGREEMENT:
        # "he want the ball" / "they wants the ball"
        if rng.random() < 0.5:
            return [_pick(rng, _SUBJECTS_3SG), base, det, noun]
        return [_pick(rng, _SUBJECTS_PL), third, det, noun]
    if category is ErrorCategory.VERB:
        # "that his ball" (copula dropped)
        return ["that", det, _pick(rng, _ADJECTIVES), noun]
    if category is ErrorCategory.TENSE_ASPECT:
        # overregularized past: "he taked the ball"
        _past, wrong = _pick(rng, _PAST_FORMS)
        return [_pick(rng, _SUBJECTS_3SG + _SUBJECTS_PL), wrong, det, noun]
    raise ValueError(f"no planting rule for category {category.value}")


def _ambiguous_utterance(rng: np.random.Generator) -> list[str]:
    r = rng.random()
    if r < 0.4:
        word = _pick(rng, _ONOMATOPOEIA)
        return [word] * int(rng.integers(2, 4))
    if r < 0.8:
        return _noun_phrase(rng)
    return ["do", "this" if rng.random() < 0.5 else "that"]


def gen_classification_corpus(
    n_items: int = 10000,
    n_transcripts: int | None = None,
    p_ungrammatical: float = 0.3,
    p_ambiguous: float = 0.15,
    categories: tuple[ErrorCategory, ...] = DEFAULT_PLANTED_CATEGORIES,
    seed: int = 0,
    n_context: int = 10,
) -> tuple[list[AnnotationItem], list[GoldAnnotation]]:
    """Template dialogs with errors planted at known rates."""
    rng = np.random.default_rng(seed)
    if n_transcripts is None:
        n_transcripts = max(5, n_items // 100)
    per_transcript = _spread(n_items, n_transcripts)

    items: list[AnnotationItem] = []
    gold: list[GoldAnnotation] = []
    for t, count in enumerate(per_transcript):
        tid = f"syn-{t:04d}"
        age = float(rng.uniform(24.0, 60.0))
        turns: list[ContextTurn] = []
        for _ in range(count):
            turns.append(
                ContextTurn(role=SpeakerRole.CAREGIVER, tokens=_pick(rng, _CAREGIVER_TURNS))
            )
            r = rng.random()
            item_categories: frozenset[ErrorCategory] = frozenset()
            if r < p_ungrammatical:
                label = GrammaticalityLabel.UNGRAMMATICAL
                category = _pick(rng, categories)
                tokens = _plant_error(rng, category)
                item_categories = frozenset({category})
            elif r < p_ungrammatical + p_ambiguous:
                label = GrammaticalityLabel.AMBIGUOUS
                tokens = _ambiguous_utterance(rng)
            else:
                label = GrammaticalityLabel.GRAMMATICAL
                tokens = _grammatical_sentence(rng)
            item = _make_item(tid, len(turns), tokens, turns, age, n_context)
            items.append(item)
            gold.append(
                GoldAnnotation(item_id=item.item_id, label=label, categories=item_categories)
            )
            turns.append(ContextTurn(role=SpeakerRole.CHILD, tokens=tokens))
    return items, gold


_Q_CONCEPT = [
    ["how", "do", "we", "call", "this"],
    ["how", "do", "you", "call", "this"],
    ["what", "do", "we", "call", "this"],
]
_Q_DETERMINER = [
    ["what", "is", "this"],
    ["what", "is", "that"],
    ["what", "do", "you", "see"],
]


def gen_context_corpus(
    n_items: int = 6000,
    n_transcripts: int | None = None,
    p_bare_answer: float = 0.8,
    seed: int = 0,
    n_context: int = 10,
) -> tuple[list[AnnotationItem], list[GoldAnnotation]]:
    """Question-answer dialogs where the label depends on the question.

    A bare noun-phrase answer ("red ball") is grammatical after a
    concept question and ungrammatical (missing determiner) after a
    determiner-requiring question; the target string alone cannot tell
    the two apart.
    """
    rng = np.random.default_rng(seed)
    if n_transcripts is None:
        n_transcripts = max(5, n_items // 100)
    per_transcript = _spread(n_items, n_transcripts)

    items: list[AnnotationItem] = []
    gold: list[GoldAnnotation] = []
    for t, count in enumerate(per_transcript):
        tid = f"ctx-{t:04d}"
        age = float(rng.uniform(24.0, 60.0))
        turns: list[ContextTurn] = []
        for _ in range(count):
            concept_question = rng.random() < 0.5
            question = _pick(rng, _Q_CONCEPT if concept_question else _Q_DETERMINER)
            turns.append(ContextTurn(role=SpeakerRole.CAREGIVER, tokens=question))

            answer = [_pick(rng, _ADJECTIVES), _pick(rng, _NOUNS)]
            if rng.random() < p_bare_answer:
                label = (
                    GrammaticalityLabel.GRAMMATICAL
                    if concept_question
                    else GrammaticalityLabel.UNGRAMMATICAL
                )
                categories = (
                    frozenset()
                    if concept_question
                    else frozenset({ErrorCategory.DETERMINER})
                )
            else:
                answer = [_pick(rng, _DETERMINERS)] + answer
                label = GrammaticalityLabel.GRAMMATICAL
                categories = frozenset()

            item = _make_item(tid, len(turns), answer, turns, age, n_context)
            items.append(item)
            gold.append(
                GoldAnnotation(item_id=item.item_id, label=label, categories=categories)
            )
            turns.append(ContextTurn(role=SpeakerRole.CHILD, tokens=answer))
    return items, gold


def gen_trend_corpus(
    n_utterances: int = 50000,
    n_transcripts: int = 200,
    beta_per_month: float = 0.014,
    intercept: float | None = None,
    cluster_sd: float = 0.15,
    age_range: tuple[float, float] = (24.0, 60.0),
    seed: int = 0,
) -> tuple[list[AnnotationItem], list[Prediction]]:
    """Utterances whose P(grammatical) follows a known logistic age trend.

    Each transcript has one age and a small random intercept, so the
    clustering that the bootstrap is meant to absorb is really there.
    """
    rng = np.random.default_rng(seed)
    if intercept is None:
        # keep P(grammatical) near 0.55 at the age-range midpoint
        mid = (age_range[0] + age_range[1]) / 2.0
        intercept = float(np.log(0.55 / 0.45)) - beta_per_month * mid

    per_transcript = _spread(n_utterances, n_transcripts)
    items: list[AnnotationItem] = []
    predictions: list[Prediction] = []
    for t, count in enumerate(per_transcript):
        tid = f"trend-{t:04d}"
        age = float(rng.uniform(*age_range))
        offset = float(rng.normal(0.0, cluster_sd))
        p_gram = 1.0 / (1.0 + np.exp(-(intercept + beta_per_month * age + offset)))
        outcomes = rng.random(count) < p_gram
        ambiguous_share = rng.random(count) < 0.3  # split of non-grammatical turns
        for i, is_gram in enumerate(outcomes):
            tokens = [_pick(rng, _DETERMINERS), _pick(rng, _NOUNS)]
            item = _make_item(tid, i, tokens, [], age, 0)
            items.append(item)
            if is_gram:
                label = GrammaticalityLabel.GRAMMATICAL
            elif ambiguous_share[i]:
                label = GrammaticalityLabel.AMBIGUOUS
            else:
                label = GrammaticalityLabel.UNGRAMMATICAL
            predictions.append(
                Prediction(
                    item_id=item.item_id,
                    label=label,
                    scores=[1.0 if l is label else 0.0 for l in GrammaticalityLabel],
                )
            )
    return items, predictions


def _spread(total: int, bins: int) -> list[int]:
    base = total // bins
    rem = total % bins
    return [base + (1 if i < rem else 0) for i in range(bins)]
