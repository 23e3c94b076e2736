import pytest

from gramscope.chat import SpeakerRole, Terminator, Utterance
from gramscope.errors import EmptyCorpus
from gramscope.prep import AnnotationItem, ContextTurn
from gramscope.tokenization import (
    CAREGIVER_TOKEN,
    CHILD_TOKEN,
    SPECIALS,
    UNK_TOKEN,
    BpeTokenizer,
    _apply_merge,
    _word_symbols,
)


def fit(corpus, vocab_size=200):
    return BpeTokenizer(vocab_size=vocab_size).fit(corpus)


class TestTraining:
    def test_first_merge_on_repeated_pair(self):
        # brute-force pair counting on ["aaab"] * 100: (a,a) occurs 200 times,
        # (a,b</w>) 100 times
        tok = fit([["aaab"]] * 100)
        assert tok.merges_[0] == ("a", "a")

    def test_tiny_vocab_returns_characters_only(self):
        tok = fit([["abcdef", "ghij"]], vocab_size=3)
        assert tok.merges_ == []
        assert all(sym in tok.vocab_ for sym in SPECIALS)

    def test_stops_when_no_pair_repeats(self):
        tok = fit([["ab", "cd"]], vocab_size=10000)
        assert tok.merges_ == []

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            fit([])
        with pytest.raises(EmptyCorpus):
            fit([[]])

    def test_specials_occupy_lowest_ids(self):
        tok = fit([["hello", "world"]] * 5)
        assert [tok.vocab_[s] for s in SPECIALS] == [0, 1, 2, 3]

    def test_merges_never_produce_specials(self):
        tok = fit([["hello", "world", "hello"]] * 10)
        for a, b in tok.merges_:
            assert a + b not in SPECIALS

    def test_deterministic(self):
        corpus = [["the", "cat", "sat"], ["the", "mat"]] * 20
        t1, t2 = fit(corpus), fit(corpus)
        assert t1.vocab_ == t2.vocab_
        assert t1.merges_ == t2.merges_

    def test_tie_break_lexicographic(self):
        # "xy" and "ab" pairs both occur twice; ("a","b</w>") sorts first
        tok = fit([["ab", "ab", "xy", "xy"]], vocab_size=9)
        assert tok.merges_[0] == ("a", "b</w>")


def segment_by_in_order_merges(word, merges):
    """Oracle: apply the merge list strictly in training order."""
    symbols = _word_symbols(word)
    for pair in merges:
        symbols = _apply_merge(symbols, pair)
    return symbols


class TestEncoding:
    @pytest.fixture()
    def corpus(self):
        words = ["hello", "help", "held", "world", "word", "walk", "talk", "tall"]
        return [[w] for w in words for _ in range(3)]

    def test_training_segmentation_reproduced(self, corpus):
        tok = fit(corpus, vocab_size=60)
        for tokens in corpus:
            for word in tokens:
                assert tok.segment_word(word) == segment_by_in_order_merges(
                    word, tok.merges_
                )

    def test_unseen_words_match_in_order_oracle(self, corpus):
        tok = fit(corpus, vocab_size=60)
        for word in ["hell", "walker", "torch", "low"]:
            assert tok.segment_word(word) == segment_by_in_order_merges(
                word, tok.merges_
            )

    def test_unknown_characters_map_to_unk(self, corpus):
        tok = fit(corpus)
        unk = tok.vocab_[UNK_TOKEN]
        ids = tok.encode_word("Zq7")
        assert ids == [unk] * len(ids) and len(ids) >= 1

    def test_save_load_round_trip(self, corpus, tmp_path):
        tok = fit(corpus, vocab_size=60)
        path = tmp_path / "tokenizer.json"
        tok.save(path)
        loaded = BpeTokenizer.load(path)
        assert loaded.vocab_ == tok.vocab_
        assert loaded.merges_ == tok.merges_
        for word in ["hello", "walker"]:
            assert loaded.encode_word(word) == tok.encode_word(word)


def make_item(target_words, context=()):
    target = Utterance(
        index=len(context),
        speaker=SpeakerRole.CHILD,
        speaker_code="CHI",
        raw_text=" ".join(target_words),
        tokens=list(target_words),
        is_intelligible=True,
        terminator=Terminator.PERIOD,
    )
    turns = [ContextTurn(role=r, tokens=list(ws)) for r, ws in context]
    return AnnotationItem(
        item_id="t:0", transcript_id="t", target=target, context=turns
    )


class TestEncodeItem:
    @pytest.fixture()
    def tok(self):
        return fit([["hi", "mum", "there"]] * 5)

    def test_speaker_tokens_prepended(self, tok):
        item = make_item(["hi", "mum"], context=[(SpeakerRole.CAREGIVER, ["hi"])])
        ids = tok.encode_item(item, context_turns=8)
        car, chi = tok.vocab_[CAREGIVER_TOKEN], tok.vocab_[CHILD_TOKEN]
        hi = tok.encode_word("hi")
        mum = tok.encode_word("mum")
        assert ids == [car] + hi + [chi] + hi + mum

    def test_no_context_starts_with_child_token(self, tok):
        item = make_item(["hi", "mum"])
        ids = tok.encode_item(item, context_turns=8)
        assert ids[0] == tok.vocab_[CHILD_TOKEN]

    def test_other_adult_encodes_as_caregiver(self, tok):
        item = make_item(["hi", "mum"], context=[(SpeakerRole.OTHER_ADULT, ["there"])])
        ids = tok.encode_item(item, context_turns=8)
        assert ids[0] == tok.vocab_[CAREGIVER_TOKEN]

    def test_context_turns_zero_isolates_target(self, tok):
        item = make_item(["hi", "mum"], context=[(SpeakerRole.CAREGIVER, ["hi"])])
        assert tok.encode_item(item, 0) == tok.encode_item(make_item(["hi", "mum"]), 0)

    def test_context_truncates_to_nearest_turns(self, tok):
        turns = [(SpeakerRole.CAREGIVER, ["hi"]), (SpeakerRole.CHILD, ["mum"]),
                 (SpeakerRole.CAREGIVER, ["there"])]
        item = make_item(["hi"], context=turns)
        one = tok.encode_item(item, context_turns=1)
        assert one[0] == tok.vocab_[CAREGIVER_TOKEN]
        assert one[1:][: len(tok.encode_word("there"))] == tok.encode_word("there")

    def test_placeholder_turn_is_single_unk(self, tok):
        item = make_item(["hi", "mum"], context=[(SpeakerRole.CHILD, ["<unk-utt>"])])
        ids = tok.encode_item(item, context_turns=8)
        assert ids[:2] == [tok.vocab_[CHILD_TOKEN], tok.vocab_[UNK_TOKEN]]
