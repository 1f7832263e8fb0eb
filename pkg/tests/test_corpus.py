"""Tokenizer, span projection/decoding, and corpus file round trips."""

import json

import pytest

from acroex.corpus import (
    CharSpan,
    CorpusFormatError,
    Document,
    TAGS,
    Token,
    decode_tags,
    documents_from_records,
    load_corpus,
    normalize_spans,
    project_spans,
    save_corpus,
    sentences_from_documents,
    slice_key,
    tokenize,
)
from acroex.rng import SplitMix64


def surfaces(tokens):
    return [t.surface for t in tokens]


class TestTokenize:
    def test_plain_sentence(self):
        toks = tokenize("XGBoost is an acronym of eXtreme Gradient Boosting")
        assert len(toks) == 8
        assert toks[0].surface == "XGBoost"
        assert toks[0].span == CharSpan(0, 7)

    def test_empty(self):
        assert tokenize("") == []

    def test_whitespace_only(self):
        assert tokenize(" \t\n") == []

    def test_parens_and_period(self):
        assert surfaces(tokenize("model (LSTM).")) == ["model", "(", "LSTM", ")", "."]

    def test_parens_inside_word(self):
        # bracket characters split even with no surrounding whitespace
        assert surfaces(tokenize("a(b)c")) == ["a", "(", "b", ")", "c"]

    def test_leading_and_trailing_punctuation(self):
        assert surfaces(tokenize('"quoted," he said...')) == [
            '"', "quoted", ",", '"', "he", "said", ".", ".", ".",
        ]

    def test_inner_punctuation_kept(self):
        assert surfaces(tokenize("short-term e.g. x")) == ["short-term", "e.g", ".", "x"]

    def test_unicode_brackets_and_letters(self):
        assert surfaces(tokenize("mô hình (LSTM)")) == ["mô", "hình", "(", "LSTM", ")"]

    def test_spans_point_into_text(self):
        text = "alpha (beta), gamma."
        for tok in tokenize(text):
            assert text[tok.span.start : tok.span.end] == tok.surface

    def test_spans_partition_non_whitespace(self):
        rng = SplitMix64(31)
        alphabet = "ab (),.;-ü"
        for _ in range(200):
            text = "".join(
                alphabet[rng.next_below(len(alphabet))] for _ in range(rng.next_below(30))
            )
            toks = tokenize(text)
            covered = set()
            prev_end = -1
            for tok in toks:
                assert tok.span.start >= prev_end
                prev_end = tok.span.end
                covered.update(range(tok.span.start, tok.span.end))
            expected = {i for i, ch in enumerate(text) if not ch.isspace()}
            assert covered == expected

    def test_deterministic(self):
        text = "Støtte (EU) nr. 1234/2011, avec ¡marks!"
        assert tokenize(text) == tokenize(text)


class TestProjectSpans:
    def test_hand_example(self):
        text = "long short-term memory (LSTM)"
        toks = tokenize(text)
        assert surfaces(toks) == ["long", "short-term", "memory", "(", "LSTM", ")"]
        tags = project_spans(toks, [CharSpan(24, 28)], [CharSpan(0, 22)])
        assert tags == ["B-long", "I-long", "I-long", "O", "B-short", "O"]

    def test_no_spans_all_outside(self):
        toks = tokenize("nothing to see here")
        assert project_spans(toks, [], []) == ["O"] * 4

    def test_partial_overlap_single_token(self):
        toks = tokenize("abcdef ghij")
        tags = project_spans(toks, [CharSpan(2, 4)], [])
        assert tags == ["B-short", "O"]

    def test_conflict_short_wins(self, caplog):
        toks = tokenize("alpha beta gamma")
        with caplog.at_level("WARNING", logger="acroex.corpus"):
            tags = project_spans(toks, [CharSpan(6, 10)], [CharSpan(0, 16)])
        assert tags[1] == "B-short"
        assert any("short" in rec.message for rec in caplog.records)

    def test_conflict_repair_keeps_bio_valid(self):
        # short span punches a hole in the middle of a long span; the long
        # continuation must be promoted to B-long
        toks = tokenize("aa bb cc")
        tags = project_spans(toks, [CharSpan(3, 5)], [CharSpan(0, 8)])
        assert tags == ["B-long", "B-short", "B-long"]

    def test_always_valid_bio_random(self):
        rng = SplitMix64(77)
        for _ in range(300):
            n_tokens = 1 + rng.next_below(12)
            words = ["w%d" % rng.next_below(30) for _ in range(n_tokens)]
            toks = tokenize(" ".join(words))
            spans = _random_token_aligned_spans(toks, rng)
            half = rng.next_below(len(spans) + 1)
            tags = project_spans(toks, spans[:half], spans[half:])
            _assert_valid_bio(tags)


def _random_token_aligned_spans(tokens, rng):
    spans = []
    i = 0
    while i < len(tokens):
        if rng.next_below(2):
            j = min(len(tokens), i + 1 + rng.next_below(3))
            spans.append(CharSpan(tokens[i].span.start, tokens[j - 1].span.end))
            i = j
        else:
            i += 1
    rng.shuffle(spans)
    return spans


def _assert_valid_bio(tags):
    for idx, tag in enumerate(tags):
        assert tag in TAGS
        if tag.startswith("I-"):
            prev = tags[idx - 1] if idx else "O"
            assert prev in ("B-" + tag[2:], "I-" + tag[2:]), tags


class TestDecodeTags:
    def test_inverse_of_hand_example(self):
        toks = tokenize("long short-term memory (LSTM)")
        tags = ["B-long", "I-long", "I-long", "O", "B-short", "O"]
        short, long_ = decode_tags(toks, tags)
        assert short == [CharSpan(24, 28)]
        assert long_ == [CharSpan(0, 22)]

    def test_all_outside(self):
        toks = tokenize("a b c")
        assert decode_tags(toks, ["O"] * 3) == ([], [])

    def test_lenient_orphan_inside(self):
        toks = tokenize("AB cd")
        short, long_ = decode_tags(toks, ["I-short", "O"])
        assert short == [CharSpan(0, 2)]
        assert long_ == []

    def test_lenient_class_switch(self):
        toks = tokenize("a b c")
        short, long_ = decode_tags(toks, ["B-long", "I-short", "I-short"])
        assert long_ == [CharSpan(0, 1)]
        assert short == [CharSpan(2, 5)]

    def test_adjacent_b_tags_stay_separate(self):
        toks = tokenize("a b")
        short, _ = decode_tags(toks, ["B-short", "B-short"])
        assert short == [CharSpan(0, 1), CharSpan(2, 3)]

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="tags"):
            decode_tags(tokenize("a b"), ["O"])

    def test_unknown_tag(self):
        with pytest.raises(ValueError, match="unknown tag"):
            decode_tags(tokenize("a"), ["B-medium"])

    def test_round_trip_random(self):
        rng = SplitMix64(123)
        for _ in range(300):
            n_tokens = 1 + rng.next_below(12)
            toks = tokenize(" ".join("t%d" % rng.next_below(50) for _ in range(n_tokens)))
            spans = _random_token_aligned_spans(toks, rng)
            half = rng.next_below(len(spans) + 1)
            short = sorted(spans[:half])
            long_ = sorted(spans[half:])
            tags = project_spans(toks, short, long_)
            got_short, got_long = decode_tags(toks, tags)
            assert got_short == short
            assert got_long == long_


class TestNormalizeSpans:
    def test_sorts(self):
        assert normalize_spans([(5, 8), (0, 2)]) == [CharSpan(0, 2), CharSpan(5, 8)]

    def test_merges_overlap(self):
        assert normalize_spans([(0, 4), (2, 6)]) == [CharSpan(0, 6)]

    def test_keeps_adjacent_separate(self):
        assert normalize_spans([(0, 3), (3, 6)]) == [CharSpan(0, 3), CharSpan(3, 6)]

    def test_containment(self):
        assert normalize_spans([(0, 10), (2, 4)]) == [CharSpan(0, 10)]


def _record(**overrides):
    base = {
        "id": "d1",
        "text": "foo bar (FB)",
        "language": "en",
        "domain": "scientific",
        "short": [[9, 11]],
        "long": [[0, 7]],
    }
    base.update(overrides)
    return base


class TestRecords:
    def test_round_trip(self, tmp_path):
        docs = documents_from_records([_record()], origin="mem")
        path = tmp_path / "corpus.json"
        save_corpus(docs, path)
        loaded = load_corpus(path)
        assert loaded == docs

    def test_empty_list(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("[]")
        assert load_corpus(path) == []

    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(CorpusFormatError, match="not valid JSON"):
            load_corpus(path)

    def test_missing_field_names_record_and_field(self):
        rec = _record()
        del rec["text"]
        with pytest.raises(CorpusFormatError, match=r"record 0: missing field 'text'"):
            documents_from_records([rec], origin="mem")

    def test_wrong_type_names_field(self):
        with pytest.raises(CorpusFormatError, match=r"'text' must be of type str"):
            documents_from_records([_record(text=17)], origin="mem")

    def test_out_of_bounds_span_names_document(self):
        with pytest.raises(CorpusFormatError, match=r"document 'd1'.*out of bounds"):
            documents_from_records([_record(short=[[9, 99]])], origin="mem")

    def test_reversed_span_rejected(self):
        with pytest.raises(CorpusFormatError, match="out of bounds"):
            documents_from_records([_record(short=[[5, 5]])], origin="mem")

    def test_non_integer_span_rejected(self):
        with pytest.raises(CorpusFormatError, match="integer pairs"):
            documents_from_records([_record(short=[[1.5, 3]])], origin="mem")

    def test_bool_span_rejected(self):
        with pytest.raises(CorpusFormatError, match="integer pairs"):
            documents_from_records([_record(short=[[True, 3]])], origin="mem")

    def test_unknown_language(self):
        with pytest.raises(CorpusFormatError, match="'language' has unknown value"):
            documents_from_records([_record(language="de")], origin="mem")

    def test_unknown_domain(self):
        with pytest.raises(CorpusFormatError, match="'domain' has unknown value"):
            documents_from_records([_record(domain="medical")], origin="mem")

    def test_invalid_slice_pair(self):
        with pytest.raises(CorpusFormatError, match="no corpus slice"):
            documents_from_records(
                [_record(language="da", domain="scientific")], origin="mem"
            )

    def test_duplicate_id(self):
        with pytest.raises(CorpusFormatError, match="duplicate document id"):
            documents_from_records([_record(), _record()], origin="mem")

    def test_overlapping_spans_are_merged(self):
        doc = documents_from_records(
            [_record(long=[[0, 5], [3, 7]])], origin="mem"
        )[0]
        assert doc.long_spans == [CharSpan(0, 7)]

    def test_save_preserves_unicode(self, tmp_path):
        doc = Document(
            id="u1", text="mô hình (MH)", language="vi", domain="scientific",
            short_spans=[CharSpan(9, 11)], long_spans=[CharSpan(0, 7)],
        )
        path = tmp_path / "u.json"
        save_corpus([doc], path)
        assert "mô hình" in path.read_text(encoding="utf-8")
        assert load_corpus(path)[0] == doc

    def test_offsets_count_characters_not_bytes(self):
        # "é" is two UTF-8 bytes but one character; span end 4 must be valid
        rec = _record(text="éon!", short=[[0, 3]], long=[])
        doc = documents_from_records([rec], origin="mem")[0]
        assert doc.short_spans == [CharSpan(0, 3)]


class TestSlices:
    def test_slice_key_mapping(self):
        d = Document("x", "t", "en", "scientific", [], [])
        assert slice_key(d) == "en-sci"
        d.domain = "legal"
        assert slice_key(d) == "en-leg"
        d.language = "fa"
        d.domain = "scientific"
        assert slice_key(d) == "fa"

    def test_sentences_from_documents(self):
        docs = documents_from_records([_record()], origin="mem")
        sents = sentences_from_documents(docs)
        assert len(sents) == 1
        s = sents[0]
        assert s.doc_id == "d1"
        assert surfaces(s.tokens) == ["foo", "bar", "(", "FB", ")"]
        assert s.tags == ["B-long", "I-long", "O", "B-short", "O"]
        assert s.language == "en" and s.domain == "scientific"

    def test_sentences_empty_text(self):
        doc = Document("e", "   ", "fr", "legal", [], [])
        sents = sentences_from_documents([doc])
        assert sents[0].tokens == [] and sents[0].tags == []
