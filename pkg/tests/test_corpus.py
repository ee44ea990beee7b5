import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adamrc import corpus
from adamrc.corpus import (NER_ID, NER_TAGS, POS_TAGS, AnswerSpan,
                           CorpusFormatError, DomainLabel, LoadStats,
                           Vocabulary, build_vocab, detokenize,
                           load_pretrained_embeddings, load_squad_json,
                           make_synthetic_domains, tokenize_and_annotate,
                           vocabulary_overlap)

from conftest import make_passage


# ---------------------------------------------------------------------------
# tokenize_and_annotate
# ---------------------------------------------------------------------------

def test_annotate_entity_run_and_number():
    # Derived by applying the rule set by hand: capitalized run ->
    # B/I ENTITY, digits -> NUMBER; commas are their own tokens, so the
    # "67" lands at index 4 of 6.
    tokens = tokenize_and_annotate("Roy Lynn Oakley , 67 ,")
    assert [t.text for t in tokens] == ["Roy", "Lynn", "Oakley", ",", "67", ","]
    assert [NER_TAGS[t.ner_tag] for t in tokens[:3]] == ["B-ENT", "I-ENT", "I-ENT"]
    assert tokens[4].text == "67"
    assert NER_TAGS[tokens[4].ner_tag] == "B-NUM"
    assert NER_TAGS[tokens[3].ner_tag] == "O"


def test_annotate_all_o():
    tokens = tokenize_and_annotate("the cat sat")
    assert len(tokens) == 3
    assert all(NER_TAGS[t.ner_tag] == "O" for t in tokens)


def test_annotate_number_with_comma():
    tokens = tokenize_and_annotate("12,000 people")
    assert tokens[0].text == "12,000"
    assert NER_TAGS[tokens[0].ner_tag] == "B-NUM"


def test_annotate_gazetteer_dates():
    tokens = tokenize_and_annotate("born in January")
    assert NER_TAGS[tokens[2].ner_tag] == "B-DATE"


def test_annotate_rejects_whitespace_only():
    with pytest.raises(ValueError):
        tokenize_and_annotate("   ")


def test_offsets_match_source_text():
    text = "Denver Broncos beat 12,000 rivals ."
    for tok in tokenize_and_annotate(text):
        assert text[tok.char_start:tok.char_end] == tok.text


@given(st.text(alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd",
                                                            "Po", "Zs")),
               min_size=1, max_size=80))
@settings(max_examples=200, deadline=None)
def test_annotation_deterministic_and_offset_exact(text):
    if not text.strip():
        return
    first = tokenize_and_annotate(text)
    second = tokenize_and_annotate(text)
    assert [(t.text, t.pos_tag, t.ner_tag) for t in first] == \
        [(t.text, t.pos_tag, t.ner_tag) for t in second]
    for tok in first:
        assert text[tok.char_start:tok.char_end] == tok.text


def test_detokenize_roundtrip():
    text = "Ines Sato owns 14 boats .  She was born in 1950 ."
    passage = make_passage(text)
    assert detokenize(passage) == text


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

def test_build_vocab_min_count():
    vocab = build_vocab([["a", "a", "b"]], min_count=2)
    assert "a" in vocab
    assert "b" not in vocab


def test_build_vocab_empty_stream():
    vocab = build_vocab([], min_count=1)
    assert len(vocab) == 4
    assert vocab.id_to_token == ("<pad>", "<unk>", "<bos>", "<eos>")


def test_build_vocab_truncation_keeps_most_frequent():
    streams = [["a"] * 3 + ["b"] * 2 + ["c"]]
    vocab = build_vocab(streams, min_count=1, max_size=5)
    assert "a" in vocab and "b" not in vocab and "c" not in vocab


def test_vocab_specials_fixed():
    vocab = build_vocab([["x"]])
    assert (corpus.PAD, corpus.UNK, corpus.BOS, corpus.EOS) == (0, 1, 2, 3)
    assert vocab.lookup("<pad>") == 0
    assert vocab.lookup("never-seen-token") == corpus.UNK


@given(st.lists(st.text(alphabet="abcdef", min_size=1, max_size=5),
                min_size=1, max_size=30))
@settings(max_examples=100, deadline=None)
def test_vocab_roundtrip_identity(tokens):
    vocab = build_vocab([tokens])
    for t in set(tokens):
        assert vocab.token(vocab.lookup(t)) == t


# ---------------------------------------------------------------------------
# Pretrained embeddings
# ---------------------------------------------------------------------------

def test_load_embeddings_reads_vectors(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 0.1 0.2\n")
    vocab = build_vocab([["cat", "dog"]], embedding_dim=2)
    table = load_pretrained_embeddings(path, vocab)
    np.testing.assert_allclose(table[vocab.lookup("cat")], [0.1, 0.2])


def test_load_embeddings_pad_row_zero(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 0.1 0.2\n")
    vocab = build_vocab([["cat"]], embedding_dim=2)
    table = load_pretrained_embeddings(path, vocab)
    assert np.all(table[corpus.PAD] == 0.0)


def test_load_embeddings_oov_rows_bounded_and_seeded(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 0.1 0.2\n")
    vocab = build_vocab([["cat", "dog"]], embedding_dim=2)
    a = load_pretrained_embeddings(path, vocab, seed=3)
    b = load_pretrained_embeddings(path, vocab, seed=3)
    row = a[vocab.lookup("dog")]
    assert np.all(np.abs(row) <= 0.1)
    np.testing.assert_array_equal(a, b)


def test_load_embeddings_dimension_mismatch(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 0.1 0.2\ndog 0.3\n")
    vocab = build_vocab([["cat", "dog"]], embedding_dim=2)
    with pytest.raises(CorpusFormatError, match="line 2"):
        load_pretrained_embeddings(path, vocab)


# ---------------------------------------------------------------------------
# SQuAD loading
# ---------------------------------------------------------------------------

def squad_payload(context, answers):
    return {"data": [{"title": "t", "paragraphs": [{
        "context": context,
        "qas": [{"id": "q1", "question": "Who ?",
                 "answers": answers}]}]}]}


def write_squad(tmp_path, payload):
    path = tmp_path / "squad.json"
    path.write_text(json.dumps(payload))
    return path


def test_squad_full_span(tmp_path):
    path = write_squad(tmp_path, squad_payload(
        "Denver Broncos", [{"text": "Denver Broncos", "answer_start": 0}]))
    examples = load_squad_json(path, DomainLabel.SOURCE)
    assert len(examples) == 1
    assert examples[0].answer == AnswerSpan(0, 1)


def test_squad_single_token_alignment(tmp_path):
    path = write_squad(tmp_path, squad_payload(
        "Denver Broncos", [{"text": "Broncos", "answer_start": 7}]))
    examples = load_squad_json(path, DomainLabel.SOURCE)
    assert examples[0].answer == AnswerSpan(1, 1)


def test_squad_midtoken_offset_dropped(tmp_path):
    # Offset falls strictly inside "Denver": no clean token boundary.
    path = write_squad(tmp_path, squad_payload(
        "Denver Broncos", [{"text": "enver", "answer_start": 1}]))
    stats = LoadStats()
    examples = load_squad_json(path, DomainLabel.SOURCE, stats=stats)
    assert examples == []
    assert stats.n_dropped == 1


def test_squad_answer_start_beyond_context(tmp_path, caplog):
    path = write_squad(tmp_path, squad_payload(
        "Denver Broncos", [{"text": "x", "answer_start": 500}]))
    stats = LoadStats()
    examples = load_squad_json(path, DomainLabel.SOURCE, stats=stats)
    assert examples == []
    assert stats.n_dropped == 1


def test_squad_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(CorpusFormatError, match="bad.json"):
        load_squad_json(path, DomainLabel.SOURCE)


def test_squad_answer_spans_valid(tmp_path):
    payload = {"data": [{"paragraphs": [{
        "context": "Anna Kessler owns 41 goats . Anna was born in 1950 .",
        "qas": [
            {"id": "a", "question": "how many goats ?",
             "answers": [{"text": "41", "answer_start": 18}]},
            {"id": "b", "question": "when ?",
             "answers": [{"text": "1950", "answer_start": 46}]},
        ]}]}]}
    examples = load_squad_json(write_squad(tmp_path, payload),
                               DomainLabel.SOURCE)
    assert len(examples) == 2
    for ex in examples:
        assert 0 <= ex.answer.start <= ex.answer.end < len(ex.passage.tokens)
        assert ex.passage.span_text(ex.answer) == ex.answer_texts[0]


# ---------------------------------------------------------------------------
# Synthetic domains
# ---------------------------------------------------------------------------

def test_synthetic_deterministic():
    a_src, a_tgt = make_synthetic_domains(7, 12)
    b_src, b_tgt = make_synthetic_domains(7, 12)
    assert [p.raw_text for p in a_src.passages] == \
        [p.raw_text for p in b_src.passages]
    assert [e.question_text for e in a_tgt.examples] == \
        [e.question_text for e in b_tgt.examples]
    assert [(e.answer.start, e.answer.end) for e in a_src.examples] == \
        [(e.answer.start, e.answer.end) for e in b_src.examples]


def test_synthetic_answer_spans_valid():
    src, tgt = make_synthetic_domains(3, 30)
    for ex in src.examples + tgt.examples:
        n = len(ex.passage.tokens)
        assert 0 <= ex.answer.start <= ex.answer.end < n
        assert ex.passage.span_text(ex.answer) == ex.answer_texts[0]


def test_synthetic_vocabulary_overlap_in_band():
    src, tgt = make_synthetic_domains(1, 300)
    overlap = vocabulary_overlap(src, tgt)
    assert 0.3 <= overlap <= 0.7


def test_synthetic_passages_have_entities():
    src, tgt = make_synthetic_domains(5, 20)
    for p in src.passages + tgt.passages:
        assert any(NER_TAGS[t.ner_tag].startswith("B-") for t in p.tokens)


def test_synthetic_domain_labels():
    src, tgt = make_synthetic_domains(5, 4)
    assert all(p.domain == DomainLabel.SOURCE for p in src.passages)
    assert all(p.domain == DomainLabel.TARGET for p in tgt.passages)


# ---------------------------------------------------------------------------
# JSONL cache round-trip
# ---------------------------------------------------------------------------

def test_jsonl_cache_roundtrip(tmp_path):
    src, _ = make_synthetic_domains(2, 6)
    p_path = tmp_path / "passages.jsonl"
    e_path = tmp_path / "examples.jsonl"
    corpus.save_passages_jsonl(src.passages, p_path)
    corpus.save_examples_jsonl(src.examples, e_path)

    passages = corpus.load_passages_jsonl(p_path)
    assert [p.raw_text for p in passages] == [p.raw_text for p in src.passages]
    assert [[(t.text, t.pos_tag, t.ner_tag) for t in p.tokens]
            for p in passages] == \
        [[(t.text, t.pos_tag, t.ner_tag) for t in p.tokens]
         for p in src.passages]

    examples = corpus.load_examples_jsonl(e_path, passages,
                                          annotator=corpus.synthetic_annotator())
    assert [(e.id, e.answer.start, e.answer.end, e.provenance)
            for e in examples] == \
        [(e.id, e.answer.start, e.answer.end, e.provenance)
         for e in src.examples]


def test_jsonl_cache_field_names(tmp_path):
    src, _ = make_synthetic_domains(2, 1)
    path = tmp_path / "passages.jsonl"
    corpus.save_passages_jsonl(src.passages, path)
    record = json.loads(path.read_text().splitlines()[0])
    assert set(record) == {"id", "text", "tokens", "domain"}
    assert set(record["tokens"][0]) == {"text", "pos", "ner", "start", "end"}
