from collections import Counter

import pytest

from adamrc.corpus import NER_ID, AnnotatedPassage, AnswerSpan, DomainLabel, Token
from adamrc.extractor import (AnswerCandidate, extract_candidates,
                              sample_candidates)

from conftest import make_passage


def passage_with_tags(texts, tags):
    """Build a passage with explicit NER tags (offsets synthesized)."""
    tokens, pos = [], 0
    for text, tag in zip(texts, tags):
        tokens.append(Token(text, 1, NER_ID[tag], pos, pos + len(text)))
        pos += len(text) + 1
    raw = " ".join(texts)
    return AnnotatedPassage("fix", raw, tokens, DomainLabel.SOURCE)


def test_extract_runs_direct_readoff():
    p = passage_with_tags(
        ["Roy", "Lynn", "Oakley", "of", "67", "years"],
        ["B-ENT", "I-ENT", "I-ENT", "O", "B-NUM", "O"])
    cands = extract_candidates(p)
    assert [(c.span.start, c.span.end, c.entity_type) for c in cands] == \
        [(0, 2, "ENT"), (4, 4, "NUM")]


def test_extract_all_o_empty():
    p = passage_with_tags(["the", "cat", "sat"], ["O", "O", "O"])
    assert extract_candidates(p) == []


def test_extract_dedups_repeated_text():
    p = passage_with_tags(
        ["Anna", "Sato", "met", "and", "then", "Anna", "Sato", "left"],
        ["B-ENT", "I-ENT", "O", "O", "O", "B-ENT", "I-ENT", "O"])
    cands = extract_candidates(p)
    assert [(c.span.start, c.span.end) for c in cands] == [(0, 1)]


def test_extract_adjacent_runs_split_on_b():
    p = passage_with_tags(["Anna", "Kessler", "Braveno"],
                          ["B-ENT", "I-ENT", "B-LOC"])
    cands = extract_candidates(p)
    assert [(c.span.start, c.span.end, c.entity_type) for c in cands] == \
        [(0, 1, "ENT"), (2, 2, "LOC")]


def test_extract_spans_valid_on_real_annotations():
    p = make_passage("Anna Kessler is a painter from Braveno . "
                     "Anna Kessler was born in 1950 .")
    for cand in extract_candidates(p):
        assert 0 <= cand.span.start <= cand.span.end < len(p.tokens)


def test_extract_pure_function_of_tags():
    p = make_passage("Marco Ried owns 44 goats .")
    assert extract_candidates(p) == extract_candidates(p)


def _cands(n):
    return [AnswerCandidate(span=AnswerSpan(i, i), entity_type="ENT")
            for i in range(n)]


def test_sample_under_cap_returns_all_in_order():
    cands = _cands(2)
    assert sample_candidates(cands, 5, seed=0) == cands


def test_sample_deterministic():
    cands = _cands(10)
    a = sample_candidates(cands, 3, seed=42)
    b = sample_candidates(cands, 3, seed=42)
    assert a == b
    assert len(a) == 3
    # position order preserved
    starts = [c.span.start for c in a]
    assert starts == sorted(starts)


def test_sample_rejects_bad_cap():
    with pytest.raises(ValueError):
        sample_candidates(_cands(3), 0, seed=0)


def test_sample_uniform_frequency():
    # Uniform oracle: cap 1 over 4 candidates, 1000 independent seeds ->
    # each candidate expected 250 +- 50.
    cands = _cands(4)
    counts = Counter()
    for trial in range(1000):
        pick = sample_candidates(cands, 1, seed=trial)[0]
        counts[pick.span.start] += 1
    for i in range(4):
        assert 200 <= counts[i] <= 300, counts
