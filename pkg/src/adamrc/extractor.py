"""NER-driven candidate answer extraction for unlabeled passages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import NER_TAGS, AnnotatedPassage, AnswerSpan

DEFAULT_MAX_PER_PASSAGE = 3


@dataclass(frozen=True)
class AnswerCandidate:
    span: AnswerSpan
    entity_type: str


def extract_candidates(passage: AnnotatedPassage) -> list[AnswerCandidate]:
    """One candidate per maximal B/I entity run, in position order.

    Later candidates whose surface text repeats an earlier one are dropped.
    """
    candidates: list[AnswerCandidate] = []
    seen_texts: set[str] = set()
    i, n = 0, len(passage.tokens)
    while i < n:
        tag = NER_TAGS[passage.tokens[i].ner_tag]
        if tag.startswith("B-"):
            kind = tag[2:]
            j = i + 1
            while j < n and NER_TAGS[passage.tokens[j].ner_tag] == f"I-{kind}":
                j += 1
            span = AnswerSpan(i, j - 1)
            text = passage.span_text(span)
            if text not in seen_texts:
                seen_texts.add(text)
                candidates.append(AnswerCandidate(span, kind))
            i = j
        else:
            i += 1
    return candidates


def sample_candidates(candidates: list[AnswerCandidate],
                      max_per_passage: int = DEFAULT_MAX_PER_PASSAGE,
                      seed: int = 0) -> list[AnswerCandidate]:
    """Uniform sample without replacement, deterministic under seed.

    Keeps position order; returns everything when under the cap.
    """
    if max_per_passage < 1:
        raise ValueError("max_per_passage must be >= 1")
    if len(candidates) <= max_per_passage:
        return list(candidates)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(candidates), size=max_per_passage, replace=False)
    return [candidates[i] for i in sorted(int(i) for i in picks)]
