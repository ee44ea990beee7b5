import numpy as np
import pytest
import torch

from adamrc.corpus import (AnnotatedPassage, AnswerSpan, DomainLabel,
                           Provenance, QAExample, build_vocab,
                           make_synthetic_domains, random_embeddings,
                           synthetic_annotator, vocab_streams)


@pytest.fixture(autouse=True)
def _single_thread():
    # Keeps tiny-tensor tests deterministic and cheap.
    torch.set_num_threads(2)


@pytest.fixture(scope="session")
def tiny_domains():
    """Small two-domain corpus shared across model tests."""
    return make_synthetic_domains(11, 24)


@pytest.fixture(scope="session")
def tiny_vocab(tiny_domains):
    source, target = tiny_domains
    streams = list(vocab_streams(source.examples + target.examples))
    return build_vocab(streams, embedding_dim=16)


@pytest.fixture(scope="session")
def tiny_table(tiny_vocab):
    return random_embeddings(tiny_vocab, seed=5)


def make_passage(text: str, domain=DomainLabel.SOURCE,
                 pid="p0") -> AnnotatedPassage:
    return AnnotatedPassage(pid, text, synthetic_annotator().annotate(text),
                            domain)


def make_example(passage_text: str, question_text: str, start: int, end: int,
                 provenance=Provenance.HUMAN, domain=DomainLabel.SOURCE,
                 eid="e0") -> QAExample:
    ann = synthetic_annotator()
    passage = AnnotatedPassage(f"{eid}.p", passage_text,
                               ann.annotate(passage_text), domain)
    return QAExample(eid, passage, question_text,
                     ann.annotate(question_text), AnswerSpan(start, end),
                     provenance)
