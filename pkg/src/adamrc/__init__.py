"""Adversarial domain adaptation for extractive reading comprehension."""

__version__ = "0.1.0"

from .corpus import (AnnotatedPassage, AnswerSpan, DomainLabel, Provenance,
                     QAExample, Token, Vocabulary)

__all__ = [
    "AnnotatedPassage", "AnswerSpan", "DomainLabel", "Provenance",
    "QAExample", "Token", "Vocabulary", "__version__",
]
