"""Corpus ingestion, annotation, vocabularies, and synthetic two-domain fixtures.

Text is tokenized with character offsets and tagged by a rule-based
annotator (POS + BIO NER), so nothing here depends on external taggers
or downloads. Loaders turn character-offset answers into token spans.
"""

from __future__ import annotations

import json
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)


class DomainLabel(IntEnum):
    SOURCE = 0
    TARGET = 1


class Provenance(str, Enum):
    HUMAN = "human"
    SYNTHETIC = "synthetic"


# Coarse POS inventory; id 0 reserved for padding.
POS_TAGS = (
    "<pad>", "PUNCT", "NUM", "DET", "WH", "PRON", "PREP", "CONJ",
    "VERB", "ADV", "ADJ", "PROPN", "NOUN",
)
POS_ID = {t: i for i, t in enumerate(POS_TAGS)}

# BIO NER inventory; ENT = generic capitalized run, NUM = numeric,
# LOC/PER/DATE come from gazetteer matches.
NER_TAGS = (
    "<pad>", "O",
    "B-ENT", "I-ENT", "B-NUM", "I-NUM",
    "B-PER", "I-PER", "B-LOC", "I-LOC", "B-DATE", "I-DATE",
)
NER_ID = {t: i for i, t in enumerate(NER_TAGS)}
NER_O = NER_ID["O"]


class CorpusFormatError(ValueError):
    """Raised for unparseable input files."""


@dataclass(frozen=True)
class Token:
    text: str
    pos_tag: int
    ner_tag: int
    char_start: int
    char_end: int

    def __post_init__(self):
        if not self.char_start < self.char_end:
            raise ValueError(f"empty token span at {self.char_start}")


@dataclass(frozen=True)
class AnswerSpan:
    start: int
    end: int  # inclusive token index

    def __post_init__(self):
        if not (0 <= self.start <= self.end):
            raise ValueError(f"invalid answer span ({self.start}, {self.end})")


@dataclass
class AnnotatedPassage:
    id: str
    raw_text: str
    tokens: list[Token]
    domain: DomainLabel

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"passage {self.id} has no tokens")
        prev_end = -1
        for tok in self.tokens:
            if tok.char_start < prev_end:
                raise ValueError(f"overlapping tokens in passage {self.id}")
            if self.raw_text[tok.char_start:tok.char_end] != tok.text:
                raise ValueError(f"token text/offset mismatch in passage {self.id}")
            prev_end = tok.char_end

    def __len__(self) -> int:
        return len(self.tokens)

    def span_text(self, span: AnswerSpan) -> str:
        return self.raw_text[self.tokens[span.start].char_start:
                             self.tokens[span.end].char_end]


@dataclass
class QAExample:
    id: str
    passage: AnnotatedPassage
    question_text: str
    question_tokens: list[Token]
    answer: AnswerSpan
    provenance: Provenance
    # Gold strings for scoring; first entry is the span text.
    answer_texts: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.question_tokens:
            raise ValueError(f"example {self.id} has an empty question")
        if self.answer.end >= len(self.passage):
            raise ValueError(f"example {self.id}: answer span exceeds passage")
        if not self.answer_texts:
            self.answer_texts = (self.passage.span_text(self.answer),)

    @property
    def domain(self) -> DomainLabel:
        return self.passage.domain


# ---------------------------------------------------------------------------
# Tokenization and rule-based annotation
# ---------------------------------------------------------------------------

# Numbers keep internal , and . ("12,000", "3.5"); words keep apostrophes;
# any other non-space character is its own token.
_TOKEN_RE = re.compile(r"\d+(?:[.,]\d+)*|[A-Za-z]+(?:'[A-Za-z]+)*|\S")
_NUM_RE = re.compile(r"\d+(?:[.,]\d+)*\Z")

_DETS = {"a", "an", "the", "this", "that", "these", "those"}
_WH = {"who", "what", "when", "where", "which", "why", "how", "whom", "whose"}
_PRONS = {"he", "she", "it", "they", "we", "i", "you", "him", "her", "them",
          "his", "its", "their", "our", "your", "my", "himself", "herself"}
_PREPS = {"in", "on", "at", "from", "to", "of", "with", "by", "for", "near",
          "as", "into", "over", "under", "through", "about", "near", "up"}
_CONJS = {"and", "or", "but", "nor", "so", "yet"}
_VERBS = {"is", "are", "was", "were", "be", "been", "am", "has", "have", "had",
          "does", "do", "did", "will", "would", "can", "could", "said", "says",
          "keeps", "keep", "owns", "own", "works", "work", "lives", "live",
          "runs", "run", "serves", "serve", "comes", "come", "grew", "saw"}

# Capitalized forms of these never start an entity run (sentence-initial
# function words).
_CAP_STOP = _DETS | _WH | _PRONS | _PREPS | _CONJS | _VERBS | {"not", "no"}

# Built-in gazetteer: month/weekday names type as DATE.
_DEFAULT_GAZETTEER = {
    (m,): "DATE" for m in (
        "january february march april may june july august september "
        "october november december monday tuesday wednesday thursday "
        "friday saturday sunday".split()
    )
}


def _pos_of(text: str) -> int:
    low = text.lower()
    if _NUM_RE.match(text):
        return POS_ID["NUM"]
    if not any(c.isalnum() for c in text):
        return POS_ID["PUNCT"]
    if low in _DETS:
        return POS_ID["DET"]
    if low in _WH:
        return POS_ID["WH"]
    if low in _PRONS:
        return POS_ID["PRON"]
    if low in _PREPS:
        return POS_ID["PREP"]
    if low in _CONJS:
        return POS_ID["CONJ"]
    if low in _VERBS or low.endswith("ing") or low.endswith("ed"):
        return POS_ID["VERB"]
    if low.endswith("ly"):
        return POS_ID["ADV"]
    if low.endswith(("ous", "ful", "ive", "ial")):
        return POS_ID["ADJ"]
    if text[:1].isupper():
        return POS_ID["PROPN"]
    return POS_ID["NOUN"]


class RuleAnnotator:
    """Deterministic tokenizer + POS/NER tagger.

    NER priority: gazetteer match (longest first) > numeric pattern >
    capitalized run. Gazetteer keys are tuples of lowercased token texts.
    """

    def __init__(self, gazetteer: Mapping[tuple[str, ...], str] | None = None):
        gaz = dict(_DEFAULT_GAZETTEER)
        if gazetteer:
            gaz.update(gazetteer)
        self.gazetteer = gaz
        self._max_gaz_len = max((len(k) for k in gaz), default=1)

    def tokenize(self, text: str) -> list[tuple[str, int, int]]:
        return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]

    def annotate(self, text: str) -> list[Token]:
        pieces = self.tokenize(text)
        if not pieces:
            raise ValueError("cannot annotate whitespace-only text")
        n = len(pieces)
        ner = [NER_O] * n
        taken = [False] * n

        lowers = [t.lower() for t, _, _ in pieces]
        i = 0
        while i < n:
            matched = 0
            for width in range(min(self._max_gaz_len, n - i), 0, -1):
                kind = self.gazetteer.get(tuple(lowers[i:i + width]))
                if kind is not None:
                    ner[i] = NER_ID[f"B-{kind}"]
                    for j in range(i + 1, i + width):
                        ner[j] = NER_ID[f"I-{kind}"]
                    for j in range(i, i + width):
                        taken[j] = True
                    matched = width
                    break
            i += matched if matched else 1

        for i, (text_i, _, _) in enumerate(pieces):
            if not taken[i] and _NUM_RE.match(text_i):
                ner[i] = NER_ID["B-NUM"]
                taken[i] = True

        def _cap(i: int) -> bool:
            t = pieces[i][0]
            return (not taken[i] and t[:1].isupper() and t.isalpha()
                    and t.lower() not in _CAP_STOP)

        i = 0
        while i < n:
            if _cap(i):
                ner[i] = NER_ID["B-ENT"]
                j = i + 1
                while j < n and _cap(j):
                    ner[j] = NER_ID["I-ENT"]
                    j += 1
                i = j
            else:
                i += 1

        return [Token(t, _pos_of(t), ner[i], s, e)
                for i, (t, s, e) in enumerate(pieces)]


_default_annotator = RuleAnnotator()


def tokenize_and_annotate(raw_text: str) -> list[Token]:
    """Tokenize and tag with the built-in rule set (pure, deterministic)."""
    return _default_annotator.annotate(raw_text)


def detokenize(passage: AnnotatedPassage) -> str:
    """Reconstruct raw text from tokens and offsets (gaps are whitespace)."""
    out, pos = [], 0
    for tok in passage.tokens:
        out.append(passage.raw_text[pos:tok.char_start])
        out.append(tok.text)
        pos = tok.char_end
    out.append(passage.raw_text[pos:])
    return "".join(out)


# ---------------------------------------------------------------------------
# Vocabulary and embeddings
# ---------------------------------------------------------------------------

PAD, UNK, BOS, EOS = 0, 1, 2, 3
_SPECIALS = ("<pad>", "<unk>", "<bos>", "<eos>")


class Vocabulary:
    """Immutable token<->id mapping with fixed specials PAD=0 UNK=1 BOS=2 EOS=3."""

    def __init__(self, tokens: Sequence[str], embedding_dim: int):
        if embedding_dim <= 0:
            raise ValueError("embedding_dim must be positive")
        self.id_to_token: tuple[str, ...] = _SPECIALS + tuple(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")
        self.embedding_dim = embedding_dim

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def token(self, idx: int) -> str:
        return self.id_to_token[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.lookup(t) for t in tokens]


def build_vocab(streams: Iterable[Sequence[str]], min_count: int = 1,
                max_size: int = 50_000, embedding_dim: int = 64) -> Vocabulary:
    """Frequency-sorted vocabulary (ties broken lexicographically).

    ``max_size`` counts the four specials; ``streams`` yields token lists.
    """
    counts: Counter[str] = Counter()
    for stream in streams:
        counts.update(stream)
    kept = [t for t, c in counts.items() if c >= min_count and t not in _SPECIALS]
    kept.sort(key=lambda t: (-counts[t], t))
    kept = kept[:max(0, max_size - len(_SPECIALS))]
    return Vocabulary(kept, embedding_dim)


def vocab_streams(examples: Iterable[QAExample]) -> Iterator[list[str]]:
    """Token streams (passage then question) for vocabulary building."""
    seen_passages = set()
    for ex in examples:
        if ex.passage.id not in seen_passages:
            seen_passages.add(ex.passage.id)
            yield [t.text for t in ex.passage.tokens]
        yield [t.text for t in ex.question_tokens]


def load_pretrained_embeddings(path: str | os.PathLike, vocab: Vocabulary,
                               seed: int = 0) -> np.ndarray:
    """Word-vector text file ("token v1 v2 ...") -> [|V|, dim] float32 table.

    In-vocab tokens take file vectors; everything else gets uniform(-0.1, 0.1)
    init under ``seed``; the PAD row is zero. A line whose vector length is
    not ``vocab.embedding_dim`` is a hard error naming that line.
    """
    dim = vocab.embedding_dim
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), dim)).astype(np.float32)
    table[PAD] = 0.0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 or not parts[0]:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise CorpusFormatError(
                    f"{path}: line {lineno} has {len(values)} values, expected {dim}")
            if token in vocab.token_to_id:
                table[vocab.token_to_id[token]] = np.asarray(values, dtype=np.float32)
    table[PAD] = 0.0
    return table


def random_embeddings(vocab: Vocabulary, seed: int = 0) -> np.ndarray:
    """Uniform(-0.1, 0.1) table with a zero PAD row (no pretrained file)."""
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), vocab.embedding_dim))
    table[PAD] = 0.0
    return table.astype(np.float32)


# ---------------------------------------------------------------------------
# SQuAD v1.1 ingestion
# ---------------------------------------------------------------------------

MAX_PASSAGE_LEN = 300
MAX_QUESTION_LEN = 30


@dataclass
class LoadStats:
    n_passages: int = 0
    n_examples: int = 0
    n_dropped: int = 0


def _align_answer(tokens: Sequence[Token], char_start: int, char_end: int
                  ) -> AnswerSpan | None:
    """Snap [char_start, char_end) to covering tokens; None if mid-token."""
    overlap = [i for i, t in enumerate(tokens)
               if t.char_start < char_end and char_start < t.char_end]
    if not overlap:
        return None
    first, last = overlap[0], overlap[-1]
    if char_start > tokens[first].char_start:  # starts strictly inside a token
        return None
    if char_end < tokens[last].char_end:  # ends strictly inside a token
        return None
    return AnswerSpan(first, last)


def load_squad_json(path: str | os.PathLike, domain: DomainLabel, *,
                    annotator: RuleAnnotator | None = None,
                    max_passage_len: int = MAX_PASSAGE_LEN,
                    max_question_len: int = MAX_QUESTION_LEN,
                    stats: LoadStats | None = None) -> list[QAExample]:
    """Read SQuAD v1.1 JSON into QAExamples with token-index answer spans.

    Examples whose answer cannot be aligned to token boundaries (or falls
    beyond the truncated passage) are dropped and counted in ``stats``.
    """
    ann = annotator or _default_annotator
    stats = stats if stats is not None else LoadStats()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"{path}: malformed JSON: {e}") from e

    examples: list[QAExample] = []
    try:
        articles = payload["data"]
    except (TypeError, KeyError) as e:
        raise CorpusFormatError(f"{path}: missing top-level 'data'") from e

    for ai, article in enumerate(articles):
        for pi, para in enumerate(article["paragraphs"]):
            context = para["context"]
            tokens = ann.annotate(context)[:max_passage_len]
            passage = AnnotatedPassage(f"p{ai}.{pi}", context, tokens, domain)
            stats.n_passages += 1
            for qa in para["qas"]:
                qid = str(qa.get("id", f"q{ai}.{pi}.{len(examples)}"))
                q_tokens = ann.annotate(qa["question"])[:max_question_len]
                span = None
                golds: list[str] = []
                for answer in qa["answers"]:
                    text, start = answer["text"], int(answer["answer_start"])
                    if text not in golds:
                        golds.append(text)
                    if span is not None:
                        continue
                    if start >= len(context):
                        log.warning("%s: answer_start %d beyond context (%s)",
                                    path, start, qid)
                        continue
                    span = _align_answer(tokens, start, start + len(text))
                if span is None:
                    stats.n_dropped += 1
                    log.warning("%s: dropping %s (answer not token-aligned)",
                                path, qid)
                    continue
                examples.append(QAExample(qid, passage, qa["question"], q_tokens,
                                          span, Provenance.HUMAN, tuple(golds)))
                stats.n_examples += 1
    return examples


# ---------------------------------------------------------------------------
# Line-delimited JSON corpus cache
# ---------------------------------------------------------------------------

def save_passages_jsonl(passages: Iterable[AnnotatedPassage],
                        path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in passages:
            rec = {
                "id": p.id,
                "text": p.raw_text,
                "tokens": [{"text": t.text, "pos": POS_TAGS[t.pos_tag],
                            "ner": NER_TAGS[t.ner_tag], "start": t.char_start,
                            "end": t.char_end} for t in p.tokens],
                "domain": int(p.domain),
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_passages_jsonl(path: str | os.PathLike) -> list[AnnotatedPassage]:
    passages = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"{path}: line {lineno}: {e}") from e
            tokens = [Token(t["text"], POS_ID[t["pos"]], NER_ID[t["ner"]],
                            t["start"], t["end"]) for t in rec["tokens"]]
            passages.append(AnnotatedPassage(rec["id"], rec["text"], tokens,
                                             DomainLabel(rec["domain"])))
    return passages


def save_examples_jsonl(examples: Iterable[QAExample],
                        path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            rec = {
                "id": ex.id,
                "passage_id": ex.passage.id,
                "question": ex.question_text,
                "answer": {"start": ex.answer.start, "end": ex.answer.end},
                "answer_texts": list(ex.answer_texts),
                "provenance": ex.provenance.value,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_examples_jsonl(path: str | os.PathLike,
                        passages: Sequence[AnnotatedPassage], *,
                        annotator: RuleAnnotator | None = None,
                        max_question_len: int = MAX_QUESTION_LEN) -> list[QAExample]:
    ann = annotator or _default_annotator
    by_id = {p.id: p for p in passages}
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"{path}: line {lineno}: {e}") from e
            passage = by_id.get(rec["passage_id"])
            if passage is None:
                raise CorpusFormatError(
                    f"{path}: line {lineno}: unknown passage {rec['passage_id']}")
            q_tokens = ann.annotate(rec["question"])[:max_question_len]
            out.append(QAExample(
                rec["id"], passage, rec["question"], q_tokens,
                AnswerSpan(rec["answer"]["start"], rec["answer"]["end"]),
                Provenance(rec["provenance"]), tuple(rec["answer_texts"])))
    return out


# ---------------------------------------------------------------------------
# Synthetic two-domain fixture corpora
# ---------------------------------------------------------------------------

# Entity inventories: partially shared between domains so the surface
# vocabularies overlap without coinciding (Jaccard target band 0.3-0.7).
_FIRST_SHARED = ("Anna", "Marco", "Ines", "Viktor", "Leila", "Oskar",
                 "Priya", "Tomas")
_FIRST_ONLY = {
    DomainLabel.SOURCE: ("Greta", "Daan", "Mirela", "Janos", "Sofia", "Emil",
                         "Nadia", "Ruben"),
    DomainLabel.TARGET: ("Bruno", "Yusuf", "Clara", "Milan", "Edith",
                         "Rasmus", "Vera", "Callum"),
}
_LAST_SHARED = ("Kessler", "Ried", "Almeida", "Horak", "Bergan", "Sato",
                "Lindqvist", "Moretti")
_LAST_ONLY = {
    DomainLabel.SOURCE: ("Okafor", "Petran", "Vidal", "Maarten", "Kovacs",
                         "Armas", "Duval", "Havel"),
    DomainLabel.TARGET: ("Iversen", "Marek", "Soler", "Brandt", "Costa",
                         "Novak", "Ferris", "Walcott"),
}
_CITIES_SHARED = ("Braveno", "Kelona", "Darvik", "Mossul")
_CITIES_ONLY = {
    DomainLabel.SOURCE: ("Tarnova", "Quillan", "Verdane"),
    DomainLabel.TARGET: ("Ostrel", "Calvera", "Ninove"),
}
_PROF_SHARED = ("painter", "farmer", "engineer", "baker")
_PROF_ONLY = {
    DomainLabel.SOURCE: ("teacher", "violinist", "carpenter", "chemist"),
    DomainLabel.TARGET: ("sailor", "printer", "weaver", "surgeon"),
}
_ITEMS_SHARED = ("goats", "violins", "orchards", "boats")
_ITEMS_ONLY = {
    DomainLabel.SOURCE: ("presses", "beehives", "looms"),
    DomainLabel.TARGET: ("kilns", "ponies", "lanterns"),
}
_YEAR_RANGE = {DomainLabel.SOURCE: (1900, 1976), DomainLabel.TARGET: (1925, 2001)}
_COUNT_RANGE = {DomainLabel.SOURCE: (2, 67), DomainLabel.TARGET: (26, 91)}

# Each passage describes TWO people sharing one item type, so every
# question has a same-type distractor answer and entity-type matching
# alone cannot solve the task: the model must bind answers through the
# style words, which differ by domain (target cue words never occur in
# source text). Constituent order is aligned across the paraphrases.
_SRC_SENTENCES = (
    ("intro", "{name} is a {prof} from {city} ."),
    ("intro", "{name} is a quiet {prof} from {city} ."),
    ("born", "{name} was born in {year} ."),
    ("born", "{name} was famously born in {year} ."),
    ("owns", "{name} owns {count} {item} ."),
    ("owns", "{name} now owns {count} {item} ."),
)
_SRC_FILLERS = (
    "the village market opens at dawn .",
    "records from the guild cover every harvest .",
)
_TGT_SENTENCES = (
    ("intro", "{name} serves as a {prof} around {city} ."),
    ("intro", "{name} serves as a busy {prof} around {city} ."),
    ("born", "{name} entered the world during {year} ."),
    ("born", "{name} reportedly entered the world during {year} ."),
    ("owns", "{name} keeps {count} {item} ."),
    ("owns", "{name} still keeps {count} {item} ."),
)
_TGT_FILLERS = (
    "the harbour bell rings each evening .",
    "local ledgers track yearly visitors .",
)

# Question templates are shared between domains (question style shifts far
# less than passage style across reading-comprehension corpora); only the
# inventory words inside them differ by domain.
_QUESTIONS = (
    ("who is the {prof} from {city} ?", "name"),
    ("what year was {name} born ?", "year"),
    ("how many {item} does {name} have ?", "count"),
    ("where is {name} from ?", "city"),
)

_ALL_CITIES = _CITIES_SHARED + _CITIES_ONLY[DomainLabel.SOURCE] + \
    _CITIES_ONLY[DomainLabel.TARGET]
_SYNTH_GAZETTEER = {(c.lower(),): "LOC" for c in _ALL_CITIES}


@dataclass
class DomainCorpus:
    domain: DomainLabel
    passages: list[AnnotatedPassage]
    examples: list[QAExample] = field(default_factory=list)


def synthetic_annotator() -> RuleAnnotator:
    """Annotator with the fixture gazetteer (cities typed LOC)."""
    return RuleAnnotator(_SYNTH_GAZETTEER)


def _find_span(passage: AnnotatedPassage, answer_text: str) -> AnswerSpan:
    want = answer_text.split(" ")
    texts = [t.text for t in passage.tokens]
    for i in range(len(texts) - len(want) + 1):
        if texts[i:i + len(want)] == want:
            return AnswerSpan(i, i + len(want) - 1)
    raise RuntimeError(f"answer {answer_text!r} not found in {passage.id!r}")


def _pick2(rng: np.random.Generator, shared: tuple[str, ...],
           only: tuple[str, ...]) -> tuple[str, str]:
    pool = shared + only
    i, j = rng.choice(len(pool), size=2, replace=False)
    return pool[int(i)], pool[int(j)]


def _two_ints(rng: np.random.Generator, lo: int, hi: int) -> tuple[str, str]:
    a = int(rng.integers(lo, hi))
    b = int(rng.integers(lo, hi - 1))
    if b >= a:
        b += 1
    return str(a), str(b)


def _make_domain(domain: DomainLabel, n_passages: int, rng: np.random.Generator,
                 ann: RuleAnnotator) -> DomainCorpus:
    sentences = _SRC_SENTENCES if domain == DomainLabel.SOURCE else _TGT_SENTENCES
    by_kind: dict[str, list[str]] = {}
    for kind, tpl in sentences:
        by_kind.setdefault(kind, []).append(tpl)
    tag = "s" if domain == DomainLabel.SOURCE else "t"
    fillers = _SRC_FILLERS if domain == DomainLabel.SOURCE else _TGT_FILLERS
    year_lo, year_hi = _YEAR_RANGE[domain]
    count_lo, count_hi = _COUNT_RANGE[domain]

    corpus = DomainCorpus(domain, [])
    for pi in range(n_passages):
        firsts = _pick2(rng, _FIRST_SHARED, _FIRST_ONLY[domain])
        lasts = _pick2(rng, _LAST_SHARED, _LAST_ONLY[domain])
        cities = _pick2(rng, _CITIES_SHARED, _CITIES_ONLY[domain])
        profs = _pick2(rng, _PROF_SHARED, _PROF_ONLY[domain])
        item = _pick2(rng, _ITEMS_SHARED, _ITEMS_ONLY[domain])[0]
        years = _two_ints(rng, year_lo, year_hi)
        counts = _two_ints(rng, count_lo, count_hi)
        facts = [
            {"name": f"{firsts[k]} {lasts[k]}", "city": cities[k],
             "prof": profs[k], "item": item, "year": years[k],
             "count": counts[k]}
            for k in range(2)
        ]
        # One contiguous sentence block per person (shuffled within and
        # between blocks) keeps the binding local enough to learn.
        blocks = []
        for fact in facts:
            sents = [by_kind[k][rng.integers(len(by_kind[k]))].format(**fact)
                     for k in ("intro", "born", "owns")]
            blocks.append([sents[i] for i in rng.permutation(3)])
        if rng.random() < 0.5:
            blocks.append([fillers[rng.integers(len(fillers))]])
        order = rng.permutation(len(blocks))
        text = " ".join(" ".join(blocks[i]) for i in order)
        passage = AnnotatedPassage(f"{tag}{pi}", text, ann.annotate(text), domain)
        corpus.passages.append(passage)

        q_idx = rng.permutation(len(_QUESTIONS))[:2]
        for qn, qi in enumerate(sorted(int(i) for i in q_idx)):
            tpl, fld = _QUESTIONS[qi]
            fact = facts[int(rng.integers(2))]
            q_text = tpl.format(**fact)
            corpus.examples.append(QAExample(
                f"{tag}{pi}.q{qn}", passage, q_text, ann.annotate(q_text),
                _find_span(passage, fact[fld]), Provenance.HUMAN))
    return corpus


def make_synthetic_domains(seed: int, n_passages_per_domain: int
                           ) -> tuple[DomainCorpus, DomainCorpus]:
    """Deterministic two-domain QA fixture over a shared entity inventory.

    Both corpora carry gold labels; the adaptation pipeline must ignore the
    target labels except for development-set evaluation.
    """
    if n_passages_per_domain < 1:
        raise ValueError("n_passages_per_domain must be >= 1")
    rng = np.random.default_rng(seed)
    ann = synthetic_annotator()
    source = _make_domain(DomainLabel.SOURCE, n_passages_per_domain, rng, ann)
    target = _make_domain(DomainLabel.TARGET, n_passages_per_domain, rng, ann)
    return source, target


def _corpus_token_set(corpus: DomainCorpus) -> set[str]:
    types = {t.text for p in corpus.passages for t in p.tokens}
    types.update(t.text for ex in corpus.examples for t in ex.question_tokens)
    return types


def vocabulary_overlap(a: DomainCorpus, b: DomainCorpus) -> float:
    """Token-set Jaccard over generated passages and questions."""
    sa, sb = _corpus_token_set(a), _corpus_token_set(b)
    return len(sa & sb) / len(sa | sb)
