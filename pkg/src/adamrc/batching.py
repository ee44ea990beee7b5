"""Padded tensor collation for the QG and MRC models."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .corpus import PAD, UNK, QAExample, Token, Vocabulary


@dataclass
class TokenBatch:
    """Padded id tensors for a batch of token sequences."""
    word: torch.Tensor   # [B, L] long
    pos: torch.Tensor    # [B, L] long
    ner: torch.Tensor    # [B, L] long
    mask: torch.Tensor   # [B, L] bool, True on real tokens
    texts: list[list[str]]

    @property
    def lengths(self) -> torch.Tensor:
        return self.mask.sum(dim=1)


def collate_tokens(seqs: list[list[Token]], vocab: Vocabulary) -> TokenBatch:
    if not seqs or any(not s for s in seqs):
        raise ValueError("cannot collate empty token sequences")
    max_len = max(len(s) for s in seqs)
    b = len(seqs)
    word = torch.full((b, max_len), PAD, dtype=torch.long)
    pos = torch.zeros((b, max_len), dtype=torch.long)
    ner = torch.zeros((b, max_len), dtype=torch.long)
    mask = torch.zeros((b, max_len), dtype=torch.bool)
    for i, seq in enumerate(seqs):
        word[i, :len(seq)] = torch.tensor(vocab.encode(t.text for t in seq))
        pos[i, :len(seq)] = torch.tensor([t.pos_tag for t in seq])
        ner[i, :len(seq)] = torch.tensor([t.ner_tag for t in seq])
        mask[i, :len(seq)] = True
    return TokenBatch(word, pos, ner, mask, [[t.text for t in s] for s in seqs])


@dataclass
class QABatch:
    """MRC training/eval batch."""
    passage: TokenBatch
    question: TokenBatch
    starts: torch.Tensor        # [B] long
    ends: torch.Tensor          # [B] long
    answer_weight: torch.Tensor  # [B] bool, True where the answer loss applies
    domain: torch.Tensor        # [B] float 0/1
    passage_match: torch.Tensor  # [B, T] float, token occurs in the question
    question_match: torch.Tensor  # [B, T'] float, token occurs in the passage
    examples: list[QAExample]


def _match_flags(batch: TokenBatch, other_texts: list[list[str]]) -> torch.Tensor:
    flags = torch.zeros(batch.word.shape)
    for i, texts in enumerate(batch.texts):
        other = {t.lower() for t in other_texts[i]}
        for j, t in enumerate(texts):
            if t.lower() in other:
                flags[i, j] = 1.0
    return flags


def collate_qa(examples: list[QAExample], vocab: Vocabulary) -> QABatch:
    passage = collate_tokens([ex.passage.tokens for ex in examples], vocab)
    question = collate_tokens([ex.question_tokens for ex in examples], vocab)
    starts = torch.tensor([ex.answer.start for ex in examples], dtype=torch.long)
    ends = torch.tensor([ex.answer.end for ex in examples], dtype=torch.long)
    weight = torch.tensor([ex.provenance.value == "human" for ex in examples])
    domain = torch.tensor([float(ex.domain) for ex in examples])
    return QABatch(passage, question, starts, ends, weight, domain,
                   _match_flags(passage, question.texts),
                   _match_flags(question, passage.texts), examples)


@dataclass
class QGBatch:
    """Question-generation batch with copy-extended vocabulary ids.

    Extended ids: in-vocab passage tokens keep their vocab id; out-of-vocab
    passage token types get slots |V| + k in first-occurrence order, per
    example. ``n_ext`` is the widest extension in the batch.
    """
    passage: TokenBatch
    answer_flag: torch.Tensor    # [B, T] float 0/1
    passage_ext: torch.Tensor    # [B, T] long, ids into V + ext
    oov_lists: list[list[str]]
    n_ext: int
    dec_input: torch.Tensor | None = None    # [B, L] long (BOS + question)
    dec_target: torch.Tensor | None = None   # [B, L] long extended ids (+EOS)
    dec_mask: torch.Tensor | None = None     # [B, L] bool


def extend_passage_ids(texts: list[str], vocab: Vocabulary
                       ) -> tuple[list[int], list[str]]:
    ids, oov = [], []
    for t in texts:
        idx = vocab.lookup(t)
        if idx == UNK:
            if t not in oov:
                oov.append(t)
            idx = len(vocab) + oov.index(t)
        ids.append(idx)
    return ids, oov


def collate_qg(examples: list[QAExample], vocab: Vocabulary, *,
               with_targets: bool = True) -> QGBatch:
    from .corpus import BOS, EOS  # local to keep import surface tight

    passage = collate_tokens([ex.passage.tokens for ex in examples], vocab)
    b, max_t = passage.word.shape
    flag = torch.zeros((b, max_t))
    ext = torch.full((b, max_t), PAD, dtype=torch.long)
    oov_lists: list[list[str]] = []
    for i, ex in enumerate(examples):
        flag[i, ex.answer.start:ex.answer.end + 1] = 1.0
        ids, oov = extend_passage_ids(passage.texts[i], vocab)
        ext[i, :len(ids)] = torch.tensor(ids)
        oov_lists.append(oov)
    n_ext = max((len(o) for o in oov_lists), default=0)
    batch = QGBatch(passage, flag, ext, oov_lists, n_ext)
    if not with_targets:
        return batch

    q_texts = [[t.text for t in ex.question_tokens] for ex in examples]
    max_q = max(len(q) for q in q_texts) + 1  # +1 for EOS/BOS shift
    dec_in = torch.full((b, max_q), PAD, dtype=torch.long)
    dec_tgt = torch.full((b, max_q), PAD, dtype=torch.long)
    dec_mask = torch.zeros((b, max_q), dtype=torch.bool)
    for i, q in enumerate(q_texts):
        dec_in[i, 0] = BOS
        dec_in[i, 1:len(q) + 1] = torch.tensor(vocab.encode(q))
        tgt = []
        for t in q:
            idx = vocab.lookup(t)
            if idx == UNK and t in oov_lists[i]:
                idx = len(vocab) + oov_lists[i].index(t)
            tgt.append(idx)
        tgt.append(EOS)
        dec_tgt[i, :len(tgt)] = torch.tensor(tgt)
        dec_mask[i, :len(tgt)] = True
    batch.dec_input, batch.dec_target, batch.dec_mask = dec_in, dec_tgt, dec_mask
    return batch
