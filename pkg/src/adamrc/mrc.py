"""SAN-style extractive reader: fusion encoder + multi-step answer module.

The encoder produces a passage working memory M_p (T x 2m) and a pooled
question summary M_q (2m); the answer module runs K GRU steps from
s_0 = M_q, emitting start/end softmaxes per step, averaged (with
stochastic step dropout during training) into the final prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .batching import QABatch, TokenBatch
from .corpus import NER_TAGS, PAD, POS_TAGS, AnswerSpan, Vocabulary

_EPS = 1e-12


@dataclass
class MRCConfig:
    hidden: int = 128                 # m: BiLSTM half-width
    contextual_layers: int = 2
    answer_steps: int = 5             # K
    prediction_dropout: float = 0.4   # stochastic step dropout (train only)
    dropout_rate: float = 0.3
    max_span_len: int = 15
    word_dim: int = 64
    pos_dim: int = 8
    ner_dim: int = 8
    # Cross-sequence exact-match lexicon flag (question word in passage and
    # vice versa); the SAN family relies on it for entity binding.
    use_match_feature: bool = True

    def __post_init__(self):
        if self.hidden <= 0 or self.answer_steps < 1:
            raise ValueError("hidden must be > 0 and answer_steps >= 1")
        for rate in (self.prediction_dropout, self.dropout_rate):
            if not 0.0 <= rate < 1.0:
                raise ValueError("dropout rates must be in [0, 1)")


@dataclass
class EncoderOutput:
    """Feature pair consumed by both the answer module and the adversary."""
    m_p: torch.Tensor   # [B, T, 2m]
    m_q: torch.Tensor   # [B, 2m]
    mask: torch.Tensor  # [B, T] bool


@dataclass
class SpanDistribution:
    step_starts: torch.Tensor  # [K, B, T], each row a simplex
    step_ends: torch.Tensor    # [K, B, T]
    avg_start: torch.Tensor    # [B, T]
    avg_end: torch.Tensor      # [B, T]


def _masked_softmax(scores: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    return torch.softmax(scores.masked_fill(~mask, float("-inf")), dim=-1)


class MRCEncoder(nn.Module):
    """Lexicon + 2-layer BiLSTM + cross-attention fusion (parameters: theta_e)."""

    def __init__(self, config: MRCConfig, vocab: Vocabulary,
                 word_embeddings: np.ndarray | None = None):
        super().__init__()
        self.config = config
        m = config.hidden
        self.word_emb = nn.Embedding(len(vocab), config.word_dim, padding_idx=PAD)
        self.pos_emb = nn.Embedding(len(POS_TAGS), config.pos_dim, padding_idx=0)
        self.ner_emb = nn.Embedding(len(NER_TAGS), config.ner_dim, padding_idx=0)
        if word_embeddings is not None:
            with torch.no_grad():
                self.word_emb.weight.copy_(torch.as_tensor(word_embeddings))
        lex_dim = config.word_dim + config.pos_dim + config.ner_dim
        if config.use_match_feature:
            lex_dim += 1
        self.contextual = nn.LSTM(
            lex_dim, m, num_layers=config.contextual_layers, batch_first=True,
            bidirectional=True,
            dropout=config.dropout_rate if config.contextual_layers > 1 else 0.0)
        self.cross_score = nn.Linear(2 * m, 2 * m, bias=False)
        self.fuse = nn.Linear(4 * m, 2 * m)
        self.q_score = nn.Linear(2 * m, 1, bias=False)
        self.dropout = nn.Dropout(config.dropout_rate)

    def _contextual(self, tokens: TokenBatch,
                    match: torch.Tensor | None) -> torch.Tensor:
        dtype = self.word_emb.weight.dtype
        parts = [self.word_emb(tokens.word), self.pos_emb(tokens.pos),
                 self.ner_emb(tokens.ner)]
        if self.config.use_match_feature:
            if match is None:
                match = torch.zeros(tokens.word.shape)
            parts.append(match.to(dtype).unsqueeze(-1))
        states, _ = self.contextual(self.dropout(torch.cat(parts, dim=-1)))
        return states * tokens.mask.unsqueeze(-1).to(dtype)

    def cross_attention(self, h_p: torch.Tensor, h_q: torch.Tensor,
                        q_mask: torch.Tensor) -> torch.Tensor:
        """Passage-over-question attention rows [B, T, T'] (simplex rows)."""
        scores = torch.bmm(self.cross_score(h_p), h_q.transpose(1, 2))
        return _masked_softmax(scores, q_mask.unsqueeze(1))

    def forward(self, passage: TokenBatch, question: TokenBatch,
                passage_match: torch.Tensor | None = None,
                question_match: torch.Tensor | None = None) -> EncoderOutput:
        if not bool(passage.mask.any(dim=1).all()) or \
           not bool(question.mask.any(dim=1).all()):
            raise ValueError("empty passage or question in batch")
        h_p = self._contextual(passage, passage_match)     # [B, T, 2m]
        h_q = self._contextual(question, question_match)   # [B, T', 2m]

        att = self.cross_attention(h_p, h_q, question.mask)       # [B, T, T']
        fused = torch.cat([h_p, torch.bmm(att, h_q)], dim=-1)
        m_p = torch.tanh(self.fuse(self.dropout(fused)))
        m_p = m_p * passage.mask.unsqueeze(-1).to(m_p.dtype)

        q_att = _masked_softmax(self.q_score(h_q).squeeze(-1), question.mask)
        m_q = torch.bmm(q_att.unsqueeze(1), h_q).squeeze(1)        # [B, 2m]
        return EncoderOutput(m_p, m_q, passage.mask)


class AnswerModule(nn.Module):
    """K-step GRU span predictor (parameters: theta_d)."""

    def __init__(self, config: MRCConfig):
        super().__init__()
        self.config = config
        m2 = 2 * config.hidden
        self.gru = nn.GRUCell(m2, m2)
        self.step_att = nn.Linear(m2, m2, bias=False)
        self.w_start = nn.Linear(m2, m2, bias=False)
        self.w_end = nn.Linear(m2, m2, bias=False)

    def forward(self, enc: EncoderOutput, train_mode: bool) -> SpanDistribution:
        cfg = self.config
        s = enc.m_q
        step_starts, step_ends = [], []
        for _ in range(cfg.answer_steps):
            scores = torch.bmm(enc.m_p, self.step_att(s).unsqueeze(-1)).squeeze(-1)
            x = torch.bmm(_masked_softmax(scores, enc.mask).unsqueeze(1),
                          enc.m_p).squeeze(1)
            s = self.gru(x, s)
            start = _masked_softmax(
                torch.bmm(enc.m_p, self.w_start(s).unsqueeze(-1)).squeeze(-1),
                enc.mask)
            end = _masked_softmax(
                torch.bmm(enc.m_p, self.w_end(s).unsqueeze(-1)).squeeze(-1),
                enc.mask)
            step_starts.append(start)
            step_ends.append(end)
        starts = torch.stack(step_starts)   # [K, B, T]
        ends = torch.stack(step_ends)

        if train_mode and cfg.prediction_dropout > 0.0:
            keep = torch.rand(cfg.answer_steps) >= cfg.prediction_dropout
            if not keep.any():
                keep[torch.randint(cfg.answer_steps, (1,))] = True
            starts_kept = starts[keep]
            ends_kept = ends[keep]
        else:
            starts_kept, ends_kept = starts, ends
        return SpanDistribution(starts, ends, starts_kept.mean(dim=0),
                                ends_kept.mean(dim=0))


class MRCModel(nn.Module):
    """Encoder (theta_e) + answer module (theta_d) behind one entry point."""

    def __init__(self, config: MRCConfig, vocab: Vocabulary,
                 word_embeddings: np.ndarray | None = None):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.encoder = MRCEncoder(config, vocab, word_embeddings)
        self.answer_module = AnswerModule(config)

    def encode(self, batch: QABatch) -> EncoderOutput:
        return self.encoder(batch.passage, batch.question,
                            batch.passage_match, batch.question_match)

    def decode(self, enc: EncoderOutput, train_mode: bool | None = None
               ) -> SpanDistribution:
        mode = self.training if train_mode is None else train_mode
        return self.answer_module(enc, mode)

    def forward(self, batch: QABatch) -> SpanDistribution:
        return self.decode(self.encode(batch))


def answer_nll(dist: SpanDistribution, starts: torch.Tensor,
               ends: torch.Tensor, weight: torch.Tensor | None = None
               ) -> torch.Tensor:
    """-log P_start(a_start) - log P_end(a_end) from averaged distributions.

    ``weight`` selects the examples that contribute (source provenance in
    adaptation); the result is the mean over selected items.
    """
    b, t = dist.avg_start.shape
    if int(starts.max()) >= t or int(ends.max()) >= t:
        raise IndexError("gold span index out of range")
    nll = (-torch.log(dist.avg_start.gather(1, starts.view(-1, 1)).clamp(min=_EPS))
           - torch.log(dist.avg_end.gather(1, ends.view(-1, 1)).clamp(min=_EPS))
           ).squeeze(1)
    if weight is None:
        return nll.mean()
    if int(weight.sum()) == 0:
        raise ValueError("answer_nll over a batch with no supervised items")
    w = weight.to(nll.dtype)
    return (nll * w).sum() / w.sum()


def single_answer_nll(dist: SpanDistribution, gold: AnswerSpan) -> float:
    """Scalar loss for a single-example SpanDistribution."""
    return float(answer_nll(dist, torch.tensor([gold.start]),
                            torch.tensor([gold.end])))


def predict_span(p_start: np.ndarray, p_end: np.ndarray,
                 max_span_len: int) -> AnswerSpan:
    """Argmax of P_start(i) * P_end(j) over i <= j < i + max_span_len.

    Ties break toward the smaller i, then smaller j (argmax over the
    row-major pair matrix picks exactly that).
    """
    t = p_start.shape[0]
    scores = np.outer(p_start, p_end)
    invalid = ~(np.triu(np.ones((t, t), dtype=bool))
                & (np.arange(t)[None, :] - np.arange(t)[:, None] < max_span_len))
    scores[invalid] = -1.0
    flat = int(np.argmax(scores))
    return AnswerSpan(flat // t, flat % t)
