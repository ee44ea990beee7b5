"""Seq2seq question generator with additive attention and a copy gate.

At each decode step the output distribution mixes a vocabulary softmax
with attention mass copied from passage positions:

    P(q_t) = g_t * P_vocab(q_t) + (1 - g_t) * P_copy(q_t)

where g_t is a sigmoid of [decoder state; attention context]. The support
is the vocabulary plus per-example out-of-vocabulary passage token types.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .batching import QGBatch, collate_qg
from .corpus import (BOS, EOS, PAD, UNK, NER_TAGS, POS_TAGS, AnnotatedPassage,
                     AnswerSpan, Provenance, QAExample, RuleAnnotator,
                     Vocabulary)
from .extractor import extract_candidates, sample_candidates
from .trainer import TrainingDiverged, lr_for_epoch

log = logging.getLogger(__name__)

_EPS = 1e-12


@dataclass
class QGenConfig:
    lstm_hidden: int = 125
    word_dim: int = 64
    pos_dim: int = 8
    ner_dim: int = 8
    dropout_rate: float = 0.3
    beam_size: int = 5
    max_decode_len: int = 30
    max_passage_len: int = 300

    def __post_init__(self):
        if self.lstm_hidden <= 0:
            raise ValueError("lstm_hidden must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.beam_size < 1 or self.max_decode_len < 1:
            raise ValueError("beam_size and max_decode_len must be >= 1")


@dataclass
class DecodeStep:
    """State handed between decode steps; attention rows live on the simplex."""
    hidden: tuple[torch.Tensor, torch.Tensor]   # LSTM (h, c), each [B, 2H]
    attention: torch.Tensor | None = None       # [B, T]
    gate: torch.Tensor | None = None            # [B]


class QGenerator(nn.Module):
    """BiLSTM encoder over lexicon features + LSTM pointer-generator decoder."""

    def __init__(self, config: QGenConfig, vocab: Vocabulary,
                 word_embeddings: np.ndarray | None = None):
        super().__init__()
        self.config = config
        self.vocab = vocab
        h = config.lstm_hidden
        self.word_emb = nn.Embedding(len(vocab), config.word_dim, padding_idx=PAD)
        self.pos_emb = nn.Embedding(len(POS_TAGS), config.pos_dim, padding_idx=0)
        self.ner_emb = nn.Embedding(len(NER_TAGS), config.ner_dim, padding_idx=0)
        if word_embeddings is not None:
            with torch.no_grad():
                self.word_emb.weight.copy_(torch.as_tensor(word_embeddings))
        lex_dim = config.word_dim + config.pos_dim + config.ner_dim + 1
        self.encoder = nn.LSTM(lex_dim, h, batch_first=True, bidirectional=True)
        self.bridge = nn.Linear(2 * h, 2 * h)
        self.dec_cell = nn.LSTMCell(config.word_dim, 2 * h)
        self.att_enc = nn.Linear(2 * h, h, bias=False)
        self.att_dec = nn.Linear(2 * h, h)
        self.att_v = nn.Linear(h, 1, bias=False)
        self.out = nn.Linear(4 * h, len(vocab))
        self.gate = nn.Linear(4 * h, 1)
        self.dropout = nn.Dropout(config.dropout_rate)

    # -- encoding ----------------------------------------------------------

    def encode(self, batch: QGBatch) -> torch.Tensor:
        """Encoder states [B, T, 2H] for lexicon(word,pos,ner,answer-flag)."""
        if batch.passage.word.shape[1] > self.config.max_passage_len:
            raise ValueError(
                f"passage length {batch.passage.word.shape[1]} exceeds "
                f"max_passage_len={self.config.max_passage_len}")
        p = batch.passage
        dtype = self.word_emb.weight.dtype
        lex = torch.cat([
            self.word_emb(p.word), self.pos_emb(p.pos), self.ner_emb(p.ner),
            batch.answer_flag.to(dtype).unsqueeze(-1),
        ], dim=-1)
        lex = self.dropout(lex)
        states, _ = self.encoder(lex)
        return states * p.mask.unsqueeze(-1).to(dtype)

    def _init_state(self, enc: torch.Tensor, mask: torch.Tensor
                    ) -> tuple[torch.Tensor, torch.Tensor]:
        dtype = enc.dtype
        denom = mask.sum(dim=1, keepdim=True).to(dtype).clamp(min=1)
        mean = (enc * mask.unsqueeze(-1).to(dtype)).sum(dim=1) / denom
        h0 = torch.tanh(self.bridge(mean))
        return h0, torch.zeros_like(h0)

    # -- one decode step (Eq. 1 mixture) ------------------------------------

    def step(self, prev_token: torch.Tensor, state: DecodeStep,
             enc: torch.Tensor, enc_mask: torch.Tensor,
             passage_ext: torch.Tensor, n_ext: int, *,
             gate_override: float | None = None
             ) -> tuple[torch.Tensor, DecodeStep]:
        """Advance the decoder one token; returns P over vocab+extension.

        ``prev_token`` [B] holds base-vocab ids (OOV fed as UNK).
        ``gate_override`` pins g_t to a constant (diagnostic hook for
        isolating the vocabulary and copy branches of the mixture).
        """
        emb = self.dropout(self.word_emb(prev_token))
        h, c = self.dec_cell(emb, state.hidden)

        scores = self.att_v(torch.tanh(
            self.att_enc(enc) + self.att_dec(h).unsqueeze(1))).squeeze(-1)
        scores = scores.masked_fill(~enc_mask, float("-inf"))
        att = torch.softmax(scores, dim=1)                       # [B, T]
        context = torch.bmm(att.unsqueeze(1), enc).squeeze(1)    # [B, 2H]

        feat = torch.cat([h, context], dim=-1)
        p_vocab = torch.softmax(self.out(feat), dim=-1)
        g = torch.sigmoid(self.gate(feat)).squeeze(-1)           # [B]
        if gate_override is not None:
            g = torch.full_like(g, gate_override)

        b, v = p_vocab.shape
        probs = p_vocab.new_zeros((b, v + n_ext))
        probs[:, :v] = g.unsqueeze(1) * p_vocab
        probs.scatter_add_(1, passage_ext,
                           (1.0 - g).unsqueeze(1) * att)
        return probs, DecodeStep((h, c), att, g)

    # -- teacher-forced NLL --------------------------------------------------

    def sequence_nll(self, batch: QGBatch) -> torch.Tensor:
        """Mean per-token negative log-likelihood of the gold questions."""
        if batch.dec_input is None:
            raise ValueError("batch collated without decoder targets")
        enc = self.encode(batch)
        mask = batch.passage.mask
        state = DecodeStep(self._init_state(enc, mask))
        total = enc.new_zeros(())
        n_tokens = batch.dec_mask.sum()
        for t in range(batch.dec_input.shape[1]):
            probs, state = self.step(batch.dec_input[:, t], state, enc, mask,
                                     batch.passage_ext, batch.n_ext)
            p_gold = probs.gather(1, batch.dec_target[:, t:t + 1]).squeeze(1)
            nll = -torch.log(p_gold.clamp(min=_EPS))
            total = total + (nll * batch.dec_mask[:, t].to(nll.dtype)).sum()
        return total / n_tokens.to(total.dtype)


# ---------------------------------------------------------------------------
# Single-example conveniences (contract surface for tests)
# ---------------------------------------------------------------------------

def qgen_encode(model: QGenerator, passage: AnnotatedPassage,
                answer: AnswerSpan) -> torch.Tensor:
    """Encoder states (T, 2H) for one passage/answer pair."""
    if answer.end >= len(passage):
        raise ValueError("answer span outside passage")
    ex = QAExample("enc", passage, "?", passage.tokens[:1], answer,
                   Provenance.HUMAN)
    batch = collate_qg([ex], model.vocab, with_targets=False)
    return model.encode(batch).squeeze(0)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class QGenTrainLog:
    epoch_nll: list[float] = field(default_factory=list)


def train_qgen(model: QGenerator, examples: list[QAExample],
               train_config, *, epochs: int | None = None) -> QGenTrainLog:
    """Teacher-forced NLL training with Adamax and the shared LR schedule.

    Parameters are meant to be frozen after this returns; generation never
    updates them.
    """
    if not examples:
        raise ValueError("no training examples")
    torch.manual_seed(train_config.seed)
    rng = np.random.default_rng(train_config.seed)
    n_epochs = epochs if epochs is not None else train_config.epochs
    opt = torch.optim.Adamax(model.parameters(), lr=train_config.learning_rate,
                             betas=(train_config.adam_beta1, train_config.adam_beta2))
    history = QGenTrainLog()
    bsz = train_config.batch_size
    for epoch in range(n_epochs):
        lr = lr_for_epoch(train_config.learning_rate, epoch,
                          train_config.lr_halving_period_epochs)
        for group in opt.param_groups:
            group["lr"] = lr
        model.train()
        order = rng.permutation(len(examples))
        losses = []
        for lo in range(0, len(order), bsz):
            chunk = [examples[i] for i in order[lo:lo + bsz]]
            batch = collate_qg(chunk, model.vocab)
            loss = model.sequence_nll(batch)
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"QG loss {loss.item()} at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(),
                                     train_config.grad_clip_norm)
            opt.step()
            losses.append(loss.item())
        history.epoch_nll.append(float(np.mean(losses)))
        log.info("qgen epoch %d: nll=%.4f lr=%.5f", epoch,
                 history.epoch_nll[-1], lr)
    model.eval()
    return history


# ---------------------------------------------------------------------------
# Beam-search generation
# ---------------------------------------------------------------------------

@dataclass
class _Hypothesis:
    tokens: list[str]
    logp: float
    state: DecodeStep
    finished: bool = False

    def score(self) -> float:
        return self.logp / max(1, len(self.tokens) + (1 if self.finished else 0))


@torch.no_grad()
def generate_question(model: QGenerator, passage: AnnotatedPassage,
                      answer: AnswerSpan) -> list[str]:
    """Beam-search decode of one question; [] when EOS is emitted first.

    UNK emissions are replaced by the passage token with the highest
    attention weight at that step.
    """
    model.eval()
    cfg = model.config
    vocab = model.vocab
    ex = QAExample("gen", passage, "?", passage.tokens[:1], answer,
                   Provenance.HUMAN)
    batch = collate_qg([ex], vocab, with_targets=False)
    enc = model.encode(batch)
    mask = batch.passage.mask
    init = DecodeStep(model._init_state(enc, mask))
    passage_texts = batch.passage.texts[0]
    oov = batch.oov_lists[0]

    beams = [_Hypothesis([], 0.0, init)]
    done: list[_Hypothesis] = []
    for _ in range(cfg.max_decode_len + 1):  # +1 allows a final EOS
        live = [b for b in beams if not b.finished]
        if not live:
            break
        candidates: list[_Hypothesis] = []
        for hyp in live:
            prev = BOS if not hyp.tokens else vocab.lookup(hyp.tokens[-1])
            probs, state = model.step(
                torch.tensor([prev]), hyp.state, enc, mask,
                batch.passage_ext, batch.n_ext)
            logp = torch.log(probs.clamp(min=_EPS)).squeeze(0)
            logp[PAD] = float("-inf")
            logp[BOS] = float("-inf")
            if len(hyp.tokens) >= cfg.max_decode_len:
                logp[:] = float("-inf")
                logp[EOS] = 0.0  # force termination at the length cap
            top = torch.topk(logp, min(cfg.beam_size, logp.shape[0]))
            for val, idx in zip(top.values.tolist(), top.indices.tolist()):
                if idx == EOS:
                    candidates.append(_Hypothesis(
                        list(hyp.tokens), hyp.logp + val, state, True))
                    continue
                if idx >= len(vocab):
                    text = oov[idx - len(vocab)]
                elif idx == UNK:
                    att_pos = int(torch.argmax(state.attention[0]).item())
                    text = passage_texts[att_pos]
                else:
                    text = vocab.token(idx)
                candidates.append(_Hypothesis(
                    hyp.tokens + [text], hyp.logp + val, state))
        candidates.extend(b for b in beams if b.finished)
        candidates.sort(key=lambda h: h.logp, reverse=True)
        beams = candidates[:cfg.beam_size]
        done = [b for b in beams if b.finished]
        if all(b.finished for b in beams):
            break
    pool = done or beams
    best = max(pool, key=lambda h: h.score())
    return best.tokens


def build_tgen(target_passages: list[AnnotatedPassage], model: QGenerator,
               annotator: RuleAnnotator, *, max_per_passage: int = 3,
               seed: int = 0, max_question_len: int = 30) -> list[QAExample]:
    """Synthesize target-domain QA pairs from NER candidates + generation.

    One question per sampled candidate; items with empty generations are
    dropped. All outputs carry provenance=synthetic.
    """
    out: list[QAExample] = []
    for pi, passage in enumerate(target_passages):
        candidates = sample_candidates(extract_candidates(passage),
                                       max_per_passage, seed=seed + pi)
        for ci, cand in enumerate(candidates):
            tokens = generate_question(model, passage, cand.span)
            if not tokens:
                continue
            q_text = " ".join(tokens)
            q_tokens = annotator.annotate(q_text)[:max_question_len]
            out.append(QAExample(f"{passage.id}.gen{ci}", passage, q_text,
                                 q_tokens, cand.span, Provenance.SYNTHETIC))
    return out


def init_nll_reference(vocab_size: int) -> float:
    """Uniform-vocabulary entropy, the expected per-token NLL at init."""
    return math.log(vocab_size)
