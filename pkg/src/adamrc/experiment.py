"""Desk-scale two-domain adaptation experiment on the synthetic fixture.

Per seed, the full pipeline runs once: source pre-training (the
source-only baseline), question generation, pseudo-labeling, then two
fine-tuning twins from the same pre-trained state — the adversarial
model, and a reference that consumes the same pseudo data through the
answer loss without the adversary (the two-stage synthesis strategy this
method was built against). Feature diagnostics (probe accuracy, domain
KL) compare the twins with one frozen, freshly-seeded pooling estimator
so both are measured by the same function.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .adversary import DomainClassifier
from .batching import collate_qa
from .corpus import (DomainCorpus, build_vocab, make_synthetic_domains,
                     random_embeddings, synthetic_annotator, vocab_streams)
from .metrics import (FeatureSample, MetricReport, collect_features,
                      domain_kl, evaluate_model)
from .mrc import MRCConfig, MRCModel, answer_nll
from .qgen import QGenConfig, QGenerator, build_tgen, train_qgen
from .trainer import (BatchComposer, TrainConfig, adapt, lr_for_epoch,
                      mrc_params, restore_mrc, train_source)

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    seed: int = 0
    n_passages: int = 1000
    dev_passages: int = 80      # held out per domain
    hidden: int = 32            # MRC BiLSTM half-width (tiny model)
    word_dim: int = 32
    qg_hidden: int = 64
    dropout: float = 0.1        # desk-scale models overfit less than full-scale
    source_epochs: int = 13
    qg_epochs: int = 8
    adapt_epochs: int = 12
    adapt_lr_halving: int = 4   # settle the adversarial game before selection
    max_candidates: int = 2
    n_feature_samples: int = 160
    n_probe_splits: int = 5
    k_s: int = 16
    k_t: int = 8
    learning_rate: float = 0.002

    def mrc_config(self) -> MRCConfig:
        return MRCConfig(hidden=self.hidden, word_dim=self.word_dim,
                         answer_steps=5, dropout_rate=self.dropout,
                         prediction_dropout=0.2)

    def train_config(self, **overrides) -> TrainConfig:
        base = dict(k_s=self.k_s, k_t=self.k_t, seed=self.seed,
                    learning_rate=self.learning_rate,
                    dropout_rate=self.dropout)
        base.update(overrides)
        return TrainConfig(**base)


@dataclass
class ExperimentResult:
    baseline: MetricReport        # source-only model on target dev
    adapted: MetricReport         # adversarially adapted model on target dev
    pseudo_only: MetricReport     # non-adversarial pseudo-data reference
    source_dev: MetricReport      # source-only model on source dev
    kl_unadapted: float           # pseudo-only twin features
    kl_adapted: float             # adversarial twin features
    probe_acc_unadapted: float
    probe_acc_adapted: float
    n_tgen: int

    @property
    def f1_improvement(self) -> float:
        return self.adapted.f1 - self.baseline.f1


def split_corpus(corpus: DomainCorpus, dev_passages: int
                 ) -> tuple[DomainCorpus, DomainCorpus]:
    """Passage-level train/dev split (generation order is already random)."""
    if not 0 < dev_passages < len(corpus.passages):
        raise ValueError("dev_passages must leave a non-empty train set")
    dev_ids = {p.id for p in corpus.passages[-dev_passages:]}
    train = DomainCorpus(corpus.domain,
                         [p for p in corpus.passages if p.id not in dev_ids],
                         [e for e in corpus.examples
                          if e.passage.id not in dev_ids])
    dev = DomainCorpus(corpus.domain,
                       [p for p in corpus.passages if p.id in dev_ids],
                       [e for e in corpus.examples if e.passage.id in dev_ids])
    return train, dev


def probe_domain_accuracy(samples: list[FeatureSample], seed: int = 0,
                          epochs: int = 300, lr: float = 0.5) -> float:
    """Held-out accuracy of a logistic-regression probe on frozen features.

    Deterministic full-batch gradient descent on standardized features,
    50/50 split; higher accuracy means more domain-separable features.
    """
    x = np.stack([s.features for s in samples]).astype(np.float64)
    y = np.array([float(s.domain) for s in samples])
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(x))
    cut = len(x) // 2
    tr, te = order[:cut], order[cut:]
    mean, std = x[tr].mean(axis=0), x[tr].std(axis=0) + 1e-8
    xs = (x - mean) / std
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(epochs):
        z = xs[tr] @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
        w -= lr * (xs[tr].T @ (p - y[tr]) / len(tr))
        b -= lr * float(np.mean(p - y[tr]))
    pred = (xs[te] @ w + b) > 0
    return float(np.mean(pred == (y[te] > 0.5)))


def _measurement_classifier(feature_dim: int, seed: int) -> DomainClassifier:
    torch.manual_seed(seed)
    return DomainClassifier(feature_dim)


def finetune_pseudo_only(model: MRCModel, source_train, tgen, target_dev,
                         config: TrainConfig, epochs: int,
                         halving: int) -> None:
    """Reference twin: same mixed batches, answer loss on every item
    (synthetic included), no domain classifier. Restores its best-dev state.
    """
    torch.manual_seed(config.seed)
    composer = BatchComposer(source_train, tgen, config.k_s, config.k_t,
                             config.seed)
    steps_per_epoch = math.ceil(len(source_train) / config.k_s)
    opt = torch.optim.Adamax(model.parameters(), lr=config.learning_rate,
                             betas=(config.adam_beta1, config.adam_beta2))
    best: tuple[float, dict | None] = (-1.0, None)
    for epoch in range(epochs):
        lr = lr_for_epoch(config.learning_rate, epoch, halving)
        for group in opt.param_groups:
            group["lr"] = lr
        model.train()
        for _ in range(steps_per_epoch):
            batch = collate_qa(composer.next_batch(), model.vocab)
            dist = model.decode(model.encode(batch), train_mode=True)
            loss = answer_nll(dist, batch.starts, batch.ends, None)
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip_norm)
            opt.step()
        f1 = evaluate_model(model, target_dev).f1
        if f1 > best[0]:
            best = (f1, mrc_params(model))
    assert best[1] is not None
    restore_mrc(model, best[1])


def run_adaptation_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    torch.manual_seed(cfg.seed)
    source, target = make_synthetic_domains(cfg.seed, cfg.n_passages)
    src_train, src_dev = split_corpus(source, cfg.dev_passages)
    tgt_train, tgt_dev = split_corpus(target, cfg.dev_passages)

    # Unsupervised setting: the vocabulary may see target text, never labels.
    vocab = build_vocab(
        list(vocab_streams(src_train.examples))
        + [[t.text for t in p.tokens] for p in tgt_train.passages],
        embedding_dim=cfg.word_dim)
    table = random_embeddings(vocab, cfg.seed)
    log.info("experiment seed=%d: vocab=%d source_train=%d target_train=%d",
             cfg.seed, len(vocab), len(src_train.examples),
             len(tgt_train.passages))

    # Source pre-training; this model is the source-only baseline.
    model = MRCModel(cfg.mrc_config(), vocab, table)
    fit = train_source(model, src_train.examples, src_dev.examples,
                       cfg.train_config(), epochs=cfg.source_epochs)
    theta_s = mrc_params(model)
    source_dev_report = evaluate_model(model, src_dev.examples)
    baseline = evaluate_model(model, tgt_dev.examples)
    log.info("seed=%d theta_s: source-dev F1=%.2f target-dev F1=%.2f (ep %d)",
             cfg.seed, source_dev_report.f1, baseline.f1, fit.best_epoch)

    # Question generation and pseudo-labeling (greedy decode for speed).
    qg = QGenerator(QGenConfig(lstm_hidden=cfg.qg_hidden,
                               word_dim=cfg.word_dim, beam_size=1),
                    vocab, table)
    train_qgen(qg, src_train.examples, cfg.train_config(), epochs=cfg.qg_epochs)
    tgen = build_tgen(tgt_train.passages, qg, synthetic_annotator(),
                      max_per_passage=cfg.max_candidates, seed=cfg.seed)
    if not tgen:
        raise RuntimeError("question generation produced an empty T_gen")
    log.info("seed=%d: |T_gen|=%d (example: %r)", cfg.seed, len(tgen),
             tgen[0].question_text)

    probe = _measurement_classifier(2 * cfg.hidden, cfg.seed + 9000)
    eval_pool = src_dev.examples + tgt_dev.examples

    def diagnostics(m: MRCModel) -> tuple[float, float]:
        feats = collect_features(m, probe, eval_pool, cfg.n_feature_samples,
                                 seed=cfg.seed)
        acc = float(np.mean([probe_domain_accuracy(feats, seed=s)
                             for s in range(cfg.n_probe_splits)]))
        return domain_kl(feats), acc

    # Adversarial adaptation from theta_s.
    classifier = DomainClassifier(2 * cfg.hidden)
    adapt(model, classifier, src_train.examples, tgen, tgt_dev.examples,
          cfg.train_config(lr_halving_period_epochs=cfg.adapt_lr_halving),
          epochs=cfg.adapt_epochs)
    adapted = evaluate_model(model, tgt_dev.examples)
    kl_adapted, acc_adapted = diagnostics(model)

    # Non-adversarial pseudo-data twin from the same theta_s.
    reference = MRCModel(cfg.mrc_config(), vocab, table)
    restore_mrc(reference, theta_s)
    finetune_pseudo_only(reference, src_train.examples, tgen,
                         tgt_dev.examples,
                         cfg.train_config(), cfg.adapt_epochs,
                         cfg.adapt_lr_halving)
    pseudo_only = evaluate_model(reference, tgt_dev.examples)
    kl_unadapted, acc_unadapted = diagnostics(reference)

    log.info("seed=%d: baseline F1=%.2f pseudo-only F1=%.2f adapted F1=%.2f | "
             "KL %.3f vs %.3f | probe %.3f vs %.3f", cfg.seed, baseline.f1,
             pseudo_only.f1, adapted.f1, kl_unadapted, kl_adapted,
             acc_unadapted, acc_adapted)
    return ExperimentResult(baseline, adapted, pseudo_only, source_dev_report,
                            kl_unadapted, kl_adapted, acc_unadapted,
                            acc_adapted, len(tgen))
