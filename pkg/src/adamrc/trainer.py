"""Training orchestration: source pre-training and adversarial adaptation.

The adaptation loop realizes the minimax objective with one optimizer:
the answer loss is computed on supervised items only, the domain loss on
every item through the gradient-reversal layer, and a single step updates
encoder, answer module, and classifier jointly. The trade-off coefficient
follows a sigmoid ramp over training progress.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import IO, Sequence

import numpy as np
import torch
from torch import nn

from .adversary import DomainClassifier, domain_loss
from .batching import QABatch, collate_qa
from .checkpoint import load_module_params, module_params
from .corpus import Provenance, QAExample
from .metrics import MetricReport, evaluate_model
from .mrc import MRCModel, answer_nll

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Loss became NaN/inf; aborting beats silently optimizing garbage."""


@dataclass
class TrainConfig:
    k_s: int = 16                       # source items per adaptation batch
    k_t: int = 8                        # synthetic-target items per batch
    batch_size: int = 32                # pre-training batches
    learning_rate: float = 0.002
    lr_halving_period_epochs: int = 10
    dropout_rate: float = 0.3
    epochs: int = 30
    seed: int = 0
    lambda_gamma: float = 10.0
    grad_clip_norm: float = 5.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    semi_supervised_ratio: float = 0.0  # k in [0, 1]
    lambda_scale: float = 1.0           # 0 disables the adversarial gradient

    def __post_init__(self):
        if self.k_s < 1 or self.k_t < 1 or self.batch_size < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lr_halving_period_epochs < 1 or self.epochs < 1:
            raise ValueError("epoch counts must be >= 1")
        if not 0.0 <= self.semi_supervised_ratio <= 1.0:
            raise ValueError("semi_supervised_ratio must be in [0, 1]")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.lambda_scale < 0.0:
            raise ValueError("lambda_scale must be >= 0")


def lambda_schedule(progress: float, gamma: float = 10.0) -> float:
    """Sigmoid ramp 2/(1+e^(-gamma*p)) - 1; clamps progress into [0, 1]."""
    p = min(max(progress, 0.0), 1.0)
    return 2.0 / (1.0 + math.exp(-gamma * p)) - 1.0


def lr_for_epoch(base_lr: float, epoch: int, halving_period: int) -> float:
    """Halve the base rate every ``halving_period`` epochs (0-indexed)."""
    return base_lr * 0.5 ** (epoch // halving_period)


# ---------------------------------------------------------------------------
# Deterministic shuffle-cycle streams and mixed minibatches
# ---------------------------------------------------------------------------

class ExampleStream:
    """Infinite iterator: shuffle, emit every example once, reshuffle."""

    def __init__(self, examples: Sequence[QAExample], seed: int):
        if not examples:
            raise ValueError("stream over an empty example list")
        self._examples = list(examples)
        self._rng = np.random.default_rng(seed)
        self._order = self._rng.permutation(len(self._examples))
        self._pos = 0

    def take(self, k: int) -> list[QAExample]:
        out = []
        while len(out) < k:
            if self._pos == len(self._order):
                self._order = self._rng.permutation(len(self._examples))
                self._pos = 0
            out.append(self._examples[self._order[self._pos]])
            self._pos += 1
        return out


def compose_minibatch(source_stream: ExampleStream, tgen_stream: ExampleStream,
                      k_s: int, k_t: int) -> list[QAExample]:
    """k_s source items then k_t synthetic-target items, always full."""
    return source_stream.take(k_s) + tgen_stream.take(k_t)


class BatchComposer:
    def __init__(self, source: Sequence[QAExample], tgen: Sequence[QAExample],
                 k_s: int, k_t: int, seed: int):
        self.k_s, self.k_t = k_s, k_t
        self.source_stream = ExampleStream(source, np.random.default_rng(
            [seed, 0]).integers(2**31))
        self.tgen_stream = ExampleStream(tgen, np.random.default_rng(
            [seed, 1]).integers(2**31))

    def next_batch(self) -> list[QAExample]:
        return compose_minibatch(self.source_stream, self.tgen_stream,
                                 self.k_s, self.k_t)


# ---------------------------------------------------------------------------
# Results and logging
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    params: dict[str, np.ndarray]
    best_epoch: int
    best_metrics: dict[str, float]
    history: list[dict] = field(default_factory=list)


def _emit(record: dict, history: list[dict], stream: IO[str] | None) -> None:
    history.append(record)
    if stream is not None:
        stream.write(json.dumps(record) + "\n")


def mrc_params(model: MRCModel) -> dict[str, np.ndarray]:
    return {**module_params(model.encoder, "encoder."),
            **module_params(model.answer_module, "decoder.")}


def restore_mrc(model: MRCModel, params) -> None:
    load_module_params(model.encoder, params, "encoder.")
    load_module_params(model.answer_module, params, "decoder.")


def adversarial_params(model: MRCModel, classifier: DomainClassifier
                       ) -> dict[str, np.ndarray]:
    return {**mrc_params(model), **module_params(classifier, "classifier.")}


def restore_adversarial(model: MRCModel, classifier: DomainClassifier,
                        params) -> None:
    restore_mrc(model, params)
    load_module_params(classifier, params, "classifier.")


def _check_finite(loss: torch.Tensor, what: str, step: int) -> None:
    if not torch.isfinite(loss):
        raise TrainingDiverged(f"{what} loss is {loss.item()} at step {step}")


# ---------------------------------------------------------------------------
# Source pre-training (supervised)
# ---------------------------------------------------------------------------

def train_source(model: MRCModel, train_examples: list[QAExample],
                 dev_examples: list[QAExample], config: TrainConfig, *,
                 epochs: int | None = None,
                 log_stream: IO[str] | None = None) -> FitResult:
    """Supervised span training; returns (and restores) the best-dev state."""
    if not train_examples:
        raise ValueError("no source training examples")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    n_epochs = epochs if epochs is not None else config.epochs
    opt = torch.optim.Adamax(model.parameters(), lr=config.learning_rate,
                             betas=(config.adam_beta1, config.adam_beta2))
    history: list[dict] = []
    best: FitResult | None = None
    global_step = 0
    for epoch in range(n_epochs):
        lr = lr_for_epoch(config.learning_rate, epoch,
                          config.lr_halving_period_epochs)
        for group in opt.param_groups:
            group["lr"] = lr
        model.train()
        order = rng.permutation(len(train_examples))
        for lo in range(0, len(order), config.batch_size):
            chunk = [train_examples[i] for i in order[lo:lo + config.batch_size]]
            batch = collate_qa(chunk, model.vocab)
            dist = model.decode(model.encode(batch), train_mode=True)
            loss = answer_nll(dist, batch.starts, batch.ends,
                              batch.answer_weight)
            _check_finite(loss, "answer", global_step)
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip_norm)
            opt.step()
            _emit({"step": global_step, "epoch": epoch, "lr": lr,
                   "loss_answer": loss.item()}, history, log_stream)
            global_step += 1
        report = evaluate_model(model, dev_examples) if dev_examples else \
            MetricReport(em=0.0, f1=0.0, n_examples=0)
        _emit({"step": global_step, "epoch": epoch, "lr": lr,
               "dev_em": report.em, "dev_f1": report.f1}, history, log_stream)
        log.info("source epoch %d: dev EM=%.2f F1=%.2f", epoch, report.em,
                 report.f1)
        if best is None or (report.f1, report.em) > (
                best.best_metrics["f1"], best.best_metrics["em"]):
            best = FitResult(mrc_params(model), epoch,
                             {"em": report.em, "f1": report.f1})
    assert best is not None
    best.history = history
    restore_mrc(model, best.params)
    return best


# ---------------------------------------------------------------------------
# Adversarial adaptation (Algorithm 1 lines 5-9)
# ---------------------------------------------------------------------------

def adaptation_losses(model: MRCModel, classifier: DomainClassifier,
                      batch: QABatch, lam: float
                      ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(total, answer, domain) losses for one mixed minibatch.

    The answer term covers human-provenance items only and is skipped
    when a batch carries none (synthetic-only batches train just the
    domain branch, so decoder gradients are exactly zero).
    """
    enc = model.encode(batch)
    dist = model.decode(enc, train_mode=True)
    if int(batch.answer_weight.sum()) > 0:
        l_answer = answer_nll(dist, batch.starts, batch.ends,
                              batch.answer_weight)
    else:
        l_answer = enc.m_q.new_zeros(())
    probs = classifier(enc, lam)
    l_domain = domain_loss(probs, batch.domain)
    return l_answer + l_domain, l_answer, l_domain


def sample_labeled_target(labeled: Sequence[QAExample], k: float,
                          seed: int) -> list[QAExample]:
    """Deterministic round(k * n)-sized sample, stable order."""
    n_take = int(round(k * len(labeled)))
    rng = np.random.default_rng([seed, 73])
    picks = sorted(rng.permutation(len(labeled))[:n_take].tolist())
    return [labeled[i] for i in picks]


def adapt(model: MRCModel, classifier: DomainClassifier,
          source_train: list[QAExample], tgen: list[QAExample],
          target_dev: list[QAExample], config: TrainConfig, *,
          epochs: int | None = None,
          log_stream: IO[str] | None = None) -> FitResult:
    """Joint adversarial fine-tuning; returns the best target-dev state."""
    return _fit_adversarial(model, classifier, source_train, tgen, target_dev,
                            config, epochs=epochs, log_stream=log_stream)


def adapt_semi_supervised(model: MRCModel, classifier: DomainClassifier,
                          source_train: list[QAExample],
                          labeled_target: list[QAExample],
                          tgen: list[QAExample],
                          target_dev: list[QAExample], config: TrainConfig,
                          k: float | None = None, *, epochs: int | None = None,
                          log_stream: IO[str] | None = None) -> FitResult:
    """Adaptation with a k-portion of labeled target data in the answer loss.

    Sampled items keep their target domain label for the domain loss;
    k=0 reduces bit-for-bit to :func:`adapt`.
    """
    ratio = config.semi_supervised_ratio if k is None else k
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("k must be in [0, 1]")
    if ratio > 0.0 and not labeled_target:
        raise ValueError("k > 0 requires labeled target examples")
    extra: list[QAExample] = []
    if ratio > 0.0:
        for ex in labeled_target:
            if ex.provenance is not Provenance.HUMAN:
                raise ValueError("labeled target examples must be human-provenance")
        extra = sample_labeled_target(labeled_target, ratio, config.seed)
    return _fit_adversarial(model, classifier, source_train, tgen, target_dev,
                            config, supervised_extra=extra, epochs=epochs,
                            log_stream=log_stream)


def _fit_adversarial(model: MRCModel, classifier: DomainClassifier,
                     source_train: list[QAExample], tgen: list[QAExample],
                     target_dev: list[QAExample], config: TrainConfig, *,
                     supervised_extra: list[QAExample] | None = None,
                     epochs: int | None = None,
                     log_stream: IO[str] | None = None) -> FitResult:
    if not tgen:
        raise ValueError("T_gen is empty; generate pseudo questions "
                         "(build_tgen / `adamrc gen-questions`) before adapting")
    if not source_train:
        raise ValueError("no source training examples")
    torch.manual_seed(config.seed)
    pool = source_train + (supervised_extra or [])
    composer = BatchComposer(pool, tgen, config.k_s, config.k_t, config.seed)
    n_epochs = epochs if epochs is not None else config.epochs
    steps_per_epoch = math.ceil(len(pool) / config.k_s)
    total_steps = steps_per_epoch * n_epochs

    opt = torch.optim.Adamax(
        list(model.parameters()) + list(classifier.parameters()),
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2))
    all_params = list(model.parameters()) + list(classifier.parameters())

    history: list[dict] = []
    best: FitResult | None = None
    global_step = 0
    for epoch in range(n_epochs):
        lr = lr_for_epoch(config.learning_rate, epoch,
                          config.lr_halving_period_epochs)
        for group in opt.param_groups:
            group["lr"] = lr
        model.train()
        classifier.train()
        for _ in range(steps_per_epoch):
            lam = config.lambda_scale * lambda_schedule(
                global_step / total_steps, config.lambda_gamma)
            examples = composer.next_batch()
            batch = collate_qa(examples, model.vocab)
            total, l_answer, l_domain = adaptation_losses(
                model, classifier, batch, lam)
            _check_finite(total, "adaptation", global_step)
            opt.zero_grad()
            total.backward()
            nn.utils.clip_grad_norm_(all_params, config.grad_clip_norm)
            opt.step()
            n_human = sum(ex.provenance is Provenance.HUMAN for ex in examples)
            _emit({"step": global_step, "epoch": epoch, "lambda": lam,
                   "lr": lr, "loss_answer": float(l_answer.item()),
                   "loss_domain": float(l_domain.item()),
                   "n_supervised": int(n_human),
                   "n_synthetic": len(examples) - int(n_human)},
                  history, log_stream)
            global_step += 1
        report = evaluate_model(model, target_dev) if target_dev else \
            MetricReport(em=0.0, f1=0.0, n_examples=0)
        _emit({"step": global_step, "epoch": epoch, "lr": lr,
               "dev_em": report.em, "dev_f1": report.f1}, history, log_stream)
        log.info("adapt epoch %d: target-dev EM=%.2f F1=%.2f lambda=%.4f",
                 epoch, report.em, report.f1, lam)
        if best is None or (report.f1, report.em) > (
                best.best_metrics["f1"], best.best_metrics["em"]):
            best = FitResult(adversarial_params(model, classifier), epoch,
                             {"em": report.em, "f1": report.f1})
    assert best is not None
    best.history = history
    restore_adversarial(model, classifier, best.params)
    return best


def checkpoint_manifest(config: TrainConfig, result: FitResult,
                        extra: dict | None = None) -> dict:
    manifest = {"config": asdict(config), "epoch": result.best_epoch,
                "dev_metrics": result.best_metrics}
    if extra:
        manifest.update(extra)
    return manifest
