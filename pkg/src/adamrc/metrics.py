"""Answer metrics (EM, macro F1, BLEU-1, ROUGE-L) and feature diagnostics."""

from __future__ import annotations

import csv
import logging
import math
import os
import re
import string
from collections import Counter
from dataclasses import dataclass

import numpy as np
import torch

from .adversary import DomainClassifier
from .batching import collate_qa
from .corpus import DomainLabel, QAExample
from .mrc import MRCModel, predict_span

log = logging.getLogger(__name__)

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


def normalize_answer(s: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    s = "".join(ch for ch in s.lower() if ch not in _PUNCT)
    s = _ARTICLE_RE.sub(" ", s)
    return " ".join(s.split())


def exact_match(pred: str, golds: set[str] | list[str] | tuple[str, ...]) -> int:
    """1 iff the normalized prediction equals any normalized gold."""
    if not golds:
        raise ValueError("golds must be non-empty")
    norm = normalize_answer(pred)
    return int(any(norm == normalize_answer(g) for g in golds))


def _token_f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    n_same = sum(common.values())
    if n_same == 0:
        return 0.0
    precision = n_same / len(pred_tokens)
    recall = n_same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def f1_score(pred: str, golds: set[str] | list[str] | tuple[str, ...]) -> float:
    """Token-bag F1 on normalized strings, max over golds."""
    if not golds:
        raise ValueError("golds must be non-empty")
    pred_tokens = normalize_answer(pred).split()
    return max(_token_f1(pred_tokens, normalize_answer(g).split())
               for g in golds)


def _gen_tokens(s: str) -> list[str]:
    # Generation metrics keep articles and punctuation-free splitting simple:
    # lowercase + whitespace.
    return s.lower().split()


def bleu1(pred: str, refs: set[str] | list[str] | tuple[str, ...]) -> float:
    """Clipped unigram precision times brevity penalty (closest ref length)."""
    if not refs:
        raise ValueError("refs must be non-empty")
    pred_tokens = _gen_tokens(pred)
    if not pred_tokens:
        return 0.0
    ref_tokens = [_gen_tokens(r) for r in refs]
    max_counts: Counter[str] = Counter()
    for rt in ref_tokens:
        counts = Counter(rt)
        for tok, c in counts.items():
            max_counts[tok] = max(max_counts[tok], c)
    pred_counts = Counter(pred_tokens)
    clipped = sum(min(c, max_counts.get(tok, 0))
                  for tok, c in pred_counts.items())
    precision = clipped / len(pred_tokens)
    c = len(pred_tokens)
    r = min((abs(len(rt) - c), len(rt)) for rt in ref_tokens)[1]
    bp = math.exp(min(0.0, 1.0 - r / c))
    return precision * bp


def _lcs_len(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(pred: str, refs: set[str] | list[str] | tuple[str, ...]) -> float:
    """LCS F-measure with beta=1, max over references."""
    if not refs:
        raise ValueError("refs must be non-empty")
    pred_tokens = _gen_tokens(pred)
    if not pred_tokens:
        return 0.0
    best = 0.0
    for ref in refs:
        ref_tokens = _gen_tokens(ref)
        if not ref_tokens:
            continue
        lcs = _lcs_len(pred_tokens, ref_tokens)
        if lcs == 0:
            continue
        p = lcs / len(pred_tokens)
        r = lcs / len(ref_tokens)
        best = max(best, 2 * p * r / (p + r))
    return best


# ---------------------------------------------------------------------------
# Model evaluation
# ---------------------------------------------------------------------------

@dataclass
class MetricReport:
    em: float               # percentage
    f1: float               # percentage
    n_examples: int
    bleu1: float | None = None   # percentage
    rouge_l: float | None = None

    def to_dict(self) -> dict:
        return {"em": self.em, "f1": self.f1, "bleu1": self.bleu1,
                "rouge_l": self.rouge_l, "n_examples": self.n_examples}


@torch.no_grad()
def predict_answers(model: MRCModel, examples: list[QAExample],
                    batch_size: int = 32) -> list[str]:
    """Span predictions decoded to strings via passage character offsets."""
    model.eval()
    out: list[str] = []
    for lo in range(0, len(examples), batch_size):
        chunk = examples[lo:lo + batch_size]
        batch = collate_qa(chunk, model.vocab)
        dist = model.decode(model.encode(batch), train_mode=False)
        p_start = dist.avg_start.cpu().numpy()
        p_end = dist.avg_end.cpu().numpy()
        for i, ex in enumerate(chunk):
            n = len(ex.passage.tokens)
            span = predict_span(p_start[i, :n], p_end[i, :n],
                                model.config.max_span_len)
            out.append(ex.passage.span_text(span))
    return out


def score_predictions(pairs: list[tuple[str, tuple[str, ...]]],
                      with_generation_metrics: bool = False) -> MetricReport:
    """EM/F1 (and optionally BLEU-1/ROUGE-L) over (pred, golds) pairs."""
    if not pairs:
        raise ValueError("nothing to score")
    ems = [exact_match(p, g) for p, g in pairs]
    f1s = [f1_score(p, g) for p, g in pairs]
    report = MetricReport(
        em=100.0 * math.fsum(ems) / len(pairs),
        f1=100.0 * math.fsum(f1s) / len(pairs),
        n_examples=len(pairs))
    if with_generation_metrics:
        report.bleu1 = 100.0 * math.fsum(
            bleu1(p, g) for p, g in pairs) / len(pairs)
        report.rouge_l = 100.0 * math.fsum(
            rouge_l(p, g) for p, g in pairs) / len(pairs)
    return report


def evaluate_model(model: MRCModel, examples: list[QAExample],
                   batch_size: int = 32,
                   with_generation_metrics: bool = False) -> MetricReport:
    preds = predict_answers(model, examples, batch_size)
    return score_predictions(
        [(p, ex.answer_texts) for p, ex in zip(preds, examples)],
        with_generation_metrics)


# ---------------------------------------------------------------------------
# Feature diagnostics
# ---------------------------------------------------------------------------

@dataclass
class FeatureSample:
    features: np.ndarray   # length 4m: [pooled M_p ; M_q]
    domain: DomainLabel


@torch.no_grad()
def collect_features(model: MRCModel, classifier: DomainClassifier,
                     examples: list[QAExample], n: int, seed: int = 0,
                     batch_size: int = 32) -> list[FeatureSample]:
    """Deterministically sample n examples per domain and encode them.

    Features are [pooled M_p via the adversary's attention ; M_q]. When a
    domain has fewer than n examples, all of them are used (with a warning).
    """
    model.eval()
    rng = np.random.default_rng(seed)
    chosen: list[QAExample] = []
    for domain in (DomainLabel.SOURCE, DomainLabel.TARGET):
        pool = [ex for ex in examples if ex.domain == domain]
        if len(pool) < n:
            log.warning("domain %s has %d examples (< n=%d); taking all",
                        domain.name, len(pool), n)
            chosen.extend(pool)
        else:
            picks = sorted(rng.permutation(len(pool))[:n].tolist())
            chosen.extend(pool[i] for i in picks)

    samples: list[FeatureSample] = []
    for lo in range(0, len(chosen), batch_size):
        chunk = chosen[lo:lo + batch_size]
        batch = collate_qa(chunk, model.vocab)
        enc = model.encode(batch)
        pooled = classifier.pool(enc.m_p, enc.mask)
        feats = torch.cat([pooled, enc.m_q], dim=-1).cpu().numpy()
        samples.extend(FeatureSample(feats[i].copy(), ex.domain)
                       for i, ex in enumerate(chunk))
    return samples


def _fit_diag_gaussian(x: np.ndarray, var_floor: float = 1e-6
                       ) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    var = np.maximum(x.var(axis=0), var_floor)
    return mean, var


def domain_kl(samples: list[FeatureSample]) -> float:
    """Symmetrized KL between per-domain diagonal Gaussian fits."""
    a_rows = [s.features for s in samples if s.domain == DomainLabel.SOURCE]
    b_rows = [s.features for s in samples if s.domain == DomainLabel.TARGET]
    if len(a_rows) < 2 or len(b_rows) < 2:
        raise ValueError("need at least 2 samples per domain")
    a, b = np.stack(a_rows), np.stack(b_rows)
    mu_a, var_a = _fit_diag_gaussian(a)
    mu_b, var_b = _fit_diag_gaussian(b)

    def kl(mu1, var1, mu2, var2):
        return 0.5 * float(np.sum(np.log(var2 / var1)
                                  + (var1 + (mu1 - mu2) ** 2) / var2 - 1.0))

    return 0.5 * (kl(mu_a, var_a, mu_b, var_b) + kl(mu_b, var_b, mu_a, var_a))


def project_features(samples: list[FeatureSample]) -> np.ndarray:
    """Mean-centered top-2 PCA coordinates, one row per sample."""
    if len(samples) < 3:
        raise ValueError("need at least 3 samples to project")
    x = np.stack([s.features for s in samples]).astype(np.float64)
    x = x - x.mean(axis=0)
    _, svals, vt = np.linalg.svd(x, full_matrices=False)
    informative = int(np.sum(svals > 1e-9 * max(1.0, svals[0])))
    coords = np.zeros((x.shape[0], 2))
    k = min(2, informative)
    if k < 2:
        log.warning("feature matrix has <2 informative directions; "
                    "padding second coordinate with zeros")
    coords[:, :k] = x @ vt[:k].T
    return coords


def export_projection(samples: list[FeatureSample], path: str | os.PathLike,
                      method: str = "pca") -> np.ndarray:
    """Write x,y,domain CSV rows of the 2-D projection; returns the points."""
    if method != "pca":
        raise ValueError(f"unsupported projection method {method!r}")
    coords = project_features(samples)
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "domain"])
        for (x, y), s in zip(coords, samples):
            writer.writerow([repr(float(x)), repr(float(y)), int(s.domain)])
    os.replace(tmp, path)
    return coords
