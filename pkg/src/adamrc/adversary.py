"""Domain classifier and the gradient-reversal layer.

The classifier (theta_c) pools the passage memory with self-attention,
concatenates the question summary, and scores domain membership with a
two-layer tanh MLP + sigmoid. The reversal layer is an identity forward
and multiplies the incoming gradient by -lambda backward, so one
optimizer step trains the classifier to discriminate while pushing the
encoder toward domain-invariant features.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .mrc import EncoderOutput, _masked_softmax

_EPS = 1e-12

CLASSIFIER_HIDDEN = 125


class _GradientReversal(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x: torch.Tensor, lam: float) -> torch.Tensor:
        ctx.lam = float(lam)
        return x.clone()

    @staticmethod
    def backward(ctx, grad: torch.Tensor):
        return -ctx.lam * grad, None


def gradient_reversal(x: torch.Tensor, lam: float) -> torch.Tensor:
    """Identity forward; backward scales the gradient by -lam."""
    if not (math.isfinite(lam) and lam >= 0.0):
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    return _GradientReversal.apply(x, lam)


class DomainClassifier(nn.Module):
    """sigmoid(MLP([pooled M_p ; M_q])) with MLP hidden size 125."""

    def __init__(self, encoder_dim: int, hidden: int = CLASSIFIER_HIDDEN):
        super().__init__()
        self.pool_score = nn.Linear(encoder_dim, 1, bias=False)
        self.layer1 = nn.Linear(2 * encoder_dim, hidden)
        self.layer2 = nn.Linear(hidden, 1)

    def pool(self, m_p: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Attention-weighted row sum of M_p; padded rows masked out."""
        att = _masked_softmax(self.pool_score(m_p).squeeze(-1), mask)
        return torch.bmm(att.unsqueeze(1), m_p).squeeze(1)

    def forward(self, enc: EncoderOutput, lam: float | None = None
                ) -> torch.Tensor:
        """P(domain = target) in (0, 1), shape [B].

        When ``lam`` is given, features pass through the reversal layer
        first, so encoder gradients from this branch are scaled by -lam
        while classifier parameters train normally.
        """
        m_p, m_q = enc.m_p, enc.m_q
        if lam is not None:
            m_p = gradient_reversal(m_p, lam)
            m_q = gradient_reversal(m_q, lam)
        feats = torch.cat([self.pool(m_p, enc.mask), m_q], dim=-1)
        return torch.sigmoid(self.layer2(torch.tanh(self.layer1(feats)))
                             ).squeeze(-1)


def classify_domain(classifier: DomainClassifier, enc: EncoderOutput,
                    lam: float | None = None) -> torch.Tensor:
    return classifier(enc, lam)


def domain_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy of the true domain labels."""
    if probs.numel() == 0:
        raise ValueError("domain_loss over an empty batch")
    if probs.shape != labels.shape:
        raise ValueError("probs and labels must have matching shapes")
    p = probs.clamp(min=_EPS, max=1.0 - _EPS)
    d = labels.to(p.dtype)
    return -(d * torch.log(p) + (1.0 - d) * torch.log(1.0 - p)).mean()
