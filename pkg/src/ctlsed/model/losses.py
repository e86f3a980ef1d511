"""Frame-wise strong loss, MIL with linear softmax pooling, and weighted
combination.  All gradients are with respect to the posterior grid."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..ctl import LossResult

BCE_EPSILON = 1e-7


def _bce(p, target, eps=BCE_EPSILON):
    """Elementwise binary cross-entropy and its derivative in p.

    p is clamped to [eps, 1 - eps]; the derivative is zero outside that range.
    """
    p = np.asarray(p, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    pc = np.clip(p, eps, 1.0 - eps)
    loss = -(target * np.log(pc) + (1.0 - target) * np.log1p(-pc))
    grad = (pc - target) / (pc * (1.0 - pc))
    grad = np.where((p > eps) & (p < 1.0 - eps), grad, 0.0)
    return loss, grad


def mil_pool(y) -> np.ndarray:
    """Linear softmax pooling: sum(y^2) / sum(y) per class (0 if sum is 0)."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] == 0:
        raise ValueError("pooling needs at least one frame")
    s1 = y.sum(axis=0)
    return np.divide((y * y).sum(axis=0), s1, out=np.zeros_like(s1), where=s1 > 0)


def mil_pool_grad(y, grad_pooled) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    s1 = y.sum(axis=0)
    pooled = mil_pool(y)
    safe = np.where(s1 > 0, s1, 1.0)
    return np.where(s1 > 0, (2.0 * y - pooled) / safe, 0.0) * grad_pooled


def mil_loss(pooled, target) -> LossResult:
    """BCE summed over classes; gradient with respect to the pooled vector."""
    loss, grad = _bce(pooled, target)
    return LossResult(float(loss.sum()), grad)


def mil_loss_from_frames(y, target) -> LossResult:
    """MIL loss of a posterior grid, with the gradient pulled back through pooling."""
    res = mil_loss(mil_pool(y), target)
    return LossResult(res.loss, mil_pool_grad(y, res.grad))


def strong_loss(y, target) -> LossResult:
    """Frame-wise BCE averaged over frames and classes."""
    y = np.asarray(y, dtype=np.float64)
    target = np.asarray(target)
    if y.shape != target.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {target.shape}")
    loss, grad = _bce(y, target)
    m = max(y.size, 1)
    return LossResult(float(loss.sum() / m), grad / m)


def combined_loss(terms: Iterable[tuple[LossResult, float]]) -> LossResult:
    """Weighted sum of losses computed on the same posterior grid."""
    terms = list(terms)
    if not terms:
        raise ValueError("no losses to combine")
    loss = 0.0
    grad = np.zeros_like(terms[0][0].grad, dtype=np.float64)
    for res, w in terms:
        loss += w * res.loss
        grad = grad + w * res.grad
    return LossResult(float(loss), grad)
