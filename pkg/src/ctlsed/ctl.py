"""Connectionist temporal localization (CTL) loss.

The network predicts frame-wise event probabilities ``y`` (T x n).  Boundary
probabilities come from the rectified delta of ``y`` over frames
``1..T+1`` (virtual frames 0 and T+1 are silent), boundaries at one frame are
treated as independent Bernoullis, and a forward recurrence sums over every
placement of the target boundary sequence on the frames without collapsing
repeats.  Boundary columns are ordered ``[onset_0, offset_0, onset_1, ...]``
so column ``2c + kind`` matches the label ids in :mod:`ctlsed.labels`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .labels import BoundaryLabel, label_ids


class InfeasibleLabelError(ValueError):
    """The target sequence has probability zero under the model."""


class DegenerateInputError(ValueError):
    """A boundary probability of exactly one reached the emission terms."""


@dataclass(frozen=True)
class CtlConfig:
    max_concurrence: int | None = 1  # None means unbounded
    clamp_epsilon: float = 1e-6

    def __post_init__(self):
        if self.max_concurrence is not None and self.max_concurrence < 1:
            raise ValueError("max_concurrence must be >= 1 or None")
        if not 0.0 < self.clamp_epsilon < 0.5:
            raise ValueError("clamp_epsilon must lie in (0, 0.5)")


@dataclass
class LossResult:
    loss: float
    grad: np.ndarray


class EmissionTerms(NamedTuple):
    log_eps: np.ndarray    # (T+1,)
    log_delta: np.ndarray  # (T+1, 2n)

    @property
    def eps(self) -> np.ndarray:
        return np.exp(self.log_eps)

    @property
    def delta(self) -> np.ndarray:
        return np.exp(self.log_delta)

    def emission_probability(self, t: int, labels: Sequence[BoundaryLabel | int]) -> float:
        """Probability of emitting exactly ``labels`` (distinct) at frame index ``t``."""
        ids = label_ids(labels)
        return float(np.exp(self.log_eps[t] + self.log_delta[t, ids].sum()))


def _as_grid(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise ValueError(f"posterior grid must be T x n, got shape {y.shape}")
    if np.any(~np.isfinite(y)) or np.any(y < 0) or np.any(y > 1):
        raise ValueError("posterior entries must lie in [0, 1]")
    return y


def _padded_diff(y: np.ndarray) -> np.ndarray:
    T, n = y.shape
    padded = np.zeros((T + 2, n))
    padded[1:-1] = y
    return np.diff(padded, axis=0)  # (T+1, n): y_t - y_{t-1}


def rectified_delta(y) -> np.ndarray:
    """Boundary grid z of shape (T+1, 2n) from posteriors y of shape (T, n)."""
    d = _padded_diff(_as_grid(y))
    z = np.empty((d.shape[0], 2 * d.shape[1]))
    z[:, 0::2] = np.maximum(0.0, d)
    z[:, 1::2] = np.maximum(0.0, -d)
    return z


def emission_terms(z) -> EmissionTerms:
    z = np.asarray(z, dtype=np.float64)
    if np.any(z >= 1.0):
        raise DegenerateInputError("boundary probability of 1 after clamping")
    log1m = np.log1p(-z)
    with np.errstate(divide="ignore"):
        log_delta = np.log(z) - log1m
    return EmissionTerms(log1m.sum(axis=1), log_delta)


def _max_block(ids: np.ndarray, max_concurrence: int | None) -> np.ndarray:
    """Longest block of consecutive target labels that may end at each state.

    A frame emits a set of boundaries, so a block never repeats a label.
    """
    K = len(ids)
    cap = K if max_concurrence is None else max_concurrence
    out = np.zeros(K + 1, dtype=np.int64)
    start = 0
    last_seen: dict[int, int] = {}
    for k, lab in enumerate(ids):
        if lab in last_seen and last_seen[lab] >= start:
            start = last_seen[lab] + 1
        last_seen[lab] = k
        out[k + 1] = min(cap, k + 1 - start)
    return out


def _prepare(y, L, cfg: CtlConfig):
    y = _as_grid(y)
    ids = label_ids(L)
    n = y.shape[1]
    if ids.size and (ids.min() < 0 or ids.max() >= 2 * n):
        raise ValueError("label sequence uses classes outside the posterior grid")
    yc = np.clip(y, cfg.clamp_epsilon, 1.0 - cfg.clamp_epsilon)
    z = rectified_delta(yc)
    terms = emission_terms(z)
    return y, yc, ids, z, terms


def ctl_log_forward(y, L, cfg: CtlConfig = CtlConfig()) -> float:
    """log of the total probability of emitting L."""
    _, _, ids, _, terms = _prepare(y, L, cfg)
    log_p, _ = kernels.ctl_lattice(
        terms.log_eps, terms.log_delta[:, ids], _max_block(ids, cfg.max_concurrence), False
    )
    return log_p


def ctl_forward(y, L, cfg: CtlConfig = CtlConfig()) -> float:
    return float(np.exp(ctl_log_forward(y, L, cfg)))


def ctl_loss_and_grad(y, L, cfg: CtlConfig = CtlConfig()) -> LossResult:
    """Negative log probability of L and its gradient with respect to y.

    The gradient passes through the clamp (zero outside its range), the
    rectified delta (subgradient zero at ties), and the emission terms.
    """
    y, yc, ids, z, terms = _prepare(y, L, cfg)
    log_p, occ = kernels.ctl_lattice(
        terms.log_eps, terms.log_delta[:, ids], _max_block(ids, cfg.max_concurrence), True
    )
    if log_p == -np.inf:
        raise InfeasibleLabelError(
            f"sequence of {len(ids)} labels has zero probability over {y.shape[0]} frames"
        )

    # d logP / d delta_t(l), accumulated over the positions of label l in L
    g_delta = np.zeros_like(z)
    for k, lab in enumerate(ids):
        g_delta[:, lab] += occ[:, k]
    one_minus = 1.0 - z
    # d log eps / dz = -1/(1-z); d delta / dz = 1/(1-z)^2
    g_z = g_delta / one_minus**2 - 1.0 / one_minus

    d = _padded_diff(yc)
    g_d = np.where(d > 0, g_z[:, 0::2], 0.0) - np.where(d < 0, g_z[:, 1::2], 0.0)
    g_y = g_d[:-1] - g_d[1:]
    inside = (y > cfg.clamp_epsilon) & (y < 1.0 - cfg.clamp_epsilon)
    return LossResult(-log_p, -np.where(inside, g_y, 0.0))


def ctl_batch_loss(ys, Ls, cfg: CtlConfig = CtlConfig()) -> tuple[float, list[np.ndarray]]:
    """Mean loss over recordings and the per-recording gradients of that mean."""
    results = [ctl_loss_and_grad(y, L, cfg) for y, L in zip(ys, Ls)]
    m = len(results)
    return sum(r.loss for r in results) / m, [r.grad / m for r in results]
