"""Finite-difference verification of the four loss gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctc import ctc_forward, ctc_loss_and_grad
from .ctl import CtlConfig, ctl_forward, ctl_loss_and_grad
from .labels import BoundaryLabel, strong_to_sequential
from .model.losses import mil_loss_from_frames, strong_loss

FD_STEP = 1e-5
TOLERANCE = 1e-4
REL_FLOOR = 1e-6
LOSS_NAMES = ("strong", "mil", "ctc", "ctl")


def central_difference(f, x, h: float = FD_STEP) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        up = f(x)
        x[idx] = orig - h
        down = f(x)
        x[idx] = orig
        out[idx] = (up - down) / (2 * h)
    return out


def max_relative_error(analytic, numeric, floor: float = REL_FLOOR) -> float:
    """Largest elementwise ``|a - b| / max(|a|, |b|, floor)``."""
    a, b = np.asarray(analytic, dtype=float), np.asarray(numeric, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def kink_free_posteriors(rng, T: int, n: int, gap: float = 1e-3, low: float = 0.05, high: float = 0.95):
    """Posteriors whose consecutive differences (including the silent virtual
    frames at both ends) all exceed ``gap`` in magnitude."""
    while True:
        y = rng.uniform(low, high, (T, n))
        padded = np.vstack([np.zeros((1, n)), y, np.zeros((1, n))])
        if np.all(np.abs(np.diff(padded, axis=0)) > gap):
            return y


def random_sequence(rng, n: int, length: int) -> list[BoundaryLabel]:
    """Arbitrary (not necessarily well nested) boundary sequence."""
    return [BoundaryLabel.from_id(int(i)) for i in rng.integers(0, 2 * n, size=length)]


def random_nested_sequence(rng, n: int, max_len: int, T: int = 6) -> list[BoundaryLabel]:
    """Well-nested sequence read off a random activity mask, truncated to
    whole events so its length stays within ``max_len``."""
    while True:
        mask = (rng.random((T, n)) < 0.4).astype(np.uint8)
        seq = list(strong_to_sequential(mask))
        if len(seq) <= max_len:
            return seq


def random_ctc_grid(rng, T: int, S: int, floor: float = 0.02):
    q = rng.dirichlet(np.ones(S), size=T) + floor
    return q / q.sum(axis=1, keepdims=True)


@dataclass
class CheckRow:
    loss: str
    instances: int
    max_rel_error: float
    worst_instance: str
    passed: bool


def _instance(loss: str, rng, corrupt: bool):
    """One random kink-free instance: returns (analytic grad, fd grad)."""
    if loss == "ctl":
        cfg = CtlConfig(int(rng.choice([1, 2, 3])))
        while True:
            T, n = int(rng.integers(1, 5)), int(rng.integers(1, 3))
            y = kink_free_posteriors(rng, T, n)
            L = random_nested_sequence(rng, n, 4, T)
            if ctl_forward(y, L, cfg) > 1e-8:
                break
        f = lambda v: ctl_loss_and_grad(v, L, cfg)
    elif loss == "ctc":
        while True:
            T, n = int(rng.integers(1, 5)), int(rng.integers(1, 3))
            q = random_ctc_grid(rng, T, 2 * n + 1)
            L = random_sequence(rng, n, int(rng.integers(0, T + 1)))
            if ctc_forward(q, L) > 1e-8:
                break
        y = q
        f = lambda v: ctc_loss_and_grad(v, L, check_rows=False)
    elif loss == "strong":
        T, n = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        y = rng.uniform(0.05, 0.95, (T, n))
        target = (rng.random((T, n)) < 0.5).astype(np.uint8)
        f = lambda v: strong_loss(v, target)
    elif loss == "mil":
        T, n = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        y = rng.uniform(0.05, 0.95, (T, n))
        target = (rng.random(n) < 0.5).astype(np.uint8)
        f = lambda v: mil_loss_from_frames(v, target)
    else:
        raise ValueError(f"unknown loss {loss!r}")
    grad = f(y).grad
    if corrupt:
        grad = grad * 1.01
    return grad, central_difference(lambda v: f(v).loss, y)


def run_gradcheck(seed: int = 0, instances: int = 100, losses=LOSS_NAMES, tolerance: float = TOLERANCE, corrupt: tuple = ()) -> list[CheckRow]:
    """Compare analytic and central-difference gradients on random instances.

    Instance ``i`` of loss ``k`` draws from ``default_rng([seed, k, i])``;
    ``worst_instance`` names it as ``seed:k:i``.  ``corrupt`` lists losses
    whose analytic gradient is deliberately scaled (a self-test hook).
    """
    rows = []
    for k, loss in enumerate(losses):
        worst, worst_id = 0.0, "-"
        for i in range(instances):
            rng = np.random.default_rng([seed, k, i])
            grad, fd = _instance(loss, rng, loss in corrupt)
            err = max_relative_error(grad, fd)
            if err >= worst:
                worst, worst_id = err, f"{seed}:{k}:{i}"
        rows.append(CheckRow(loss, instances, worst, worst_id, worst < tolerance))
    return rows
