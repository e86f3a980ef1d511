"""Brute-force reference probabilities, independent of the lattice code.

Everything here works in linear space with plain loops.  The guards keep
the enumeration small enough to finish and the products above underflow.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .ctl import CtlConfig
from .labels import collapse_ctc, label_ids

CTL_MAX_FRAMES = 6
CTL_MAX_CLASSES = 2
CTL_MAX_LABELS = 6
CTC_MAX_ALIGNMENTS = 10**6


class GuardExceeded(ValueError):
    pass


def boundary_probabilities(y, cfg: CtlConfig) -> list[list[float]]:
    """z[t][label_id] for t = 0..T, written out frame by frame."""
    y = np.clip(np.asarray(y, dtype=float).reshape(len(y), -1), cfg.clamp_epsilon, 1 - cfg.clamp_epsilon)
    T, n = y.shape
    z = []
    for t in range(T + 1):
        row = []
        for c in range(n):
            cur = y[t, c] if t < T else 0.0
            prev = y[t - 1, c] if t > 0 else 0.0
            row.append(max(0.0, cur - prev))
            row.append(max(0.0, prev - cur))
        z.append(row)
    return z


def frame_probability(z_row: list[float], emitted: list[int]) -> float:
    """Independent Bernoulli boundaries: product of z over the emitted set
    and (1 - z) over the rest."""
    p = 1.0
    for lab, zl in enumerate(z_row):
        p *= zl if lab in emitted else 1.0 - zl
    return p


def emission_patterns(num_frames: int, L, max_concurrence: int | None):
    """Every order-preserving assignment of L's labels to frames.

    Yields per-frame lists.  A frame holds at most ``max_concurrence``
    labels and never the same label twice.
    """
    ids = [int(i) for i in label_ids(L)]
    cap = len(ids) if max_concurrence is None else max_concurrence
    for frames in itertools.combinations_with_replacement(range(num_frames), len(ids)):
        pattern = [[] for _ in range(num_frames)]
        for lab, f in zip(ids, frames):
            pattern[f].append(lab)
        if all(len(p) <= cap and len(set(p)) == len(p) for p in pattern):
            yield pattern


def ctl_brute_force(y, L, cfg: CtlConfig = CtlConfig()) -> float:
    y = np.asarray(y, dtype=float)
    y2 = y.reshape(len(y), -1)
    T, n = y2.shape
    if T > CTL_MAX_FRAMES or n > CTL_MAX_CLASSES or len(L) > CTL_MAX_LABELS:
        raise GuardExceeded(f"instance T={T}, n={n}, |L|={len(L)} too large to enumerate")
    z = boundary_probabilities(y2, cfg)
    total = 0.0
    for pattern in emission_patterns(T + 1, L, cfg.max_concurrence):
        p = 1.0
        for t, emitted in enumerate(pattern):
            p *= frame_probability(z[t], emitted)
        total += p
    return total


def ctc_brute_force(q, L) -> float:
    q = np.asarray(q, dtype=float)
    T, S = q.shape
    if S**T > CTC_MAX_ALIGNMENTS:
        raise GuardExceeded(f"{S}^{T} alignments exceed the enumeration guard")
    target = tuple(int(s) + 1 for s in label_ids(L))
    total = 0.0
    for alignment in itertools.product(range(S), repeat=T):
        if collapse_ctc(alignment, blank=0) == target:
            p = 1.0
            for t, s in enumerate(alignment):
                p *= q[t, s]
            total += p
    return total


# ---------------------------------------------------------------- DP vs enumeration


@dataclass
class OracleRow:
    check: str
    trials: int
    max_rel_deviation: float
    worst_instance: str
    passed: bool


def relative_deviation(value: float, reference: float) -> float:
    if reference == 0.0:
        return 0.0 if value == 0.0 else float("inf")
    return abs(value - reference) / reference


def random_ctl_instance(rng):
    """T <= 5, n <= 2, |L| <= 4, concurrence drawn from {1, 2, 3, unbounded}."""
    from .gradcheck import random_nested_sequence, random_sequence

    T, n = int(rng.integers(1, 6)), int(rng.integers(1, 3))
    y = rng.random((T, n))
    if rng.random() < 0.5:
        L = random_nested_sequence(rng, n, 4, T)
    else:
        L = random_sequence(rng, n, int(rng.integers(0, 5)))
    cap = [1, 2, 3, None][int(rng.integers(0, 4))]
    return y, L, CtlConfig(cap)


def random_ctc_instance(rng):
    """T <= 5 and a vocabulary of at most 5 symbols (n <= 2)."""
    from .gradcheck import random_ctc_grid, random_sequence

    T, n = int(rng.integers(1, 6)), int(rng.integers(1, 3))
    q = random_ctc_grid(rng, T, 2 * n + 1, floor=0.0)
    L = random_sequence(rng, n, int(rng.integers(0, T + 1)))
    return q, L


ORACLE_CHECKS = ("ctl", "ctc")


def run_oracle_check(seed: int = 0, trials: int = 200, tolerance: float = 1e-10, checks=ORACLE_CHECKS) -> list[OracleRow]:
    """Lattice forward probabilities against exhaustive enumeration.

    Trial ``i`` of check ``k`` (0 = ctl, 1 = ctc) draws from
    ``default_rng([seed, k, i])`` and is reported as ``seed:k:i``.
    """
    from .ctc import ctc_forward
    from .ctl import ctl_forward

    rows = []
    for k, check in enumerate(ORACLE_CHECKS):
        if check not in checks:
            continue
        worst, worst_id = 0.0, "-"
        for i in range(trials):
            rng = np.random.default_rng([seed, k, i])
            if check == "ctl":
                y, L, cfg = random_ctl_instance(rng)
                dev = relative_deviation(ctl_forward(y, L, cfg), ctl_brute_force(y, L, cfg))
            else:
                q, L = random_ctc_instance(rng)
                dev = relative_deviation(ctc_forward(q, L), ctc_brute_force(q, L))
            if dev >= worst:
                worst, worst_id = dev, f"{seed}:{k}:{i}"
        rows.append(OracleRow(check, trials, worst, worst_id, worst < tolerance))
    return rows
