"""CTC over boundary labels plus blank, as a baseline for CTL.

A CTC grid ``q`` is T x (2n+1); column 0 is the blank and column
``1 + label_id`` the boundary with that id.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .ctl import InfeasibleLabelError, LossResult
from .labels import label_ids

BLANK_SYMBOL = 0


def as_ctc_grid(q, atol: float = 1e-6) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] < 1:
        raise ValueError(f"CTC grid must be T x S, got shape {q.shape}")
    if np.any(q < 0) or np.any(q > 1):
        raise ValueError("CTC grid entries must lie in [0, 1]")
    if q.shape[0] and not np.allclose(q.sum(axis=1), 1.0, rtol=0, atol=atol):
        raise ValueError("CTC grid rows must sum to 1")
    return q


def ctc_symbols(L) -> np.ndarray:
    return label_ids(L) + 1


def min_frames(L) -> int:
    """Fewest frames an alignment of L needs (repeats need a blank between)."""
    sym = ctc_symbols(L)
    return int(len(sym) + np.count_nonzero(sym[1:] == sym[:-1]))


def _lattice(q, L, want_grad, check_rows=True):
    q = as_ctc_grid(q) if check_rows else np.asarray(q, dtype=np.float64)
    sym = ctc_symbols(L)
    if sym.size and sym.max() >= q.shape[1]:
        raise ValueError("label sequence uses symbols outside the CTC grid")
    if q.shape[0] == 0:
        return (0.0 if sym.size == 0 else -np.inf), np.zeros_like(q)
    with np.errstate(divide="ignore"):
        log_q = np.log(q)
    return kernels.ctc_lattice(log_q, sym, want_grad)


def ctc_log_forward(q, L, check_rows: bool = True) -> float:
    return _lattice(q, L, False, check_rows)[0]


def ctc_forward(q, L, check_rows: bool = True) -> float:
    """Total probability of every alignment that collapses to L."""
    return float(np.exp(ctc_log_forward(q, L, check_rows)))


def ctc_loss_and_grad(q, L, check_rows: bool = True) -> LossResult:
    """-log P(L) and its gradient with respect to every entry of q.

    ``check_rows=False`` skips the row-sum check so finite differences can
    perturb single entries.
    """
    log_p, grad = _lattice(q, L, True, check_rows)
    if log_p == -np.inf:
        raise InfeasibleLabelError(
            f"no alignment of {len(L)} labels (needs {min_frames(L)} frames) "
            f"has nonzero probability over {np.shape(q)[0]} frames"
        )
    return LossResult(-log_p, -grad)
