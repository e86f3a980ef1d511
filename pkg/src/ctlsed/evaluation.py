"""Decoders and frame-level F1 for sound event detection."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_THRESHOLD_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass
class F1Report:
    per_class: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    classes: tuple[str, ...] = field(default=())

    @property
    def macro(self) -> float:
        return float(np.mean(self.per_class)) if len(self.per_class) else 0.0

    def to_dict(self) -> dict:
        names = self.classes or tuple(str(c) for c in range(len(self.per_class)))
        return {
            "macro_f1": self.macro,
            "classes": [
                {"class": name, "f1": float(f), "tp": int(a), "fp": int(b), "fn": int(c)}
                for name, f, a, b, c in zip(names, self.per_class, self.tp, self.fp, self.fn)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "f1", "tp", "fp", "fn"])
        for row in self.to_dict()["classes"]:
            w.writerow([row["class"], repr(row["f1"]), row["tp"], row["fp"], row["fn"]])
        w.writerow(["macro", repr(self.macro), "", "", ""])
        return buf.getvalue()


def _stack(grids) -> np.ndarray:
    if isinstance(grids, np.ndarray) and grids.ndim == 2:
        return grids
    return np.concatenate([np.asarray(g) for g in grids], axis=0)


def f1_from_counts(tp, fp, fn) -> np.ndarray:
    tp, fp, fn = (np.asarray(a, dtype=np.float64) for a in (tp, fp, fn))
    denom = 2 * tp + fp + fn
    return np.divide(2 * tp, denom, out=np.zeros_like(denom), where=denom > 0)


def frame_f1(pred, truth, classes: tuple[str, ...] = ()) -> F1Report:
    """Per-class F1 with counts pooled over all frames of all recordings.

    ``pred`` and ``truth`` are T x n masks or lists of them.
    """
    pred, truth = _stack(pred).astype(bool), _stack(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    tp = (pred & truth).sum(axis=0)
    fp = (pred & ~truth).sum(axis=0)
    fn = (~pred & truth).sum(axis=0)
    return F1Report(f1_from_counts(tp, fp, fn), tp, fp, fn, tuple(classes))


def decode_threshold(y, theta) -> np.ndarray:
    y = np.asarray(y)
    theta = np.broadcast_to(np.asarray(theta, dtype=np.float64), (y.shape[-1],))
    return (y > theta).astype(np.uint8)


def tune_thresholds(ys, truths, grid=DEFAULT_THRESHOLD_GRID) -> np.ndarray:
    """Per-class threshold from ``grid`` maximizing validation F1; ties go
    to the smallest candidate."""
    y, truth = _stack(ys), _stack(truths).astype(bool)
    if y.shape[0] == 0:
        raise ValueError("empty validation set")
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    best = np.full(y.shape[1], grid[0])
    best_f1 = np.full(y.shape[1], -1.0)
    for theta in grid:
        pred = y > theta
        f1 = f1_from_counts((pred & truth).sum(0), (pred & ~truth).sum(0), (~pred & truth).sum(0))
        better = f1 > best_f1
        best[better] = theta
        best_f1[better] = f1[better]
    return best


def decode_ctc(q, n: int | None = None) -> np.ndarray:
    """Strong mask from the frame-wise argmax of a CTC grid.

    Per class each offset closes the nearest preceding unmatched onset, so
    intervals are innermost pairs; the event covers both endpoint frames.
    Unmatched boundaries are dropped.
    """
    q = np.asarray(q)
    T, S = q.shape
    n = (S - 1) // 2 if n is None else n
    best = q.argmax(axis=1)
    mask = np.zeros((T, n), dtype=np.uint8)
    open_onsets: list[list[int]] = [[] for _ in range(n)]
    for t, s in enumerate(best):
        if s == 0:
            continue
        c, kind = divmod(int(s) - 1, 2)
        if kind == 0:
            open_onsets[c].append(t)
        elif open_onsets[c]:
            start = open_onsets[c].pop()
            mask[start : t + 1, c] = 1
    return mask


def event_durations(mask, c: int) -> list[int]:
    """Lengths of the maximal activity runs of class ``c``."""
    col = np.concatenate(([0], np.asarray(mask)[:, c].astype(np.int8), [0]))
    d = np.diff(col)
    return (np.flatnonzero(d == -1) - np.flatnonzero(d == 1)).tolist()
