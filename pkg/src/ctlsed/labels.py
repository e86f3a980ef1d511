"""Event vocabulary and the three labeling granularities.

Boundary labels are encoded as integer ids ``2 * class_index + kind`` where
kind is 0 for an onset and 1 for an offset.  CTC symbols shift those ids by
one and reserve symbol 0 for the blank.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

ONSET = 0
OFFSET = 1
BLANK = None


@dataclass(frozen=True)
class EventVocabulary:
    classes: tuple[str, ...]

    def __post_init__(self):
        classes = tuple(self.classes)
        object.__setattr__(self, "classes", classes)
        if any(not isinstance(c, str) or not c for c in classes):
            raise ValueError("class identifiers must be non-empty strings")
        if len(set(classes)) != len(classes):
            raise ValueError("class identifiers must be unique")

    @property
    def n(self) -> int:
        return len(self.classes)

    @property
    def num_boundaries(self) -> int:
        return 2 * self.n

    @property
    def num_ctc_symbols(self) -> int:
        return 2 * self.n + 1

    def index(self, name: str) -> int:
        return self.classes.index(name)

    def to_json(self) -> str:
        return json.dumps(list(self.classes))

    @classmethod
    def from_json(cls, text: str) -> "EventVocabulary":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError("vocabulary JSON must be an array of class names")
        return cls(tuple(data))


@dataclass(frozen=True, order=True)
class BoundaryLabel:
    class_index: int
    kind: int  # ONSET or OFFSET

    def __post_init__(self):
        if self.class_index < 0:
            raise ValueError("class_index must be non-negative")
        if self.kind not in (ONSET, OFFSET):
            raise ValueError("kind must be ONSET or OFFSET")

    @property
    def id(self) -> int:
        return 2 * self.class_index + self.kind

    @classmethod
    def from_id(cls, label_id: int) -> "BoundaryLabel":
        return cls(int(label_id) // 2, int(label_id) % 2)

    def render(self, vocab: EventVocabulary | None = None) -> str:
        name = vocab.classes[self.class_index] if vocab else str(self.class_index)
        return ("'" if self.kind == ONSET else "`") + name


# A sequential label is an ordered tuple of boundary labels.
SequentialLabel = tuple[BoundaryLabel, ...]


def onset(c: int) -> BoundaryLabel:
    return BoundaryLabel(c, ONSET)


def offset(c: int) -> BoundaryLabel:
    return BoundaryLabel(c, OFFSET)


def parse_sequence(text: str, vocab: EventVocabulary) -> SequentialLabel:
    """Parse whitespace separated tokens such as ``'C 'D `D `C``."""
    out = []
    for tok in text.split():
        if tok[0] not in "'`" or len(tok) < 2:
            raise ValueError(f"bad boundary token {tok!r}")
        out.append(BoundaryLabel(vocab.index(tok[1:]), ONSET if tok[0] == "'" else OFFSET))
    return tuple(out)


def render_sequence(seq: Iterable[BoundaryLabel], vocab: EventVocabulary | None = None) -> str:
    return " ".join(lab.render(vocab) for lab in seq)


def label_ids(seq: Iterable[BoundaryLabel | int]) -> np.ndarray:
    """Integer ids for a label sequence; ints pass through unchanged."""
    return np.array(
        [lab.id if isinstance(lab, BoundaryLabel) else int(lab) for lab in seq],
        dtype=np.int64,
    )


def is_well_nested(seq: Sequence[BoundaryLabel]) -> bool:
    """True if, per class, onsets and offsets alternate starting with an onset
    and the subsequence ends with an offset."""
    expect: dict[int, int] = {}
    for lab in seq:
        if expect.get(lab.class_index, ONSET) != lab.kind:
            return False
        expect[lab.class_index] = OFFSET if lab.kind == ONSET else ONSET
    return all(k == ONSET for k in expect.values())


def validate_strong(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"strong label must be T x n, got shape {mask.shape}")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("strong label entries must be 0 or 1")
    return mask.astype(np.uint8)


def strong_to_events(mask: np.ndarray) -> list[tuple[int, int, int]]:
    """Maximal activity runs as ``(class_index, start, stop)`` with ``stop``
    exclusive, sorted by class then start."""
    mask = validate_strong(mask)
    T, n = mask.shape
    events = []
    for c in range(n):
        padded = np.concatenate(([0], mask[:, c].astype(np.int8), [0]))
        d = np.diff(padded)
        starts = np.flatnonzero(d == 1)
        stops = np.flatnonzero(d == -1)
        events.extend((c, int(a), int(b)) for a, b in zip(starts, stops))
    return events


def strong_to_sequential(mask: np.ndarray) -> SequentialLabel:
    """Boundary sequence of a strong label.

    Onsets sit on the first active frame of a run and offsets on the frame
    after the last one.  Boundaries on the same frame are ordered offsets
    first, then by class index.
    """
    stamped = []
    for c, start, stop in strong_to_events(mask):
        stamped.append((start, 1, c, onset(c)))
        stamped.append((stop, 0, c, offset(c)))
    stamped.sort(key=lambda s: s[:3])
    return tuple(s[3] for s in stamped)


def strong_to_presence(mask: np.ndarray) -> np.ndarray:
    mask = validate_strong(mask)
    return mask.any(axis=0).astype(np.uint8)


def collapse_ctc(alignment: Iterable[Hashable], blank: Hashable = BLANK) -> tuple:
    """The CTC many-to-one map: merge repeats, then drop blanks."""
    out = []
    prev = object()
    for sym in alignment:
        if sym != prev and sym != blank:
            out.append(sym)
        prev = sym
    return tuple(out)


def flatten_ctl(emissions: Iterable[Iterable[BoundaryLabel]]) -> SequentialLabel:
    """The CTL map: concatenate per-frame emissions, keeping repeats."""
    return tuple(lab for frame in emissions for lab in frame)
