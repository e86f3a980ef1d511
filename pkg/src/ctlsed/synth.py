"""Deterministic synthetic SED corpus.

Each recording is a T x d frame-feature sequence.  Event classes have an
orthonormal signature vector; active frames add their class signature and
every frame gets Gaussian noise.  Labels at all three granularities are
derived from the planted activity mask.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .labels import (
    EventVocabulary,
    BoundaryLabel,
    SequentialLabel,
    label_ids,
    strong_to_events,
    strong_to_presence,
    strong_to_sequential,
)

log = logging.getLogger(__name__)

SPLITS = ("train", "validation", "evaluation")
SPLIT_MAGIC = b"CTLSPLT1"
MANIFEST_FORMAT = "ctlsed-corpus"
MANIFEST_VERSION = 1
MAX_PLACEMENT_TRIES = 50
MAX_REGENERATIONS = 1000


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ClassSpec:
    name: str
    min_dur: int
    max_dur: int
    rate: float


def _default_classes():
    return (ClassSpec("short", 3, 8, 1.0), ClassSpec("long", 30, 60, 0.7))


def _default_sizes():
    return {"train": 2000, "validation": 400, "evaluation": 400}


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    num_recordings: dict = field(default_factory=_default_sizes)
    T: int = 100
    classes: tuple = field(default_factory=_default_classes)
    overlap_allowed: bool = True
    feature_noise_sigma: float = 0.4
    d: int = 8

    def __post_init__(self):
        classes = tuple(c if isinstance(c, ClassSpec) else ClassSpec(**c) for c in self.classes)
        object.__setattr__(self, "classes", classes)
        self.validate()

    def validate(self):
        if self.T < 1:
            raise ConfigError("T", "must be >= 1")
        if self.d < len(self.classes):
            raise ConfigError("d", "feature dimension must be at least the number of classes")
        if self.feature_noise_sigma < 0:
            raise ConfigError("feature_noise_sigma", "must be >= 0")
        if not self.classes:
            raise ConfigError("classes", "at least one class required")
        for i, c in enumerate(self.classes):
            where = f"classes[{i}]"
            if not 1 <= c.min_dur:
                raise ConfigError(f"{where}.min_dur", "must be >= 1")
            if c.min_dur > c.max_dur:
                raise ConfigError(f"{where}.min_dur", f"min_dur {c.min_dur} exceeds max_dur {c.max_dur}")
            if c.max_dur > self.T:
                raise ConfigError(f"{where}.max_dur", f"max_dur {c.max_dur} exceeds T {self.T}")
            if c.rate < 0:
                raise ConfigError(f"{where}.rate", "must be >= 0")
        EventVocabulary(tuple(c.name for c in self.classes))
        for split, count in self.num_recordings.items():
            if split not in SPLITS:
                raise ConfigError(f"num_recordings.{split}", f"unknown split; expected one of {SPLITS}")
            if int(count) < 0:
                raise ConfigError(f"num_recordings.{split}", "must be >= 0")

    @property
    def vocabulary(self) -> EventVocabulary:
        return EventVocabulary(tuple(c.name for c in self.classes))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["classes"] = [asdict(c) for c in self.classes]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        data = dict(data)
        if "classes" in data:
            try:
                data["classes"] = tuple(ClassSpec(**c) for c in data["classes"])
            except TypeError as exc:
                raise ConfigError("classes", str(exc)) from None
        return cls(**data)


@dataclass
class SynthRecording:
    id: str
    features: np.ndarray  # (T, d) float32
    strong: np.ndarray    # (T, n) uint8
    sequential: SequentialLabel
    presence: np.ndarray  # (n,) uint8


def signatures(cfg: SynthConfig) -> np.ndarray:
    """Orthonormal per-class signature rows, shape (n, d)."""
    rng = np.random.default_rng([cfg.seed, 0x5167])
    q, _ = np.linalg.qr(rng.standard_normal((cfg.d, len(cfg.classes))))
    return q.T.copy()


def _place_events(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray | None:
    T, n = cfg.T, len(cfg.classes)
    mask = np.zeros((T, n), dtype=np.uint8)
    for c, spec in enumerate(cfg.classes):
        for _ in range(rng.poisson(spec.rate)):
            dur = int(rng.integers(spec.min_dur, spec.max_dur + 1))
            for _ in range(MAX_PLACEMENT_TRIES):
                start = int(rng.integers(0, T - dur + 1))
                # keep a silent frame on each side so same-class runs never merge
                lo, hi = max(0, start - 1), min(T, start + dur + 1)
                blocked = mask[lo:hi, c].any()
                if not cfg.overlap_allowed:
                    blocked = blocked or mask[start : start + dur].any()
                if not blocked:
                    mask[start : start + dur, c] = 1
                    break
            else:
                return None
    return mask


def generate_recording(cfg: SynthConfig, split: str, index: int, sig: np.ndarray | None = None) -> SynthRecording:
    """One recording, determined entirely by (seed, split, index)."""
    sig = signatures(cfg) if sig is None else sig
    rng = np.random.default_rng([cfg.seed, SPLITS.index(split) + 1, index])
    for attempt in range(MAX_REGENERATIONS):
        mask = _place_events(cfg, rng)
        if mask is not None:
            break
        log.info("recording %s/%d: placement failed, regenerating (attempt %d)", split, index, attempt + 1)
    else:
        raise RuntimeError(f"could not place events for {split}/{index}")
    noise = rng.standard_normal((cfg.T, cfg.d))
    features = (mask.astype(np.float64) @ sig + cfg.feature_noise_sigma * noise).astype(np.float32)
    return SynthRecording(
        id=f"{split}-{index:06d}",
        features=features,
        strong=mask,
        sequential=strong_to_sequential(mask),
        presence=strong_to_presence(mask),
    )


def generate(cfg: SynthConfig, split: str = "train") -> list[SynthRecording]:
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    sig = signatures(cfg)
    count = int(cfg.num_recordings.get(split, 0))
    return [generate_recording(cfg, split, i, sig) for i in range(count)]


def generate_corpus(cfg: SynthConfig) -> dict[str, list[SynthRecording]]:
    return {split: generate(cfg, split) for split in SPLITS}


# ---------------------------------------------------------------- persistence


def _recording_labels(rec: SynthRecording) -> dict:
    return {
        "id": rec.id,
        "T": int(rec.features.shape[0]),
        "d": int(rec.features.shape[1]),
        "events": [list(e) for e in strong_to_events(rec.strong)],
        "sequential": label_ids(rec.sequential).tolist(),
        "presence": rec.presence.astype(int).tolist(),
    }


def write_split(path: Path, recordings: list[SynthRecording]) -> None:
    """Split file: magic, u64 header length, JSON header, then float32 LE
    feature blocks (row-major T x d) in header order."""
    header = json.dumps([_recording_labels(r) for r in recordings], sort_keys=True).encode()
    blob = b"".join(np.ascontiguousarray(r.features, dtype="<f4").tobytes() for r in recordings)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(SPLIT_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(blob)
    tmp.replace(path)


def read_split(path: Path, n_classes: int) -> list[SynthRecording]:
    data = Path(path).read_bytes()
    if data[:8] != SPLIT_MAGIC:
        raise ValueError(f"{path}: not a corpus split file")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16 : 16 + hlen])
    pos = 16 + hlen
    out = []
    for entry in header:
        T, d = entry["T"], entry["d"]
        nbytes = 4 * T * d
        feats = np.frombuffer(data[pos : pos + nbytes], dtype="<f4").reshape(T, d).astype(np.float32)
        pos += nbytes
        mask = np.zeros((T, n_classes), dtype=np.uint8)
        for c, a, b in entry["events"]:
            mask[a:b, c] = 1
        out.append(
            SynthRecording(
                id=entry["id"],
                features=feats,
                strong=mask,
                sequential=tuple(BoundaryLabel.from_id(i) for i in entry["sequential"]),
                presence=np.array(entry["presence"], dtype=np.uint8),
            )
        )
    return out


def write_corpus(out_dir: Path, cfg: SynthConfig, corpus: dict[str, list[SynthRecording]] | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = generate_corpus(cfg) if corpus is None else corpus
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "config": cfg.to_dict(),
        "vocabulary": list(cfg.vocabulary.classes),
        "splits": {},
    }
    for split, recs in corpus.items():
        fname = f"{split}.bin"
        write_split(out_dir / fname, recs)
        manifest["splits"][split] = {"file": fname, "ids": [r.id for r in recs]}
    path = out_dir / "manifest.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)
    return path


def read_manifest(corpus_dir: Path) -> dict:
    manifest = json.loads((Path(corpus_dir) / "manifest.json").read_text())
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{corpus_dir}: not a corpus directory")
    return manifest


def read_corpus(corpus_dir: Path, splits=SPLITS) -> tuple[EventVocabulary, dict[str, list[SynthRecording]]]:
    corpus_dir = Path(corpus_dir)
    manifest = read_manifest(corpus_dir)
    vocab = EventVocabulary(tuple(manifest["vocabulary"]))
    out = {}
    for split in splits:
        if split in manifest["splits"]:
            out[split] = read_split(corpus_dir / manifest["splits"][split]["file"], vocab.n)
    return vocab, out
