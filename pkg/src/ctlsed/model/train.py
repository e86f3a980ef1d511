"""Minibatch Adam training with periodic validation checkpoints."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..ctc import ctc_loss_and_grad
from ..ctl import CtlConfig, LossResult, ctl_loss_and_grad
from ..evaluation import F1Report, decode_ctc, decode_threshold, frame_f1, tune_thresholds
from .losses import combined_loss, mil_loss_from_frames, strong_loss
from .network import PredictorConfig, backward, forward, init_params

log = logging.getLogger(__name__)

LOSSES = ("strong", "mil", "ctc", "ctl", "combo")
WEIGHT_KEYS = ("ctl", "mil", "strong")
LABEL_FIELD = {"strong": "strong", "mil": "presence", "ctl": "sequential", "ctc": "sequential"}


class TrainingDiverged(RuntimeError):
    pass


class MissingLabelError(ValueError):
    pass


def _default_weights():
    return {"ctl": 1.0, "mil": 3.3, "strong": 0.0}


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "ctl"
    learning_rate: float = 1e-3
    batch_size: int = 32
    checkpoint_every: int = 100
    max_checkpoints: int = 50
    loss_weights: dict = field(default_factory=_default_weights)  # used by "combo"
    max_concurrence: int | None = 1
    clamp_epsilon: float = 1e-6
    balance: bool = True
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.checkpoint_every < 1 or self.max_checkpoints < 0:
            raise ValueError("batch_size and checkpoint_every must be >= 1, max_checkpoints >= 0")
        unknown = set(self.loss_weights) - set(WEIGHT_KEYS)
        if unknown:
            raise ValueError(f"unknown loss weight(s) {sorted(unknown)}")
        if any(w < 0 for w in self.loss_weights.values()):
            raise ValueError("loss weights must be >= 0")
        if self.loss == "combo" and not any(w > 0 for w in self.loss_weights.values()):
            raise ValueError("combo training needs at least one positive weight")

    @property
    def head(self) -> str:
        return "softmax" if self.loss == "ctc" else "sigmoid"

    def active_weights(self) -> dict[str, float]:
        if self.loss == "combo":
            return {k: float(w) for k, w in self.loss_weights.items() if w > 0}
        return {self.loss: 1.0}

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    params: dict
    best_checkpoint: int
    best_f1: float
    metrics: list[dict]
    thresholds: np.ndarray | None


def recording_loss(train_cfg: TrainConfig, out: np.ndarray, rec) -> LossResult:
    """Loss and output gradient for one recording under the active objective."""
    if train_cfg.loss == "ctc":
        return ctc_loss_and_grad(out, rec.sequential)
    ctl_cfg = CtlConfig(train_cfg.max_concurrence, train_cfg.clamp_epsilon)
    terms = []
    for name, w in train_cfg.active_weights().items():
        if name == "ctl":
            res = ctl_loss_and_grad(out, rec.sequential, ctl_cfg)
        elif name == "mil":
            res = mil_loss_from_frames(out, rec.presence)
        else:
            res = strong_loss(out, rec.strong)
        terms.append((res, w))
    return terms[0][0] if len(terms) == 1 and terms[0][1] == 1.0 else combined_loss(terms)


def check_labels(train_cfg: TrainConfig, recordings) -> None:
    names = ["sequential"] if train_cfg.loss == "ctc" else [LABEL_FIELD[k] for k in train_cfg.active_weights()]
    for rec in recordings:
        for name in names:
            if getattr(rec, name, None) is None:
                raise MissingLabelError(f"recording {rec.id} lacks {name} labels required by loss {train_cfg.loss!r}")


class BatchSampler:
    """Shuffled epochs, or per-class round robin when balancing."""

    def __init__(self, recordings, batch_size: int, balance: bool, rng: np.random.Generator):
        self.batch_size = batch_size
        self.rng = rng
        self.n_rec = len(recordings)
        self.pools = []
        if balance:
            presence = np.stack([r.presence for r in recordings])
            self.pools = [np.flatnonzero(presence[:, c]) for c in range(presence.shape[1])]
            self.pools = [p for p in self.pools if p.size]
        self.queues = [[] for _ in self.pools] if self.pools else [[]]
        self.turn = 0

    def _draw(self, q: int) -> int:
        if not self.queues[q]:
            pool = self.pools[q] if self.pools else np.arange(self.n_rec)
            self.queues[q] = list(self.rng.permutation(pool))
        return int(self.queues[q].pop())

    def next_batch(self) -> list[int]:
        out = []
        for _ in range(self.batch_size):
            q = self.turn % len(self.queues)
            self.turn += 1
            out.append(self._draw(q))
        return out


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def batch_outputs(pred_cfg: PredictorConfig, params, recordings, chunk: int = 256) -> list[np.ndarray]:
    outs = []
    for i in range(0, len(recordings), chunk):
        x = np.stack([r.features for r in recordings[i : i + chunk]])
        outs.extend(forward(pred_cfg, params, x)[0])
    return outs


def evaluate(pred_cfg: PredictorConfig, params, recordings, thresholds=None, classes=()) -> tuple[F1Report, list, np.ndarray | None]:
    """F1 on ``recordings``; sigmoid heads tune thresholds on the same set
    unless ``thresholds`` is given."""
    outs = batch_outputs(pred_cfg, params, recordings)
    truths = [r.strong for r in recordings]
    if pred_cfg.head == "softmax":
        preds = [decode_ctc(q, pred_cfg.n_classes) for q in outs]
        return frame_f1(preds, truths, classes), outs, None
    if thresholds is None:
        thresholds = tune_thresholds(outs, truths)
    preds = [decode_threshold(y, thresholds) for y in outs]
    return frame_f1(preds, truths, classes), outs, thresholds


def train(pred_cfg: PredictorConfig, train_cfg: TrainConfig, train_set, valid_set, classes=(), params=None) -> TrainResult:
    if pred_cfg.head != train_cfg.head:
        raise ValueError(f"loss {train_cfg.loss!r} needs a {train_cfg.head} head, config has {pred_cfg.head}")
    check_labels(train_cfg, train_set)
    params = init_params(pred_cfg) if params is None else {k: v.copy() for k, v in params.items()}
    rng = np.random.default_rng([train_cfg.seed, 0xBA7C4])
    sampler = BatchSampler(train_set, train_cfg.batch_size, train_cfg.balance, rng)
    opt = Adam(params, train_cfg.learning_rate, train_cfg.beta1, train_cfg.beta2, train_cfg.adam_epsilon)

    best = {"f1": -1.0, "checkpoint": 0, "params": {k: v.copy() for k, v in params.items()}, "thr": None}
    metrics = []
    step = 0
    for ckpt in range(1, train_cfg.max_checkpoints + 1):
        losses = []
        for _ in range(train_cfg.checkpoint_every):
            step += 1
            idx = sampler.next_batch()
            x = np.stack([train_set[i].features for i in idx])
            out, cache = forward(pred_cfg, params, x)
            grad_out = np.zeros_like(out)
            total = 0.0
            for b, i in enumerate(idx):
                res = recording_loss(train_cfg, out[b], train_set[i])
                if not np.isfinite(res.loss) or not np.all(np.isfinite(res.grad)):
                    raise TrainingDiverged(
                        f"non-finite loss at minibatch {step} (recording {train_set[i].id}, loss={res.loss})"
                    )
                total += res.loss
                grad_out[b] = res.grad
            grad_out /= len(idx)
            losses.append(total / len(idx))
            opt.step(params, backward(pred_cfg, params, cache, grad_out))

        report, _, thr = evaluate(pred_cfg, params, valid_set, classes=classes)
        row = {
            "checkpoint": ckpt,
            "minibatches": step,
            "train_loss": float(np.mean(losses)),
            "val_macro_f1": report.macro,
        }
        for c, f in enumerate(report.per_class):
            row[f"val_f1_{classes[c] if classes else c}"] = float(f)
        metrics.append(row)
        log.info("checkpoint %d: loss %.4f, val macro F1 %.4f", ckpt, row["train_loss"], report.macro)
        if report.macro > best["f1"]:
            best = {"f1": report.macro, "checkpoint": ckpt, "params": {k: v.copy() for k, v in params.items()}, "thr": thr}
    return TrainResult(best["params"], best["checkpoint"], best["f1"], metrics, best["thr"])
