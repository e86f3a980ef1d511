"""Frame-wise predictor: dense ReLU layers, an optional tanh recurrent
layer over frames, and a sigmoid (per class) or softmax (CTC) output."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

HEADS = ("sigmoid", "softmax")


@dataclass(frozen=True)
class PredictorConfig:
    input_dim: int = 8
    n_classes: int = 2
    hidden_sizes: tuple = (32,)
    recurrent: bool = True
    head: str = "sigmoid"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ValueError("hidden_sizes needs at least one positive width")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")
        if self.input_dim < 1 or self.n_classes < 1:
            raise ValueError("input_dim and n_classes must be positive")

    @property
    def output_dim(self) -> int:
        return self.n_classes if self.head == "sigmoid" else 2 * self.n_classes + 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden_sizes"] = list(self.hidden_sizes)
        return out


def param_shapes(cfg: PredictorConfig) -> dict[str, tuple]:
    shapes = {}
    width = cfg.input_dim
    for i, h in enumerate(cfg.hidden_sizes):
        shapes[f"W{i}"] = (width, h)
        shapes[f"b{i}"] = (h,)
        width = h
    if cfg.recurrent:
        shapes["Wx"] = (width, width)
        shapes["Wh"] = (width, width)
        shapes["bh"] = (width,)
    shapes["Wo"] = (width, cfg.output_dim)
    shapes["bo"] = (cfg.output_dim,)
    return shapes


def init_params(cfg: PredictorConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        elif name == "Wh":
            q, _ = np.linalg.qr(rng.standard_normal(shape))
            params[name] = 0.5 * q
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, shape)
    return params


def zero_params(cfg: PredictorConfig) -> dict[str, np.ndarray]:
    return {name: np.zeros(shape) for name, shape in param_shapes(cfg).items()}


def check_params(cfg: PredictorConfig, params: dict) -> None:
    shapes = param_shapes(cfg)
    if set(params) != set(shapes):
        raise ValueError(f"parameter names {sorted(params)} do not match config {sorted(shapes)}")
    for name, shape in shapes.items():
        if params[name].shape != shape:
            raise ValueError(f"parameter {name} has shape {params[name].shape}, expected {shape}")


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _softmax(a):
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(cfg: PredictorConfig, params: dict, x) -> tuple[np.ndarray, dict]:
    """Outputs for a batch ``x`` of shape (B, T, d) plus a backward cache."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != cfg.input_dim:
        raise ValueError(f"features must be B x T x {cfg.input_dim}, got {x.shape}")
    cache = {"acts": [x]}
    h = x
    for i in range(len(cfg.hidden_sizes)):
        h = np.maximum(0.0, h @ params[f"W{i}"] + params[f"b{i}"])
        cache["acts"].append(h)
    if cfg.recurrent:
        B, T, _ = h.shape
        pre = h @ params["Wx"] + params["bh"]
        states = np.zeros((B, T + 1, pre.shape[2]))
        for t in range(T):
            states[:, t + 1] = np.tanh(pre[:, t] + states[:, t] @ params["Wh"])
        cache["states"] = states
        h = states[:, 1:]
    logits = h @ params["Wo"] + params["bo"]
    out = _sigmoid(logits) if cfg.head == "sigmoid" else _softmax(logits)
    cache["top"] = h
    cache["out"] = out
    return out, cache


def predict(cfg: PredictorConfig, params: dict, x) -> np.ndarray:
    """Posterior grid (T x n) or CTC grid (T x 2n+1) for one recording, or a
    batch of them for 3-D input."""
    check_params(cfg, params)
    x = np.asarray(x)
    if x.ndim == 2:
        return forward(cfg, params, x[None])[0][0]
    return forward(cfg, params, x)[0]


def backward(cfg: PredictorConfig, params: dict, cache: dict, grad_out) -> dict[str, np.ndarray]:
    """Parameter gradients given d loss / d outputs, shape (B, T, out)."""
    out = cache["out"]
    if cfg.head == "sigmoid":
        g = grad_out * out * (1.0 - out)
    else:
        g = out * (grad_out - (grad_out * out).sum(axis=-1, keepdims=True))
    grads = {}
    top = cache["top"]
    grads["Wo"] = np.einsum("btk,bto->ko", top, g)
    grads["bo"] = g.sum(axis=(0, 1))
    gh = g @ params["Wo"].T
    if cfg.recurrent:
        states = cache["states"]
        B, T, H = gh.shape
        gpre = np.zeros_like(gh)
        carry = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            gs = gh[:, t] + carry
            gpre[:, t] = gs * (1.0 - states[:, t + 1] ** 2)
            carry = gpre[:, t] @ params["Wh"].T
        below = cache["acts"][-1]
        grads["Wh"] = np.einsum("bth,btk->hk", states[:, :-1], gpre)
        grads["Wx"] = np.einsum("bth,btk->hk", below, gpre)
        grads["bh"] = gpre.sum(axis=(0, 1))
        gh = gpre @ params["Wx"].T
    acts = cache["acts"]
    for i in range(len(cfg.hidden_sizes) - 1, -1, -1):
        gh = gh * (acts[i + 1] > 0)
        grads[f"W{i}"] = np.einsum("btk,bth->kh", acts[i], gh)
        grads[f"b{i}"] = gh.sum(axis=(0, 1))
        gh = gh @ params[f"W{i}"].T
    return grads
