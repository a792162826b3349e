"""Two-class Softmax, AM-Softmax and OC-Softmax heads with analytic gradients.

Labels follow the countermeasure convention: 0 = bonafide, 1 = spoof. Every
loss is a batch mean of softplus terms, so gradients carry the 1/N factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import blob

KINDS = ("softmax", "am_softmax", "oc_softmax")
DEFAULT_ALPHA = 20.0
HEAD_VERSION = 1


class LossError(ValueError):
    pass


def softplus(z):
    """log(1 + e^z), linear above z = 30."""
    z = np.asarray(z, dtype=np.float64)
    return np.where(z > 30.0, z, np.log1p(np.exp(np.minimum(z, 30.0))))


@dataclass
class LossHead:
    kind: str
    w0: np.ndarray
    w1: np.ndarray | None = None
    alpha: float = DEFAULT_ALPHA
    m: float = 0.0
    m0: float = 0.9
    m1: float = 0.2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LossError(f"unknown loss kind {self.kind!r}")
        self.w0 = np.asarray(self.w0, dtype=np.float64)
        if self.w0.ndim != 1:
            raise LossError("w0 must be a vector")
        if self.kind == "oc_softmax":
            self.w1 = None
            if not self.m0 > self.m1:
                raise LossError(f"oc_softmax needs m0 > m1, got m0={self.m0}, m1={self.m1}")
        else:
            if self.w1 is None:
                raise LossError(f"{self.kind} needs w1")
            self.w1 = np.asarray(self.w1, dtype=np.float64)
            if self.w1.shape != self.w0.shape:
                raise LossError("w0 and w1 must have the same shape")
        for name in ("m", "m0", "m1"):
            if not -1.0 <= getattr(self, name) <= 1.0:
                raise LossError(f"margin {name} outside [-1, 1]")
        if not self.alpha > 0:
            raise LossError("alpha must be positive")

    @property
    def dim(self) -> int:
        return self.w0.shape[0]

    def weights(self) -> dict[str, np.ndarray]:
        out = {"w0": self.w0}
        if self.w1 is not None:
            out["w1"] = self.w1
        return out

    @classmethod
    def init(cls, kind: str, dim: int, seed: int = 0, **kw) -> "LossHead":
        rng = np.random.default_rng(seed)
        w0 = rng.standard_normal(dim) / np.sqrt(dim)
        w1 = rng.standard_normal(dim) / np.sqrt(dim) if kind != "oc_softmax" else None
        return cls(kind, w0, w1, **kw)

    def config(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "alpha": self.alpha, "m": self.m, "m0": self.m0, "m1": self.m1}


@dataclass
class LossOutput:
    value: float
    grad_embeddings: np.ndarray
    grad_weights: dict[str, np.ndarray] = field(default_factory=dict)


def _check(X, y, head: LossHead, kind: str):
    if head.kind != kind:
        raise LossError(f"head is {head.kind}, expected {kind}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] < 1:
        raise LossError(f"expected a non-empty N x D batch, got shape {X.shape}")
    if X.shape[1] != head.dim:
        raise LossError(f"embedding dim {X.shape[1]} does not match head dim {head.dim}")
    if y.shape != (X.shape[0],):
        raise LossError(f"labels shape {y.shape} does not match batch of {X.shape[0]}")
    if not np.all((y == 0) | (y == 1)):
        raise LossError("labels must be 0 (bonafide) or 1 (spoof)")
    return X, y.astype(np.int64)


def _normalize(v: np.ndarray, what: str):
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise LossError(f"zero-norm {what}")
    return v / norm, norm


def _through_norm(g_hat, v_hat, norm):
    """Backprop a gradient w.r.t. v/|v| to v."""
    return (g_hat - np.sum(g_hat * v_hat, axis=-1, keepdims=True) * v_hat) / norm


def softmax_loss(X, y, head: LossHead) -> LossOutput:
    X, y = _check(X, y, head, "softmax")
    n = X.shape[0]
    sign = 1.0 - 2.0 * y  # +1 bonafide, -1 spoof
    diff = head.w1 - head.w0
    z = sign * (X @ diff)
    g = sign * expit(z) / n
    grad_w1 = X.T @ g
    return LossOutput(float(np.mean(softplus(z))), np.outer(g, diff), {"w0": -grad_w1, "w1": grad_w1})


def am_softmax_loss(X, y, head: LossHead) -> LossOutput:
    X, y = _check(X, y, head, "am_softmax")
    n = X.shape[0]
    xh, xn = _normalize(X, "embedding")
    w0h, w0n = _normalize(head.w0, "weight w0")
    w1h, w1n = _normalize(head.w1, "weight w1")
    sign = 1.0 - 2.0 * y
    c0 = xh @ w0h
    c1 = xh @ w1h
    z = head.alpha * (head.m - sign * (c0 - c1))
    g = expit(z) / n
    d_c0 = -head.alpha * sign * g
    d_c1 = -d_c0
    d_xh = np.outer(d_c0, w0h) + np.outer(d_c1, w1h)
    return LossOutput(
        float(np.mean(softplus(z))),
        _through_norm(d_xh, xh, xn),
        {"w0": _through_norm(xh.T @ d_c0, w0h, w0n), "w1": _through_norm(xh.T @ d_c1, w1h, w1n)},
    )


def oc_softmax_loss(X, y, head: LossHead) -> LossOutput:
    X, y = _check(X, y, head, "oc_softmax")
    n = X.shape[0]
    xh, xn = _normalize(X, "embedding")
    wh, wn = _normalize(head.w0, "weight w0")
    sign = 1.0 - 2.0 * y  # (-1)^y
    margin = np.where(y == 0, head.m0, head.m1)
    cos = xh @ wh
    z = head.alpha * (margin - cos) * sign
    d_cos = -head.alpha * sign * expit(z) / n
    return LossOutput(
        float(np.mean(softplus(z))),
        _through_norm(np.outer(d_cos, wh), xh, xn),
        {"w0": _through_norm(xh.T @ d_cos, wh, wn)},
    )


_LOSSES = {"softmax": softmax_loss, "am_softmax": am_softmax_loss, "oc_softmax": oc_softmax_loss}


def loss(X, y, head: LossHead) -> LossOutput:
    return _LOSSES[head.kind](X, y, head)


def scores(X, head: LossHead) -> np.ndarray:
    """Bonafide-likeness per row; higher means more bonafide."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if head.kind == "softmax":
        return X @ (head.w0 - head.w1)
    xh, _ = _normalize(X, "embedding")
    if head.kind == "am_softmax":
        return xh @ (_normalize(head.w0, "weight w0")[0] - _normalize(head.w1, "weight w1")[0])
    return xh @ _normalize(head.w0, "weight w0")[0]


def score(x, head: LossHead) -> float:
    return float(scores(np.asarray(x)[None, :], head)[0])


def head_to_blob(head: LossHead) -> tuple[dict, dict]:
    return head.config(), head.weights()


def head_from_blob(meta: dict, arrays: dict) -> LossHead:
    return LossHead(
        meta["kind"], arrays["w0"], arrays.get("w1"), alpha=meta["alpha"], m=meta["m"], m0=meta["m0"], m1=meta["m1"]
    )


def save_head(head: LossHead, path) -> None:
    meta, arrays = head_to_blob(head)
    blob.save(path, "loss_head", HEAD_VERSION, meta, arrays)


def load_head(path) -> LossHead:
    meta, arrays = blob.load(path, "loss_head", HEAD_VERSION)
    return head_from_blob(meta, arrays)
