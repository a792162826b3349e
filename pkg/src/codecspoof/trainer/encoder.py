"""Small strided 2-D conv encoder over (time x coefficient) feature maps.

conv -> ReLU blocks, mean over time, linear projection to the embedding.
Forward keeps a cache so ``backward`` can return gradients for every
parameter and for the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EncoderError(RuntimeError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int = 60
    # (out_channels, kernel, stride) per block
    conv_blocks: tuple[tuple[int, int, int], ...] = ((8, 3, 2), (16, 3, 2))
    pooling: str = "mean_over_time"
    embed_dim: int = 256
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "conv_blocks", tuple(tuple(int(v) for v in b) for b in self.conv_blocks))
        if self.pooling != "mean_over_time":
            raise EncoderError(f"unsupported pooling {self.pooling!r}")
        for c, k, s in self.conv_blocks:
            if c < 1 or k < 1 or s < 1:
                raise EncoderError(f"bad conv block {(c, k, s)}")

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "conv_blocks": [list(b) for b in self.conv_blocks],
            "pooling": self.pooling,
            "embed_dim": self.embed_dim,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(
            input_dim=d["input_dim"],
            conv_blocks=tuple(tuple(b) for b in d["conv_blocks"]),
            pooling=d.get("pooling", "mean_over_time"),
            embed_dim=d["embed_dim"],
            seed=d.get("seed", 0),
        )


def _out_size(n, k, s):
    p = k // 2
    return (n + 2 * p - k) // s + 1


def _window(xp, i, j, s, ho, wo):
    return xp[:, i : i + s * (ho - 1) + 1 : s, j : j + s * (wo - 1) + 1 : s, :]


def conv_forward(x, W, b, stride):
    """x: (N, H, W, Cin); W: (k, k, Cin, Cout). Zero padding k//2."""
    k = W.shape[0]
    p = k // 2
    n, h, w, _ = x.shape
    ho, wo = _out_size(h, k, stride), _out_size(w, k, stride)
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    out = np.broadcast_to(b, (n, ho, wo, W.shape[3])).copy()
    for i in range(k):
        for j in range(k):
            out += _window(xp, i, j, stride, ho, wo) @ W[i, j]
    return out, xp


def conv_backward(dout, xp, W, stride, in_shape):
    k = W.shape[0]
    p = k // 2
    ho, wo = dout.shape[1], dout.shape[2]
    dW = np.empty_like(W)
    dxp = np.zeros_like(xp)
    flat = dout.reshape(-1, dout.shape[3])
    for i in range(k):
        for j in range(k):
            win = _window(xp, i, j, stride, ho, wo)
            dW[i, j] = win.reshape(-1, win.shape[3]).T @ flat
            _window(dxp, i, j, stride, ho, wo)[...] += dout @ W[i, j].T
    db = flat.sum(axis=0)
    h, w = in_shape[1], in_shape[2]
    return dxp[:, p : p + h, p : p + w, :], dW, db


@dataclass
class Encoder:
    config: EncoderConfig
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, config: EncoderConfig) -> "Encoder":
        rng = np.random.default_rng(config.seed)
        params = {}
        cin = 1
        width = config.input_dim
        for idx, (cout, k, s) in enumerate(config.conv_blocks):
            fan_in = k * k * cin
            params[f"conv{idx}.W"] = rng.standard_normal((k, k, cin, cout)) * np.sqrt(2.0 / fan_in)
            params[f"conv{idx}.b"] = np.zeros(cout)
            cin = cout
            width = _out_size(width, k, s)
        flat = width * cin
        params["proj.W"] = rng.standard_normal((flat, config.embed_dim)) * np.sqrt(1.0 / flat)
        params["proj.b"] = np.zeros(config.embed_dim)
        return cls(config, params)

    def forward(self, feats: np.ndarray, keep_cache: bool = True):
        """feats: (N, T, input_dim) or (T, input_dim). Returns (embeddings, cache)."""
        x = np.asarray(feats, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.shape[2] != self.config.input_dim:
            raise EncoderError(f"expected {self.config.input_dim} coefficients, got {x.shape[2]}")
        h = x[..., None]
        cache = []
        for idx, (_, _, s) in enumerate(self.config.conv_blocks):
            pre, xp = conv_forward(h, self.params[f"conv{idx}.W"], self.params[f"conv{idx}.b"], s)
            if keep_cache:
                cache.append((xp, h.shape, pre > 0))
            h = np.maximum(pre, 0.0)
        pooled_shape = h.shape
        flat = h.mean(axis=1).reshape(h.shape[0], -1)
        emb = flat @ self.params["proj.W"] + self.params["proj.b"]
        if not np.all(np.isfinite(emb)):
            bad = [k for k, v in self.params.items() if not np.all(np.isfinite(v))]
            raise EncoderError(
                f"non-finite embedding (input finite: {bool(np.all(np.isfinite(x)))}, non-finite params: {bad})"
            )
        return emb, (cache, pooled_shape, flat)

    def __call__(self, feats):
        return self.forward(feats, keep_cache=False)[0]

    def backward(self, d_emb: np.ndarray, cache) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Gradients for all parameters and for the input features."""
        blocks, pooled_shape, flat = cache
        grads = {"proj.W": flat.T @ d_emb, "proj.b": d_emb.sum(axis=0)}
        d_flat = d_emb @ self.params["proj.W"].T
        n, t, w, c = pooled_shape
        dh = np.broadcast_to(d_flat.reshape(n, 1, w, c) / t, pooled_shape)
        for idx in range(len(blocks) - 1, -1, -1):
            xp, in_shape, mask = blocks[idx]
            stride = self.config.conv_blocks[idx][2]
            dpre = dh * mask
            dh, grads[f"conv{idx}.W"], grads[f"conv{idx}.b"] = conv_backward(
                dpre, xp, self.params[f"conv{idx}.W"], stride, in_shape
            )
        return grads, dh[..., 0]
