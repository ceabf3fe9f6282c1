"""One-hidden-layer MLPs with hand-written backprop, Adam and Gumbel-Softmax.

Inputs may be a single vector or a batch of row vectors; outputs follow the
same convention.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BLOCKS = ("W1", "b1", "W2", "b2")
CHECKPOINT_MAGIC = b"SQMLP001"


@dataclass
class MLPParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for k in BLOCKS:
            setattr(self, k, np.asarray(getattr(self, k), dtype=float))
        self.check()

    @property
    def in_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[0]

    def blocks(self):
        return [getattr(self, k) for k in BLOCKS]

    def copy(self) -> "MLPParams":
        return MLPParams(*(b.copy() for b in self.blocks()))

    def check(self) -> None:
        h, d = self.W1.shape
        o = self.W2.shape[0]
        if self.b1.shape != (h,) or self.W2.shape != (o, h) or self.b2.shape != (o,):
            raise ValueError(
                f"inconsistent shapes W1{self.W1.shape} b1{self.b1.shape} W2{self.W2.shape} b2{self.b2.shape}"
            )


@dataclass
class Grads:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def zeros_like(cls, p: MLPParams) -> "Grads":
        return cls(*(np.zeros_like(b) for b in p.blocks()))

    def blocks(self):
        return [getattr(self, k) for k in BLOCKS]

    def __add__(self, other: "Grads") -> "Grads":
        return Grads(*(a + b for a, b in zip(self.blocks(), other.blocks())))

    def scale(self, c: float) -> "Grads":
        return Grads(*(c * a for a in self.blocks()))


@dataclass
class Cache:
    x: np.ndarray
    pre: np.ndarray
    hidden: np.ndarray
    batched: bool


def mlp_init(in_dim: int, hidden_dim: int, out_dim: int, rng: np.random.Generator) -> MLPParams:
    """Uniform init in +-1/sqrt(fan_in) for weights and biases."""
    k1 = 1.0 / np.sqrt(in_dim)
    k2 = 1.0 / np.sqrt(hidden_dim)
    return MLPParams(
        W1=rng.uniform(-k1, k1, (hidden_dim, in_dim)),
        b1=rng.uniform(-k1, k1, hidden_dim),
        W2=rng.uniform(-k2, k2, (out_dim, hidden_dim)),
        b2=rng.uniform(-k2, k2, out_dim),
    )


def mlp_forward(p: MLPParams, x: np.ndarray) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    xb = x if batched else x[None, :]
    if xb.shape[1] != p.in_dim:
        raise ValueError(f"input has {xb.shape[1]} features, network expects {p.in_dim}")
    pre = xb @ p.W1.T + p.b1
    hidden = np.maximum(pre, 0.0)
    y = hidden @ p.W2.T + p.b2
    cache = Cache(xb, pre, hidden, batched)
    return (y if batched else y[0]), cache


def mlp_apply(p: MLPParams, x: np.ndarray) -> np.ndarray:
    return mlp_forward(p, x)[0]


def mlp_backward(p: MLPParams, cache: Cache, upstream: np.ndarray) -> tuple[Grads, np.ndarray]:
    """Gradients of ``sum(upstream * y)`` with respect to the parameters and the input."""
    up = np.asarray(upstream, dtype=float)
    if not cache.batched:
        up = up[None, :]
    if up.shape != (cache.x.shape[0], p.out_dim):
        raise ValueError(f"upstream shape {up.shape} does not match output ({cache.x.shape[0]}, {p.out_dim})")
    gW2 = up.T @ cache.hidden
    gb2 = up.sum(axis=0)
    dh = (up @ p.W2) * (cache.pre > 0)
    gW1 = dh.T @ cache.x
    gb1 = dh.sum(axis=0)
    dx = dh @ p.W1
    return Grads(gW1, gb1, gW2, gb2), (dx if cache.batched else dx[0])


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, p: MLPParams, lr: float) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(b) for b in p.blocks()], v=[np.zeros_like(b) for b in p.blocks()])


def adam_step(p: MLPParams, g: Grads, s: AdamState, clip: float | None = 1.0) -> None:
    """In-place Adam update with bias correction; gradients are clipped entrywise first."""
    for name, gb in zip(BLOCKS, g.blocks()):
        if gb.shape != getattr(p, name).shape:
            raise ValueError(f"gradient block {name} has shape {gb.shape}, expected {getattr(p, name).shape}")
        if not np.all(np.isfinite(gb)):
            raise FloatingPointError(f"non-finite gradient in block {name}")
    s.t += 1
    c1 = 1.0 - s.beta1**s.t
    c2 = 1.0 - s.beta2**s.t
    for k, (name, gb) in enumerate(zip(BLOCKS, g.blocks())):
        if clip is not None:
            gb = np.clip(gb, -clip, clip)
        s.m[k] = s.beta1 * s.m[k] + (1 - s.beta1) * gb
        s.v[k] = s.beta2 * s.v[k] + (1 - s.beta2) * gb * gb
        step = s.lr * (s.m[k] / c1) / (np.sqrt(s.v[k] / c2) + s.eps)
        getattr(p, name)[...] -= step


def soft_update(target: MLPParams, source: MLPParams, tau: float) -> None:
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    for t, s in zip(target.blocks(), source.blocks()):
        if t.shape != s.shape:
            raise ValueError("target and source shapes differ")
        t *= 1.0 - tau
        t += tau * s


# ---------------------------------------------------------------------------
# Discrete-action helpers


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_vjp(probs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pull ``upstream`` back through ``probs = softmax(z)``."""
    return probs * (upstream - (upstream * probs).sum(axis=-1, keepdims=True))


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=shape)
    return -np.log(-np.log(u))


def gumbel_softmax_sample(
    logits: np.ndarray, temperature: float, rng: np.random.Generator, noise: np.ndarray | None = None
) -> np.ndarray:
    """Relaxed categorical sample softmax((logits + g) / temperature).

    Gradients w.r.t. the logits: ``softmax_vjp(sample, upstream) / temperature``.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    logits = np.asarray(logits, dtype=float)
    if noise is None:
        noise = gumbel_noise(logits.shape, rng)
    return softmax((logits + noise) / temperature)


def gumbel_softmax_backward(sample: np.ndarray, upstream: np.ndarray, temperature: float) -> np.ndarray:
    return softmax_vjp(sample, upstream) / temperature


def onehot_argmax(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p)
    if p.shape[-1] == 0:
        raise ValueError("cannot take argmax of an empty vector")
    out = np.zeros(p.shape, dtype=float)
    np.put_along_axis(out, np.argmax(p, axis=-1)[..., None], 1.0, axis=-1)
    return out


def entropy(probs: np.ndarray) -> np.ndarray:
    return -(probs * np.log(np.clip(probs, 1e-300, None))).sum(axis=-1)


# ---------------------------------------------------------------------------
# Checkpoints: magic, uint32 dims (in, hidden, out), then little-endian float64 blocks.


def params_to_bytes(p: MLPParams) -> bytes:
    header = CHECKPOINT_MAGIC + struct.pack("<3I", p.in_dim, p.hidden_dim, p.out_dim)
    body = b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in p.blocks())
    return header + body


def params_from_bytes(data: bytes) -> MLPParams:
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("not an MLP checkpoint (bad magic)")
    off = len(CHECKPOINT_MAGIC)
    d, h, o = struct.unpack_from("<3I", data, off)
    off += 12
    shapes = [(h, d), (h,), (o, h), (o,)]
    expected = off + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(data) != expected:
        raise ValueError(f"checkpoint size {len(data)} does not match header dims ({d}, {h}, {o})")
    blocks = []
    for s in shapes:
        count = int(np.prod(s))
        blocks.append(np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(s).astype(float))
        off += 8 * count
    return MLPParams(*blocks)


def save_params(p: MLPParams, path) -> None:
    Path(path).write_bytes(params_to_bytes(p))


def load_params(path, expect: tuple[int, int, int] | None = None) -> MLPParams:
    p = params_from_bytes(Path(path).read_bytes())
    if expect is not None and (p.in_dim, p.hidden_dim, p.out_dim) != tuple(expect):
        raise ValueError(f"{path}: dims {(p.in_dim, p.hidden_dim, p.out_dim)} != expected {tuple(expect)}")
    return p
