"""Central finite differences for checking hand-written gradients."""

from __future__ import annotations

import numpy as np

FLOOR = 1e-6


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` by (f(x + h e) - f(x - h e)) / 2h, perturbing ``x`` in place."""
    grad = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        up = f()
        x[idx] = old - h
        down = f()
        x[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def relative_error(a, b, floor: float = FLOOR) -> float:
    """max |a - b| / max(|a|, |b|, floor); the floor keeps near-zero entries from dominating."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def check_blocks(f, params, grads, h: float = 1e-5) -> float:
    """Worst relative error over every block of an MLPParams-like object against its Grads."""
    return max(relative_error(g, central_difference(f, p, h)) for p, g in zip(params.blocks(), grads.blocks()))
