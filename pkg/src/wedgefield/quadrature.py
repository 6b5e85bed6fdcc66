"""Tensor-product Gauss-Legendre rules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def interval_rule(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _legendre(n)
    half = 0.5 * (hi - lo)
    return 0.5 * (hi + lo) + half * x, half * w


def box_rule(lo, hi, nodes) -> tuple[np.ndarray, np.ndarray]:
    """Nodes of shape (N, d) and weights (N,) for a tensor rule on a box.

    ``nodes`` is a single count or one count per axis.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    counts = np.broadcast_to(np.asarray(nodes, dtype=int), lo.shape)
    axes = [interval_rule(a, b, int(n)) for a, b, n in zip(lo, hi, counts)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = axes[0][1]
    for a in axes[1:]:
        w = np.multiply.outer(w, a[1])
    return pts, w.ravel()
