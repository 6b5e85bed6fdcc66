"""Four-vectors, the metric diag(+1,-1,-1,-1) and proper orthochronous Lorentz matrices.

Four-vectors are plain float arrays of shape ``(4,)`` (or ``(..., 4)`` for batches),
contravariant components in index order 0..3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTransform

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])
METRIC_DIAG = np.array([1.0, -1.0, -1.0, -1.0])

_CONSTRUCT_TOL = 1e-9


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape[-1] != 4:
        raise ValueError(f"expected four components, got shape {v.shape}")
    return v


def lower(x: np.ndarray) -> np.ndarray:
    """Lower the index with the metric (works on batches)."""
    return np.asarray(x) * METRIC_DIAG


def minkowski_product(x, y):
    """x0*y0 - x1*y1 - x2*y2 - x3*y3, broadcasting over leading axes."""
    x = np.asarray(x)
    y = np.asarray(y)
    return x[..., 0] * y[..., 0] - x[..., 1] * y[..., 1] - x[..., 2] * y[..., 2] - x[..., 3] * y[..., 3]


def minkowski_square(x):
    return minkowski_product(x, x)


def in_forward_cone(x, closed: bool = True) -> bool:
    x = as_vector(x)
    sq = minkowski_square(x)
    if closed:
        return bool(sq >= 0.0 and x[0] >= 0.0)
    return bool(sq > 0.0 and x[0] > 0.0)


@dataclass(frozen=True)
class LorentzTransform:
    """A proper orthochronous Lorentz matrix acting on contravariant vectors."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (4, 4) or not np.all(np.isfinite(m)):
            raise InvalidTransform("Lorentz matrix must be a finite 4x4 array")
        # relative check: boosts with large rapidity have large entries
        scale = max(1.0, float(np.max(np.abs(m))) ** 2)
        if np.max(np.abs(m.T @ METRIC @ m - METRIC)) > _CONSTRUCT_TOL * scale:
            raise InvalidTransform("matrix is not eta-orthogonal")
        if m[0, 0] < 1.0 - _CONSTRUCT_TOL * scale:
            raise InvalidTransform("matrix is not orthochronous")
        if np.linalg.det(m) < 0.0:
            raise InvalidTransform("matrix is not proper")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "LorentzTransform") -> "LorentzTransform":
        return compose(self, other)

    def eta_defect(self) -> float:
        return float(np.max(np.abs(self.matrix.T @ METRIC @ self.matrix - METRIC)))

    def to_list(self) -> list[list[float]]:
        return self.matrix.tolist()


IDENTITY = LorentzTransform(np.eye(4))


def identity() -> LorentzTransform:
    return IDENTITY


def boost(rapidity: float, axis: int) -> LorentzTransform:
    if axis not in (1, 2, 3):
        raise ValueError("boost axis must be 1, 2 or 3")
    m = np.eye(4)
    c, s = math.cosh(rapidity), math.sinh(rapidity)
    m[0, 0] = m[axis, axis] = c
    m[0, axis] = m[axis, 0] = s
    return LorentzTransform(m)


def rotation(angle: float, plane: tuple[int, int]) -> LorentzTransform:
    """Rotation by ``angle`` taking spatial axis plane[0] towards plane[1]."""
    i, j = plane
    if i == j or i not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError("rotation plane must be two distinct spatial axes")
    m = np.eye(4)
    c, s = math.cos(angle), math.sin(angle)
    m[i, i] = m[j, j] = c
    m[j, i] = s
    m[i, j] = -s
    return LorentzTransform(m)


def compose(a: LorentzTransform, b: LorentzTransform) -> LorentzTransform:
    """Matrix product a*b (apply b first)."""
    return LorentzTransform(a.matrix @ b.matrix)


def inverse_transform(a: LorentzTransform) -> LorentzTransform:
    # eta-orthogonality gives the inverse without a solve
    return LorentzTransform(METRIC @ a.matrix.T @ METRIC)


def apply_to_vector(a: LorentzTransform, x) -> np.ndarray:
    """Apply to a vector or a batch of shape (..., 4)."""
    return np.asarray(x, dtype=float) @ a.matrix.T


def random_lorentz(rng: np.random.Generator, max_factors: int = 3, scale: float = 2.0) -> LorentzTransform:
    """Product of 1..max_factors random boosts/rotations with parameters in [-scale, scale]."""
    out = IDENTITY
    for _ in range(int(rng.integers(1, max_factors + 1))):
        param = float(rng.uniform(-scale, scale))
        if rng.random() < 0.5:
            factor = boost(param, int(rng.integers(1, 4)))
        else:
            i, j = rng.choice([1, 2, 3], size=2, replace=False)
            factor = rotation(param, (int(i), int(j)))
        out = compose(out, factor)
    return out


def transform_from_json(spec: dict) -> LorentzTransform:
    """Build a transform from ``{"matrix": 4x4}`` or ``{"factors": [...]}``.

    Each factor is ``{"boost": rapidity, "axis": k}`` or
    ``{"rotation": angle, "plane": [i, j]}``; factors compose left to right.
    """
    if "matrix" in spec:
        return LorentzTransform(np.array(spec["matrix"], dtype=float))
    out = IDENTITY
    for f in spec.get("factors", []):
        if "boost" in f:
            out = compose(out, boost(float(f["boost"]), int(f["axis"])))
        elif "rotation" in f:
            i, j = f["plane"]
            out = compose(out, rotation(float(f["rotation"]), (int(i), int(j))))
        else:
            raise ValueError(f"unknown Lorentz factor {f!r}")
    return out
