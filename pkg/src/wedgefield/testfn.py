"""Gaussian and compact-bump test functions on Minkowski space.

Fourier convention: ``ft(p) = (2 pi)^-2 \\int f(x) exp(-i p.x) d^4x`` with the
Minkowski product in the exponent, so ``f(x) = (2 pi)^-2 \\int ft(p) exp(i p.x) d^4p``.
"""
from __future__ import annotations

import hashlib
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import minkowski as mk
from .errors import QuadratureFailure, Unsupported
from .minkowski import LorentzTransform

DEFAULT_EPS = 1e-6
TWO_PI_SQ = (2.0 * math.pi) ** 2

# ------------------------------------------------------------ bump profile


def bump_profile(t):
    """exp(-1/(1-t^2)) on (-1, 1), zero elsewhere."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


@lru_cache(maxsize=None)
def _half_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Gauss-Legendre on [0, 1] with the profile folded into the weights
    t, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    w = w * bump_profile(t)  # 2 * (w/2) for the even extension
    return t, w


_RULE_LADDER = (128, 256, 512, 1024)
_PROFILE_RTOL = 1e-10
_PROFILE_FLOOR = 1e-3  # relative to the peak, below which the tolerance is absolute
_CHUNK = 4096


def _cos_rule(omega: np.ndarray, n: int) -> np.ndarray:
    t, w = _half_rule(n)
    out = np.empty(omega.shape)
    for s in range(0, omega.size, _CHUNK):
        out[s : s + _CHUNK] = np.cos(np.outer(omega[s : s + _CHUNK], t)) @ w
    return out


def profile_transform(omega) -> np.ndarray:
    """Integral of bump_profile(t) cos(omega t) over [-1, 1].

    Gauss-Legendre with node doubling; raises QuadratureFailure when the
    largest rule still disagrees with its half-size partner.
    """
    omega = np.abs(np.asarray(omega, dtype=float))
    flat = omega.ravel()
    uniq, inverse = np.unique(flat, return_inverse=True)
    peak = _PEAK
    result = np.empty(uniq.shape)
    todo = np.arange(uniq.size)
    coarse = _cos_rule(uniq, _RULE_LADDER[0])
    for n in _RULE_LADDER[1:]:
        fine = _cos_rule(uniq[todo], n)
        tol = _PROFILE_RTOL * np.maximum(np.abs(fine), _PROFILE_FLOOR * peak)
        ok = np.abs(fine - coarse) <= tol
        result[todo[ok]] = fine[ok]
        todo = todo[~ok]
        coarse = fine[~ok]
        if todo.size == 0:
            return result[inverse].reshape(omega.shape)
    raise QuadratureFailure(
        f"bump transform unresolved for {todo.size} frequencies (max {uniq[todo].max():.3g})"
    )


_PEAK = float(np.sum(_half_rule(256)[1]))


@lru_cache(maxsize=32)
def profile_cutoff(eps: float) -> float:
    """Smallest tabulated omega beyond which |profile_transform| < eps * peak."""
    step = 0.05
    top = 64.0
    while True:
        grid = np.arange(0.0, top, step)
        vals = np.abs(profile_transform(grid))
        above = np.nonzero(vals >= eps * _PEAK)[0]
        last = grid[above[-1]] if above.size else 0.0
        # require a quiet tail of at least a quarter of the table
        if last < 0.75 * top:
            return float(last + step)
        top *= 2.0
        if top > 4096:
            raise QuadratureFailure(f"no momentum cutoff found for eps={eps:g}")


# ------------------------------------------------------------ support boxes


@dataclass(frozen=True)
class SupportBox:
    lo: np.ndarray
    hi: np.ndarray
    exact: bool
    eps: float | None = None

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).copy()
        hi = np.asarray(self.hi, dtype=float).copy()
        if lo.shape != (4,) or hi.shape != (4,) or np.any(lo > hi):
            raise ValueError("support box needs lo <= hi per axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def halfwidth(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def union(self, other: "SupportBox") -> "SupportBox":
        eps = None if self.eps is None and other.eps is None else max(self.eps or 0.0, other.eps or 0.0)
        return SupportBox(
            np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi), self.exact and other.exact, eps
        )

    def inflate(self, margin) -> "SupportBox":
        return SupportBox(self.lo - margin, self.hi + margin, False, self.eps)

    def shifted(self, y) -> "SupportBox":
        return SupportBox(self.lo + y, self.hi + y, self.exact, self.eps)

    def contains(self, x) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def corners(self) -> np.ndarray:
        idx = np.array(np.meshgrid(*[[0, 1]] * 4, indexing="ij")).reshape(4, -1).T
        return np.where(idx == 0, self.lo, self.hi)

    def face_centers(self) -> np.ndarray:
        out = []
        for axis in range(4):
            for end in (self.lo, self.hi):
                c = self.center.copy()
                c[axis] = end[axis]
                out.append(c)
        return np.array(out)

    def to_json(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "exact": self.exact, "eps": self.eps}


# ------------------------------------------------------------ test functions


class _FourierMemo:
    """Small per-function LRU cache of transforms keyed by the momentum array bytes."""

    _MAX = 16

    def _init_memo(self):
        object.__setattr__(self, "_memo", OrderedDict())
        object.__setattr__(self, "_memo_lock", threading.Lock())

    def fourier(self, p) -> np.ndarray:
        p = np.ascontiguousarray(p, dtype=float)
        if p.shape[-1] != 4:
            raise ValueError("momenta must have four components")
        if p.size < 64:
            return self._fourier(p)
        key = (p.shape, hashlib.blake2b(p.tobytes(), digest_size=16).digest())
        with self._memo_lock:
            hit = self._memo.get(key)
            if hit is not None:
                self._memo.move_to_end(key)
                return hit
        val = self._fourier(p)
        val.setflags(write=False)
        with self._memo_lock:
            self._memo[key] = val
            while len(self._memo) > self._MAX:
                self._memo.popitem(last=False)
        return val


def _as_complex(amplitude) -> complex:
    if isinstance(amplitude, (list, tuple)):
        re, im = amplitude
        return complex(float(re), float(im))
    return complex(amplitude)


def _frozen(x, shape) -> np.ndarray:
    a = np.array(x, dtype=float).reshape(shape)
    a.setflags(write=False)
    return a


def _is_signed_permutation(m: np.ndarray) -> bool:
    a = np.abs(m)
    return bool(
        np.all((np.abs(a - 1.0) < 1e-12) | (a < 1e-12))
        and np.all(np.sum(a > 0.5, axis=0) == 1)
        and np.all(np.sum(a > 0.5, axis=1) == 1)
    )


class GaussianPacket(_FourierMemo):
    """c * exp(-(x-a)^T S (x-a) / 2) * exp(i k.x) with S symmetric positive definite."""

    __slots__ = ("amplitude", "center", "precision", "wavevector", "_cov", "_norm", "_memo", "_memo_lock")

    def __init__(self, amplitude, center, precision, wavevector):
        s = np.array(precision, dtype=float).reshape(4, 4)
        s = 0.5 * (s + s.T)
        try:
            chol = np.linalg.cholesky(s)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Gaussian precision matrix must be positive definite") from exc
        object.__setattr__(self, "amplitude", _as_complex(amplitude))
        object.__setattr__(self, "center", _frozen(center, 4))
        object.__setattr__(self, "precision", _frozen(s, (4, 4)))
        object.__setattr__(self, "wavevector", _frozen(wavevector, 4))
        object.__setattr__(self, "_cov", _frozen(np.linalg.inv(s), (4, 4)))
        # det(S)^(-1/2) from the Cholesky diagonal
        object.__setattr__(self, "_norm", float(1.0 / np.prod(np.diag(chol))))
        self._init_memo()

    def __setattr__(self, name, value):
        raise AttributeError("test functions are immutable")

    @property
    def diagonal(self) -> bool:
        return not np.any(self.precision - np.diag(np.diag(self.precision)))

    def evaluate(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.center
        quad = np.einsum("...i,ij,...j->...", d, self.precision, d)
        phase = mk.minkowski_product(self.wavevector, x)
        return self.amplitude * np.exp(-0.5 * quad + 1j * phase)

    def _fourier(self, p: np.ndarray) -> np.ndarray:
        b = mk.lower(self.wavevector - p)
        quad = np.einsum("...i,ij,...j->...", b, self._cov, b)
        return self.amplitude * self._norm * np.exp(1j * (b @ self.center) - 0.5 * quad)

    def poincare(self, y, a: LorentzTransform) -> "GaussianPacket":
        lam = a.matrix
        inv = mk.inverse_transform(a).matrix
        y = np.asarray(y, dtype=float)
        k = lam @ self.wavevector
        return GaussianPacket(
            self.amplitude * np.exp(-1j * mk.minkowski_product(k, y)),
            lam @ self.center + y,
            inv.T @ self.precision @ inv,
            k,
        )

    def star(self) -> "GaussianPacket":
        return GaussianPacket(np.conj(self.amplitude), self.center, self.precision, -self.wavevector)

    def j(self) -> "GaussianPacket":
        return GaussianPacket(np.conj(self.amplitude), -self.center, self.precision, self.wavevector)

    def scaled(self, c) -> "GaussianPacket":
        return GaussianPacket(self.amplitude * complex(c), self.center, self.precision, self.wavevector)

    def eps_support(self, eps: float, space: str) -> SupportBox:
        r = 2.0 * math.log(1.0 / eps)
        if space == "position":
            half = np.sqrt(r * np.diag(self._cov))
            return SupportBox(self.center - half, self.center + half, False, eps)
        half = np.sqrt(r * np.diag(self.precision))
        return SupportBox(self.wavevector - half, self.wavevector + half, False, eps)

    def peak(self, space: str) -> float:
        return abs(self.amplitude) * (1.0 if space == "position" else self._norm)

    def terms(self) -> tuple:
        return (self,)

    def to_json(self) -> dict:
        out = {"type": "gaussian", "center": self.center.tolist()}
        if self.diagonal:
            out["widths"] = (1.0 / np.sqrt(np.diag(self.precision))).tolist()
        else:
            out["precision"] = self.precision.tolist()
        out["wavevector"] = self.wavevector.tolist()
        out["amplitude"] = [self.amplitude.real, self.amplitude.imag]
        return out

    def __repr__(self) -> str:
        return f"GaussianPacket({self.to_json()})"


class BumpPacket(_FourierMemo):
    """c * prod_mu profile((x_mu - a_mu)/h_mu) * exp(i k.x), supported in a box."""

    __slots__ = ("amplitude", "center", "halfwidth", "wavevector", "_memo", "_memo_lock")

    def __init__(self, amplitude, center, halfwidth, wavevector):
        h = _frozen(halfwidth, 4)
        if np.any(h <= 0):
            raise ValueError("bump half-widths must be positive")
        object.__setattr__(self, "amplitude", _as_complex(amplitude))
        object.__setattr__(self, "center", _frozen(center, 4))
        object.__setattr__(self, "halfwidth", h)
        object.__setattr__(self, "wavevector", _frozen(wavevector, 4))
        self._init_memo()

    def __setattr__(self, name, value):
        raise AttributeError("test functions are immutable")

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        env = np.prod(bump_profile((x - self.center) / self.halfwidth), axis=-1)
        return self.amplitude * env * np.exp(1j * mk.minkowski_product(self.wavevector, x))

    def _fourier(self, p: np.ndarray) -> np.ndarray:
        beta = mk.lower(self.wavevector - p)
        prof = profile_transform(beta * self.halfwidth)
        val = np.prod(self.halfwidth * prof, axis=-1)
        return (self.amplitude / TWO_PI_SQ) * val * np.exp(1j * (beta @ self.center))

    def poincare(self, y, a: LorentzTransform) -> "BumpPacket":
        lam = a.matrix
        if not _is_signed_permutation(lam):
            raise Unsupported("a bump packet only maps to a bump packet under axis permutations")
        y = np.asarray(y, dtype=float)
        k = lam @ self.wavevector
        return BumpPacket(
            self.amplitude * np.exp(-1j * mk.minkowski_product(k, y)),
            lam @ self.center + y,
            np.abs(lam) @ self.halfwidth,
            k,
        )

    def star(self) -> "BumpPacket":
        return BumpPacket(np.conj(self.amplitude), self.center, self.halfwidth, -self.wavevector)

    def j(self) -> "BumpPacket":
        return BumpPacket(np.conj(self.amplitude), -self.center, self.halfwidth, self.wavevector)

    def scaled(self, c) -> "BumpPacket":
        return BumpPacket(self.amplitude * complex(c), self.center, self.halfwidth, self.wavevector)

    def eps_support(self, eps: float, space: str) -> SupportBox:
        if space == "position":
            return SupportBox(self.center - self.halfwidth, self.center + self.halfwidth, True, None)
        half = profile_cutoff(float(eps)) / self.halfwidth
        return SupportBox(self.wavevector - half, self.wavevector + half, False, eps)

    def peak(self, space: str) -> float:
        if space == "position":
            return abs(self.amplitude) * math.exp(-4.0)
        return abs(self.amplitude) * float(np.prod(self.halfwidth)) * _PEAK**4 / TWO_PI_SQ

    def terms(self) -> tuple:
        return (self,)

    def to_json(self) -> dict:
        return {
            "type": "bump",
            "center": self.center.tolist(),
            "halfwidth": self.halfwidth.tolist(),
            "wavevector": self.wavevector.tolist(),
            "amplitude": [self.amplitude.real, self.amplitude.imag],
        }

    def __repr__(self) -> str:
        return f"BumpPacket({self.to_json()})"


class SumFunction(_FourierMemo):
    """Finite sum of packets."""

    __slots__ = ("parts", "_memo", "_memo_lock")

    def __init__(self, parts: Iterable):
        flat = []
        for p in parts:
            flat.extend(p.terms())
        if not flat:
            raise ValueError("empty sum")
        object.__setattr__(self, "parts", tuple(flat))
        self._init_memo()

    def __setattr__(self, name, value):
        raise AttributeError("test functions are immutable")

    def evaluate(self, x):
        return sum(p.evaluate(x) for p in self.parts)

    def _fourier(self, p):
        return sum(t.fourier(p) for t in self.parts)

    def poincare(self, y, a):
        return SumFunction([t.poincare(y, a) for t in self.parts])

    def star(self):
        return SumFunction([t.star() for t in self.parts])

    def j(self):
        return SumFunction([t.j() for t in self.parts])

    def scaled(self, c):
        return SumFunction([t.scaled(c) for t in self.parts])

    def eps_support(self, eps: float, space: str) -> SupportBox:
        boxes = [t.eps_support(eps, space) for t in self.parts]
        out = boxes[0]
        for b in boxes[1:]:
            out = out.union(b)
        return out

    def peak(self, space: str) -> float:
        return sum(t.peak(space) for t in self.parts)

    def terms(self) -> tuple:
        return self.parts

    def to_json(self) -> list:
        return [t.to_json() for t in self.parts]

    def __repr__(self) -> str:
        return f"SumFunction({len(self.parts)} terms)"


TestFunction = GaussianPacket | BumpPacket | SumFunction


# ------------------------------------------------------------ constructors


def gaussian(center=(0, 0, 0, 0), widths=(1, 1, 1, 1), wavevector=(0, 0, 0, 0), amplitude=1.0) -> GaussianPacket:
    w = np.asarray(widths, dtype=float).reshape(4)
    if np.any(w <= 0):
        raise ValueError("widths must be positive")
    return GaussianPacket(amplitude, center, np.diag(1.0 / w**2), wavevector)


def bump(center=(0, 0, 0, 0), halfwidth=(1, 1, 1, 1), wavevector=(0, 0, 0, 0), amplitude=1.0) -> BumpPacket:
    h = np.broadcast_to(np.asarray(halfwidth, dtype=float), (4,))
    return BumpPacket(amplitude, center, h, wavevector)


def add(*fs) -> SumFunction:
    return SumFunction(fs)


# ------------------------------------------------------------ functional API


def evaluate(f, x):
    return f.evaluate(x)


def fourier(f, p):
    return f.fourier(p)


def translate(f, y):
    return f.poincare(y, mk.IDENTITY)


def poincare(f, y, a: LorentzTransform):
    """x -> f(a^-1 (x - y))."""
    return f.poincare(y, a)


def star_involution(f):
    return f.star()


def j_involution(f):
    return f.j()


def eps_support(f, eps: float = DEFAULT_EPS, space: str = "position") -> SupportBox:
    if eps <= 0:
        raise ValueError("eps must be positive")
    if space not in ("position", "momentum"):
        raise ValueError("space must be 'position' or 'momentum'")
    return f.eps_support(eps, space)


# ------------------------------------------------------------ JSON


def packet_from_json(spec: dict):
    kind = spec.get("type", "gaussian")
    amp = _as_complex(spec.get("amplitude", [1.0, 0.0]))
    center = spec.get("center", [0.0] * 4)
    k = spec.get("wavevector", [0.0] * 4)
    if kind == "gaussian":
        if "precision" in spec:
            return GaussianPacket(amp, center, spec["precision"], k)
        return gaussian(center, spec.get("widths", [1.0] * 4), k, amp)
    if kind == "bump":
        return bump(center, spec.get("halfwidth", [1.0] * 4), k, amp)
    raise ValueError(f"unknown packet type {kind!r}")


def function_from_json(spec):
    """A single packet object, or a list of packets summed into one function."""
    if isinstance(spec, dict):
        return packet_from_json(spec)
    parts = [packet_from_json(s) for s in spec]
    return parts[0] if len(parts) == 1 else SumFunction(parts)


def functions_from_json(specs: Sequence) -> list:
    """List of factors; each entry is a packet or a list of packets."""
    return [function_from_json(s) for s in specs]
