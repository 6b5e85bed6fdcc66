"""Twisted tensor products of test functions, described by their momentum kernels.

A ``TwistedTensor`` of degree n has kernel

    K(p_1..p_n) = c * prod_j ft_j(p_j) * prod_{l<r} rho_lr(p_l Theta_lr p_r)

so every product, involution and group action is an exact rewrite of the
per-pair data ``(Theta_lr, rho_lr)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import minkowski as mk
from . import testfn as tf
from .errors import DegreeMismatch, DegreeTooLarge, QuadratureFailure, UnsupportedTwistFunction
from .geometry import ZERO_THETA, NoncommMatrix, theta_bilinear
from .minkowski import LorentzTransform
from .quadrature import box_rule

# ------------------------------------------------------------ twist functions


@dataclass(frozen=True)
class StandardPhase:
    """rho(lam) = exp(-i lam / 2)."""

    def __call__(self, lam):
        return np.exp(-0.5j * np.asarray(lam))

    def to_json(self) -> dict:
        return {"type": "phase"}


@dataclass(frozen=True)
class DampedPhase:
    """rho(lam) = exp(-i lam / 2 - sigma lam^2)."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def __call__(self, lam):
        lam = np.asarray(lam)
        return np.exp(-0.5j * lam - self.sigma * lam * lam)

    def to_json(self) -> dict:
        return {"type": "damped", "sigma": self.sigma}


STANDARD = StandardPhase()
TwistFunction = StandardPhase | DampedPhase


# ------------------------------------------------------------ tensors


def _pair_count(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(n: int, l: int, r: int) -> int:
    """Position of the pair (l, r), 0 <= l < r < n, in lexicographic order."""
    return l * n - l * (l + 1) // 2 + (r - l - 1)


def _pairs(n: int):
    for l in range(n):
        for r in range(l + 1, n):
            yield l, r


@dataclass(frozen=True)
class TwistedTensor:
    factors: tuple
    thetas: tuple  # NoncommMatrix per pair, lexicographic l < r
    rhos: tuple  # twist function per pair
    coefficient: complex = 1.0 + 0.0j

    def __post_init__(self):
        n = len(self.factors)
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "thetas", tuple(self.thetas))
        object.__setattr__(self, "rhos", tuple(self.rhos))
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        if len(self.thetas) != _pair_count(n) or len(self.rhos) != _pair_count(n):
            raise ValueError("pair data does not match the degree")

    @property
    def degree(self) -> int:
        return len(self.factors)

    def theta(self, l: int, r: int) -> NoncommMatrix:
        return self.thetas[pair_index(self.degree, l, r)]

    def rho(self, l: int, r: int):
        return self.rhos[pair_index(self.degree, l, r)]

    @property
    def is_plain(self) -> bool:
        return all(t.is_zero() for t in self.thetas)

    def twist_matrix(self) -> list[list[NoncommMatrix | None]]:
        """Dense n x n view of the pair data (None on and below the diagonal)."""
        n = self.degree
        out = [[None] * n for _ in range(n)]
        for l, r in _pairs(n):
            out[l][r] = self.theta(l, r)
        return out

    def scaled(self, c) -> "TwistedTensor":
        return TwistedTensor(self.factors, self.thetas, self.rhos, self.coefficient * complex(c))

    def to_json(self) -> dict:
        return {
            "coefficient": [self.coefficient.real, self.coefficient.imag],
            "factors": [f.to_json() for f in self.factors],
            "pairs": [
                {"l": l, "r": r, "theta": self.theta(l, r).upper.tolist(), "rho": self.rho(l, r).to_json()}
                for l, r in _pairs(self.degree)
            ],
        }


@dataclass(frozen=True)
class TensorPoly:
    """Finite sum of twisted tensors, mixed degrees allowed."""

    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def max_degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    def __add__(self, other) -> "TensorPoly":
        return TensorPoly(self.terms + as_poly(other).terms)


def as_poly(F) -> TensorPoly:
    if isinstance(F, TensorPoly):
        return F
    if isinstance(F, TwistedTensor):
        return TensorPoly((F,))
    raise TypeError(f"expected a tensor, got {type(F).__name__}")


def _same_kind(template, poly: TensorPoly):
    if isinstance(template, TwistedTensor) and len(poly.terms) == 1:
        return poly.terms[0]
    return poly


def tensor(*factors, coefficient=1.0) -> TwistedTensor:
    """Plain (untwisted) tensor product of the factors."""
    n = len(factors)
    return TwistedTensor(factors, (ZERO_THETA,) * _pair_count(n), (STANDARD,) * _pair_count(n), coefficient)


def scalar(c=1.0) -> TwistedTensor:
    return tensor(coefficient=c)


def uniform(factors: Sequence, theta: NoncommMatrix, coefficient=1.0) -> TwistedTensor:
    """Tensor whose every pair carries the same matrix ``theta``."""
    n = len(factors)
    return TwistedTensor(factors, (theta,) * _pair_count(n), (STANDARD,) * _pair_count(n), coefficient)


def nested(factors: Sequence, thetas: Sequence[NoncommMatrix], coefficient=1.0) -> TwistedTensor:
    """f_1 (x)_{t_1} (f_2 (x)_{t_2} (... f_n)): pair (l, r) carries t_l."""
    n = len(factors)
    th = []
    for l, r in _pairs(n):
        th.append(thetas[l])
    return TwistedTensor(factors, th, (STANDARD,) * _pair_count(n), coefficient)


def _join(F: TwistedTensor, G: TwistedTensor, theta: NoncommMatrix, rho) -> TwistedTensor:
    n, m = F.degree, G.degree
    k = n + m
    thetas, rhos = [], []
    for l, r in _pairs(k):
        if r < n:
            thetas.append(F.theta(l, r))
            rhos.append(F.rho(l, r))
        elif l >= n:
            thetas.append(G.theta(l - n, r - n))
            rhos.append(G.rho(l - n, r - n))
        else:
            thetas.append(theta)
            rhos.append(rho)
    return TwistedTensor(F.factors + G.factors, thetas, rhos, F.coefficient * G.coefficient)


def rho_product(F, G, theta: NoncommMatrix, rho=STANDARD):
    """Product with ``rho`` applied to every new cross pair; bilinear in F, G."""
    P, Q = as_poly(F), as_poly(G)
    out = TensorPoly(tuple(_join(a, b, theta, rho) for a in P.terms for b in Q.terms))
    if isinstance(F, TwistedTensor) and isinstance(G, TwistedTensor):
        return out.terms[0]
    return out


def moyal_product(F, G, theta: NoncommMatrix):
    return rho_product(F, G, theta, STANDARD)


def plain_join(F, G):
    return rho_product(F, G, ZERO_THETA, STANDARD)


def momentum_kernel(F: TwistedTensor, momenta) -> np.ndarray:
    """Kernel at momenta of shape (n, 4) or (..., n, 4)."""
    p = np.asarray(momenta, dtype=float)
    n = F.degree
    if n == 0:
        if p.size and p.shape[-2:] != (0, 4):
            raise DegreeMismatch("degree-0 tensor takes no momenta")
        lead = p.shape[:-2] if p.ndim >= 2 else ()
        return np.full(lead, F.coefficient) if lead else F.coefficient
    if p.ndim < 2 or p.shape[-2:] != (n, 4):
        raise DegreeMismatch(f"expected momenta of shape (..., {n}, 4), got {p.shape}")
    out = F.coefficient * np.ones(p.shape[:-2], dtype=complex)
    for j, f in enumerate(F.factors):
        out = out * f.fourier(p[..., j, :])
    for l, r in _pairs(n):
        th = F.theta(l, r)
        if th.is_zero():
            continue
        out = out * F.rho(l, r)(theta_bilinear(th, p[..., l, :], p[..., r, :]))
    return out[()] if out.ndim == 0 else out


def poly_kernel(F, momenta) -> np.ndarray:
    """Kernel of a polynomial whose terms all have the degree of ``momenta``."""
    return sum(momentum_kernel(t, momenta) for t in as_poly(F).terms)


# ------------------------------------------------------------ actions and involutions


def _poincare_single(F: TwistedTensor, y, a: LorentzTransform) -> TwistedTensor:
    lam = a.matrix
    thetas = tuple(
        t if t.is_zero() else NoncommMatrix.from_matrix(lam @ t.matrix @ lam.T) for t in F.thetas
    )
    return TwistedTensor(tuple(f.poincare(y, a) for f in F.factors), thetas, F.rhos, F.coefficient)


def poincare_act(F, y, a: LorentzTransform = mk.IDENTITY):
    """Transform every factor by (y, a) and every pair matrix by Theta -> a Theta a^T."""
    P = as_poly(F)
    return _same_kind(F, TensorPoly(tuple(_poincare_single(t, y, a) for t in P.terms)))


def _star_single(F: TwistedTensor) -> TwistedTensor:
    n = F.degree
    thetas, rhos = [], []
    for a, b in _pairs(n):
        thetas.append(F.theta(n - 1 - b, n - 1 - a))
        rhos.append(F.rho(n - 1 - b, n - 1 - a))
    factors = tuple(f.star() for f in reversed(F.factors))
    return TwistedTensor(factors, thetas, rhos, np.conj(F.coefficient))


def star_involution_tensor(F):
    """Reversed, conjugated factors; pair data follows the reversal."""
    P = as_poly(F)
    return _same_kind(F, TensorPoly(tuple(_star_single(t) for t in P.terms)))


def _j_single(F: TwistedTensor) -> TwistedTensor:
    return TwistedTensor(
        tuple(f.j() for f in F.factors), tuple(-t for t in F.thetas), F.rhos, np.conj(F.coefficient)
    )


def j_involution_tensor(F):
    """Factors map to x -> conj f(-x) in place; every pair matrix changes sign."""
    P = as_poly(F)
    return _same_kind(F, TensorPoly(tuple(_j_single(t) for t in P.terms)))


def _u_single(F: TwistedTensor, theta: NoncommMatrix) -> TwistedTensor:
    if any(not isinstance(r, StandardPhase) for r in F.rhos):
        raise UnsupportedTwistFunction("the twist multiplier is only defined for pure phases")
    return TwistedTensor(F.factors, tuple(t + theta for t in F.thetas), F.rhos, F.coefficient)


def u_theta_multiplier(F, theta: NoncommMatrix):
    """Add ``theta`` to every pair matrix: the kernel gains prod_{l<r} exp(-i p_l theta p_r / 2)."""
    P = as_poly(F)
    return _same_kind(F, TensorPoly(tuple(_u_single(t, theta) for t in P.terms)))


def mixed_associativity_gap(f, g, h, theta_a: NoncommMatrix, theta_b: NoncommMatrix, momenta) -> np.ndarray:
    """|K((f.g).h) - K(f.(g.h))| with products taken at theta_a then theta_b."""
    f, g, h = (tensor(x) for x in (f, g, h))
    left = moyal_product(moyal_product(f, g, theta_a), h, theta_b)
    right = moyal_product(f, moyal_product(g, h, theta_b), theta_a)
    return np.abs(momentum_kernel(left, momenta) - momentum_kernel(right, momenta))


# ------------------------------------------------------------ position space


@dataclass(frozen=True)
class QuadSpec:
    """Tensor Gauss-Legendre rule over an eps-momentum box."""

    nodes: int = 24
    eps: float = 1e-12
    fail_above: float | None = None

    def __post_init__(self):
        if self.nodes < 4 or self.nodes % 2:
            raise ValueError("nodes must be an even integer >= 4")


def _momentum_box(f, eps: float) -> tf.SupportBox | None:
    """The eps-momentum box, or None when the transform cannot resolve it (a very small eps on a bump)."""
    try:
        return tf.eps_support(f, eps, "momentum")
    except QuadratureFailure:
        return None


def _box_volume(box: tf.SupportBox) -> float:
    return float(np.prod(box.hi - box.lo))


def _shifted_sum(ft_fn, other, sign: float, box, theta: NoncommMatrix, first, second, nodes: int):
    """sum_k w_k ft(k) e^{i k.first} other(second + sign/2 Theta eta k) for point batches."""
    k, w = box_rule(box.lo, box.hi, nodes)
    ftk = ft_fn(k) * w
    shift = 0.5 * sign * (mk.lower(k) @ theta.matrix.T)  # Theta eta k per node
    out = np.empty(len(first), dtype=complex)
    for i, (a, b) in enumerate(zip(first, second)):
        phase = np.exp(1j * mk.minkowski_product(k, a))
        out[i] = np.sum(ftk * phase * other.evaluate(b + shift))
    return out / tf.TWO_PI_SQ


def position_evaluate(F: TwistedTensor, points, quad: QuadSpec = QuadSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Position-space values of a degree <= 2 twisted tensor.

    ``points`` has shape (degree, 4) or (batch, degree, 4). Degree 2 uses the
    exact partial inversion (f (x)_T g)(x, y) = (2pi)^-2 \\int dq gt(q) e^{iq.y}
    f(x - T eta q / 2), integrated over the smaller of the two eps-momentum
    boxes. The error estimate compares ``quad.nodes`` with half as many nodes.
    """
    n = F.degree
    if n > 2:
        raise DegreeTooLarge("position-space evaluation is limited to degree 2")
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 2
    if single:
        pts = pts[None]
    if pts.shape[1:] != (n, 4):
        raise DegreeMismatch(f"expected points of shape (..., {n}, 4)")
    batch = pts.shape[0]
    if n == 0:
        val = np.full(batch, F.coefficient)
        err = np.zeros(batch)
    elif n == 1:
        val = F.coefficient * F.factors[0].evaluate(pts[:, 0])
        err = np.zeros(batch)
    else:
        if not isinstance(F.rhos[0], StandardPhase):
            raise UnsupportedTwistFunction("position evaluation needs a pure phase twist")
        f, g = F.factors
        theta = F.thetas[0]
        bf = _momentum_box(f, quad.eps)
        bg = _momentum_box(g, quad.eps)
        if bf is None and bg is None:
            raise QuadratureFailure("neither factor has a resolvable eps-momentum box")
        if bf is None or (bg is not None and _box_volume(bg) <= _box_volume(bf)):
            args = (g.fourier, f, -1.0, bg, theta, pts[:, 1], pts[:, 0])
        else:
            args = (f.fourier, g, +1.0, bf, theta, pts[:, 0], pts[:, 1])
        fine = _shifted_sum(*args, quad.nodes)
        coarse = _shifted_sum(*args, quad.nodes // 2)
        val = F.coefficient * fine
        err = np.abs(F.coefficient) * np.abs(fine - coarse)
    if not np.all(np.isfinite(val)):
        raise QuadratureFailure("non-finite position-space value")
    if quad.fail_above is not None and np.any(err > quad.fail_above):
        raise QuadratureFailure(f"error estimate {err.max():.3e} above {quad.fail_above:g}")
    if single:
        return val[0], err[0]
    return val, err


def star_diagonal(f, g, theta: NoncommMatrix, x, quad: QuadSpec = QuadSpec()):
    """(f (x)_theta g)(x, x)."""
    x = np.asarray(x, dtype=float)
    return position_evaluate(moyal_product(tensor(f), tensor(g), theta), np.stack([x, x]), quad)


def shift_box(theta: NoncommMatrix, box: tf.SupportBox, sign: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Interval hull of {sign * Theta eta q / 2 : q in box}."""
    m = 0.5 * sign * theta.matrix @ mk.METRIC
    c = m @ box.center
    r = np.abs(m) @ box.halfwidth
    return c - r, c + r


def twist_phase_sum(theta: NoncommMatrix, momenta) -> np.ndarray:
    """sum_{l<r} p_l theta p_r for momenta of shape (..., n, 4)."""
    p = np.asarray(momenta, dtype=float)
    n = p.shape[-2]
    total = np.zeros(p.shape[:-2])
    for l, r in _pairs(n):
        total = total + theta_bilinear(theta, p[..., l, :], p[..., r, :])
    return total


def rho_properties(rho, lams) -> dict:
    lams = np.asarray(lams, dtype=float)
    return {
        "at_zero": float(abs(rho(0.0) - 1.0)),
        "conjugation": float(np.max(np.abs(rho(-lams) - np.conj(rho(lams))))),
    }
