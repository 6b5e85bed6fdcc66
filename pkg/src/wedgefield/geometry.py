"""Antisymmetric noncommutativity matrices, their Lorentz orbits, and wedge regions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import minkowski as mk
from .errors import DegenerateOrbit, NoConvergence, NotOnOrbit
from .minkowski import LorentzTransform

# order of the six independent entries theta^{mu nu}, mu < nu
UPPER_INDEX = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

SECTION_TOL = 1e-8
ORBIT_TOL = 1e-6


@dataclass(frozen=True)
class NoncommMatrix:
    """Real antisymmetric 4x4 matrix theta^{mu nu}, stored by its upper triangle."""

    upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.array(self.upper, dtype=float).reshape(6)
        u.setflags(write=False)
        object.__setattr__(self, "upper", u)

    @classmethod
    def from_matrix(cls, m) -> "NoncommMatrix":
        """Take the antisymmetric part of ``m``."""
        m = np.asarray(m, dtype=float)
        return cls(np.array([0.5 * (m[i, j] - m[j, i]) for i, j in UPPER_INDEX]))

    @property
    def matrix(self) -> np.ndarray:
        m = np.zeros((4, 4))
        for val, (i, j) in zip(self.upper, UPPER_INDEX):
            m[i, j] = val
            m[j, i] = -val
        return m

    @property
    def lowered(self) -> np.ndarray:
        """theta_{mu nu}: both indices lowered with the metric."""
        return mk.METRIC @ self.matrix @ mk.METRIC

    def __add__(self, other: "NoncommMatrix") -> "NoncommMatrix":
        return NoncommMatrix(self.upper + other.upper)

    def __sub__(self, other: "NoncommMatrix") -> "NoncommMatrix":
        return NoncommMatrix(self.upper - other.upper)

    def __neg__(self) -> "NoncommMatrix":
        return NoncommMatrix(-self.upper)

    def __mul__(self, s: float) -> "NoncommMatrix":
        return NoncommMatrix(float(s) * self.upper)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, NoncommMatrix) and bool(np.array_equal(self.upper, other.upper))

    def __hash__(self) -> int:
        return hash(self.upper.tobytes())

    def is_zero(self) -> bool:
        return not np.any(self.upper)


ZERO_THETA = NoncommMatrix(np.zeros(6))


@dataclass(frozen=True)
class OrbitParams:
    kappa_e: float
    kappa_m: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa_e) and math.isfinite(self.kappa_m)):
            raise ValueError("orbit parameters must be finite")

    @property
    def degenerate(self) -> bool:
        return self.kappa_e * self.kappa_m == 0.0


def theta_bilinear(theta: NoncommMatrix, p, q):
    """p_mu theta^{mu nu} q_nu, broadcasting over leading axes of p and q.

    Summed over the upper triangle as theta^{mu nu}(p_mu q_nu - p_nu q_mu), so
    swapping p and q flips the sign bit-exactly and p theta p is exactly zero.
    """
    pl = mk.lower(np.asarray(p, dtype=float))
    ql = mk.lower(np.asarray(q, dtype=float))
    out = np.zeros(np.broadcast_shapes(pl.shape[:-1], ql.shape[:-1]))
    for val, (i, j) in zip(theta.upper, UPPER_INDEX):
        if val != 0.0:
            out = out + val * (pl[..., i] * ql[..., j] - pl[..., j] * ql[..., i])
    return float(out) if out.ndim == 0 else out


def reference_theta(params: OrbitParams) -> NoncommMatrix:
    return NoncommMatrix([params.kappa_e, 0.0, 0.0, 0.0, 0.0, params.kappa_m])


def orbit_invariants(theta: NoncommMatrix) -> tuple[float, float]:
    """Return the quadratic and pseudoscalar Lorentz invariants of theta.

    The first is tr((theta eta)^2), which equals 2(ke^2 - km^2) on the orbit of
    the reference matrix; the second is eps_{mu nu a b} theta^{mu nu} theta^{a b}
    with eps_{0123} = -1, equal to -8 ke km there.
    """
    t01, t02, t03, t12, t13, t23 = (float(v) for v in theta.upper)
    electric = math.fsum([t01 * t01, t02 * t02, t03 * t03])
    magnetic = math.fsum([t12 * t12, t13 * t13, t23 * t23])
    quad = 2.0 * (electric - magnetic)
    pseudo = -8.0 * math.fsum([t01 * t23, -t02 * t13, t03 * t12])
    return quad, pseudo


def expected_invariants(params: OrbitParams) -> tuple[float, float]:
    ke, km = params.kappa_e, params.kappa_m
    return 2.0 * (ke * ke - km * km), -8.0 * ke * km


def is_on_orbit(theta: NoncommMatrix, params: OrbitParams, tol: float = 1e-9) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    got = orbit_invariants(theta)
    want = expected_invariants(params)
    return abs(got[0] - want[0]) < tol and abs(got[1] - want[1]) < tol


def conjugate_theta(a: LorentzTransform, theta: NoncommMatrix) -> NoncommMatrix:
    """Lambda theta Lambda^T."""
    return NoncommMatrix.from_matrix(a.matrix @ theta.matrix @ a.matrix.T)


def _section_residual(lam: np.ndarray, theta: NoncommMatrix, theta1: np.ndarray) -> float:
    return float(np.max(np.abs(lam @ theta1 @ lam.T - theta.matrix)))


def _parametrised(params6: np.ndarray) -> np.ndarray:
    m = np.eye(4)
    for k, axis in enumerate((1, 2, 3)):
        m = m @ mk.boost(params6[k], axis).matrix
    for k, plane in enumerate(((1, 2), (1, 3), (2, 3))):
        m = m @ mk.rotation(params6[3 + k], plane).matrix
    return m


def _future_null(vec: np.ndarray) -> np.ndarray:
    v = np.real_if_close(vec, tol=1e6)
    v = np.real(v)
    if v[0] < 0:
        v = -v
    return v / abs(v[0])


def _eigen_seed(theta: NoncommMatrix, params: OrbitParams) -> np.ndarray:
    """Lorentz frame built from the invariant subspaces of theta*eta.

    The reference matrix times eta has eigenvectors e0+e1 and e0-e1 with real
    eigenvalues -ke and +ke, and acts on span(e2, e3) as a rotation generator.
    Matching those subspaces for theta gives the seed frame.
    """
    ke, km = params.kappa_e, params.kappa_m
    f = theta.matrix @ mk.METRIC
    vals, vecs = np.linalg.eig(f)
    u = _future_null(vecs[:, int(np.argmin(np.abs(vals + ke)))])
    v = _future_null(vecs[:, int(np.argmin(np.abs(vals - ke)))])
    uv = mk.minkowski_product(u, v)
    if not uv > 0:
        raise NoConvergence("null eigenvectors are degenerate")
    u = u * (2.0 / uv)
    best = None
    for c in np.eye(4)[1:]:
        b = c - (mk.minkowski_product(c, v) / 2.0) * u - (mk.minkowski_product(c, u) / 2.0) * v
        norm2 = -mk.minkowski_square(b)
        if best is None or norm2 > best[0]:
            best = (norm2, b)
    b = best[1] / math.sqrt(best[0])
    lam = np.column_stack([(u + v) / 2.0, (u - v) / 2.0, b, f @ b / km])
    return lam


def lambda_theta(theta: NoncommMatrix, params: OrbitParams) -> LorentzTransform:
    """A Lorentz transform taking the reference matrix to ``theta``.

    Unique only up to the stabilizer of the reference matrix; the result is
    certified by its residual, not by any normal form.
    """
    if not is_on_orbit(theta, params, ORBIT_TOL):
        raise NotOnOrbit("theta does not have the invariants of the requested orbit")
    if params.degenerate:
        raise DegenerateOrbit("kappaE * kappaM = 0: the wedge assignment is not unique")
    theta1 = reference_theta(params).matrix
    try:
        seed = _eigen_seed(theta, params)
    except (np.linalg.LinAlgError, ZeroDivisionError, ValueError):
        seed = np.eye(4)
    if not np.all(np.isfinite(seed)):
        seed = np.eye(4)
    # re-orthogonalise softly through the parametrised correction
    res = _section_residual(seed, theta, theta1)
    lam = seed
    if res > 1e-12:
        target = theta.matrix

        def fun(x):
            m = seed @ _parametrised(x)
            d = m @ theta1 @ m.T - target
            return np.array([d[i, j] for i, j in UPPER_INDEX])

        sol = least_squares(fun, np.zeros(6), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        cand = seed @ _parametrised(sol.x)
        if _section_residual(cand, theta, theta1) < res:
            lam, res = cand, _section_residual(cand, theta, theta1)
    if not res < SECTION_TOL:
        raise NoConvergence(f"section residual {res:.3e} above {SECTION_TOL:g}")
    try:
        return LorentzTransform(lam)
    except Exception as exc:  # pragma: no cover - seed drifted off the group
        raise NoConvergence(str(exc)) from exc


def section_residual(lam: LorentzTransform, theta: NoncommMatrix, params: OrbitParams) -> float:
    return _section_residual(lam.matrix, theta, reference_theta(params).matrix)


# ---------------------------------------------------------------- wedges


def _normalise(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.max(np.abs(v))


@dataclass(frozen=True)
class Wedge:
    """Region where x.ell1 < 0 and x.ell2 < 0 for two null vectors."""

    ell1: np.ndarray
    ell2: np.ndarray

    def __post_init__(self):
        l1, l2 = _normalise(self.ell1), _normalise(self.ell2)
        for ell in (l1, l2):
            if abs(mk.minkowski_square(ell)) > 1e-9:
                raise ValueError("wedge vectors must be null")
        if np.linalg.matrix_rank(np.vstack([l1, l2]), tol=1e-9) < 2:
            raise ValueError("wedge vectors must be linearly independent")
        l1.setflags(write=False)
        l2.setflags(write=False)
        object.__setattr__(self, "ell1", l1)
        object.__setattr__(self, "ell2", l2)

    def contains(self, x) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        inside = (mk.minkowski_product(x, self.ell1) < 0) & (mk.minkowski_product(x, self.ell2) < 0)
        return bool(inside) if inside.ndim == 0 else inside

    def closure_slack(self, x) -> np.ndarray:
        """-max(x.ell1, x.ell2): nonnegative exactly on the closed wedge."""
        x = np.asarray(x, dtype=float)
        return -np.maximum(mk.minkowski_product(x, self.ell1), mk.minkowski_product(x, self.ell2))


def standard_wedge() -> Wedge:
    return Wedge(np.array([1.0, 1.0, 0.0, 0.0]), np.array([-1.0, 1.0, 0.0, 0.0]))


def wedge_contains(w: Wedge, x) -> bool:
    return w.contains(x)


def transform_wedge(a: LorentzTransform, w: Wedge) -> Wedge:
    return Wedge(a.matrix @ w.ell1, a.matrix @ w.ell2)


def translate_contains(w: Wedge, shift, x) -> np.ndarray | bool:
    """Membership in the translated wedge w + shift."""
    return w.contains(np.asarray(x, dtype=float) - np.asarray(shift, dtype=float))


def opposite_wedge(w: Wedge) -> Wedge:
    return Wedge(-w.ell1, -w.ell2)


def wedge_equals(a: Wedge, b: Wedge, tol: float = 1e-9) -> bool:
    def close(u, v):
        return bool(np.max(np.abs(u - v)) <= tol)

    return (close(a.ell1, b.ell1) and close(a.ell2, b.ell2)) or (
        close(a.ell1, b.ell2) and close(a.ell2, b.ell1)
    )


def wedge_of_theta(theta: NoncommMatrix, params: OrbitParams) -> Wedge:
    lam = lambda_theta(theta, params)
    w = transform_wedge(lam, standard_wedge())
    return w if params.kappa_e > 0 else opposite_wedge(w)


# ---------------------------------------------------------------- JSON


def theta_to_json(theta: NoncommMatrix, params: OrbitParams | None = None) -> dict:
    out: dict = {}
    if params is not None:
        out["kappaE"] = params.kappa_e
        out["kappaM"] = params.kappa_m
    out["upper"] = [float(v) for v in theta.upper]
    return out


def theta_from_json(spec: dict) -> tuple[NoncommMatrix, OrbitParams | None]:
    """Parse ``{"kappaE","kappaM","upper"}`` or ``{"kappaE","kappaM","lorentz"}``.

    Without ``upper`` the reference matrix is used, conjugated by ``lorentz`` if given.
    """
    params = None
    if "kappaE" in spec or "kappaM" in spec:
        params = OrbitParams(float(spec.get("kappaE", 0.0)), float(spec.get("kappaM", 0.0)))
    if "upper" in spec:
        upper = [float(v) for v in spec["upper"]]
        if len(upper) != 6:
            raise ValueError("'upper' needs six entries")
        return NoncommMatrix(upper), params
    if params is None:
        raise ValueError("theta spec needs 'upper' or 'kappaE'/'kappaM'")
    theta = reference_theta(params)
    if "lorentz" in spec:
        theta = conjugate_theta(mk.transform_from_json(spec["lorentz"]), theta)
    return theta, params


def orbit_params_of(theta: NoncommMatrix) -> OrbitParams:
    """Orbit parameters with kappaE >= 0 reproducing both invariants of theta.

    (ke, km) and (-ke, -km) label the same orbit and the same wedge, so the
    sign choice is immaterial for wedge constructions.
    """
    quad, pseudo = orbit_invariants(theta)
    a = 0.5 * quad
    b = -pseudo / 8.0
    ke2 = 0.5 * (a + math.hypot(a, 2.0 * b))
    ke = math.sqrt(max(ke2, 0.0))
    if ke == 0.0:
        return OrbitParams(0.0, math.sqrt(max(-a, 0.0)))
    return OrbitParams(ke, b / ke)
