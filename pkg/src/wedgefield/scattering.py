"""Two-particle S-matrix elements under the theta twist."""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import minkowski as mk
from .errors import OffShell, WedgeOrderViolation
from .geometry import (
    NoncommMatrix,
    OrbitParams,
    conjugate_theta,
    orbit_params_of,
    theta_bilinear,
    wedge_of_theta,
)
from .minkowski import LorentzTransform

SHELL_TOL = 1e-9
ORDER_MARGIN = 1e-12


def unit_amplitude(s: float) -> complex:
    return 1.0 + 0.0j


def pole_phase(c: float, s0: float) -> Callable[[float], complex]:
    """Toy elastic amplitude exp(i c / (s - s0))."""

    def amp(s: float) -> complex:
        return cmath.exp(1j * c / (s - s0))

    return amp


def parse_amplitude(spec: str) -> Callable[[float], complex]:
    """``unit`` or ``phase:c,s0``."""
    spec = spec.strip()
    if spec == "unit":
        return unit_amplitude
    if spec.startswith("phase:"):
        try:
            c, s0 = (float(v) for v in spec[len("phase:") :].split(","))
        except ValueError as exc:
            raise ValueError(f"bad amplitude spec {spec!r}; expected phase:c,s0") from exc
        return pole_phase(c, s0)
    raise ValueError(f"unknown amplitude spec {spec!r}")


@dataclass(frozen=True)
class SMatrixInput:
    p: np.ndarray
    q: np.ndarray
    p_prime: np.ndarray
    q_prime: np.ndarray
    theta: NoncommMatrix
    mass: float
    undeformed: Callable[[float], complex] = field(default=unit_amplitude)

    def momenta(self) -> tuple:
        return tuple(np.asarray(v, dtype=float) for v in (self.p, self.q, self.p_prime, self.q_prime))

    def transformed(self, a: LorentzTransform, theta: NoncommMatrix | None = None) -> "SMatrixInput":
        p, q, pp, qp = (mk.apply_to_vector(a, v) for v in self.momenta())
        return SMatrixInput(p, q, pp, qp, self.theta if theta is None else theta, self.mass, self.undeformed)


def _check_on_shell(inp: SMatrixInput) -> None:
    m2 = inp.mass * inp.mass
    for name, v in zip(("p", "q", "p'", "q'"), inp.momenta()):
        if v[0] <= 0 or abs(mk.minkowski_square(v) - m2) > SHELL_TOL * max(1.0, m2):
            raise OffShell(f"{name} is not on the positive mass shell m = {inp.mass}")


def wedge_ordering_check(p, q, theta: NoncommMatrix, params: OrbitParams | None = None) -> bool:
    """q - p inside the open wedge assigned to theta.

    Points within rounding of the boundary count as outside, since the wedge
    vectors come from a numerically solved section.
    """
    params = orbit_params_of(theta) if params is None else params
    w = wedge_of_theta(theta, params)
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    return bool(w.closure_slack(d) > ORDER_MARGIN * max(1.0, float(np.max(np.abs(d)))))


def phase_shift(inp: SMatrixInput) -> float:
    """-(p theta q + p' theta q') / 2."""
    p, q, pp, qp = inp.momenta()
    return -0.5 * (theta_bilinear(inp.theta, p, q) + theta_bilinear(inp.theta, pp, qp))


def mandelstam_s(inp: SMatrixInput) -> float:
    p, q, _, _ = inp.momenta()
    return float(mk.minkowski_square(p + q))


def deformed_s_matrix_element(inp: SMatrixInput, check_order: bool = True) -> complex:
    """exp(-i p theta q / 2) exp(-i p' theta q' / 2) S0(s)."""
    _check_on_shell(inp)
    if check_order and not inp.theta.is_zero():
        p, q, pp, qp = inp.momenta()
        params = orbit_params_of(inp.theta)
        if not (wedge_ordering_check(p, q, inp.theta, params) and wedge_ordering_check(pp, qp, inp.theta, params)):
            raise WedgeOrderViolation("q - p and q' - p' must lie in the wedge of theta")
    return cmath.exp(1j * phase_shift(inp)) * complex(inp.undeformed(mandelstam_s(inp)))


def covariance_break_demo(inp: SMatrixInput, a: LorentzTransform) -> tuple[complex, complex]:
    """(momenta transformed with theta fixed, momenta and theta both transformed).

    The first element is evaluated without the ordering precondition, since
    the transformed differences need not stay in the original wedge.
    """
    fixed = deformed_s_matrix_element(inp.transformed(a), check_order=False)
    moved = deformed_s_matrix_element(inp.transformed(a, conjugate_theta(a, inp.theta)))
    return fixed, moved


def ordered_configuration(mass: float, rapidity: float, spread: float = 0.0) -> tuple:
    """On-shell p, q with q - p along +x1 (inside the standard wedge).

    p moves along -x1 and q along +x1 with the given rapidity; ``spread``
    adds transverse momentum to both.
    """
    mt = np.hypot(mass, spread)
    p = np.array([mt * np.cosh(rapidity), -mt * np.sinh(rapidity), spread, 0.0])
    q = np.array([mt * np.cosh(rapidity), mt * np.sinh(rapidity), spread, 0.0])
    return p, q
