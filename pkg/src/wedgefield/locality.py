"""Commutators of twisted free fields between wedge-separated test functions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import minkowski as mk
from . import testfn as tf
from .errors import OffShell, SupportViolation
from .freefield import FockSpace, MassShellMeasure, ShellRule, vacuum_levels
from .geometry import (
    NoncommMatrix,
    OrbitParams,
    conjugate_theta,
    opposite_wedge,
    reference_theta,
    wedge_of_theta,
)
from .moyal import (
    QuadSpec,
    moyal_product,
    plain_join,
    poincare_act,
    position_evaluate,
    scalar,
    shift_box,
    star_involution_tensor,
    tensor,
)

MAGNITUDE_FACTOR = 10.0
CONTROL_FACTOR = 100.0
# relative floor for error estimates: no quadrature resolves below rounding
ROUNDING_FLOOR = 1e-13


def spectator_matrix_element(g, f1, f2, theta_a: NoncommMatrix, theta_b: NoncommMatrix, h, mu: MassShellMeasure):
    """<Psi(g), [phi^A(f1), phi^B(f2)] Psi(h)> with its quadrature estimate and scale.

    Returns (value, estimate, scale): the estimate is the change of the
    commutator itself under node halving, and scale is the larger modulus of
    the two ordered terms.
    """
    gs = star_involution_tensor(g)
    first = plain_join(gs, moyal_product(tensor(f1), moyal_product(tensor(f2), h, theta_b), theta_a))
    second = plain_join(gs, moyal_product(tensor(f2), moyal_product(tensor(f1), h, theta_a), theta_b))
    a, a_coarse = vacuum_levels(first, mu)
    b, b_coarse = vacuum_levels(second, mu)
    est = 0.0 if a_coarse is None else abs((a - b) - (a_coarse - b_coarse))
    return a - b, float(est), max(abs(a), abs(b))


class _PlaneWave:
    """Point-localised field smearing: transform exp(-i q.x)."""

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)

    def fourier(self, q):
        return np.exp(-1j * mk.minkowski_product(q, self.x))


def _check_shell(p, mass):
    p = mk.as_vector(p)
    sq = mk.minkowski_square(p)
    if not p[0] > 0 or not sq > 0:
        raise OffShell("momentum must lie on the positive mass shell")
    if mass is not None and abs(sq - mass * mass) > 1e-9 * max(1.0, mass * mass):
        raise OffShell(f"p^2 = {sq:.12g} differs from m^2 = {mass * mass:.12g}")
    return sq


def two_particle_commutator_kernel(theta_a, theta_b, x, y, p1, p2, mass: float | None = None) -> complex:
    """<p1, p2 | [phi^A(x), phi^B(y)] Omega> from the twisted creation operators.

    Uses the same Fock-space field operators as the oracle, restricted to the
    two modes p1 and p2 with unit weights and point smearing.
    """
    s1 = _check_shell(p1, mass)
    s2 = _check_shell(p2, mass)
    if mass is None and abs(s1 - s2) > 1e-9 * max(1.0, abs(s1)):
        raise OffShell("p1 and p2 are not on the same mass shell")
    rule = ShellRule(np.array([p1, p2], dtype=float), np.ones(2))
    space = FockSpace(rule.momenta, 2)
    vac = np.zeros(space.dim, dtype=complex)
    vac[0] = 1.0
    fx = space.field(_PlaneWave(x), theta_a, rule)
    fy = space.field(_PlaneWave(y), theta_b, rule)
    state = fx @ (fy @ vac) - fy @ (fx @ vac)
    return complex(state[space.index[(0, 1)]])


def closed_form_commutator(theta, x, y, p1, p2) -> complex:
    """-2i (e^{i(p1.x + p2.y)} - e^{i(p2.x + p1.y)}) sin(p1 theta p2 / 2)."""
    from .geometry import theta_bilinear

    e1 = np.exp(1j * (mk.minkowski_product(p1, x) + mk.minkowski_product(p2, y)))
    e2 = np.exp(1j * (mk.minkowski_product(p2, x) + mk.minkowski_product(p1, y)))
    return complex(-2j * (e1 - e2) * math.sin(0.5 * theta_bilinear(theta, p1, p2)))


# ------------------------------------------------------------ experiments


@dataclass
class LocalityReport:
    magnitude: float
    quadrature_estimate: float
    control_magnitude: float
    verdict: str
    config: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "magnitude": self.magnitude,
            "quadratureEstimate": self.quadrature_estimate,
            "controlMagnitude": self.control_magnitude,
            "verdict": self.verdict,
            "thresholds": {"magnitude": MAGNITUDE_FACTOR, "control": CONTROL_FACTOR},
            "config": self.config,
            "rows": self.rows,
        }


def verdict_for(magnitude: float, estimate: float, control: float | None) -> str:
    if magnitude > MAGNITUDE_FACTOR * estimate:
        return "fail"
    if control is not None and control < CONTROL_FACTOR * estimate:
        return "inconclusive"
    return "pass"


def box_in_wedge(box: tf.SupportBox, wedge, shift) -> bool:
    pts = np.vstack([box.corners(), box.face_centers()]) - np.asarray(shift, dtype=float)
    return bool(np.all(wedge.contains(pts)))


@dataclass
class LocalityConfig:
    theta: NoncommMatrix
    params: OrbitParams
    f1: object
    f2: object
    spectators: list  # (g, h) tensor pairs
    measure: MassShellMeasure
    shift: np.ndarray = field(default_factory=lambda: np.zeros(4))
    label: str = "canonical"

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "theta": self.theta.upper.tolist(),
            "kappaE": self.params.kappa_e,
            "kappaM": self.params.kappa_m,
            "shift": np.asarray(self.shift).tolist(),
            "f1": self.f1.to_json(),
            "f2": self.f2.to_json(),
            "spectatorDegrees": [[_deg(g), _deg(h)] for g, h in self.spectators],
            "measure": self.measure.to_json(),
        }


def _deg(t) -> int:
    return getattr(t, "degree", None) if hasattr(t, "degree") else t.max_degree


def default_spectators() -> list:
    """Vacuum, and one Gaussian on each side with negative-energy wavevectors.

    The wavevectors sit on the negative shell so that the conjugated left leg
    and the right leg both overlap the positive shell. They point in opposite
    directions, so the momentum boxes of g^* and h do not meet: the pairing
    that contracts g with h drops out and the spectators couple to the field
    only through the twist.
    """
    kg = np.array([2.0, 0.2, 0.0])
    kh = np.array([-2.0, 0.2, 0.0])
    g = tf.gaussian(
        center=(0.0, 0.5, 0.0, 0.0),
        widths=(4.0, 4.0, 4.0, 4.0),
        wavevector=-np.concatenate([[math.sqrt(1.0 + kg @ kg)], kg]),
    )
    h = tf.gaussian(
        center=(0.0, -0.5, 0.3, 0.0),
        widths=(4.0, 4.0, 4.0, 4.0),
        wavevector=-np.concatenate([[math.sqrt(1.0 + kh @ kh)], kh]),
    )
    return [(scalar(1.0), scalar(1.0)), (tensor(g), tensor(h))]


def canonical_config(measure: MassShellMeasure | None = None) -> LocalityConfig:
    params = OrbitParams(0.5, 0.3)
    return LocalityConfig(
        theta=reference_theta(params),
        params=params,
        f1=tf.bump(center=(0.0, 2.0, 0.0, 0.0), halfwidth=0.5),
        f2=tf.bump(center=(0.0, -2.0, 0.0, 0.0), halfwidth=0.5),
        spectators=default_spectators(),
        measure=measure or MassShellMeasure(1.0, cutoff=10.0, nodes=80, min_nodes=48),
    )


def wedge_locality_experiment(cfg: LocalityConfig, control: bool = True) -> LocalityReport:
    """Commutator of phi^theta(f1) and phi^{-theta}(f2), with a same-theta control."""
    wedge = wedge_of_theta(cfg.theta, cfg.params)
    b1 = cfg.f1.eps_support(tf.DEFAULT_EPS, "position")
    b2 = cfg.f2.eps_support(tf.DEFAULT_EPS, "position")
    if not box_in_wedge(b1, wedge, cfg.shift):
        raise SupportViolation("f1 is not supported inside W(theta) + a")
    if not box_in_wedge(b2, opposite_wedge(wedge), cfg.shift):
        raise SupportViolation("f2 is not supported inside -W(theta) + a")
    return _locality_rows(cfg, cfg.theta, -cfg.theta, cfg.theta if control else None)


def undeformed_locality_experiment(cfg: LocalityConfig) -> LocalityReport:
    """theta = 0 on spacelike separated supports: no control case exists."""
    zero = NoncommMatrix(np.zeros(6))
    return _locality_rows(cfg, zero, zero, None)


def _locality_rows(cfg: LocalityConfig, theta_a, theta_b, theta_control) -> LocalityReport:
    rows = []
    magnitude = 0.0
    control = 0.0 if theta_control is not None else None
    estimate = 0.0
    for idx, (g, h) in enumerate(cfg.spectators):
        val, est, scale = spectator_matrix_element(g, cfg.f1, cfg.f2, theta_a, theta_b, h, cfg.measure)
        est = max(est, ROUNDING_FLOOR * scale)
        row = {"spectator": idx, "case": "wedge", "value": [val.real, val.imag], "estimate": est}
        rows.append(row)
        magnitude = max(magnitude, abs(val))
        estimate = max(estimate, est)
        if theta_control is not None:
            cval, cest, cscale = spectator_matrix_element(
                g, cfg.f1, cfg.f2, theta_control, theta_control, h, cfg.measure
            )
            cest = max(cest, ROUNDING_FLOOR * cscale)
            rows.append({"spectator": idx, "case": "control", "value": [cval.real, cval.imag], "estimate": cest})
            control = max(control, abs(cval))
            estimate = max(estimate, cest)
    return LocalityReport(
        magnitude=float(magnitude),
        quadrature_estimate=float(estimate),
        control_magnitude=float(control) if control is not None else float("nan"),
        verdict=verdict_for(magnitude, estimate, control),
        config=cfg.to_json(),
        rows=rows,
    )


def replica_config(base: LocalityConfig, rng: np.random.Generator, scale: float = 0.5, tries: int = 200) -> LocalityConfig:
    """Conjugate theta by a random Lorentz transform and move the experiment along.

    Bumps are not closed under boosts, so fresh axis-aligned bumps of the same
    half-widths are centred at the transformed centres; spectator Gaussians are
    transformed exactly. Transforms whose bump boxes leave the wedges are redrawn.
    """
    for _ in range(tries):
        lam = mk.random_lorentz(rng, max_factors=3, scale=scale)
        shift = rng.uniform(-0.5, 0.5, 4)
        theta = conjugate_theta(lam, base.theta)
        f1 = tf.bump(mk.apply_to_vector(lam, base.f1.center) + shift, base.f1.halfwidth)
        f2 = tf.bump(mk.apply_to_vector(lam, base.f2.center) + shift, base.f2.halfwidth)
        wedge = wedge_of_theta(theta, base.params)
        if not (
            box_in_wedge(f1.eps_support(tf.DEFAULT_EPS, "position"), wedge, shift)
            and box_in_wedge(f2.eps_support(tf.DEFAULT_EPS, "position"), opposite_wedge(wedge), shift)
        ):
            continue
        spectators = [(poincare_act(g, shift, lam), poincare_act(h, shift, lam)) for g, h in base.spectators]
        return LocalityConfig(
            theta=theta,
            params=base.params,
            f1=f1,
            f2=f2,
            spectators=spectators,
            measure=base.measure,
            shift=shift,
            label="replica",
        )
    raise SupportViolation("could not place bumps inside the transformed wedges")


# ------------------------------------------------------------ supports of products


def predicted_position_box(f, g, theta: NoncommMatrix, eps: float = tf.DEFAULT_EPS) -> tf.SupportBox:
    """supp f shifted by Theta eta q / 2 over the eps-momentum box of g."""
    sf = f.eps_support(eps, "position")
    lo, hi = shift_box(theta, g.eps_support(eps, "momentum"), 1.0)
    return tf.SupportBox(sf.lo + lo, sf.hi + hi, False, eps)


def default_support_grid(box: tf.SupportBox, reach: float = 1.5, per_axis: int = 13) -> np.ndarray:
    pts = [box.center]
    for axis in range(4):
        for t in np.linspace(-(box.halfwidth[axis] + reach), box.halfwidth[axis] + reach, per_axis):
            p = box.center.copy()
            p[axis] += t
            pts.append(p)
    return np.array(pts)


def support_check_experiment(
    f, g, theta: NoncommMatrix, grid=None, eps: float = tf.DEFAULT_EPS, margin: float = 0.05,
    quad: QuadSpec = QuadSpec(nodes=24, eps=1e-14),
) -> dict:
    """Largest |(f (x)_theta g)(x, y0)| outside the predicted region, relative to the peak."""
    box = predicted_position_box(f, g, theta, eps)
    grown = box.inflate(margin)
    pts = default_support_grid(box) if grid is None else np.asarray(grid, dtype=float)
    y0 = g.eps_support(eps, "position").center
    F = moyal_product(tensor(f), tensor(g), theta)
    pairs = np.stack([pts, np.broadcast_to(y0, pts.shape)], axis=1)
    vals, errs = position_evaluate(F, pairs, quad)
    outside = ~grown.contains(pts)
    peak = float(np.max(np.abs(vals)))
    worst = float(np.max(np.abs(vals[outside]))) if np.any(outside) else 0.0
    ratio = worst / peak if peak > 0 else float("inf")
    return {
        "predictedBox": box.to_json(),
        "points": int(len(pts)),
        "outside": int(np.sum(outside)),
        "peak": peak,
        "maxOutside": worst,
        "ratio": ratio,
        "maxEstimate": float(np.max(errs)),
        "verdict": "pass" if ratio < 1e-5 else "fail",
    }
