"""Aggregate numerical checks: orbit geometry, kernel identities, limits and oracles.

Every function takes an explicit seed or generator and returns a JSON-ready
dict, so that the CLI can emit it verbatim.
"""
from __future__ import annotations

import math

import numpy as np

from . import minkowski as mk
from . import testfn as tf
from .freefield import MassShellMeasure, fock_oracle, inner_product_theta, lattice_rule, vacuum_functional
from .geometry import (
    NoncommMatrix,
    OrbitParams,
    conjugate_theta,
    expected_invariants,
    lambda_theta,
    opposite_wedge,
    orbit_invariants,
    reference_theta,
    section_residual,
    standard_wedge,
    transform_wedge,
    wedge_equals,
    wedge_of_theta,
)
from .moyal import (
    DampedPhase,
    moyal_product,
    momentum_kernel,
    nested,
    poincare_act,
    rho_product,
    star_involution_tensor,
    j_involution_tensor,
    tensor,
    u_theta_multiplier,
    uniform,
)

IDENTITY_TOL = 1e-12


# ------------------------------------------------------------ random inputs


def random_theta(rng: np.random.Generator, lo: float = 0.2, hi: float = 2.0, scale: float = 1.0):
    """A random orbit point Lambda theta_1 Lambda^T with |ke|, |km| in [lo, hi]."""
    signs = rng.choice([-1.0, 1.0], 2)
    params = OrbitParams(*(signs * rng.uniform(lo, hi, 2)))
    lam = mk.random_lorentz(rng, max_factors=3, scale=scale)
    return conjugate_theta(lam, reference_theta(params)), params


def random_gaussian(rng: np.random.Generator) -> tf.GaussianPacket:
    return tf.gaussian(
        center=rng.uniform(-1.0, 1.0, 4),
        widths=rng.uniform(0.6, 1.5, 4),
        wavevector=rng.uniform(-1.0, 1.0, 4),
        amplitude=complex(*rng.uniform(-1.0, 1.0, 2)),
    )


def random_bump(rng: np.random.Generator) -> tf.BumpPacket:
    return tf.bump(
        center=rng.uniform(-1.0, 1.0, 4),
        halfwidth=rng.uniform(0.5, 1.5, 4),
        wavevector=rng.uniform(-1.0, 1.0, 4),
        amplitude=complex(*rng.uniform(-1.0, 1.0, 2)),
    )


def random_function(rng: np.random.Generator):
    return random_gaussian(rng) if rng.random() < 0.5 else random_bump(rng)


def random_momenta(rng: np.random.Generator, count: int, degree: int, scale: float = 2.0) -> np.ndarray:
    return rng.uniform(-scale, scale, (count, degree, 4))


# ------------------------------------------------------------ orbit and wedges


def orbit_report(params: OrbitParams, samples: int = 50, seed: int = 0, check: bool = False) -> dict:
    """Invariants of the reference matrix, and with ``check`` the section and wedge facts."""
    theta = reference_theta(params)
    got = orbit_invariants(theta)
    want = expected_invariants(params)
    out = {
        "kappaE": params.kappa_e,
        "kappaM": params.kappa_m,
        "invariants": list(got),
        "expected": list(want),
        "invariantResidual": max(abs(got[0] - want[0]), abs(got[1] - want[1])),
    }
    if not check:
        return out
    rng = np.random.default_rng(seed)
    inv_res = 0.0
    sec_res = 0.0
    w3_ok = True
    for _ in range(samples):
        lam = mk.random_lorentz(rng, max_factors=3, scale=2.0)
        th = conjugate_theta(lam, theta)
        a, b = orbit_invariants(th)
        inv_res = max(inv_res, abs(a - want[0]), abs(b - want[1]))
        if not params.degenerate:
            sec = lambda_theta(th, params)
            sec_res = max(sec_res, section_residual(sec, th, params))
            w3_ok &= wedge_equals(wedge_of_theta(-th, params), opposite_wedge(wedge_of_theta(th, params)))
    out["conjugatedInvariantResidual"] = inv_res
    if params.degenerate:
        out["sectionResidual"] = None
    else:
        out["sectionResidual"] = sec_res
        out["w3OppositeTheta"] = bool(w3_ok)
    out["w1DistinctNotNested"] = w1_check(rng, samples)
    out["w2CausalComplement"] = w2_check(rng, samples)
    out["w4MinSlack"] = w4_min_slack(rng, max(samples, 1000), abs(params.kappa_e) or 1.0, params.kappa_m)
    return out


def _points_in(w, rng: np.random.Generator, count: int) -> np.ndarray:
    """Rejection-sampled points of a wedge within the unit-ish box."""
    out = []
    while len(out) < count:
        x = rng.uniform(-3.0, 3.0, (4 * count, 4))
        out.extend(x[w.contains(x)])
    return np.array(out[:count])


def w1_check(rng: np.random.Generator, pairs: int = 20) -> bool:
    """Two distinct wedges: each has a sampled point outside the other."""
    ok = True
    for _ in range(pairs):
        a = transform_wedge(mk.random_lorentz(rng, scale=1.0), standard_wedge())
        b = transform_wedge(mk.random_lorentz(rng, scale=1.0), standard_wedge())
        if wedge_equals(a, b):
            continue
        xa = _points_in(a, rng, 400)
        xb = _points_in(b, rng, 400)
        ok &= bool(np.any(~b.contains(xa))) and bool(np.any(~a.contains(xb)))
    return bool(ok)


def w2_check(rng: np.random.Generator, pairs: int = 20) -> bool:
    """Points of W and of -W are spacelike separated."""
    ok = True
    for _ in range(pairs):
        w = transform_wedge(mk.random_lorentz(rng, scale=1.0), standard_wedge())
        x = _points_in(w, rng, 200)
        y = _points_in(opposite_wedge(w), rng, 200)
        d = x[:, None, :] - y[None, :, :]
        ok &= bool(np.all(mk.minkowski_square(d) < 0))
    return bool(ok)


def w4_min_slack(rng: np.random.Generator, count: int, kappa_e: float, kappa_m: float) -> float:
    """min over forward p of the closure slack of theta_1 p in -W_1 (kappa_e > 0)."""
    theta = reference_theta(OrbitParams(kappa_e, kappa_m))
    spatial = rng.uniform(-10.0, 10.0, (count, 3))
    p0 = np.sqrt(np.sum(spatial * spatial, axis=1)) + rng.uniform(0.0, 10.0, count)
    p = np.concatenate([p0[:, None], spatial], axis=1)
    image = mk.lower(p) @ theta.matrix.T  # theta^{mu nu} p_nu
    return float(np.min(opposite_wedge(standard_wedge()).closure_slack(image)))


# ------------------------------------------------------------ kernel identity suite


def _max_abs(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def identity_suite(samples: int = 1000, pairs: int = 20, seed: int = 0) -> dict:
    """Largest residual of each structural kernel identity over random inputs."""
    rng = np.random.default_rng(seed)
    res = {
        "associativity": 0.0,
        "exchange": 0.0,
        "covariance": 0.0,
        "starInvolution": 0.0,
        "jInvolution": 0.0,
        "involutionsTwice": 0.0,
        "uThetaLaws": 0.0,
        "rhoConsistency": 0.0,
    }
    per_pair = max(1, samples // pairs)
    for _ in range(pairs):
        f, g, h = random_function(rng), random_function(rng), random_function(rng)
        theta, _ = random_theta(rng, scale=0.5)
        ps = random_momenta(rng, per_pair, 3)
        p2 = ps[:, :2]
        F, G, H = tensor(f), tensor(g), tensor(h)

        left = moyal_product(moyal_product(F, G, theta), H, theta)
        right = moyal_product(F, moyal_product(G, H, theta), theta)
        res["associativity"] = max(res["associativity"], _max_abs(momentum_kernel(left, ps), momentum_kernel(right, ps)))

        a = moyal_product(F, moyal_product(G, H, -theta), theta)
        b = moyal_product(G, moyal_product(F, H, theta), -theta)
        swapped = ps[:, [1, 0, 2]]
        res["exchange"] = max(res["exchange"], _max_abs(momentum_kernel(a, swapped), momentum_kernel(b, ps)))

        fg = moyal_product(F, G, theta)
        res["covariance"] = max(res["covariance"], _covariance_residual(rng, fg, p2))

        star = star_involution_tensor(fg)
        expect = moyal_product(tensor(g.star()), tensor(f.star()), theta)
        r1 = _max_abs(momentum_kernel(star, p2), momentum_kernel(expect, p2))
        r2 = _max_abs(momentum_kernel(star, p2), np.conj(momentum_kernel(fg, -p2[:, ::-1])))
        res["starInvolution"] = max(res["starInvolution"], r1, r2)

        jj = j_involution_tensor(fg)
        expect = moyal_product(tensor(f.j()), tensor(g.j()), -theta)
        r1 = _max_abs(momentum_kernel(jj, p2), momentum_kernel(expect, p2))
        r2 = _max_abs(momentum_kernel(jj, p2), np.conj(momentum_kernel(fg, p2)))
        res["jInvolution"] = max(res["jInvolution"], r1, r2)

        k0 = momentum_kernel(left, ps)
        r1 = _max_abs(momentum_kernel(star_involution_tensor(star_involution_tensor(left)), ps), k0)
        r2 = _max_abs(momentum_kernel(j_involution_tensor(j_involution_tensor(left)), ps), k0)
        res["involutionsTwice"] = max(res["involutionsTwice"], r1, r2)

        plain = tensor(f, g, h)
        kp = momentum_kernel(plain, ps)
        r1 = _max_abs(momentum_kernel(u_theta_multiplier(plain, NoncommMatrix(np.zeros(6))), ps), kp)
        r2 = _max_abs(momentum_kernel(u_theta_multiplier(u_theta_multiplier(plain, theta), -theta), ps), kp)
        r3 = _max_abs(momentum_kernel(u_theta_multiplier(tensor(f, g), theta), p2), momentum_kernel(fg, p2))
        res["uThetaLaws"] = max(res["uThetaLaws"], r1, r2, r3)

        r1 = _max_abs(momentum_kernel(rho_product(F, G, theta), p2), momentum_kernel(fg, p2))
        damped = DampedPhase(float(rng.uniform(0.1, 2.0)))
        lam = rng.uniform(-5.0, 5.0, per_pair)
        r2 = abs(damped(0.0) - 1.0)
        r3 = _max_abs(damped(-lam), np.conj(damped(lam)))
        res["rhoConsistency"] = max(res["rhoConsistency"], r1, r2, r3)
    return {
        "samples": per_pair * pairs,
        "pairs": pairs,
        "seed": seed,
        "maxResidual": res,
        "tolerance": IDENTITY_TOL,
        "pass": bool(all(v < IDENTITY_TOL for v in res.values())),
    }


def _covariance_residual(rng: np.random.Generator, F, momenta) -> float:
    """K(F_(y,L))(p) against exp(-i y.sum p) K(F)(L^-1 p)."""
    y = rng.uniform(-1.0, 1.0, 4)
    if all(isinstance(f, tf.GaussianPacket) for f in F.factors):
        lam = mk.random_lorentz(rng, max_factors=3, scale=0.5)
    else:
        # bumps only follow signed axis permutations
        lam = mk.rotation(math.pi / 2, (1, 2))
    moved = poincare_act(F, y, lam)
    back = mk.apply_to_vector(mk.inverse_transform(lam), momenta)
    phase = np.exp(-1j * mk.minkowski_product(momenta.sum(axis=1), y))
    return _max_abs(momentum_kernel(moved, momenta), phase * momentum_kernel(F, back))


# ------------------------------------------------------------ continuity bound


def continuity_check(samples: int = 1000, seed: int = 0) -> dict:
    """|K_theta - K_theta'| against |p||q| ||theta - theta'|| |f~||g~| / 2 for degree-2 products.

    Vector norms are Euclidean on components and the matrix norm is the
    spectral norm, so that |p theta q| <= |p| ||theta|| |q|.
    """
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    per = max(1, samples // 20)
    for _ in range(20):
        f, g = random_function(rng), random_function(rng)
        t1, _ = random_theta(rng, scale=0.5)
        t2, _ = random_theta(rng, scale=0.5)
        ps = random_momenta(rng, per, 2)
        ka = momentum_kernel(moyal_product(tensor(f), tensor(g), t1), ps)
        kb = momentum_kernel(moyal_product(tensor(f), tensor(g), t2), ps)
        pn = np.linalg.norm(ps[:, 0], axis=1)
        qn = np.linalg.norm(ps[:, 1], axis=1)
        tn = np.linalg.norm((t1 - t2).matrix, 2)
        amp = np.abs(f.fourier(ps[:, 0]) * g.fourier(ps[:, 1]))
        bound = 0.5 * pn * qn * tn * amp
        gap = np.abs(ka - kb)
        # allow rounding in the two phase evaluations
        violations += int(np.sum(gap > bound + 4e-16 * amp))
        worst = max(worst, float(np.max(gap / np.maximum(bound, 1e-300))))
    return {"samples": per * 20, "seed": seed, "violations": violations, "maxRatio": worst, "pass": violations == 0}


# ------------------------------------------------------------ commutative limit


def _negative_shell(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return -np.concatenate([[math.sqrt(1.0 + k @ k)], k])


def reference_limit_factors() -> list:
    """a^*, b^*, a, b for two Gaussians with negative-energy wavevectors.

    The contractions (1,3) and (2,4) carry the weight, and that pairing is the
    one whose twist phase survives momentum conservation.
    """
    a = tf.gaussian(center=(0.0, 0.2, 0.0, 0.0), widths=(2.0,) * 4, wavevector=_negative_shell((0.8, 0.3, 0.0)))
    b = tf.gaussian(center=(0.0, -0.2, 0.1, 0.0), widths=(2.0,) * 4, wavevector=_negative_shell((-0.2, 0.7, 0.3)))
    return [a.star(), b.star(), a, b]


def limit_sweep(
    scales=(1.0, 0.5, 0.25, 0.125),
    params: OrbitParams = OrbitParams(0.5, 0.3),
    factors=None,
    measure: MassShellMeasure | None = None,
) -> dict:
    """|omega_4^{s theta_1}(F) - omega_4^0(F)| for each scale s."""
    factors = factors or reference_limit_factors()
    mu = measure or MassShellMeasure(1.0, cutoff=8.0, nodes=32, min_nodes=48)
    F = tensor(*factors)
    base, base_err = vacuum_functional(F, mu)
    theta = reference_theta(params)
    rows = []
    prev = None
    for s in scales:
        val, err = vacuum_functional(u_theta_multiplier(F, theta * float(s)), mu)
        delta = abs(val - base)
        rows.append(
            {
                "scale": float(s),
                "value": [val.real, val.imag],
                "delta": delta,
                "estimate": err + base_err,
                "ratio": None if prev is None else (delta / prev if prev > 0 else math.inf),
            }
        )
        prev = delta
    deltas = [r["delta"] for r in rows]
    ratios = [r["ratio"] for r in rows[1:]]
    monotone = all(b <= a for a, b in zip(deltas, deltas[1:]))
    in_band = all(0.3 <= r <= 0.7 for r in ratios)
    return {
        "kappaE": params.kappa_e,
        "kappaM": params.kappa_m,
        "undeformed": [base.real, base.imag],
        "measure": mu.to_json(),
        "rows": rows,
        "monotone": monotone,
        "ratiosInBand": in_band,
        "pass": bool(monotone and in_band),
    }


# ------------------------------------------------------------ Fock oracle comparison


def oracle_tensor(rng: np.random.Generator, theta: NoncommMatrix):
    """A degree-4 tensor with uniform or nested twists and random Gaussian factors."""
    factors = [
        tf.gaussian(
            center=rng.uniform(-0.5, 0.5, 4),
            widths=rng.uniform(0.8, 1.2, 4),
            wavevector=rng.uniform(-1.0, 1.0, 4),
        )
        for _ in range(4)
    ]
    if rng.random() < 0.5:
        return uniform(factors, theta)
    coeffs = rng.uniform(-1.0, 1.0, 4)
    return nested(factors, [theta * float(c) for c in coeffs])


def oracle_comparison(
    configs: int = 5,
    seed: int = 0,
    lattice_nodes: int = 5,
    cutoff: float = 3.0,
    mass: float = 1.0,
    tol: float = 1e-3,
) -> dict:
    """Degree-4 vacuum functional against the truncated Fock oracle on one shared lattice."""
    rng = np.random.default_rng(seed)
    rule = lattice_rule(mass, cutoff, lattice_nodes)
    mu = MassShellMeasure.from_rule(mass, rule)
    rows = []
    for _ in range(configs):
        theta, _ = random_theta(rng, lo=0.2, hi=1.0, scale=0.5)
        F = oracle_tensor(rng, theta)
        state_theta, _ = random_theta(rng, lo=0.2, hi=1.0, scale=0.5)
        twisted = u_theta_multiplier(F, state_theta)
        quad, _ = vacuum_functional(twisted, mu)
        fock = fock_oracle(F, state_theta, rule)
        rel = abs(quad - fock) / max(abs(fock), 1e-300)
        rows.append({"quadrature": [quad.real, quad.imag], "fock": [fock.real, fock.imag], "relative": rel})
    worst = max(r["relative"] for r in rows)
    return {
        "lattice": {"mass": mass, "cutoff": cutoff, "nodesPerAxis": lattice_nodes, "modes": rule.size},
        "seed": seed,
        "rows": rows,
        "maxRelative": worst,
        "tolerance": tol,
        "pass": bool(worst < tol),
    }


# ------------------------------------------------------------ u_theta isometry


def _random_low_degree(rng: np.random.Generator):
    """A random tensor of degree 1 or 2 made of Gaussians."""
    degree = int(rng.integers(1, 3))
    return tensor(*[random_gaussian(rng) for _ in range(degree)])


def isometry_check(pairs: int = 10, seed: int = 0, measure: MassShellMeasure | None = None, factor: float = 10.0) -> dict:
    """(u_theta f, u_theta g)_0 against (f, g)_theta for random degree <= 2 pairs.

    Both sides are evaluated on one rule, so the default rule is a coarse one
    that skips certification; each row still carries its node-halving estimate.
    """
    rng = np.random.default_rng(seed)
    mu = measure or MassShellMeasure(1.0, cutoff=6.0, nodes=24, min_nodes=24, certify=False)
    zero = NoncommMatrix(np.zeros(6))
    rows = []
    ok = True
    for _ in range(pairs):
        f, g = _random_low_degree(rng), _random_low_degree(rng)
        theta, _ = random_theta(rng, lo=0.2, hi=1.0, scale=0.5)
        a, ea = inner_product_theta(u_theta_multiplier(f, theta), u_theta_multiplier(g, theta), zero, mu)
        b, eb = inner_product_theta(f, g, theta, mu)
        gap = abs(a - b)
        est = ea + eb
        passed = bool(gap < factor * est) if est > 0 else bool(gap <= 1e-14 * max(abs(a), abs(b), 1e-300))
        ok &= passed
        rows.append(
            {
                "degrees": [f.degree, g.degree],
                "isometric": [a.real, a.imag],
                "twisted": [b.real, b.imag],
                "gap": gap,
                "estimate": est,
                "pass": passed,
            }
        )
    return {"pairs": pairs, "seed": seed, "measure": mu.to_json(), "rows": rows, "pass": bool(ok)}
