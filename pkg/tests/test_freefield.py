from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from wedgefield import testfn as tf
from wedgefield.errors import DegreeTooLarge, QuadratureFailure
from wedgefield.freefield import (
    MassShellMeasure,
    fock_oracle,
    inner_product_theta,
    lattice_rule,
    positivity_report,
    two_point,
    two_point_with_error,
    vacuum_functional,
    wick_pairings,
)
from wedgefield.geometry import ZERO_THETA, NoncommMatrix, OrbitParams, reference_theta
from wedgefield.moyal import (
    TensorPoly,
    plain_join,
    poincare_act,
    scalar,
    star_involution_tensor,
    tensor,
    u_theta_multiplier,
    uniform,
)

# two-point value of the unit Gaussian with itself at m = 1, cutoff 6, 48 nodes, 32 clipped-axis nodes
REFERENCE_TWO_POINT = 1.785241599744938


@pytest.fixture(scope="module")
def mu() -> MassShellMeasure:
    return MassShellMeasure(1.0, cutoff=6.0, nodes=48)


@pytest.fixture(scope="module")
def lattice() -> MassShellMeasure:
    return MassShellMeasure.from_rule(1.0, lattice_rule(1.0, 3.0, 5))


def random_gaussian(rng, spread=1.0):
    return tf.gaussian(
        center=rng.uniform(-0.5, 0.5, 4),
        widths=rng.uniform(0.8, 1.3, 4),
        wavevector=rng.uniform(-spread, spread, 4),
        amplitude=complex(*rng.uniform(-1, 1, 2)),
    )


def radial_two_point(mass: float) -> float:
    """2 pi \\int d^3q / (2 w) exp(-(w^2 + |q|^2)) as a radial integral."""
    val = quad(
        lambda r: r * r * math.exp(-(mass * mass + 2 * r * r)) / (2 * math.sqrt(mass * mass + r * r)),
        0,
        np.inf,
        epsabs=0,
        epsrel=1e-13,
    )[0]
    return 2 * math.pi * 4 * math.pi * val


def monte_carlo_two_point(samples: int, seed: int = 1) -> tuple[float, float]:
    """Importance-sampled estimate with q ~ N(0, I/2); returns (mean, standard error)."""
    rng = np.random.default_rng(seed)
    total, total_sq, chunk = 0.0, 0.0, 1_000_000
    for _ in range(samples // chunk):
        q = rng.normal(0.0, math.sqrt(0.5), (chunk, 3))
        r2 = np.sum(q * q, 1)
        dens = math.pi**-1.5 * np.exp(-r2)
        vals = 2 * math.pi * np.exp(-(1 + 2 * r2)) / (2 * np.sqrt(1 + r2)) / dens
        total += vals.sum()
        total_sq += (vals * vals).sum()
    mean = total / samples
    return mean, math.sqrt((total_sq / samples - mean * mean) / samples)


# ------------------------------------------------------------ Wick structure


def test_pairing_counts():
    assert [len(wick_pairings(n)) for n in (2, 4, 6)] == [1, 3, 15]
    assert wick_pairings(4)[0] == ((0, 1), (2, 3))


def test_degree_one_vanishes(mu, rng):
    val, err = vacuum_functional(tensor(random_gaussian(rng)), mu)
    assert val == 0 and err == 0


def test_degree_limit(mu, rng):
    with pytest.raises(DegreeTooLarge):
        vacuum_functional(tensor(*(random_gaussian(rng) for _ in range(8))), mu)


def test_wick_sum_by_direct_assembly(lattice, rng):
    fs = [random_gaussian(rng) for _ in range(4)]
    val, _ = vacuum_functional(tensor(*fs), lattice)
    w = {(i, j): two_point(fs[i], fs[j], lattice) for i in range(4) for j in range(i + 1, 4)}
    want = w[0, 1] * w[2, 3] + w[0, 2] * w[1, 3] + w[0, 3] * w[1, 2]
    assert abs(val - want) < 1e-13 * abs(want)


# ------------------------------------------------------------ two-point function


def test_two_point_reference_value(mu):
    f = tf.gaussian()
    val, err = two_point_with_error(f.star(), f, mu)
    assert abs(val - REFERENCE_TWO_POINT) < 1e-12 * REFERENCE_TWO_POINT
    assert abs(val - radial_two_point(1.0)) < 1e-9
    mean, sigma = monte_carlo_two_point(10_000_000)
    assert abs(val.real - mean) < 3 * math.hypot(sigma, err)


def test_two_point_positive(mu, rng):
    for _ in range(20):
        f = random_gaussian(rng)
        val, err = two_point_with_error(f.star(), f, mu)
        assert abs(val.imag) <= max(err, 1e-14 * abs(val))
        assert val.real >= 0


def test_two_point_translation_invariant(mu, rng):
    f, g = random_gaussian(rng), random_gaussian(rng)
    y = rng.uniform(-2, 2, 4)
    a = two_point(f, g, mu)
    b = two_point(tf.translate(f, y), tf.translate(g, y), mu)
    assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def test_two_point_undeformed(mu, rng):
    f, g = random_gaussian(rng), random_gaussian(rng)
    theta = NoncommMatrix(rng.uniform(-1, 1, 6))
    assert vacuum_functional(uniform([f, g], theta), mu)[0] == vacuum_functional(tensor(f, g), mu)[0]


def test_four_point_translation_invariant(lattice, rng):
    fs = [random_gaussian(rng) for _ in range(4)]
    F = uniform(fs, reference_theta(OrbitParams(0.5, 0.3)))
    y = rng.uniform(-1, 1, 4)
    a, _ = vacuum_functional(F, lattice)
    b, _ = vacuum_functional(poincare_act(F, y), lattice)
    assert abs(a - b) < 1e-9 * max(1.0, abs(a))


# ------------------------------------------------------------ inner products


def test_inner_product_degree_one(mu, rng):
    f = tensor(random_gaussian(rng))
    theta = reference_theta(OrbitParams(0.5, 0.3))
    val, err = inner_product_theta(f, f, theta, mu)
    assert val.real >= -1e-10 * abs(val)
    assert abs(val.imag) <= max(err, 1e-14 * abs(val))


def test_inner_product_zero_theta(mu, rng):
    f = tensor(random_gaussian(rng), random_gaussian(rng))
    g = tensor(random_gaussian(rng), random_gaussian(rng))
    val, _ = inner_product_theta(f, g, ZERO_THETA, mu)
    want, _ = vacuum_functional(plain_join(star_involution_tensor(f), g), mu)
    assert val == want


@pytest.mark.slow
def test_positivity_low_degree_poly(rng):
    mu = MassShellMeasure(1.0, cutoff=6.0, nodes=24, min_nodes=24, certify=False)
    theta = reference_theta(OrbitParams(0.5, 0.3))
    F = TensorPoly((scalar(0.7), tensor(random_gaussian(rng)), tensor(random_gaussian(rng), random_gaussian(rng))))
    val, err = inner_product_theta(F, F, theta, mu)
    assert val.real >= -10 * err
    report = positivity_report(F, theta, mu)
    assert report["nonnegative"]


# ------------------------------------------------------------ Fock oracle


def test_fock_odd_degree_vanishes(lattice, rng):
    rule = lattice.rule
    F = tensor(*(random_gaussian(rng) for _ in range(3)))
    assert fock_oracle(F, reference_theta(OrbitParams(0.5, 0.3)), rule) == 0


def test_fock_two_point_is_lattice_sum(lattice, rng):
    f, g = random_gaussian(rng), random_gaussian(rng)
    want, _ = vacuum_functional(tensor(f, g), lattice)
    assert abs(fock_oracle(tensor(f, g), ZERO_THETA, lattice.rule) - want) < 1e-13 * abs(want)


def test_fock_two_point_converges(rng):
    f = tf.gaussian(widths=(1.0, 1.2, 1.0, 0.9))
    g = tf.gaussian(center=(0, 0.2, 0, 0), widths=(1.1, 1.0, 1.0, 1.0))
    ref = two_point(f, g, MassShellMeasure(1.0, cutoff=6.0, nodes=48))
    gaps = [
        abs(fock_oracle(tensor(f, g), ZERO_THETA, lattice_rule(1.0, 6.0, n)) - ref) for n in (4, 8, 16)
    ]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-3 * abs(ref)


def test_fock_four_point_matches_quadrature(lattice, rng):
    theta = reference_theta(OrbitParams(0.5, 0.3))
    F = uniform([random_gaussian(rng) for _ in range(4)], theta)
    state = NoncommMatrix(rng.uniform(-0.3, 0.3, 6))
    quad_val, _ = vacuum_functional(u_theta_multiplier(F, state), lattice)
    fock = fock_oracle(F, state, lattice.rule)
    assert abs(quad_val - fock) < 1e-3 * abs(fock)


# ------------------------------------------------------------ measure construction


def test_measure_validation():
    with pytest.raises(ValueError):
        MassShellMeasure(0.0)
    with pytest.raises(ValueError):
        MassShellMeasure(1.0, nodes=7)
    assert MassShellMeasure(1.0, cutoff=6.0, nodes=24).to_json()["nodes"] == 24


def test_measure_certification_threshold():
    # 24 clipped-axis nodes move the reference pair by about 5e-8 when doubled
    assert 1e-8 < MassShellMeasure(1.0, cutoff=6.0, min_nodes=24, certify=False).certification_gap() < 1e-7
    with pytest.raises(QuadratureFailure):
        MassShellMeasure(1.0, cutoff=6.0, min_nodes=24)
    assert MassShellMeasure(1.0, cutoff=6.0).certification_gap() < 1e-9
