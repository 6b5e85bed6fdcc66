from __future__ import annotations

import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wedgefield import minkowski as mk
from wedgefield.errors import DegenerateOrbit, NotOnOrbit
from wedgefield.geometry import (
    ZERO_THETA,
    NoncommMatrix,
    OrbitParams,
    conjugate_theta,
    is_on_orbit,
    lambda_theta,
    opposite_wedge,
    orbit_invariants,
    reference_theta,
    section_residual,
    standard_wedge,
    theta_bilinear,
    theta_from_json,
    theta_to_json,
    transform_wedge,
    wedge_contains,
    wedge_equals,
    wedge_of_theta,
)

ETA = np.diag([1.0, -1.0, -1.0, -1.0])


def levi_civita() -> np.ndarray:
    """eps with lower indices, eps_{0123} = -1."""
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        inversions = sum(1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 == 0 else 1.0
    return eps


def contraction_invariants(theta: NoncommMatrix) -> tuple[float, float]:
    up = theta.matrix
    low = ETA @ up @ ETA
    quad = -sum(low[m, n] * up[m, n] for m in range(4) for n in range(4))
    eps = levi_civita()
    pseudo = sum(
        eps[a, b, c, d] * up[a, b] * up[c, d]
        for a, b, c, d in itertools.product(range(4), repeat=4)
        if eps[a, b, c, d]
    )
    return quad, pseudo


def index_sum_bilinear(theta: NoncommMatrix, p, q) -> float:
    pl, ql = ETA @ np.asarray(p, float), ETA @ np.asarray(q, float)
    return sum(pl[m] * theta.matrix[m, n] * ql[n] for m in range(4) for n in range(4))


kappas = st.floats(-2.0, 2.0)
nonzero = st.floats(0.2, 2.0).flatmap(lambda v: st.sampled_from([v, -v]))
seeds = st.integers(0, 2**32 - 1)


# ------------------------------------------------------------ bilinear form


def test_bilinear_reference_value():
    theta = reference_theta(OrbitParams(1.0, 0.0))
    p, q = [1, 0, 0, 0], [0, 1, 0, 0]
    assert index_sum_bilinear(theta, p, q) == -1.0
    assert theta_bilinear(theta, p, q) == -1.0


def test_bilinear_zero_theta(rng):
    p, q = rng.normal(size=(2, 4))
    assert theta_bilinear(ZERO_THETA, p, q) == 0.0


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_bilinear_antisymmetric_exactly(upper, pq):
    theta = NoncommMatrix(upper)
    p, q = np.array(pq[:4]), np.array(pq[4:])
    assert theta_bilinear(theta, p, p) == 0.0
    assert theta_bilinear(theta, p, q) == -theta_bilinear(theta, q, p)
    assert np.array_equal(theta.matrix, -theta.matrix.T)


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_bilinear_matches_index_sum(upper, pq):
    theta = NoncommMatrix(upper)
    p, q = pq[:4], pq[4:]
    assert abs(theta_bilinear(theta, p, q) - index_sum_bilinear(theta, p, q)) < 1e-12 * 100


@given(seeds, st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_covariant_pair_identity(seed, upper):
    rng = np.random.default_rng(seed)
    a = mk.random_lorentz(rng, max_factors=3, scale=1.0)
    theta = NoncommMatrix(upper)
    p, q = rng.uniform(-3, 3, (2, 4))
    lhs = theta_bilinear(conjugate_theta(a, theta), mk.apply_to_vector(a, p), mk.apply_to_vector(a, q))
    scale = np.max(np.abs(a.matrix)) ** 4 * 100
    assert abs(lhs - theta_bilinear(theta, p, q)) < 1e-11 * scale


# ------------------------------------------------------------ orbits


def test_reference_matrix_entries():
    m = reference_theta(OrbitParams(1.0, 2.0)).matrix
    want = np.zeros((4, 4))
    want[0, 1], want[1, 0], want[2, 3], want[3, 2] = 1.0, -1.0, 2.0, -2.0
    assert np.array_equal(m, want)
    assert reference_theta(OrbitParams(0.0, 0.0)).is_zero()


def test_reference_invariants():
    theta = reference_theta(OrbitParams(1.0, 2.0))
    assert contraction_invariants(theta) == (-6.0, -16.0)
    assert orbit_invariants(theta) == (-6.0, -16.0)
    assert orbit_invariants(ZERO_THETA) == (0.0, 0.0)


@given(kappas, kappas)
def test_invariants_match_contraction(ke, km):
    theta = reference_theta(OrbitParams(ke, km))
    got = orbit_invariants(theta)
    want = contraction_invariants(theta)
    assert np.allclose(got, want, rtol=0, atol=1e-12)
    assert np.allclose(got, (2 * (ke * ke - km * km), -8 * ke * km), rtol=0, atol=1e-12)


@given(kappas, kappas, seeds)
def test_invariants_under_conjugation(ke, km, seed):
    params = OrbitParams(ke, km)
    theta = conjugate_theta(mk.random_lorentz(np.random.default_rng(seed), 3, 2.0), reference_theta(params))
    got = orbit_invariants(theta)
    scale = max(1.0, float(np.max(np.abs(theta.upper))) ** 2)
    assert abs(got[0] - 2 * (ke * ke - km * km)) < 1e-10 * scale
    assert abs(got[1] + 8 * ke * km) < 1e-10 * scale
    assert is_on_orbit(theta, params, 1e-8 * scale)


def test_on_orbit_examples():
    assert is_on_orbit(reference_theta(OrbitParams(1, 2)), OrbitParams(1, 2), 1e-9)
    assert not is_on_orbit(ZERO_THETA, OrbitParams(1, 0), 1e-9)


def test_conjugation_action(rng):
    theta = reference_theta(OrbitParams(0.7, -1.1))
    assert conjugate_theta(mk.identity(), theta) == theta
    a = mk.random_lorentz(rng, 3, 1.0)
    b = mk.random_lorentz(rng, 3, 1.0)
    lhs = conjugate_theta(mk.compose(a, b), theta)
    rhs = conjugate_theta(a, conjugate_theta(b, theta))
    assert np.max(np.abs(lhs.upper - rhs.upper)) < 1e-12 * np.max(np.abs(lhs.upper)) * 10


@pytest.mark.parametrize("t", [-1.5, 0.3, 2.0])
def test_stabilizer_fixes_reference(t):
    theta = reference_theta(OrbitParams(0.5, 0.3))
    for a in (mk.boost(t, 1), mk.rotation(t, (2, 3))):
        assert np.max(np.abs(conjugate_theta(a, theta).upper - theta.upper)) < 1e-12
        assert wedge_equals(transform_wedge(a, standard_wedge()), standard_wedge())


# ------------------------------------------------------------ section


def test_section_at_reference():
    params = OrbitParams(0.5, 0.3)
    theta = reference_theta(params)
    assert section_residual(lambda_theta(theta, params), theta, params) < 1e-8


@given(nonzero, nonzero, seeds)
def test_section_residual(ke, km, seed):
    params = OrbitParams(ke, km)
    theta = conjugate_theta(mk.random_lorentz(np.random.default_rng(seed), 3, 2.0), reference_theta(params))
    assert section_residual(lambda_theta(theta, params), theta, params) < 1e-8


def test_section_rejects_off_orbit():
    with pytest.raises(NotOnOrbit):
        lambda_theta(ZERO_THETA, OrbitParams(1.0, 1.0))


# ------------------------------------------------------------ wedges


def test_standard_wedge_membership():
    w = standard_wedge()
    assert wedge_contains(w, (0, 2, 0, 0))
    assert not wedge_contains(w, (1, 1, 0, 0))
    assert not wedge_contains(w, (0, -2, 0, 0))
    assert wedge_contains(opposite_wedge(w), (0, -2, 0, 0))


def test_wedge_involutions():
    w = transform_wedge(mk.rotation(0.4, (1, 2)), standard_wedge())
    assert wedge_equals(opposite_wedge(opposite_wedge(w)), w)
    assert wedge_equals(transform_wedge(mk.identity(), w), w)
    assert not wedge_equals(opposite_wedge(w), w)


def test_reference_wedge():
    params = OrbitParams(0.5, 0.3)
    theta = reference_theta(params)
    assert wedge_equals(wedge_of_theta(theta, params), standard_wedge())
    assert wedge_equals(wedge_of_theta(-theta, params), opposite_wedge(standard_wedge()))


@given(nonzero, nonzero, seeds)
def test_wedge_covariance(ke, km, seed):
    params = OrbitParams(ke, km)
    a = mk.random_lorentz(np.random.default_rng(seed), 3, 1.0)
    theta = reference_theta(params)
    moved = wedge_of_theta(conjugate_theta(a, theta), params)
    assert wedge_equals(moved, transform_wedge(a, wedge_of_theta(theta, params)), tol=1e-7)


def test_degenerate_orbit_rejected():
    params = OrbitParams(1.0, 0.0)
    with pytest.raises(DegenerateOrbit):
        wedge_of_theta(reference_theta(params), params)


@given(seeds)
def test_w4_closure(seed):
    rng = np.random.default_rng(seed)
    theta = reference_theta(OrbitParams(float(rng.uniform(0.2, 2)), float(rng.uniform(-2, 2))))
    k = rng.uniform(-10, 10, (200, 3))
    m = rng.uniform(0, 10, 200)
    p = np.column_stack([np.sqrt(m * m + np.sum(k * k, 1)), k])
    image = (theta.matrix @ (ETA @ p.T)).T
    assert np.all(opposite_wedge(standard_wedge()).closure_slack(image) >= -1e-12)


# ------------------------------------------------------------ serialization


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=6, max_size=6), kappas, kappas)
def test_json_round_trip_bit_exact(upper, ke, km):
    theta = NoncommMatrix(upper)
    params = OrbitParams(ke, km)
    back, bparams = theta_from_json(json.loads(json.dumps(theta_to_json(theta, params))))
    assert back.upper.tobytes() == theta.upper.tobytes()
    assert bparams == params


def test_json_lorentz_spec():
    spec = {"kappaE": 0.5, "kappaM": 0.3, "lorentz": {"factors": [{"boost": 0.2, "axis": 2}]}}
    theta, _ = theta_from_json(spec)
    want = conjugate_theta(mk.boost(0.2, 2), reference_theta(OrbitParams(0.5, 0.3)))
    assert theta == want
