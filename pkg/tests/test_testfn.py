from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import IntegrationWarning, quad

from wedgefield import minkowski as mk
from wedgefield import testfn as tf
from wedgefield.errors import Unsupported

ETA = np.array([1.0, -1.0, -1.0, -1.0])
seeds = st.integers(0, 2**32 - 1)


def line_transform(f, p, half, nodes: int = 400) -> complex:
    """Transform of a separable packet as a product of 1-D Gauss-Legendre integrals along its axes."""
    a = f.eps_support(1e-6, "position").center
    fa = complex(f.evaluate(a))
    t, w = np.polynomial.legendre.leggauss(nodes)
    total = fa * np.exp(-1j * np.sum(ETA * p * a))
    for mu in range(4):
        x = np.tile(a, (nodes, 1))
        x[:, mu] += half[mu] * t
        prof = f.evaluate(x) / fa
        total *= half[mu] * np.sum(w * prof * np.exp(-1j * ETA[mu] * p[mu] * half[mu] * t))
    return total / (2 * math.pi) ** 2


def box_transform(f, p, box: tf.SupportBox, nodes: int = 36) -> complex:
    """Direct 4-D Gauss-Legendre quadrature of the transform over a position box."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    axes = [box.center[m] + box.halfwidth[m] * t for m in range(4)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 4)
    weight = np.einsum("i,j,k,l->ijkl", w, w, w, w).reshape(-1) * np.prod(box.halfwidth)
    vals = f.evaluate(grid) * np.exp(-1j * mk.minkowski_product(p, grid))
    return np.sum(weight * vals) / (2 * math.pi) ** 2


def unit_gaussian_axis(s: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        if s == 0.0:
            return quad(lambda t: math.exp(-0.5 * t * t), -40, 40, epsabs=0, epsrel=1e-13, limit=200)[0]
        return quad(
            lambda t: math.exp(-0.5 * t * t), -40, 40, weight="cos", wvar=s, epsabs=1e-17, epsrel=1e-13, limit=400
        )[0]


# ------------------------------------------------------------ evaluation


def test_unit_gaussian_at_origin():
    assert tf.evaluate(tf.gaussian(), np.zeros(4)) == 1.0


def test_unit_gaussian_profile(rng):
    x = rng.normal(size=(50, 4))
    assert np.allclose(tf.gaussian().evaluate(x), np.exp(-0.5 * np.sum(x * x, 1)), rtol=1e-15, atol=0)


def test_bump_vanishes_outside():
    b = tf.bump(center=(0, 1, 0, 0), halfwidth=0.5)
    assert tf.evaluate(b, (0, 1.6, 0, 0)) == 0.0
    assert tf.evaluate(b, (0.5, 1.0, 0, 0)) == 0.0
    assert abs(tf.evaluate(b, (0, 1, 0, 0))) > 0


def test_sum_with_negative_cancels(rng):
    g = tf.gaussian(center=(0.1, 0, 0.2, 0), wavevector=(0.3, 0, 0, 1))
    s = tf.add(g, g.scaled(-1.0))
    assert np.all(s.evaluate(rng.normal(size=(20, 4))) == 0)
    assert np.all(s.fourier(rng.normal(size=(20, 4))) == 0)


# ------------------------------------------------------------ transforms


def test_unit_gaussian_transform_closed_form(rng):
    p = rng.uniform(-5, 5, (40, 4))
    want = [np.prod([unit_gaussian_axis(abs(v)) for v in row]) / (2 * math.pi) ** 2 for row in p]
    got = tf.gaussian().fourier(p)
    assert np.allclose(got, np.exp(-0.5 * np.sum(p * p, 1)), rtol=1e-14, atol=0)
    assert np.max(np.abs(got - want) / np.abs(want)) < 1e-10


def test_general_gaussian_transform(rng):
    widths = np.array([1.0, 0.7, 1.3, 0.9])
    g = tf.gaussian(center=(0.3, -0.2, 0.1, 0.5), widths=widths, wavevector=(0.4, -1.0, 0.2, 0.5), amplitude=1.5 - 0.5j)
    peak = np.abs(g.fourier(np.zeros(4)))
    for p in rng.uniform(-3, 3, (20, 4)):
        assert abs(g.fourier(p) - line_transform(g, p, 12 * widths)) < 1e-12 * max(peak, 1.0)


def test_bump_transform(rng):
    half = np.array([0.5, 0.7, 0.6, 0.8])
    b = tf.bump(center=(0.1, 0.2, 0, 0), halfwidth=half, wavevector=(0.5, 0.3, 0, 0))
    for p in rng.uniform(-5, 5, (10, 4)):
        got, want = b.fourier(p), line_transform(b, p, half, nodes=600)
        assert abs(got - want) < 1e-10 * abs(b.fourier(np.zeros(4)))


def test_real_even_bump_conjugate_pairs(rng):
    b = tf.bump(halfwidth=(0.5, 0.6, 0.7, 0.8))
    p = rng.uniform(-6, 6, (30, 4))
    assert np.allclose(b.fourier(-p), np.conj(b.fourier(p)), rtol=1e-13, atol=1e-16)


def test_bump_transform_decays_faster_than_fourth_power():
    b = tf.bump(halfwidth=0.5)
    d = np.array([1.0, 0.7, 0.4, 0.2])
    d /= np.linalg.norm(d)
    radii, peaks = [], []
    for k in range(2, 8):
        t = np.linspace(2.0**k, 2.0 ** (k + 1), 400)
        radii.append(2.0**k)
        peaks.append(np.max(np.abs(b.fourier(t[:, None] * d))))
    slope = np.polyfit(np.log(radii), np.log(peaks), 1)[0]
    assert slope < -4


@given(seeds)
def test_translation_law(seed):
    rng = np.random.default_rng(seed)
    g = tf.gaussian(center=rng.uniform(-1, 1, 4), widths=rng.uniform(0.5, 2, 4), wavevector=rng.uniform(-1, 1, 4))
    y = rng.uniform(-2, 2, 4)
    p = rng.uniform(-3, 3, (10, 4))
    phase = np.exp(-1j * mk.minkowski_product(p, y))
    scale = np.max(np.abs(g.fourier(p))) + 1e-300
    assert np.max(np.abs(tf.fourier(tf.translate(g, y), p) - phase * g.fourier(p))) < 1e-10 * max(scale, 1e-3)


def test_poincare_identity_and_pointwise(rng):
    g = tf.gaussian(center=(0.2, 0, 0.1, 0), widths=(1, 1.2, 0.8, 1), wavevector=(0.5, 0.1, 0, 0))
    x = rng.normal(size=(10, 4))
    assert np.array_equal(tf.poincare(g, np.zeros(4), mk.identity()).evaluate(x), g.evaluate(x))
    a = mk.random_lorentz(rng, 3, 1.0)
    y = rng.uniform(-1, 1, 4)
    moved = tf.poincare(g, y, a)
    assert np.allclose(moved.evaluate(mk.apply_to_vector(a, x) + y), g.evaluate(x), rtol=1e-10, atol=1e-14)


def test_poincare_transform_against_quadrature(rng):
    g = tf.gaussian(widths=(0.8, 0.8, 0.8, 0.8), wavevector=(0.3, 0.2, 0, 0))
    a = mk.compose(mk.boost(0.4, 1), mk.rotation(0.3, (1, 2)))
    y = np.array([0.2, -0.1, 0.3, 0.0])
    moved = tf.poincare(g, y, a)
    box = moved.eps_support(1e-14, "position")
    for p in rng.uniform(-1.5, 1.5, (4, 4)):
        want = np.exp(-1j * mk.minkowski_product(p, y)) * g.fourier(mk.apply_to_vector(mk.inverse_transform(a), p))
        assert abs(moved.fourier(p) - want) < 1e-12
        assert abs(box_transform(moved, p, box) - want) < 1e-9


def test_bump_rejects_boosts():
    with pytest.raises(Unsupported):
        tf.poincare(tf.bump(), np.zeros(4), mk.boost(0.3, 1))


# ------------------------------------------------------------ involutions


def test_star_involution(rng):
    g = tf.gaussian(center=(0, 0.3, 0, 0))
    x = rng.normal(size=(10, 4))
    assert np.array_equal(tf.star_involution(g).evaluate(x), g.evaluate(x))
    ig = tf.gaussian(center=(0, 0.3, 0, 0), amplitude=1j)
    assert np.allclose(tf.star_involution(ig).evaluate(x), -1j * g.evaluate(x), rtol=1e-15, atol=0)
    h = tf.gaussian(center=(0.1, 0.3, -0.2, 0), widths=(1, 0.7, 1.2, 1), wavevector=(0.5, -0.4, 0.2, 0.1), amplitude=1 + 2j)
    hs = tf.star_involution(h)
    for p in rng.uniform(-2, 2, (5, 4)):
        want = np.conj(line_transform(h, -p, 12 * np.array([1, 0.7, 1.2, 1])))
        assert abs(hs.fourier(p) - want) < 1e-12 * 10


def test_j_involution(rng):
    b = tf.bump(halfwidth=0.7)
    x = rng.uniform(-1, 1, (10, 4))
    assert np.array_equal(tf.j_involution(b).evaluate(x), b.evaluate(x))
    h = tf.gaussian(center=(0.1, 0.3, -0.2, 0), widths=(1, 0.7, 1.2, 1), wavevector=(0.5, -0.4, 0.2, 0.1), amplitude=1 + 2j)
    assert np.allclose(tf.j_involution(tf.j_involution(h)).evaluate(x), h.evaluate(x), rtol=1e-15, atol=0)
    hj = tf.j_involution(h)
    for p in rng.uniform(-2, 2, (5, 4)):
        want = np.conj(line_transform(h, p, 12 * np.array([1, 0.7, 1.2, 1])))
        assert abs(hj.fourier(p) - want) < 1e-12 * 10


# ------------------------------------------------------------ supports


def test_eps_supports():
    b = tf.bump(center=(0, 1, 0, 0), halfwidth=(0.5, 0.5, 0.25, 0.5))
    box = tf.eps_support(b)
    assert box.exact
    assert np.array_equal(box.lo, [-0.5, 0.5, -0.25, -0.5]) and np.array_equal(box.hi, [0.5, 1.5, 0.25, 0.5])
    g = tf.gaussian()
    assert np.allclose(tf.eps_support(g, math.exp(-8)).halfwidth, 4.0, rtol=1e-14, atol=0)
    union = tf.eps_support(tf.add(g, b), math.exp(-8))
    assert np.all(union.lo <= np.minimum(box.lo, -4.0)) and np.all(union.hi >= np.maximum(box.hi, 4.0))


def test_packet_json_round_trip():
    specs = [
        {"type": "bump", "center": [0, 2, 0, 0], "halfwidth": [0.5] * 4, "wavevector": [0] * 4, "amplitude": [1, 0]},
        {"type": "gaussian", "center": [0.1, 0, 0, 0], "widths": [1, 2, 1, 1], "wavevector": [0, 1, 0, 0], "amplitude": [0, 1]},
    ]
    fs = tf.functions_from_json(specs)
    again = tf.functions_from_json([f.to_json() for f in fs])
    p = np.array([[0.3, -0.2, 0.5, 0.1]])
    for a, b in zip(fs, again):
        assert a.fourier(p)[0] == b.fourier(p)[0]
    with pytest.raises(ValueError):
        tf.packet_from_json({"type": "triangle"})
