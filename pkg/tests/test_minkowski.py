from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wedgefield import minkowski as mk
from wedgefield.errors import InvalidTransform

angles = st.floats(-2.0, 2.0)
vectors = st.lists(st.floats(-10.0, 10.0), min_size=4, max_size=4).map(np.array)


@st.composite
def transforms(draw):
    out = mk.identity()
    for _ in range(draw(st.integers(1, 3))):
        if draw(st.booleans()):
            out = mk.compose(out, mk.boost(draw(angles), draw(st.sampled_from([1, 2, 3]))))
        else:
            plane = draw(st.sampled_from([(1, 2), (1, 3), (2, 3)]))
            out = mk.compose(out, mk.rotation(draw(angles), plane))
    return out


def test_metric_signature():
    assert mk.minkowski_product([1, 0, 0, 0], [1, 0, 0, 0]) == 1.0
    assert mk.minkowski_product([1, 1, 0, 0], [1, 1, 0, 0]) == 0.0
    assert mk.minkowski_product([1, 0, 0, 0], [0, 1, 0, 0]) == 0.0


def test_zero_rapidity_is_identity():
    assert np.array_equal(mk.boost(0.0, 1).matrix, np.eye(4))


def test_boost_action():
    v = mk.apply_to_vector(mk.boost(1.0, 1), [1, 0, 0, 0])
    assert np.allclose(v, [math.cosh(1), math.sinh(1), 0, 0], atol=0, rtol=1e-15)


def test_inverse_composes_to_identity(rng):
    a = mk.random_lorentz(rng, max_factors=3, scale=2.0)
    assert np.max(np.abs(mk.compose(a, mk.inverse_transform(a)).matrix - np.eye(4))) < 1e-12


def test_rejects_non_lorentz_matrix():
    with pytest.raises(InvalidTransform):
        mk.LorentzTransform(np.diag([1.0, 2.0, 1.0, 1.0]))
    with pytest.raises(InvalidTransform):
        mk.LorentzTransform(np.diag([-1.0, 1.0, 1.0, -1.0]))


def test_transform_from_json_factors():
    a = mk.transform_from_json({"factors": [{"boost": 0.3, "axis": 1}, {"rotation": 0.2, "plane": [2, 3]}]})
    b = mk.compose(mk.boost(0.3, 1), mk.rotation(0.2, (2, 3)))
    assert np.array_equal(a.matrix, b.matrix)


@given(transforms())
def test_eta_orthogonality(a):
    assert a.eta_defect() < 1e-12 * max(1.0, float(np.max(np.abs(a.matrix))) ** 2)


@given(transforms(), vectors, vectors)
def test_product_invariance(a, x, y):
    lhs = mk.minkowski_product(mk.apply_to_vector(a, x), mk.apply_to_vector(a, y))
    scale = max(1.0, float(np.max(np.abs(a.matrix))) ** 2) * (1 + np.abs(x).max()) * (1 + np.abs(y).max())
    assert abs(lhs - mk.minkowski_product(x, y)) < 1e-10 * scale


@given(transforms(), st.lists(st.floats(-5.0, 5.0), min_size=3, max_size=3), st.floats(0.01, 5.0))
def test_forward_cone_preserved(a, k, mass):
    k = np.array(k)
    x = np.concatenate([[math.sqrt(mass * mass + k @ k)], k])
    assert mk.in_forward_cone(mk.apply_to_vector(a, x))
