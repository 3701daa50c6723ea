import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fd_gradient, fd_jacobian, naive_eval, random_poly
from mpccreg.poly import Poly


def test_eval_product():
    x1, x2 = Poly.variables(2)
    assert (x1 * x2)([3, 4]) == 12


def test_eval_ndc4_objective_at_limit():
    x1, x2, x3 = Poly.variables(3)
    f = -x1 - x2 + 2 * x1 * x2 + x3**2
    assert f([0, 0, 1]) == 1


def test_eval_matches_naive_summation():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = random_poly(rng, 3)
        x = rng.uniform(-2, 2, 3)
        assert p(x) == pytest.approx(naive_eval(p, x), rel=1e-12, abs=1e-12)


def test_dimension_mismatch():
    x1, x2 = Poly.variables(2)
    with pytest.raises(ValueError):
        (x1 + x2)([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        x1 + Poly.var(0, 3)


def test_gradient_product():
    x1, x2 = Poly.variables(2)
    assert (x1 * x2).gradient == (x2, x1)


def test_gradient_quartic_objective():
    x1, x2 = Poly.variables(2)
    f = 0.25 * (x1**4 + x2**4) - 0.5 * (x1**2 + x2**2)
    t = 0.25
    g = f.grad_at([math.sqrt(t)] * 2)
    assert np.allclose(g, [t**1.5 - t**0.5] * 2, atol=1e-15)
    assert np.allclose(g, [-0.375, -0.375], atol=1e-15)


def test_hessian_product():
    x1, x2 = Poly.variables(2)
    assert np.array_equal((x1 * x2).hess_at([5.0, -1.0]), [[0, 1], [1, 0]])


def _rel_close(a, b, rel=1e-6):
    a, b = np.asarray(a), np.asarray(b)
    return np.all(np.abs(a - b) <= rel * (1 + np.abs(b)))


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        p = random_poly(rng, n, degree=4)
        x = rng.uniform(-1.5, 1.5, n)
        assert _rel_close(p.grad_at(x), fd_gradient(p, x))
        assert _rel_close(p.hess_at(x), fd_jacobian(p.grad_at, x))


def test_hessian_is_term_identical_across_diagonal():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = random_poly(rng, 4)
        H = p.hessian
        for i in range(4):
            for j in range(4):
                assert H[i][j] == H[j][i]


def test_canonical_form_merges_and_drops_zeros():
    p = Poly(2, [(1.0, (1, 0)), (2.0, (1, 0)), (0.0, (0, 1)), (1.0, (0, 2)), (-1.0, (0, 2))])
    assert p.terms == (((1, 0), 3.0),)
    assert (p - p).is_zero()


@st.composite
def poly_json(draw):
    n = draw(st.integers(1, 4))
    terms = draw(st.lists(
        st.tuples(st.floats(-10, 10, allow_nan=False), st.lists(st.integers(0, 3), min_size=n, max_size=n)),
        max_size=8,
    ))
    return n, [[c, e] for c, e in terms]


@given(poly_json())
@settings(max_examples=200, deadline=None)
def test_json_roundtrip_is_idempotent(data):
    n, terms = data
    p = Poly.from_json(terms, n)
    once = p.to_json()
    twice = Poly.from_json(json.loads(json.dumps(once)), n).to_json()
    assert once == twice


def test_from_json_rejects_bad_terms():
    with pytest.raises(ValueError):
        Poly.from_json([[True, [1]]], 1)
    with pytest.raises(ValueError):
        Poly.from_json([["1", [1]]], 1)
    with pytest.raises(ValueError):
        Poly.from_json([[1.0, [1, 2]]], 1)
    with pytest.raises(ValueError):
        Poly.from_json([[1.0, [-1]]], 1)


def test_arithmetic():
    x, y = Poly.variables(2)
    p = (x + 1) * (y - 2)
    assert p([2.0, 5.0]) == 9.0
    assert (3 - x)([1.0, 0.0]) == 2.0
    assert (x**0)([4.0, 4.0]) == 1.0
    assert (2 * x * y).degree == 2
