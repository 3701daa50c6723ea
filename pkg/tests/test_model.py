import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_poly, standard_pair
from mpccreg import corpus
from mpccreg.errors import InputError
from mpccreg.model import (
    EQUALITY,
    SCHOLTES,
    MpccProblem,
    Variant,
    feasible_mpcc,
    feasible_regularized,
    mpcc_lagrangian_hessian,
    scholtes_lagrangian_hessian,
)
from mpccreg.poly import Poly


@pytest.fixture(scope="module")
def ndc4():
    return corpus.load_problem("ndc4")


def test_variant_validation():
    with pytest.raises(InputError):
        Variant(SCHOLTES, 0.0)
    with pytest.raises(InputError):
        Variant("relaxed", 0.1)
    assert Variant(EQUALITY, 0.5).at(0.25) == Variant(EQUALITY, 0.25)


def test_problem_json_roundtrip(ndc4):
    again = MpccProblem.from_json(json.loads(json.dumps(ndc4.to_json())))
    assert again.to_json() == ndc4.to_json()
    assert again.digest == ndc4.digest


def test_problem_json_errors():
    with pytest.raises(InputError):
        MpccProblem.from_json({"n": 2})
    good = standard_pair(Poly.var(0, 2)).to_json()
    good["F1"] = []
    with pytest.raises(InputError):
        MpccProblem.from_json(good)


def test_check_point_dimension(ndc4):
    with pytest.raises(InputError):
        ndc4.check_point([0.0, 0.0])
    with pytest.raises(InputError):
        ndc4.check_point([0.0, np.nan, 1.0])


def test_feasible_mpcc_examples(ndc4):
    assert feasible_mpcc(ndc4, [0, 0, 1])
    res = feasible_mpcc(ndc4, [1, 1, 1])
    assert not res
    assert "F2[0]" in res.violations


def test_feasible_regularized_examples(ndc4):
    v = Variant(SCHOLTES, 0.5)
    res = feasible_regularized(ndc4, v, [0.25, 0.25, 1])
    assert res
    assert res.residuals["F1F2[1]"] == pytest.approx(0.5, abs=1e-15)
    x1, x2 = Poly.variables(2)
    prob = standard_pair((x1 - 1) ** 2)
    assert feasible_regularized(prob, Variant(EQUALITY, 0.1), [1, 0.1])
    assert not feasible_regularized(prob, Variant(EQUALITY, 0.1), [1, 0.0])


def test_tolerance_must_be_positive(ndc4):
    with pytest.raises(InputError):
        feasible_mpcc(ndc4, [0, 0, 1], tol=0.0)


@given(st.floats(0, 5), st.booleans(), st.floats(1e-6, 1.0))
@settings(max_examples=200, deadline=None)
def test_mpcc_feasible_points_are_regularized_feasible(a, first, t):
    prob = standard_pair(Poly.var(0, 2))
    x = [0.0, a] if first else [a, 0.0]
    assert feasible_mpcc(prob, x)
    assert feasible_regularized(prob, Variant(SCHOLTES, t), x)


def test_mpcc_hessian_standard_form_is_objective_hessian():
    rng = np.random.default_rng(0)
    x1, x2 = Poly.variables(2)
    prob = standard_pair(x1**3 - 2 * x1 * x2 + x2**4)
    x = [0.0, 0.7]
    H = mpcc_lagrangian_hessian(prob, x, sigma1={0: rng.normal()})
    assert np.array_equal(H, prob.f.hess_at(x))


def test_mpcc_hessian_ndc4_limit(ndc4):
    H = mpcc_lagrangian_hessian(ndc4, [0, 0, 1], sigma1={0: 0.0, 1: -1.0, 2: 2.0})
    assert np.allclose(H, [[0, 2, 0], [2, 0, 0], [0, 0, 2]])


def test_zero_multipliers_give_objective_hessian(ndc4):
    x = [0.3, -0.2, 1.1]
    assert np.array_equal(scholtes_lagrangian_hessian(ndc4, x), ndc4.f.hess_at(x))


def test_scholtes_hessian_matches_product_formula():
    rng = np.random.default_rng(4)
    for _ in range(30):
        F1, F2, f = (random_poly(rng, 3) for _ in range(3))
        prob = MpccProblem(3, 1, f, [F1], [F2])
        x = rng.uniform(-1, 1, 3)
        eta, nu1, nu2 = rng.normal(size=3)
        H = scholtes_lagrangian_hessian(prob, x, {0: eta}, {0: nu1}, {0: nu2})
        g1, g2 = F1.grad_at(x), F2.grad_at(x)
        prod = F2(x) * F1.hess_at(x) + np.outer(g2, g1) + np.outer(g1, g2) + F1(x) * F2.hess_at(x)
        want = f.hess_at(x) + eta * prod - nu1 * F1.hess_at(x) - nu2 * F2.hess_at(x)
        assert np.allclose(H, want, atol=1e-10)
        assert np.array_equal(H, H.T)


def test_scholtes_hessian_ndc4_family(ndc4):
    t = 0.5
    H = scholtes_lagrangian_hessian(ndc4, [t / 2, t / 2, 1], eta={1: 1 - t}, nu1={2: 2 - t + t * t})
    assert np.allclose(H, [[0, 2, t - 1], [2, 0, t - 1], [t - 1, t - 1, 2]])


def test_inconsistent_multiplier_keys(ndc4):
    from mpccreg.active import ActivePattern

    with pytest.raises(ValueError):
        mpcc_lagrangian_hessian(ndc4, [0, 0, 1], sigma1={5: 1.0})
    with pytest.raises(ValueError):
        mpcc_lagrangian_hessian(ndc4, [0, 0, 1], sigma1={0: 1.0}, active=ActivePattern.mpcc(a10=[0]))
    with pytest.raises(ValueError):
        scholtes_lagrangian_hessian(ndc4, [0, 0, 1], eta={0: 1.0}, active=ActivePattern.regularized(N1=[0]))
