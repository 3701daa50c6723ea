"""Shared problem builders and independent oracles for the tests."""

import itertools

import numpy as np

from mpccreg.model import MpccProblem
from mpccreg.poly import Poly


def derived_ndc4_problem() -> MpccProblem:
    """The ndc4 constraints with objective -2x1 - x2 + 2x1x2 + x3^2.

    At (0, 0, 1) the multipliers are (-1, -1, 2), all nonzero.
    """
    x1, x2, x3 = Poly.variables(3)
    return MpccProblem(
        3, 3, -2 * x1 - x2 + 2 * x1 * x2 + x3**2,
        [x1, x1 + x2, x3 - 1], [x3 - 2 * x2, 2 - x3, x1 - x2 + x3], "derived-ndc4",
    )


def standard_pair(f: Poly, name: str = "pair") -> MpccProblem:
    """Single pair F1 = x1, F2 = x2 in two variables."""
    x1, x2 = Poly.variables(2)
    return MpccProblem(2, 1, f, [x1], [x2], name)


def random_poly(rng, nvars: int, degree: int = 3, terms: int = 6) -> Poly:
    out = []
    for _ in range(terms):
        e = rng.multinomial(int(rng.integers(0, degree + 1)), np.ones(nvars + 1) / (nvars + 1))[:nvars]
        out.append((rng.uniform(-2, 2), e))
    return Poly(nvars, out)


def naive_eval(p: Poly, x) -> float:
    total = 0.0
    for exps, coef in p.terms:
        term = coef
        for xi, e in zip(x, exps):
            for _ in range(e):
                term *= xi
        total += term
    return total


def fd_gradient(fun, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def fd_jacobian(fun, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.column_stack(cols)


def ldl_inertia(M):
    """Inertia via an LDL^T factorization (Sylvester's law of inertia)."""
    from scipy.linalg import ldl

    _, D, _ = ldl(M)
    neg = pos = 0
    i = 0
    n = D.shape[0]
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0:
            ev = np.linalg.eigvalsh(D[i:i + 2, i:i + 2])
            neg += int(np.sum(ev < 0))
            pos += int(np.sum(ev > 0))
            i += 2
        else:
            neg += int(D[i, i] < 0)
            pos += int(D[i, i] > 0)
            i += 1
    return neg, n - neg - pos, pos


def project(prob: MpccProblem, x, equalities, iters=50):
    """Gauss-Newton projection onto {p(x) = value} for (poly, value) pairs."""
    x = np.array(x, dtype=float)
    for _ in range(iters):
        r = np.array([p(x) - v for p, v in equalities])
        if r.size == 0 or np.max(np.abs(r)) < 1e-15:
            break
        J = np.array([p.grad_at(x) for p, _ in equalities])
        x = x - np.linalg.pinv(J) @ r
    return x


def all_patterns(kappa):
    """Every assignment of each pair to inactive / product / F1 / F2 / both factors."""
    return itertools.product(("free", "H", "N1", "N2", "N12"), repeat=kappa)
