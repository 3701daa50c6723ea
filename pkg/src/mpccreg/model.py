"""Problem instances, feasible sets and Lagrangian Hessians.

An instance is ``min f(x)`` subject to ``F1_j(x) * F2_j(x) = 0``,
``F1_j(x) >= 0``, ``F2_j(x) >= 0`` for ``j = 0..kappa-1``.  The Scholtes
regularization relaxes the product constraint to ``F1_j F2_j <= t`` and
the equality smoothing replaces it by ``F1_j F2_j = t``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import InputError
from .poly import Poly

SCHOLTES = "scholtes"
EQUALITY = "equality"


@dataclass(frozen=True)
class Variant:
    """Regularization kind plus parameter ``t > 0``."""

    kind: str
    t: float

    def __post_init__(self):
        if self.kind not in (SCHOLTES, EQUALITY):
            raise InputError(f"unknown variant kind {self.kind!r}")
        if not (np.isfinite(self.t) and self.t > 0):
            raise InputError(f"regularization parameter must be positive, got {self.t!r}")

    def at(self, t: float) -> "Variant":
        return Variant(self.kind, t)


@dataclass(frozen=True)
class MpccProblem:
    n: int
    kappa: int
    f: Poly
    F1: tuple[Poly, ...]
    F2: tuple[Poly, ...]
    name: str = "unnamed"

    def __post_init__(self):
        object.__setattr__(self, "F1", tuple(self.F1))
        object.__setattr__(self, "F2", tuple(self.F2))
        if self.kappa < 1:
            raise InputError("at least one complementarity pair is required")
        if len(self.F1) != self.kappa or len(self.F2) != self.kappa:
            raise InputError(
                f"expected {self.kappa} functions in F1 and F2, "
                f"got {len(self.F1)} and {len(self.F2)}"
            )
        for p in (self.f, *self.F1, *self.F2):
            if p.nvars != self.n:
                raise InputError(f"polynomial has {p.nvars} variables, expected {self.n}")

    # -- serialization ----------------------------------------------------------

    @classmethod
    def from_json(cls, data: Mapping) -> "MpccProblem":
        try:
            n = data["n"]
            kappa = data["kappa"]
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise InputError(f"'n' must be a positive integer, got {n!r}")
            if isinstance(kappa, bool) or not isinstance(kappa, int):
                raise InputError(f"'kappa' must be an integer, got {kappa!r}")
            f = Poly.from_json(data["f"], n)
            F1 = [Poly.from_json(p, n) for p in data["F1"]]
            F2 = [Poly.from_json(p, n) for p in data["F2"]]
        except KeyError as exc:
            raise InputError(f"problem is missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed problem: {exc}") from None
        return cls(n, kappa, f, F1, F2, str(data.get("name", "unnamed")))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "kappa": self.kappa,
            "f": self.f.to_json(),
            "F1": [p.to_json() for p in self.F1],
            "F2": [p.to_json() for p in self.F2],
        }

    @classmethod
    def load(cls, path: str | Path) -> "MpccProblem":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read problem file {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"problem file {path} is not valid JSON: {exc}") from None
        return cls.from_json(data)

    @cached_property
    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- evaluation -------------------------------------------------------------

    @cached_property
    def products(self) -> tuple[Poly, ...]:
        return tuple(a * b for a, b in zip(self.F1, self.F2))

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise InputError(f"point has shape {x.shape}, expected ({self.n},)")
        if not np.all(np.isfinite(x)):
            raise InputError("point has non-finite coordinates")
        return x

    def values(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(F1(x), F2(x))`` as arrays of length kappa."""
        x = self.check_point(x)
        return np.array([p(x) for p in self.F1]), np.array([p(x) for p in self.F2])

    def jacobians(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Rows are the gradients of ``F1_j`` and ``F2_j``."""
        x = self.check_point(x)
        return (
            np.array([p.grad_at(x) for p in self.F1]),
            np.array([p.grad_at(x) for p in self.F2]),
        )

    def product_gradient(self, j: int, x) -> np.ndarray:
        """``F2_j DF1_j + F1_j DF2_j``."""
        return self.products[j].grad_at(self.check_point(x))


# -- feasibility ----------------------------------------------------------------


@dataclass(frozen=True)
class Feasibility:
    """Result of a feasibility test.

    ``residuals`` holds every constraint value by label; ``violations``
    only those outside the tolerance, as signed excess.
    """

    feasible: bool
    residuals: dict[str, float]
    violations: dict[str, float] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.feasible


def _sign_checks(F1, F2, tol, residuals, violations):
    for j, (a, b) in enumerate(zip(F1, F2)):
        residuals[f"F1[{j}]"] = float(a)
        residuals[f"F2[{j}]"] = float(b)
        if a < -tol * (1 + abs(a)):
            violations[f"F1[{j}]"] = float(a)
        if b < -tol * (1 + abs(b)):
            violations[f"F2[{j}]"] = float(b)


def feasible_mpcc(prob: MpccProblem, x, tol: float = 1e-8) -> Feasibility:
    """Test ``x`` against the complementarity constraints."""
    if not tol > 0:
        raise InputError("tolerance must be positive")
    F1, F2 = prob.values(x)
    residuals, violations = {}, {}
    _sign_checks(F1, F2, tol, residuals, violations)
    for j, p in enumerate(F1 * F2):
        residuals[f"F1F2[{j}]"] = float(p)
        if abs(p) > tol * (1 + abs(p)):
            violations[f"F1F2[{j}]"] = float(p)
    return Feasibility(not violations, residuals, violations)


def feasible_regularized(prob: MpccProblem, variant: Variant, x, tol: float = 1e-8) -> Feasibility:
    """Test ``x`` against the regularized constraints of ``variant``."""
    if not tol > 0:
        raise InputError("tolerance must be positive")
    F1, F2 = prob.values(x)
    t = variant.t
    residuals, violations = {}, {}
    _sign_checks(F1, F2, tol, residuals, violations)
    for j, p in enumerate(F1 * F2):
        residuals[f"F1F2[{j}]"] = float(p)
        excess = p - t
        bound = tol * (1 + abs(p))
        if variant.kind == EQUALITY:
            bad = abs(excess) > bound
        else:
            bad = excess > bound
        if bad:
            violations[f"F1F2[{j}]"] = float(excess)
    return Feasibility(not violations, residuals, violations)


# -- Lagrangian Hessians -----------------------------------------------------------


def _check_keys(mult: Mapping[int, float], allowed, label: str, kappa: int):
    for j in mult:
        if not 0 <= j < kappa:
            raise ValueError(f"{label} multiplier index {j} out of range")
        if allowed is not None and j not in allowed:
            raise ValueError(f"{label} multiplier index {j} is not in the active set")


def mpcc_lagrangian_hessian(
    prob: MpccProblem,
    x,
    sigma1: Mapping[int, float] | None = None,
    sigma2: Mapping[int, float] | None = None,
    rho1: Mapping[int, float] | None = None,
    rho2: Mapping[int, float] | None = None,
    active=None,
) -> np.ndarray:
    """Hessian of ``f - sum(mult * F)`` over the MPCC multipliers.

    ``sigma1`` lives on ``a01``, ``sigma2`` on ``a10`` and ``rho1``/``rho2``
    on ``a00``.  When ``active`` is given the keys are checked against it.
    """
    x = prob.check_point(x)
    sigma1, sigma2 = dict(sigma1 or {}), dict(sigma2 or {})
    rho1, rho2 = dict(rho1 or {}), dict(rho2 or {})
    sets = (None, None, None) if active is None else (active.a01, active.a10, active.a00)
    _check_keys(sigma1, sets[0], "sigma1", prob.kappa)
    _check_keys(sigma2, sets[1], "sigma2", prob.kappa)
    _check_keys(rho1, sets[2], "rho1", prob.kappa)
    _check_keys(rho2, sets[2], "rho2", prob.kappa)
    if set(sigma1) & set(rho1) or set(sigma2) & set(rho2):
        raise ValueError("an index carries both a non-biactive and a biactive multiplier")

    H = prob.f.hess_at(x)
    for mult, funcs in ((sigma1, prob.F1), (rho1, prob.F1), (sigma2, prob.F2), (rho2, prob.F2)):
        for j, m in mult.items():
            if m:
                H -= m * funcs[j].hess_at(x)
    return H


def scholtes_lagrangian_hessian(
    prob: MpccProblem,
    x,
    eta: Mapping[int, float] | None = None,
    nu1: Mapping[int, float] | None = None,
    nu2: Mapping[int, float] | None = None,
    active=None,
) -> np.ndarray:
    """Hessian of ``f + sum(eta * F1 F2) - sum(nu1 * F1) - sum(nu2 * F2)``.

    The product Hessian is taken from the exact product polynomial, which
    equals ``F2 D2F1 + grad F2 DF1 + grad F1 DF2 + F1 D2F2``.
    """
    x = prob.check_point(x)
    eta, nu1, nu2 = dict(eta or {}), dict(nu1 or {}), dict(nu2 or {})
    sets = (None, None, None) if active is None else (active.H, active.N1, active.N2)
    _check_keys(eta, sets[0], "eta", prob.kappa)
    _check_keys(nu1, sets[1], "nu1", prob.kappa)
    _check_keys(nu2, sets[2], "nu2", prob.kappa)

    H = prob.f.hess_at(x)
    for j, m in eta.items():
        if m:
            H += m * prob.products[j].hess_at(x)
    for mult, funcs in ((nu1, prob.F1), (nu2, prob.F2)):
        for j, m in mult.items():
            if m:
                H -= m * funcs[j].hess_at(x)
    return H
