"""Multiplier recovery and stationarity classification.

Multipliers solve the stationarity equation in the least-squares sense
with the minimum-norm convention, so a solution is returned even when the
active gradients are dependent; ``unique`` records whether the relevant
constraint qualification certifies it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .active import (
    ActivePattern,
    default_zero_tol,
    full_row_rank,
    licq_rows,
    mpcc_active,
    mpcc_licq_rows,
    regularized_active,
)
from .model import EQUALITY, MpccProblem, Variant


class StationarityClass(str, Enum):
    NOT_STATIONARY = "not-stationary"
    W = "W"
    C = "C"
    M = "M"
    S = "S"

    @property
    def rank(self) -> int:
        return _ORDER.index(self)

    def implies(self, other: "StationarityClass") -> bool:
        """True if a point of this class also belongs to ``other``."""
        return self.rank >= other.rank


_ORDER = list(StationarityClass)


def _fmt(mult: dict[int, float]) -> dict[str, float]:
    return {str(j): float(v) for j, v in sorted(mult.items())}


def _solve(columns: list[np.ndarray], rhs: np.ndarray) -> tuple[np.ndarray, float]:
    if not columns:
        return np.zeros(0), float(np.linalg.norm(rhs))
    A = np.column_stack(columns)
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return sol, float(np.linalg.norm(A @ sol - rhs))


@dataclass(frozen=True)
class MpccMultipliers:
    """Multipliers of ``grad f = sum sigma*DF + sum rho*DF`` on the MPCC side."""

    sigma1: dict[int, float]
    sigma2: dict[int, float]
    rho1: dict[int, float]
    rho2: dict[int, float]
    residual: float
    grad_norm: float
    w_stationary: bool
    unique: bool
    active: ActivePattern

    def values(self) -> list[float]:
        return [*self.sigma1.values(), *self.sigma2.values(), *self.rho1.values(), *self.rho2.values()]

    def zero_tol(self, zero: float = 1e-8) -> float:
        return default_zero_tol(self.sigma1, self.sigma2, self.rho1, self.rho2, zero=zero)

    def to_json(self) -> dict:
        return {
            "sigma1": _fmt(self.sigma1),
            "sigma2": _fmt(self.sigma2),
            "rho1": _fmt(self.rho1),
            "rho2": _fmt(self.rho2),
            "residual": self.residual,
            "wStationary": self.w_stationary,
            "unique": self.unique,
        }


def recover_mpcc_multipliers(
    prob: MpccProblem,
    x,
    active: ActivePattern | None = None,
    stat_tol: float = 1e-8,
    rank_tol: float = 1e-10,
    tol: float = 1e-8,
) -> MpccMultipliers:
    """Least-squares MPCC multipliers at ``x``.

    The point is W-stationary iff the residual is at most
    ``stat_tol * (1 + ||grad f||)``.
    """
    x = prob.check_point(x)
    if active is None:
        active = mpcc_active(prob, x, tol)
    g = prob.f.grad_at(x)
    J1, J2 = prob.jacobians(x)
    cols = [J1[j] for j in active.a01] + [J2[j] for j in active.a10]
    cols += [J1[j] for j in active.a00] + [J2[j] for j in active.a00]
    sol, residual = _solve(cols, g)

    it = iter(sol.tolist())
    sigma1 = {j: next(it) for j in active.a01}
    sigma2 = {j: next(it) for j in active.a10}
    rho1 = {j: next(it) for j in active.a00}
    rho2 = {j: next(it) for j in active.a00}
    gnorm = float(np.linalg.norm(g))
    unique = full_row_rank(mpcc_licq_rows(prob, x, active), rank_tol).holds
    return MpccMultipliers(
        sigma1, sigma2, rho1, rho2, residual, gnorm,
        residual <= stat_tol * (1 + gnorm), unique, active,
    )


def classify(mult: MpccMultipliers, zero_tol: float | None = None) -> StationarityClass:
    """Strongest of W/C/M/S satisfied by the biactive multipliers."""
    if not mult.w_stationary:
        return StationarityClass.NOT_STATIONARY
    z = mult.zero_tol() if zero_tol is None else zero_tol
    c_ok = m_ok = s_ok = True
    for j in mult.active.a00:
        r1, r2 = mult.rho1[j], mult.rho2[j]
        zero_pair = abs(r1) <= z or abs(r2) <= z
        if not zero_pair and (r1 > 0) != (r2 > 0):
            c_ok = False
        if not (zero_pair or (r1 > 0 and r2 > 0)):
            m_ok = False
        if r1 < -z or r2 < -z:
            s_ok = False
    if not c_ok:
        return StationarityClass.W
    if not m_ok:
        return StationarityClass.C
    if not s_ok:
        return StationarityClass.M
    return StationarityClass.S


@dataclass(frozen=True)
class KktMultipliers:
    """Multipliers of ``grad f = -sum eta*g + sum nu1*DF1 + sum nu2*DF2``.

    ``g_j = F2_j DF1_j + F1_j DF2_j`` is the product-constraint gradient.
    ``kkt`` combines the residual test with the sign conditions; for the
    equality smoothing ``eta`` carries no sign condition.
    """

    eta: dict[int, float]
    nu1: dict[int, float]
    nu2: dict[int, float]
    residual: float
    grad_norm: float
    stationary: bool
    signs_ok: bool
    unique: bool
    active: ActivePattern
    variant: Variant

    @property
    def kkt(self) -> bool:
        return self.stationary and self.signs_ok

    def zero_tol(self, zero: float = 1e-8) -> float:
        return default_zero_tol(self.eta, self.nu1, self.nu2, zero=zero)

    def to_json(self) -> dict:
        return {
            "eta": _fmt(self.eta),
            "nu1": _fmt(self.nu1),
            "nu2": _fmt(self.nu2),
            "residual": self.residual,
            "kkt": self.kkt,
            "unique": self.unique,
        }


def recover_kkt_multipliers(
    prob: MpccProblem,
    variant: Variant,
    x,
    active: ActivePattern | None = None,
    stat_tol: float = 1e-8,
    zero: float = 1e-8,
    rank_tol: float = 1e-10,
    tol: float = 1e-8,
) -> KktMultipliers:
    """Least-squares KKT multipliers supported on the active pattern."""
    x = prob.check_point(x)
    if active is None:
        active = regularized_active(prob, variant, x, tol)
    g = prob.f.grad_at(x)
    J1, J2 = prob.jacobians(x)
    cols = [-prob.product_gradient(j, x) for j in active.H]
    cols += [J1[j] for j in active.N1] + [J2[j] for j in active.N2]
    sol, residual = _solve(cols, g)

    it = iter(sol.tolist())
    eta = {j: next(it) for j in active.H}
    nu1 = {j: next(it) for j in active.N1}
    nu2 = {j: next(it) for j in active.N2}
    z = default_zero_tol(eta, nu1, nu2, zero=zero)
    signed = [*nu1.values(), *nu2.values()]
    if variant.kind != EQUALITY:
        signed += list(eta.values())
    gnorm = float(np.linalg.norm(g))
    unique = full_row_rank(licq_rows(prob, x, active), rank_tol).holds
    return KktMultipliers(
        eta, nu1, nu2, residual, gnorm,
        residual <= stat_tol * (1 + gnorm),
        all(v >= -z for v in signed),
        unique, active, variant,
    )
