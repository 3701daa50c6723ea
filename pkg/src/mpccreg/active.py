"""Active sets, multiplier sign partitions and the LICQ-type rank tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .errors import InfeasiblePointError
from .model import EQUALITY, MpccProblem, Variant, feasible_mpcc, feasible_regularized

MPCC = "mpcc"
REGULARIZED = "regularized"


def _idx(values) -> tuple[int, ...]:
    return tuple(sorted(int(j) for j in values))


@dataclass(frozen=True)
class ActivePattern:
    """Active index sets at a point (0-based pair indices).

    On the MPCC side ``a01`` holds pairs with ``F1 = 0 < F2``, ``a10`` the
    mirror case and ``a00`` the biactive pairs.  On the regularized side
    ``H`` holds pairs whose product constraint is active and ``N1``/``N2``
    pairs with a vanishing factor.
    """

    side: str
    a01: tuple[int, ...] = ()
    a10: tuple[int, ...] = ()
    a00: tuple[int, ...] = ()
    H: tuple[int, ...] = ()
    N1: tuple[int, ...] = ()
    N2: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("a01", "a10", "a00", "H", "N1", "N2"):
            object.__setattr__(self, name, _idx(getattr(self, name)))
        if self.side == MPCC:
            a01, a10, a00 = map(set, (self.a01, self.a10, self.a00))
            if a01 & a10 or a01 & a00 or a10 & a00:
                raise ValueError("a01, a10 and a00 must be pairwise disjoint")
        elif self.side == REGULARIZED:
            if set(self.H) & (set(self.N1) | set(self.N2)):
                raise ValueError("H must be disjoint from N1 and N2")
        else:
            raise ValueError(f"unknown side {self.side!r}")

    @classmethod
    def mpcc(cls, a01=(), a10=(), a00=()) -> "ActivePattern":
        return cls(MPCC, a01=a01, a10=a10, a00=a00)

    @classmethod
    def regularized(cls, H=(), N1=(), N2=()) -> "ActivePattern":
        return cls(REGULARIZED, H=H, N1=N1, N2=N2)

    def to_json(self) -> dict:
        if self.side == MPCC:
            return {"side": MPCC, "a01": list(self.a01), "a10": list(self.a10), "a00": list(self.a00)}
        return {"side": REGULARIZED, "H": list(self.H), "N1": list(self.N1), "N2": list(self.N2)}


@dataclass(frozen=True)
class SignPartition:
    """Multiplier-sign refinement of an MPCC active pattern.

    ``a00_mixed`` collects biactive pairs with strictly opposite signs; it
    is empty at every C-stationary point, so there the three ``a00`` sets
    partition ``a00``.
    """

    a01_minus: tuple[int, ...] = ()
    a01_zero: tuple[int, ...] = ()
    a01_plus: tuple[int, ...] = ()
    a10_minus: tuple[int, ...] = ()
    a10_zero: tuple[int, ...] = ()
    a10_plus: tuple[int, ...] = ()
    a00_minus: tuple[int, ...] = ()
    a00_zero: tuple[int, ...] = ()
    a00_plus: tuple[int, ...] = ()
    a00_mixed: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {k: list(getattr(self, k)) for k in self.__dataclass_fields__}


def default_zero_tol(*mults: Mapping[int, float], zero: float = 1e-8) -> float:
    values = [abs(v) for m in mults for v in m.values()]
    return zero * (1.0 + max(values, default=0.0))


def _raise_infeasible(result, what: str):
    worst = ", ".join(f"{k}={v:.3g}" for k, v in sorted(result.violations.items()))
    raise InfeasiblePointError(f"point is infeasible for {what}: {worst}", result.violations)


def mpcc_active(prob: MpccProblem, x, tol: float = 1e-8) -> ActivePattern:
    """Classify each pair at an MPCC-feasible point."""
    feas = feasible_mpcc(prob, x, tol)
    if not feas:
        _raise_infeasible(feas, "the complementarity constraints")
    F1, F2 = prob.values(x)
    z1, z2 = np.abs(F1) <= tol, np.abs(F2) <= tol
    return ActivePattern.mpcc(
        a01=np.flatnonzero(z1 & ~z2),
        a10=np.flatnonzero(~z1 & z2),
        a00=np.flatnonzero(z1 & z2),
    )


def regularized_active(prob: MpccProblem, variant: Variant, x, tol: float = 1e-8) -> ActivePattern:
    """Active sets at a point feasible for ``variant``."""
    feas = feasible_regularized(prob, variant, x, tol)
    if not feas:
        _raise_infeasible(feas, f"the {variant.kind} regularization at t={variant.t:g}")
    F1, F2 = prob.values(x)
    if variant.kind == EQUALITY:
        H = range(prob.kappa)
    else:
        H = np.flatnonzero(np.abs(F1 * F2 - variant.t) <= tol * (1 + variant.t))
    N1 = np.flatnonzero(np.abs(F1) <= tol)
    N2 = np.flatnonzero(np.abs(F2) <= tol)
    # With t well above tol a pair cannot be in H and N at once; near the
    # resolution limit the vanishing factor wins.
    H = [j for j in H if j not in set(N1) | set(N2)]
    return ActivePattern.regularized(H=H, N1=N1, N2=N2)


def sign_partition(
    active: ActivePattern,
    sigma1: Mapping[int, float],
    sigma2: Mapping[int, float],
    rho1: Mapping[int, float],
    rho2: Mapping[int, float],
    zero_tol: float | None = None,
) -> SignPartition:
    """Split the MPCC active sets by multiplier sign."""
    if zero_tol is None:
        zero_tol = default_zero_tol(sigma1, sigma2, rho1, rho2)

    def split(indices, mult):
        minus = [j for j in indices if mult[j] < -zero_tol]
        plus = [j for j in indices if mult[j] > zero_tol]
        zero = [j for j in indices if abs(mult[j]) <= zero_tol]
        return _idx(minus), _idx(zero), _idx(plus)

    a01 = split(active.a01, sigma1)
    a10 = split(active.a10, sigma2)
    minus, zero, plus, mixed = [], [], [], []
    for j in active.a00:
        r1, r2 = rho1[j], rho2[j]
        if abs(r1) <= zero_tol or abs(r2) <= zero_tol:
            zero.append(j)
        elif r1 < 0 and r2 < 0:
            minus.append(j)
        elif r1 > 0 and r2 > 0:
            plus.append(j)
        else:
            mixed.append(j)
    return SignPartition(*a01, *a10, _idx(minus), _idx(zero), _idx(plus), _idx(mixed))


# -- constraint qualifications ----------------------------------------------------


class RankTest(NamedTuple):
    holds: bool
    singular_values: np.ndarray
    rows: np.ndarray


def full_row_rank(rows: np.ndarray, rank_tol: float = 1e-10) -> RankTest:
    """Full row rank via the smallest/largest singular value ratio.

    An empty row set is full rank.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    m, n = rows.shape
    if m == 0:
        return RankTest(True, np.zeros(0), rows)
    s = np.linalg.svd(rows, compute_uv=False)
    if m > n or s[0] == 0.0:
        return RankTest(False, s, rows)
    return RankTest(bool(s[-1] / s[0] > rank_tol), s, rows)


def mpcc_licq_rows(prob: MpccProblem, x, active: ActivePattern) -> np.ndarray:
    J1, J2 = prob.jacobians(x)
    rows = [J1[j] for j in (*active.a01, *active.a00)]
    rows += [J2[j] for j in (*active.a10, *active.a00)]
    return np.array(rows).reshape(len(rows), prob.n)


def licq_rows(prob: MpccProblem, x, active: ActivePattern) -> np.ndarray:
    J1, J2 = prob.jacobians(x)
    rows = [prob.product_gradient(j, x) for j in active.H]
    rows += [J1[j] for j in active.N1]
    rows += [J2[j] for j in active.N2]
    return np.array(rows).reshape(len(rows), prob.n)


def check_mpcc_licq(
    prob: MpccProblem, x, rank_tol: float = 1e-10, tol: float = 1e-8, active=None
) -> RankTest:
    active = active if active is not None else mpcc_active(prob, x, tol)
    return full_row_rank(mpcc_licq_rows(prob, x, active), rank_tol)


def check_licq(
    prob: MpccProblem, variant: Variant, x, rank_tol: float = 1e-10, tol: float = 1e-8, active=None
) -> RankTest:
    active = active if active is not None else regularized_active(prob, variant, x, tol)
    return full_row_rank(licq_rows(prob, x, active), rank_tol)
