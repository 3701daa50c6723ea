"""Tangent spaces, inertia, index reports and second-order conditions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .active import (
    MPCC,
    REGULARIZED,
    ActivePattern,
    SignPartition,
    full_row_rank,
    licq_rows,
    mpcc_active,
    mpcc_licq_rows,
    regularized_active,
    sign_partition,
)
from .errors import NotKktError, NotStationaryError
from .model import EQUALITY, MpccProblem, Variant, mpcc_lagrangian_hessian, scholtes_lagrangian_hessian
from .stationarity import (
    KktMultipliers,
    MpccMultipliers,
    StationarityClass,
    classify,
    recover_kkt_multipliers,
    recover_mpcc_multipliers,
)
from .tolerances import DEFAULT, Tolerances

HOLDS = "holds"
FAILS = "fails"
INDETERMINATE = "indeterminate-on-cone"

CONE_SAMPLES = 1000
CONE_SEED = 20240601


# -- linear algebra --------------------------------------------------------------


@dataclass(frozen=True)
class TangentBasis:
    """Orthonormal basis (as columns) of the null space of ``rows``."""

    columns: np.ndarray
    rows: np.ndarray

    @property
    def dim(self) -> int:
        return self.columns.shape[1]


def null_space_basis(rows, n: int | None = None, rank_tol: float = 1e-10) -> TangentBasis:
    rows = np.asarray(rows, dtype=float)
    if n is None:
        n = rows.shape[1]
    rows = rows.reshape(-1, n)
    if rows.shape[0] == 0:
        return TangentBasis(np.eye(n), rows)
    _, s, vt = np.linalg.svd(rows)
    rank = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
    return TangentBasis(vt[rank:].T.copy(), rows)


class Inertia(NamedTuple):
    neg: int
    zero: int
    pos: int


def inertia(matrix, eig_zero_tol: float = 1e-9) -> Inertia:
    """Eigenvalue sign counts; ``|lam| <= tol * (1 + max |lam|)`` counts as zero."""
    M = np.array(matrix, dtype=float)
    if M.size == 0:
        return Inertia(0, 0, 0)
    lam = np.linalg.eigvalsh((M + M.T) / 2)
    band = eig_zero_tol * (1 + np.max(np.abs(lam)))
    return Inertia(int(np.sum(lam < -band)), int(np.sum(np.abs(lam) <= band)), int(np.sum(lam > band)))


def restrict(hessian: np.ndarray, basis: TangentBasis) -> np.ndarray:
    Z = basis.columns
    R = Z.T @ hessian @ Z
    return (R + R.T) / 2


def mpcc_tangent_space(prob: MpccProblem, x, active: ActivePattern | None = None,
                       tol: Tolerances = DEFAULT) -> TangentBasis:
    active = active if active is not None else mpcc_active(prob, x, tol.active)
    return null_space_basis(mpcc_licq_rows(prob, x, active), prob.n, tol.rank)


def kkt_tangent_space(prob: MpccProblem, variant: Variant, x, active: ActivePattern | None = None,
                      tol: Tolerances = DEFAULT) -> TangentBasis:
    active = active if active is not None else regularized_active(prob, variant, x, tol.active)
    return null_space_basis(licq_rows(prob, x, active), prob.n, tol.rank)


def tangent_space(prob: MpccProblem, x, variant: Variant | None = None,
                  tol: Tolerances = DEFAULT) -> TangentBasis:
    """Tangent space of the MPCC (``variant`` None) or of the regularized set."""
    if variant is None:
        return mpcc_tangent_space(prob, x, tol=tol)
    return kkt_tangent_space(prob, variant, x, tol=tol)


# -- reports ------------------------------------------------------------------------


@dataclass(frozen=True)
class IndexReport:
    """Quadratic/biactive/C-index and nondegeneracy flags.

    ``flags`` holds NDC1..NDC4 on the MPCC side and ND1..ND3 on the
    regularized side.  ``ci`` is None unless NDC1-NDC3 hold; it is always
    None on the regularized side.
    """

    side: str
    qi: int
    bi: int
    ci: int | None
    zero_eigs: int
    pos_eigs: int
    tangent_dim: int
    flags: tuple[bool, ...]

    @property
    def ndc(self) -> tuple[bool, ...]:
        if self.side != MPCC:
            raise AttributeError("NDC flags exist only on the MPCC side")
        return self.flags

    @property
    def nd(self) -> tuple[bool, ...]:
        if self.side != REGULARIZED:
            raise AttributeError("ND flags exist only on the regularized side")
        return self.flags

    @property
    def nondegenerate(self) -> bool:
        return all(self.flags[:3])

    def to_json(self) -> dict:
        out = {
            "qi": self.qi,
            "zeroEigs": self.zero_eigs,
            "posEigs": self.pos_eigs,
            "tangentDim": self.tangent_dim,
        }
        if self.side == MPCC:
            out.update(bi=self.bi, ci=self.ci, ndc=list(self.flags))
        else:
            out["nd"] = list(self.flags)
        return out


@dataclass(frozen=True)
class MpccAnalysis:
    x: np.ndarray
    active: ActivePattern
    multipliers: MpccMultipliers
    stationarity: StationarityClass
    partition: SignPartition
    report: IndexReport
    hessian: np.ndarray
    tangent: TangentBasis
    second_order: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "point": self.x.tolist(),
            "pattern": self.active.to_json(),
            "multipliers": self.multipliers.to_json(),
            "class": self.stationarity.value,
            "signPartition": self.partition.to_json(),
            "indices": self.report.to_json(),
            "secondOrder": dict(self.second_order),
            "hessian": self.hessian.tolist(),
        }


@dataclass(frozen=True)
class KktAnalysis:
    x: np.ndarray
    variant: Variant
    active: ActivePattern
    multipliers: KktMultipliers
    report: IndexReport
    hessian: np.ndarray
    tangent: TangentBasis
    second_order: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "point": self.x.tolist(),
            "variant": {"kind": self.variant.kind, "t": self.variant.t},
            "pattern": self.active.to_json(),
            "multipliers": self.multipliers.to_json(),
            "indices": self.report.to_json(),
            "secondOrder": dict(self.second_order),
            "hessian": self.hessian.tolist(),
        }


def _positive_on_subspace(H: np.ndarray, basis: TangentBasis, eig_zero: float) -> bool:
    neg, zero, _ = inertia(restrict(H, basis), eig_zero)
    return neg == 0 and zero == 0


def _cone_samples(B: np.ndarray, dim: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Points ``w`` with ``B w >= 0``, drawn around the cone's generators."""
    N = null_space_basis(B, dim).columns
    P = np.linalg.pinv(B)
    out = []
    for _ in range(count):
        s = np.abs(rng.standard_normal(B.shape[0]))
        w = P @ s
        if N.shape[1]:
            w = w + N @ rng.standard_normal(N.shape[1])
        if np.all(B @ w >= -1e-12 * (1 + np.linalg.norm(w))):
            out.append(w)
    # Rejection sampling tops up when B has dependent rows.
    tries = 0
    while len(out) < count and tries < 100 * count:
        tries += 1
        w = rng.standard_normal(dim)
        if np.all(B @ w >= 0):
            out.append(w)
    return np.array(out).reshape(-1, dim)


def _mpcc_soc(prob, x, active, mult, part, H, tol: Tolerances) -> str:
    J1, J2 = prob.jacobians(x)
    z = mult.zero_tol(tol.zero)
    eq = [J1[j] for j in active.a01] + [J2[j] for j in active.a10]
    ineq = []
    for j in active.a00:
        (eq if mult.rho1[j] > z else ineq).append(J1[j])
        (eq if mult.rho2[j] > z else ineq).append(J2[j])
    Z = null_space_basis(np.array(eq).reshape(-1, prob.n), prob.n, tol.rank)
    if Z.dim == 0:
        return HOLDS
    R = restrict(H, Z)
    if not ineq:
        return HOLDS if _positive_on_subspace(H, Z, tol.eig_zero) else FAILS
    B = np.array(ineq) @ Z.columns
    lineality = null_space_basis(B, Z.dim, tol.rank)
    if lineality.dim and not _positive_on_subspace(R, lineality, tol.eig_zero):
        return FAILS
    if _positive_on_subspace(R, TangentBasis(np.eye(Z.dim), np.zeros((0, Z.dim))), tol.eig_zero):
        return HOLDS
    rng = np.random.default_rng(CONE_SEED)
    for w in _cone_samples(B, Z.dim, rng, CONE_SAMPLES):
        nw = np.linalg.norm(w)
        if nw == 0:
            continue
        w = w / nw
        if w @ R @ w <= tol.eig_zero * (1 + np.max(np.abs(R))):
            return FAILS
    return INDETERMINATE


def mpcc_index_report(prob: MpccProblem, x, tol: Tolerances = DEFAULT,
                      active: ActivePattern | None = None) -> MpccAnalysis:
    """Full MPCC-side analysis of a W-stationary point.

    Raises
    ------
    InfeasiblePointError
        If ``x`` is not feasible.
    NotStationaryError
        If the stationarity residual exceeds the tolerance.
    """
    x = prob.check_point(x)
    if active is None:
        active = mpcc_active(prob, x, tol.active)
    mult = recover_mpcc_multipliers(prob, x, active, tol.stat, tol.rank, tol.active)
    if not mult.w_stationary:
        raise NotStationaryError(
            f"stationarity residual {mult.residual:.3e} exceeds tolerance at {x.tolist()}"
        )
    z = mult.zero_tol(tol.zero)
    cls = classify(mult, z)
    part = sign_partition(active, mult.sigma1, mult.sigma2, mult.rho1, mult.rho2, z)

    ndc1 = mult.unique
    ndc2 = all(
        abs(mult.rho1[j]) > z and abs(mult.rho2[j]) > z and (mult.rho1[j] > 0) == (mult.rho2[j] > 0)
        for j in active.a00
    )
    H = mpcc_lagrangian_hessian(prob, x, mult.sigma1, mult.sigma2, mult.rho1, mult.rho2, active)
    T = null_space_basis(mpcc_licq_rows(prob, x, active), prob.n, tol.rank)
    neg, zero, pos = inertia(restrict(H, T), tol.eig_zero)
    ndc3 = zero == 0
    ndc4 = not part.a01_zero and not part.a10_zero
    bi = len(part.a00_minus)
    ci = neg + bi if (ndc1 and ndc2 and ndc3) else None
    report = IndexReport(MPCC, neg, bi, ci, zero, pos, T.dim, (ndc1, ndc2, ndc3, ndc4))

    second = {}
    if cls != StationarityClass.S:
        second = {"SSOSC": FAILS, "MPCC-SOC": FAILS}
    elif not ndc1:
        second = {"SSOSC": INDETERMINATE, "MPCC-SOC": INDETERMINATE}
    else:
        J1, J2 = prob.jacobians(x)
        rows = [J1[j] for j in (*part.a01_minus, *part.a01_plus)]
        rows += [J2[j] for j in (*part.a10_minus, *part.a10_plus)]
        rows += [J1[j] for j in active.a00 if mult.rho1[j] > z]
        rows += [J2[j] for j in active.a00 if mult.rho2[j] > z]
        C = null_space_basis(np.array(rows).reshape(-1, prob.n), prob.n, tol.rank)
        second["SSOSC"] = HOLDS if _positive_on_subspace(H, C, tol.eig_zero) else FAILS
        second["MPCC-SOC"] = _mpcc_soc(prob, x, active, mult, part, H, tol)
    return MpccAnalysis(x, active, mult, cls, part, report, H, T, second)


def kkt_index_report(prob: MpccProblem, variant: Variant, x, tol: Tolerances = DEFAULT,
                     active: ActivePattern | None = None) -> KktAnalysis:
    """Regularized-side analysis of a KKT point.

    ND2 requires every active inequality multiplier to exceed the zero
    band.  For the equality smoothing the product constraints are
    equalities, so their multipliers are exempt.

    Raises
    ------
    InfeasiblePointError
        If ``x`` is not feasible for ``variant``.
    NotKktError
        If the KKT residual or sign test fails.
    """
    x = prob.check_point(x)
    if active is None:
        active = regularized_active(prob, variant, x, tol.active)
    mult = recover_kkt_multipliers(prob, variant, x, active, tol.stat, tol.zero, tol.rank, tol.active)
    if not mult.kkt:
        raise NotKktError(
            f"not a KKT point at {x.tolist()} (residual {mult.residual:.3e}, "
            f"signs {'ok' if mult.signs_ok else 'violated'})"
        )
    z = mult.zero_tol(tol.zero)
    nd1 = mult.unique
    strict = [*mult.nu1.values(), *mult.nu2.values()]
    if variant.kind != EQUALITY:
        strict += list(mult.eta.values())
    nd2 = all(v > z for v in strict)
    H = scholtes_lagrangian_hessian(prob, x, mult.eta, mult.nu1, mult.nu2, active)
    T = null_space_basis(licq_rows(prob, x, active), prob.n, tol.rank)
    neg, zero, pos = inertia(restrict(H, T), tol.eig_zero)
    report = IndexReport(REGULARIZED, neg, 0, None, zero, pos, T.dim, (nd1, nd2, zero == 0))

    # SONC on the critical subspace built from strictly positive multipliers.
    if not nd1:
        sonc = INDETERMINATE
    else:
        J1, J2 = prob.jacobians(x)
        rows = [prob.product_gradient(j, x) for j in active.H
                if variant.kind == EQUALITY or mult.eta[j] > z]
        rows += [J1[j] for j in active.N1 if mult.nu1[j] > z]
        rows += [J2[j] for j in active.N2 if mult.nu2[j] > z]
        C = null_space_basis(np.array(rows).reshape(-1, prob.n), prob.n, tol.rank)
        sonc = HOLDS if inertia(restrict(H, C), tol.eig_zero).neg == 0 else FAILS
    return KktAnalysis(x, variant, active, mult, report, H, T, {"SONC": sonc})


def second_order_conditions(prob: MpccProblem, x, variant: Variant | None = None,
                            tol: Tolerances = DEFAULT) -> dict[str, str]:
    """SSOSC and MPCC-SOC at an MPCC point, or SONC at a KKT point."""
    if variant is None:
        return mpcc_index_report(prob, x, tol).second_order
    return kkt_index_report(prob, variant, x, tol).second_order
