"""Seeding, Newton correction and path tracing of regularized KKT points.

The corrector solves the KKT equations with a fixed active pattern: the
stationarity equation in ``(x, eta, nu1, nu2)`` plus the active
constraints as equalities.  Steps are minimum-norm least-squares
solutions, so on a continuum of KKT points (singular Jacobian with a
consistent right-hand side) the iterate moves orthogonally onto it
instead of failing.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .active import ActivePattern, SignPartition, regularized_active
from .errors import (
    CorrectorError,
    InfeasiblePointError,
    InputError,
    MpccError,
    PreconditionError,
    SeedError,
)
from .indices import IndexReport, KktAnalysis, MpccAnalysis, kkt_index_report, mpcc_index_report
from .model import EQUALITY, MpccProblem, Variant, scholtes_lagrangian_hessian
from .stationarity import MpccMultipliers, StationarityClass, recover_mpcc_multipliers
from .tolerances import DEFAULT, Tolerances

FROM_C_STATIONARY = "from-c-stationary"
FROM_PREVIOUS = "from-previous-step"
USER = "user"

CONVERGED_NONDEGENERATE = "converged-nondegenerate"
CONVERGED_DEGENERATE = "converged-degenerate"
DIVERGED = "diverged"
BIFURCATION = "bifurcation-suspected"


@dataclass(frozen=True)
class KktSeed:
    """Starting point and predicted active pattern for the corrector.

    ``eta``/``nu1``/``nu2`` optionally carry predicted multipliers;
    ``unassigned`` lists pairs the prediction leaves open (zero
    non-biactive multipliers) and which are therefore not constrained.
    """

    x0: np.ndarray
    pattern: ActivePattern
    source: str = USER
    eta: dict[int, float] | None = None
    nu1: dict[int, float] | None = None
    nu2: dict[int, float] | None = None
    unassigned: tuple[int, ...] = ()


# -- seeding ----------------------------------------------------------------------


def _solve_targets(prob: MpccProblem, x, targets, iters: int = 30) -> np.ndarray:
    """Min-norm Gauss-Newton displacement placing ``F`` values on targets."""
    x = np.array(x, dtype=float)
    if not targets:
        return x
    for _ in range(iters):
        r = np.array([p(x) - v for p, v in targets])
        if np.max(np.abs(r)) <= 1e-14 * (1 + np.max(np.abs([v for _, v in targets]))):
            break
        J = np.array([p.grad_at(x) for p, _ in targets])
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        x = x + step
        if np.linalg.norm(step) <= 1e-15 * (1 + np.linalg.norm(x)):
            break
    return x


def seed_from_cstationary(
    prob: MpccProblem,
    variant: Variant,
    xbar,
    mult: MpccMultipliers,
    partition: SignPartition,
    t: float,
) -> KktSeed:
    """Place a starting point near ``xbar`` for the regularized problem at ``t``.

    Pairs with a negative multiplier move onto the product boundary
    ``F1 F2 = t``; pairs with a positive multiplier stay on the vanishing
    factor.  Biactive pairs with multipliers ``rho1, rho2`` of equal sign
    are placed at ``F1 = |rho2| sqrt(t / (rho1 rho2))`` and
    ``F2 = |rho1| sqrt(t / (rho1 rho2))``.  The displacement is the
    min-norm solution of those targets, which reduces to coordinate
    placement for problems whose pairs are plain variables.

    Raises
    ------
    SeedError
        If a biactive pair has ``rho1 * rho2 <= 0``.
    """
    xbar = prob.check_point(xbar)
    variant = variant.at(t)
    F1, F2 = prob.values(xbar)
    act = mult.active
    targets, H, N1, N2 = [], [], [], []
    eta, nu1, nu2 = {}, {}, {}

    for j in act.a00:
        r1, r2 = mult.rho1[j], mult.rho2[j]
        if not r1 * r2 > 0:
            raise SeedError(f"biactive pair {j} has multipliers ({r1:g}, {r2:g}) with product <= 0")
    equality = variant.kind == EQUALITY
    bi_product = set(act.a00) if equality else set(partition.a00_minus)

    for j in act.a00:
        r1, r2 = mult.rho1[j], mult.rho2[j]
        if j in bi_product:
            s = math.sqrt(t / (r1 * r2))
            f1 = abs(r2) * s
            targets += [(prob.F1[j], f1), (prob.F2[j], abs(r1) * s)]
            H.append(j)
            eta[j] = -r1 * f1 / t
        else:
            targets += [(prob.F1[j], 0.0), (prob.F2[j], 0.0)]
            N1.append(j)
            N2.append(j)
            nu1[j], nu2[j] = r1, r2

    unassigned = []
    for j in act.a01:
        s = mult.sigma1[j]
        if equality or j in partition.a01_minus:
            targets.append((prob.F1[j], t / F2[j]))
            H.append(j)
            eta[j] = -s / F2[j]
        elif j in partition.a01_plus:
            targets.append((prob.F1[j], 0.0))
            N1.append(j)
            nu1[j] = s
        else:
            unassigned.append(j)
    for j in act.a10:
        s = mult.sigma2[j]
        if equality or j in partition.a10_minus:
            targets.append((prob.F2[j], t / F1[j]))
            H.append(j)
            eta[j] = -s / F1[j]
        elif j in partition.a10_plus:
            targets.append((prob.F2[j], 0.0))
            N2.append(j)
            nu2[j] = s
        else:
            unassigned.append(j)
    if equality:
        # Every pair is product-active; inactive pairs (both factors
        # positive) move onto F1 F2 = t along F1 with zero multiplier.
        rest = set(range(prob.kappa)) - set(H)
        for j in sorted(rest):
            targets.append((prob.F1[j], t / F2[j]))
            H.append(j)
            eta[j] = 0.0

    x0 = _solve_targets(prob, xbar, targets)
    pattern = ActivePattern.regularized(H=H, N1=N1, N2=N2)
    return KktSeed(x0, pattern, FROM_C_STATIONARY, eta, nu1, nu2, tuple(sorted(unassigned)))


def predict_pattern(prob: MpccProblem, variant: Variant, x, margin: float = 0.0) -> ActivePattern:
    """Pattern of constraints violated or within ``margin`` of activity at ``x``.

    Used for seeds without a known pattern.  A vanishing factor takes
    precedence over the product constraint.
    """
    F1, F2 = prob.values(x)
    N1 = [j for j in range(prob.kappa) if F1[j] <= margin]
    N2 = [j for j in range(prob.kappa) if F2[j] <= margin]
    if variant.kind == EQUALITY:
        return ActivePattern.regularized(H=range(prob.kappa))
    H = [j for j in range(prob.kappa)
         if F1[j] * F2[j] >= variant.t - margin and j not in N1 and j not in N2]
    return ActivePattern.regularized(H=H, N1=N1, N2=N2)


# -- Newton corrector -----------------------------------------------------------------


def _fb(a, b):
    r = np.hypot(a, b)
    val = r - a - b
    safe = np.where(r > 0, r, 1.0)
    da = np.where(r > 0, a / safe, 1 / math.sqrt(2)) - 1
    db = np.where(r > 0, b / safe, 1 / math.sqrt(2)) - 1
    return val, da, db


def _fb_system(prob, variant, z):
    n, k = prob.n, prob.kappa
    x, eta, nu1, nu2 = z[:n], z[n:n + k], z[n + k:n + 2 * k], z[n + 2 * k:]
    F1, F2 = prob.values(x)
    J1, J2 = prob.jacobians(x)
    G = np.array([prob.product_gradient(j, x) for j in range(k)])
    rx = prob.f.grad_at(x) + G.T @ eta - J1.T @ nu1 - J2.T @ nu2
    D = scholtes_lagrangian_hessian(
        prob, x, dict(enumerate(eta)), dict(enumerate(nu1)), dict(enumerate(nu2))
    )
    gap = variant.t - F1 * F2
    if variant.kind == EQUALITY:
        rh, dh_eta, dh_x = -gap, np.zeros((k, k)), G
    else:
        v, da, db = _fb(eta, gap)
        rh, dh_eta, dh_x = v, np.diag(da), -db[:, None] * G
    v1, a1, b1 = _fb(nu1, F1)
    v2, a2, b2 = _fb(nu2, F2)
    Z = np.zeros((k, k))
    J = np.block([
        [D, G.T, -J1.T, -J2.T],
        [dh_x, dh_eta, Z, Z],
        [b1[:, None] * J1, Z, np.diag(a1), Z],
        [b2[:, None] * J2, Z, Z, np.diag(a2)],
    ])
    return np.concatenate([rx, rh, v1, v2]), J


def complementarity_solve(prob: MpccProblem, variant: Variant, x0, tol: float = 1e-11,
                          max_iter: int = 100):
    """Locate a KKT point from an arbitrary start without a known pattern.

    Semismooth Newton on the Fischer-Burmeister reformulation of the KKT
    conditions with backtracking on the squared residual.  Returns the
    point, its active pattern and the strictly active part of that
    pattern (positive multipliers).  Used to seed :func:`newton_kkt` from
    random starts.
    """
    n, k = prob.n, prob.kappa
    z = np.concatenate([prob.check_point(x0), np.zeros(3 * k)])
    r, J = _fb_system(prob, variant, z)
    merit = float(r @ r)
    for _ in range(max_iter):
        if math.sqrt(merit) <= tol:
            break
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        s = 1.0
        while s > 1e-8:
            trial = z + s * step
            r_t, J_t = _fb_system(prob, variant, trial)
            m_t = float(r_t @ r_t)
            if np.isfinite(m_t) and m_t <= (1 - 1e-4 * s) * merit:
                break
            s *= 0.5
        else:
            raise CorrectorError("complementarity phase stalled", "max-iter")
        z, r, J, merit = trial, r_t, J_t, m_t
    else:
        if math.sqrt(merit) > tol:
            raise CorrectorError("complementarity phase did not converge", "max-iter")
    x, eta, nu1, nu2 = z[:n], z[n:n + k], z[n + k:n + 2 * k], z[n + 2 * k:]
    F1, F2 = prob.values(x)
    band = 1e-8
    if variant.kind == EQUALITY:
        full = ActivePattern.regularized(H=range(k))
        return x, full, full
    N1 = [j for j in range(k) if abs(F1[j]) <= band]
    N2 = [j for j in range(k) if abs(F2[j]) <= band]
    H = [j for j in range(k) if abs(F1[j] * F2[j] - variant.t) <= band * (1 + variant.t)
         and j not in N1 and j not in N2]
    zero = band * (1 + np.max(np.abs(z[n:])))
    strict = ActivePattern.regularized(
        H=[j for j in H if eta[j] > zero],
        N1=[j for j in N1 if nu1[j] > zero],
        N2=[j for j in N2 if nu2[j] > zero],
    )
    return x, ActivePattern.regularized(H=H, N1=N1, N2=N2), strict




@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    analysis: KktAnalysis
    pattern: ActivePattern
    iterations: int
    retries: int


def _kkt_system(prob, variant, x, lam, pattern):
    H, N1, N2 = pattern.H, pattern.N1, pattern.N2
    nh, n1 = len(H), len(N1)
    eta = dict(zip(H, lam[:nh]))
    nu1 = dict(zip(N1, lam[nh:nh + n1]))
    nu2 = dict(zip(N2, lam[nh + n1:]))
    J1, J2 = prob.jacobians(x)
    G = np.array([prob.product_gradient(j, x) for j in H]).reshape(nh, prob.n)
    A = np.vstack([G, J1[list(N1)].reshape(-1, prob.n), J2[list(N2)].reshape(-1, prob.n)])
    signs = np.concatenate([np.ones(nh), -np.ones(len(N1) + len(N2))])

    F1, F2 = prob.values(x)
    rx = prob.f.grad_at(x) + A.T @ (signs * lam)
    rc = np.concatenate([
        [F1[j] * F2[j] - variant.t for j in H],
        [F1[j] for j in N1],
        [F2[j] for j in N2],
    ])
    m = A.shape[0]
    D = scholtes_lagrangian_hessian(prob, x, eta, nu1, nu2)
    J = np.block([[D, A.T * signs], [A, np.zeros((m, m))]])
    return np.concatenate([rx, rc]), J


def _newton_fixed(prob, variant, x, lam, pattern, newton_tol, max_iter):
    for it in range(max_iter + 1):
        r, J = _kkt_system(prob, variant, x, lam, pattern)
        rnorm = float(np.linalg.norm(r))
        if not np.isfinite(rnorm):
            raise CorrectorError("non-finite residual", "singular-jacobian")
        if rnorm <= newton_tol:
            return x, lam, it
        if it == max_iter:
            break
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        if np.linalg.norm(J @ step + r) > 0.5 * rnorm:
            raise CorrectorError(
                f"Newton system inconsistent (residual {rnorm:.3e})", "singular-jacobian"
            )
        x = x + step[: prob.n]
        lam = lam + step[prob.n:]
    raise CorrectorError(f"no convergence in {max_iter} iterations (residual {rnorm:.3e})", "max-iter")


def _initial_multipliers(seed: KktSeed, pattern: ActivePattern, prob, variant, x) -> np.ndarray:
    guess = [seed.eta, seed.nu1, seed.nu2]
    if all(g is not None for g in guess) and seed.pattern == pattern:
        return np.array(
            [seed.eta.get(j, 0.0) for j in pattern.H]
            + [seed.nu1.get(j, 0.0) for j in pattern.N1]
            + [seed.nu2.get(j, 0.0) for j in pattern.N2]
        )
    # Least-squares multipliers at the seed for the given pattern.
    J1, J2 = prob.jacobians(x)
    cols = [-prob.product_gradient(j, x) for j in pattern.H]
    cols += [J1[j] for j in pattern.N1] + [J2[j] for j in pattern.N2]
    if not cols:
        return np.zeros(0)
    return np.linalg.lstsq(np.column_stack(cols), prob.f.grad_at(x), rcond=None)[0]


def _pattern_repair(prob, variant, x, lam, pattern, tol: Tolerances):
    """Adjusted pattern if the solution violates feasibility or signs, else None."""
    F1, F2 = prob.values(x)
    H, N1, N2 = set(pattern.H), set(pattern.N1), set(pattern.N2)
    nh, n1 = len(pattern.H), len(pattern.N1)
    zero = tol.zero * (1 + (np.max(np.abs(lam)) if lam.size else 0.0))
    changed = False
    if variant.kind != EQUALITY:
        for j, v in zip(pattern.H, lam[:nh]):
            if v < -zero:
                H.discard(j)
                changed = True
    for j, v in zip(pattern.N1, lam[nh:nh + n1]):
        if v < -zero:
            N1.discard(j)
            changed = True
    for j, v in zip(pattern.N2, lam[nh + n1:]):
        if v < -zero:
            N2.discard(j)
            changed = True
    for j in range(prob.kappa):
        if F1[j] < -tol.feas * (1 + abs(F1[j])) and j not in N1:
            N1.add(j)
            H.discard(j)
            changed = True
        if F2[j] < -tol.feas * (1 + abs(F2[j])) and j not in N2:
            N2.add(j)
            H.discard(j)
            changed = True
        p = F1[j] * F2[j] - variant.t
        if variant.kind != EQUALITY and p > tol.feas * (1 + abs(p)) and j not in H | N1 | N2:
            H.add(j)
            changed = True
    if not changed:
        return None
    if variant.kind == EQUALITY:
        if N1 or N2:
            # A vanishing factor cannot satisfy F1 F2 = t > 0.
            raise CorrectorError("solution leaves the smoothed feasible set", "retries-exhausted")
        return None
    return ActivePattern.regularized(H=H - N1 - N2, N1=N1, N2=N2)


def newton_kkt(
    prob: MpccProblem,
    variant: Variant,
    seed: KktSeed,
    t: float | None = None,
    newton_tol: float = 1e-12,
    max_iter: int = 50,
    retries: int = 3,
    tol: Tolerances = DEFAULT,
) -> NewtonResult:
    """Correct ``seed`` to a KKT point of ``variant`` at parameter ``t``.

    After convergence with the seed's pattern, feasibility and multiplier
    signs are checked; on a violation the pattern is repaired (negative
    multipliers released, violated constraints added) and the corrector
    restarts from the seed, at most ``retries`` times.

    Raises
    ------
    CorrectorError
        With ``reason`` in {max-iter, singular-jacobian,
        pattern-oscillation, retries-exhausted}.
    """
    variant = variant if t is None else variant.at(t)
    pattern = seed.pattern
    x0 = prob.check_point(seed.x0)
    seen = {pattern}
    total = 0
    for attempt in range(retries + 1):
        lam0 = _initial_multipliers(seed, pattern, prob, variant, x0)
        x, lam, its = _newton_fixed(prob, variant, x0.copy(), lam0, pattern, newton_tol, max_iter)
        total += its
        repaired = _pattern_repair(prob, variant, x, lam, pattern, tol)
        if repaired is None:
            try:
                analysis = kkt_index_report(prob, variant, x, _record_tol(tol, variant.t))
            except MpccError as exc:
                raise CorrectorError(f"corrected point failed verification: {exc}", "retries-exhausted") from exc
            return NewtonResult(x, analysis, pattern, total, attempt)
        if repaired in seen:
            raise CorrectorError("active pattern cycles between retries", "pattern-oscillation")
        seen.add(repaired)
        pattern = repaired
    raise CorrectorError(f"pattern still inconsistent after {retries} retries", "retries-exhausted")


def _record_tol(tol: Tolerances, t: float) -> Tolerances:
    # Activity must be resolved well below t or factors of size O(t)
    # would be read as vanishing.
    return replace(tol, active=min(tol.active, 1e-3 * t))


# -- path tracing ---------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    t: float
    analysis: KktAnalysis
    iterations: int = 0

    @property
    def x(self) -> np.ndarray:
        return self.analysis.x

    @property
    def report(self) -> IndexReport:
        return self.analysis.report

    @property
    def active(self) -> ActivePattern:
        return self.analysis.active

    def to_json(self) -> dict:
        a = self.analysis
        return {
            "t": self.t,
            "x": a.x.tolist(),
            "pattern": a.active.to_json(),
            "multipliers": a.multipliers.to_json(),
            "indices": a.report.to_json(),
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class ConvergenceBound:
    """``max(q - zeros, 0) <= ci <= q`` with ``zeros`` the vanishing non-biactive multipliers."""

    q: int
    ci: int
    zeros: int

    @property
    def lower(self) -> int:
        return max(self.q - self.zeros, 0)

    @property
    def holds(self) -> bool:
        return self.lower <= self.ci <= self.q

    @property
    def attains_lower(self) -> bool:
        return self.ci == self.lower

    def to_json(self) -> dict:
        return {"q": self.q, "ci": self.ci, "lower": self.lower, "holds": self.holds,
                "attainsLower": self.attains_lower}


@dataclass(frozen=True)
class PathTrace:
    variant_kind: str
    gamma: float
    t0: float
    records: tuple[TraceRecord, ...]
    I0: tuple[int, ...]
    limit_point: np.ndarray | None
    limit_error: float | None
    limit: MpccAnalysis | None
    shift: int | None
    verdict: str
    bound: ConvergenceBound | None = None
    failure: str | None = None
    tol: Tolerances = field(default=DEFAULT)

    @property
    def limit_report(self) -> IndexReport | None:
        return None if self.limit is None else self.limit.report

    def to_json(self) -> dict:
        return {
            "variant": self.variant_kind,
            "gamma": self.gamma,
            "t0": self.t0,
            "records": [r.to_json() for r in self.records],
            "I0": list(self.I0),
            "limitPoint": None if self.limit_point is None else self.limit_point.tolist(),
            "limitError": self.limit_error,
            "limit": None if self.limit is None else self.limit.to_json(),
            "shift": self.shift,
            "verdict": self.verdict,
            "bound": None if self.bound is None else self.bound.to_json(),
            "failure": self.failure,
        }


def _vanishing(values_prev, values_last, gamma, tol):
    thr = (1 + math.sqrt(gamma)) / 2
    return [
        j for j, (a, b) in enumerate(zip(values_prev, values_last))
        if abs(b) <= tol or abs(b) <= thr * abs(a)
    ]


def _extrapolate_limit(prob: MpccProblem, records, gamma, tol: Tolerances):
    """Order-1 Richardson estimate projected onto the limiting active manifold."""
    xs = [r.x for r in records[-3:]]
    if len(xs) == 1:
        R, err = xs[0], 0.0
    elif len(xs) == 2:
        R = (xs[1] - gamma * xs[0]) / (1 - gamma)
        err = float(np.linalg.norm(xs[1] - R))
    else:
        R1 = (xs[1] - gamma * xs[0]) / (1 - gamma)
        R = (xs[2] - gamma * xs[1]) / (1 - gamma)
        err = float(np.linalg.norm(R - R1))
    if len(xs) >= 2:
        a1, a2 = prob.values(xs[-2])
        b1, b2 = prob.values(xs[-1])
        z1 = _vanishing(a1, b1, gamma, tol.active)
        z2 = _vanishing(a2, b2, gamma, tol.active)
    else:
        b1, b2 = prob.values(xs[-1])
        z1 = [j for j in range(prob.kappa) if abs(b1[j]) <= tol.active]
        z2 = [j for j in range(prob.kappa) if abs(b2[j]) <= tol.active]
    # Every pair must vanish in at least one factor at a limit point.
    F1, F2 = prob.values(R)
    for j in range(prob.kappa):
        if j not in z1 and j not in z2:
            (z1 if abs(F1[j]) <= abs(F2[j]) else z2).append(j)
    targets = [(prob.F1[j], 0.0) for j in z1] + [(prob.F2[j], 0.0) for j in z2]
    snapped = _solve_targets(prob, R, targets)
    err += float(np.linalg.norm(snapped - R))
    return snapped, err


def trace_path(
    prob: MpccProblem,
    variant: Variant,
    x0,
    t0: float,
    gamma: float = 0.5,
    t_min: float = 1e-8,
    tol: Tolerances = DEFAULT,
    newton_tol: float = 1e-12,
    max_iter: int = 50,
) -> PathTrace:
    """Follow a KKT point from ``t0`` down to ``t_min`` with ``t <- gamma t``.

    Each step uses the previous solution and pattern as predictor.  The
    limit point is extrapolated from the last three records, snapped onto
    the complementarity set and analyzed with tolerances widened by the
    extrapolation error estimate.

    Raises
    ------
    InputError
        If ``gamma`` is not in (0, 1) or ``t_min`` exceeds ``t0``.
    NotKktError, InfeasiblePointError
        If the start is not a KKT point at ``t0``.
    """
    if not 0 < gamma < 1:
        raise InputError(f"gamma must lie in (0, 1), got {gamma!r}")
    if not (t0 > 0 and 0 < t_min <= t0):
        raise InputError(f"need 0 < tmin <= t0, got t0={t0!r}, tmin={t_min!r}")
    variant = variant.at(t0)
    first = kkt_index_report(prob, variant, x0, _record_tol(tol, t0))
    records = [TraceRecord(t0, first)]
    failure = None
    t = t0
    while True:
        t_next = gamma * t
        if t_next < t_min * (1 - 1e-12):
            break
        prev = records[-1].analysis
        seed = KktSeed(prev.x, prev.active, FROM_PREVIOUS,
                       prev.multipliers.eta, prev.multipliers.nu1, prev.multipliers.nu2)
        try:
            res = newton_kkt(prob, variant, seed, t_next, newton_tol, max_iter, tol=tol)
        except MpccError as exc:
            failure = f"t={t_next:g}: {exc}"
            break
        records.append(TraceRecord(t_next, res.analysis, res.iterations))
        t = t_next

    tail = [r for r in records if r.t <= math.sqrt(t0)] or records[-1:]
    I0 = tuple(sorted(set.intersection(*(set(r.active.H) for r in tail))))
    common = dict(variant_kind=variant.kind, gamma=gamma, t0=t0, records=tuple(records), I0=I0, tol=tol)
    if failure is not None:
        return PathTrace(limit_point=None, limit_error=None, limit=None, shift=None,
                         verdict=DIVERGED, failure=failure, **common)

    point, err = _extrapolate_limit(prob, records, gamma, tol)
    ltol = tol.loosened(err)
    try:
        limit = mpcc_index_report(prob, point, ltol)
    except MpccError as exc:
        return PathTrace(limit_point=point, limit_error=err, limit=None, shift=None,
                         verdict=DIVERGED, failure=f"limit: {exc}", **common)

    ci = limit.report.ci
    q = records[-1].report.qi
    shift = None if ci is None else q - ci
    bound = None
    if ci is not None:
        zeros = len(limit.partition.a01_zero) + len(limit.partition.a10_zero)
        bound = ConvergenceBound(q, ci, zeros)
    if any(not all(r.report.nd) for r in records):
        verdict = BIFURCATION
    elif ci is None:
        verdict = CONVERGED_DEGENERATE
    else:
        verdict = CONVERGED_NONDEGENERATE
    return PathTrace(limit_point=point, limit_error=err, limit=limit, shift=shift,
                     verdict=verdict, bound=bound, **common)


@dataclass(frozen=True)
class LimitMultipliers:
    """Estimates of the limiting MPCC multipliers from the trace tail.

    ``history`` holds ``(t, estimate, discrepancy)`` for up to the last
    three records, where the discrepancy is the max-norm distance to the
    multipliers recovered directly at the limit point.
    """

    sigma1: dict[int, float]
    sigma2: dict[int, float]
    rho1: dict[int, float]
    rho2: dict[int, float]
    direct: MpccMultipliers
    history: tuple[tuple[float, dict, float], ...]

    @property
    def discrepancies(self) -> list[float]:
        return [d for _, _, d in self.history]

    def rate_ratios(self) -> list[float]:
        d = self.discrepancies
        return [b / a if a > 0 else 0.0 for a, b in zip(d, d[1:])]

    def to_json(self) -> dict:
        fmt = lambda m: {str(j): v for j, v in sorted(m.items())}
        return {
            "sigma1": fmt(self.sigma1),
            "sigma2": fmt(self.sigma2),
            "rho1": fmt(self.rho1),
            "rho2": fmt(self.rho2),
            "direct": self.direct.to_json(),
            "discrepancies": [{"t": t, "discrepancy": d} for t, _, d in self.history],
        }


def _estimate(prob, record: TraceRecord, active: ActivePattern, I0) -> dict[str, dict[int, float]]:
    m = record.analysis.multipliers
    F1, F2 = prob.values(record.x)

    def pick(j, other, nu):
        if j in I0:
            return -m.eta.get(j, 0.0) * other[j]
        return nu.get(j, 0.0)

    return {
        "sigma1": {j: pick(j, F2, m.nu1) for j in active.a01},
        "sigma2": {j: pick(j, F1, m.nu2) for j in active.a10},
        "rho1": {j: pick(j, F2, m.nu1) for j in active.a00},
        "rho2": {j: pick(j, F1, m.nu2) for j in active.a00},
    }


def limit_multipliers(prob: MpccProblem, trace: PathTrace) -> LimitMultipliers:
    """Limiting multipliers from ``-eta F`` (pairs in I0) or ``nu`` (others).

    Raises
    ------
    MpccError
        If the trace has no analyzed limit point.
    """
    if trace.limit is None:
        raise MpccError(f"trace has no limit to compare against (verdict {trace.verdict})")
    direct = trace.limit.multipliers
    active = trace.limit.active
    history = []
    for rec in trace.records[-3:]:
        est = _estimate(prob, rec, active, set(trace.I0))
        gaps = [
            abs(est[k][j] - getattr(direct, k)[j])
            for k in ("sigma1", "sigma2", "rho1", "rho2") for j in est[k]
        ]
        history.append((rec.t, est, max(gaps, default=0.0)))
    last = history[-1][1]
    return LimitMultipliers(last["sigma1"], last["sigma2"], last["rho1"], last["rho2"],
                            direct, tuple(history))


def active_set_inclusions(trace: PathTrace) -> list[tuple[float, dict[str, bool]]]:
    """Check the limit sign sets against each record's pattern for ``t <= sqrt(t0)``.

    Pairs with negative multipliers must be product-active, pairs with
    positive multipliers must keep the corresponding factor at zero.
    """
    if trace.limit is None:
        return []
    p = trace.limit.partition
    out = []
    for rec in trace.records:
        if rec.t > math.sqrt(trace.t0):
            continue
        H, N1, N2 = set(rec.active.H), set(rec.active.N1), set(rec.active.N2)
        out.append((rec.t, {
            "a01-": set(p.a01_minus) <= H,
            "a01+": set(p.a01_plus) <= N1,
            "a10-": set(p.a10_minus) <= H,
            "a10+": set(p.a10_plus) <= N2,
            "a00-": set(p.a00_minus) <= H,
            "a00+": set(p.a00_plus) <= N1 & N2,
        }))
    return out


# -- multistart ------------------------------------------------------------------------


@dataclass(frozen=True)
class Cluster:
    analysis: KktAnalysis
    objective: float
    members: int

    @property
    def x(self) -> np.ndarray:
        return self.analysis.x

    @property
    def nondegenerate(self) -> bool:
        return all(self.analysis.report.nd)

    def to_json(self) -> dict:
        return {
            "x": self.x.tolist(),
            "objective": self.objective,
            "members": self.members,
            "pattern": self.analysis.active.to_json(),
            "multipliers": self.analysis.multipliers.to_json(),
            "indices": self.analysis.report.to_json(),
        }


@dataclass(frozen=True)
class MultistartResult:
    clusters: tuple[Cluster, ...]
    continuum: bool
    seed: int
    count: int
    converged: int
    failures: dict[str, int]

    def to_json(self) -> dict:
        return {
            "clusters": [c.to_json() for c in self.clusters],
            "continuum": self.continuum,
            "seed": self.seed,
            "count": self.count,
            "converged": self.converged,
            "failures": dict(sorted(self.failures.items())),
        }


def _ball_points(center, radius, count, rng) -> np.ndarray:
    n = center.size
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return center + d * r[:, None]


def _continuum_flag(clusters, min_size: int = 10) -> bool:
    ordered = sorted(clusters, key=lambda c: c.objective)
    i = 0
    while i < len(ordered):
        base = ordered[i].objective
        group = [c for c in ordered[i:] if c.objective - base <= 1e-8 * (1 + abs(base))]
        if len(group) >= min_size and any(not c.nondegenerate for c in group):
            return True
        i += len(group)
    return False


def multistart_kkt(
    prob: MpccProblem,
    variant: Variant,
    center,
    t: float,
    radius: float,
    count: int,
    sep_tol: float = 1e-6,
    seed: int = 0,
    workers: int | None = None,
    tol: Tolerances = DEFAULT,
    newton_tol: float = 1e-12,
    max_iter: int = 50,
) -> MultistartResult:
    """Run the corrector from ``count`` uniform seeds in a ball.

    Seeds come from ``numpy.random.default_rng(seed)`` and are generated
    up front; results are merged in seed order, so the output does not
    depend on ``workers``.  Solutions outside the ball are discarded.
    Clusters are formed greedily at distance ``sep_tol``.
    """
    if count < 1:
        raise InputError("count must be at least 1")
    if not radius > 0:
        raise InputError("radius must be positive")
    center = prob.check_point(center)
    variant = variant.at(t)
    rng = np.random.default_rng(seed)
    points = _ball_points(center, radius, count, rng)

    def run(x0):
        # The complementarity phase supplies the pattern; correcting from
        # the original seed keeps coordinates the pattern leaves free, so
        # seeds spread along a continuum of KKT points stay spread.
        # A nearby KKT point is usually reached directly from the pattern of
        # nearly active constraints.
        try:
            near = predict_pattern(prob, variant, x0, margin=0.1 * t)
            return newton_kkt(prob, variant, KktSeed(x0, near), t, newton_tol, max_iter, tol=tol)
        except MpccError:
            pass
        # Weakly active constraints are left to the corrector's repair step.
        try:
            x1, pattern, strict = complementarity_solve(prob, variant, x0)
        except CorrectorError as exc:
            return exc.reason
        for start, pat in ((x0, strict), (x0, pattern)):
            try:
                return newton_kkt(prob, variant, KktSeed(start, pat), t, newton_tol, max_iter, tol=tol)
            except MpccError:
                pass
        try:
            return newton_kkt(prob, variant, KktSeed(x1, pattern), t, newton_tol, max_iter, tol=tol)
        except CorrectorError as exc:
            return exc.reason
        except (InfeasiblePointError, MpccError):
            return "verification"

    workers = workers or min(4, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, points))
    else:
        results = [run(p) for p in points]

    failures: dict[str, int] = {}
    reps: list[list] = []
    converged = 0
    for res in results:
        if isinstance(res, str):
            failures[res] = failures.get(res, 0) + 1
            continue
        if np.linalg.norm(res.x - center) > radius * (1 + 1e-12):
            failures["outside-ball"] = failures.get("outside-ball", 0) + 1
            continue
        converged += 1
        for rep in reps:
            if np.linalg.norm(rep[0].x - res.x) <= sep_tol:
                rep[1] += 1
                break
        else:
            reps.append([res.analysis, 1])
    clusters = tuple(Cluster(a, prob.f(a.x), k) for a, k in reps)
    return MultistartResult(clusters, _continuum_flag(clusters), seed, count, converged, failures)


# -- well-posedness --------------------------------------------------------------------


@dataclass(frozen=True)
class WellposednessStep:
    t: float
    x: np.ndarray | None
    iterations: int | None
    nd: tuple[bool, ...] | None
    qi: int | None
    clusters: int | None
    passed: bool
    note: str = ""

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "x": None if self.x is None else self.x.tolist(),
            "iterations": self.iterations,
            "nd": None if self.nd is None else list(self.nd),
            "qi": self.qi,
            "clusters": self.clusters,
            "pass": self.passed,
            "note": self.note,
        }


@dataclass(frozen=True)
class WellposednessReport:
    ci: int
    steps: tuple[WellposednessStep, ...]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.steps)

    def to_json(self) -> dict:
        return {"ci": self.ci, "pass": self.passed, "steps": [s.to_json() for s in self.steps]}


def wellposedness_check(
    prob: MpccProblem,
    variant: Variant,
    xbar,
    t_list,
    tol: Tolerances = DEFAULT,
    count: int = 64,
    radius: float = 0.3,
    seed: int = 0,
    max_iterations: int = 10,
) -> WellposednessReport:
    """Check that a nondegenerate C-stationary point has one nearby KKT point per ``t``.

    For each ``t`` the seeded corrector must converge within
    ``max_iterations``, the result must satisfy ND1-ND3 with quadratic
    index equal to the C-index of ``xbar``, and multistart in the ball of
    ``radius`` must find a single cluster.

    Raises
    ------
    PreconditionError
        If ``xbar`` is not C-stationary or NDC1-NDC3 fail; for the
        Scholtes variant also if NDC4 fails.
    """
    base = mpcc_index_report(prob, xbar, tol)
    if not base.stationarity.implies(StationarityClass.C):
        raise PreconditionError("point is not C-stationary", "C-stationarity")
    needed = 3 if variant.kind == EQUALITY else 4
    for k in range(needed):
        if not base.report.flags[k]:
            raise PreconditionError(f"NDC{k + 1} fails at the given point", f"NDC{k + 1}")
    ci = base.report.ci
    steps = []
    for t in t_list:
        seed_point = seed_from_cstationary(prob, variant, base.x, base.multipliers, base.partition, t)
        try:
            res = newton_kkt(prob, variant, seed_point, t, max_iter=max_iterations, tol=tol)
        except CorrectorError as exc:
            steps.append(WellposednessStep(t, None, None, None, None, None, False, str(exc)))
            continue
        rep = res.analysis.report
        ms = multistart_kkt(prob, variant, base.x, t, radius, count, seed=seed, tol=tol)
        clusters = len(ms.clusters)
        same = clusters == 1 and np.linalg.norm(ms.clusters[0].x - res.x) <= 1e-6
        ok = bool(res.iterations <= max_iterations and all(rep.nd) and rep.qi == ci and same)
        steps.append(WellposednessStep(t, res.x, res.iterations, rep.nd, rep.qi, clusters, ok))
    return WellposednessReport(ci, tuple(steps))
