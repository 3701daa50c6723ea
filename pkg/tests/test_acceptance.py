"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import json
import math

import numpy as np
import pytest

from helpers import derived_ndc4_problem, fd_gradient, fd_jacobian, ldl_inertia, random_poly
from mpccreg import corpus
from mpccreg.active import licq_rows, mpcc_active, mpcc_licq_rows, regularized_active
from mpccreg.cli import main
from mpccreg.continuation import (
    CONVERGED_NONDEGENERATE,
    active_set_inclusions,
    limit_multipliers,
    multistart_kkt,
    newton_kkt,
    seed_from_cstationary,
    trace_path,
    wellposedness_check,
)
from mpccreg.indices import inertia, kkt_index_report, mpcc_index_report, tangent_space
from mpccreg.model import EQUALITY, SCHOLTES, Variant


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail=""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def _corpus_traces():
    for name in corpus.CASE_NAMES:
        case = corpus.load(name)
        for ts in case.traces:
            tr = trace_path(case.problem, Variant(ts.variant, ts.t0), ts.start, ts.t0, 0.5, ts.t_min)
            yield name, ts, case.problem, tr


def test_1_corpus_golden_suite(verdict):
    entries = corpus.verify_all(abs_tol=1e-8)
    failed = [e for e in entries if not e.passed]
    spot = []
    t = 0.125
    ndc2 = corpus.load_problem("ndc2fail")
    k = kkt_index_report(ndc2, Variant(SCHOLTES, t), [math.sqrt(t)] * 2)
    xi = np.array([1.0, -1.0])
    spot.append(abs(k.multipliers.eta[0] - (1 - t)) <= 1e-8)
    spot.append(abs(xi @ k.hessian @ xi - (8 * t - 4)) <= 1e-8)
    ndc4 = corpus.load_problem("ndc4")
    k = kkt_index_report(ndc4, Variant(SCHOLTES, t), [t / 2, t / 2, 1])
    spot.append(abs(k.multipliers.eta[1] - (1 - t)) <= 1e-8)
    spot.append(abs(k.multipliers.nu1[2] - (2 - t + t * t)) <= 1e-8 and k.report.qi == 1)
    a = mpcc_index_report(ndc4, [0, 0, 1])
    spot.append(np.allclose([a.multipliers.sigma1[j] for j in range(3)], [0, -1, 2], atol=1e-8))
    spot.append(a.report.ci == 0)
    a = mpcc_index_report(corpus.load_problem("continuum"), [0, 0, 1, 0])
    spot.append(np.allclose([a.multipliers.sigma1[j] for j in range(3)], [-1, 0, 2], atol=1e-8))
    a = mpcc_index_report(corpus.load_problem("continuum2"), [1, 0])
    spot.append(abs(a.multipliers.sigma2[0]) <= 1e-8)
    k = kkt_index_report(corpus.load_problem("ssosc"), Variant(SCHOLTES, t), [0, 0])
    spot.append(abs(k.multipliers.nu1[0]) <= 1e-8 and not k.report.nd[1])
    ok = not failed and all(spot)
    verdict(1, ok, f"{len(entries) - len(failed)}/{len(entries)} golden checks, spot checks {sum(spot)}/{len(spot)}")


def test_2_index_shift(verdict):
    prob = corpus.load_problem("ndc4")
    tr = trace_path(prob, Variant(SCHOLTES, 0.5), [0.25, 0.25, 1], 0.5, 0.5, 1e-6)
    ok = (
        tr.verdict == CONVERGED_NONDEGENERATE
        and all(r.report.qi == 1 for r in tr.records)
        and tr.limit_report.ci == 0
        and tr.shift == 1
        and tr.bound.holds
        and tr.bound.attains_lower
    )
    verdict(2, ok, f"{len(tr.records)} records, ci={tr.limit_report.ci}, shift={tr.shift}, "
                   f"bound={tr.bound.to_json()}")


def test_3_convergence_sandwich(verdict):
    checked = []
    for name, ts, _, tr in _corpus_traces():
        if tr.bound is None:
            continue
        checked.append((f"{name}/{ts.label}", tr.bound.holds))

    prob = derived_ndc4_problem()
    xbar = np.array([0.0, 0.0, 1.0])
    # Independent multiplier oracle: all three active gradients carry nonzero weight.
    J1, _ = prob.jacobians(xbar)
    sigma = np.linalg.lstsq(J1.T, prob.f.grad_at(xbar), rcond=None)[0]
    ndc4_ok = bool(np.all(np.abs(sigma) > 1e-6))
    v = Variant(SCHOLTES, 0.1)
    a = mpcc_index_report(prob, xbar)
    start = newton_kkt(prob, v, seed_from_cstationary(prob, v, xbar, a.multipliers, a.partition, 0.1)).x
    tr = trace_path(prob, v, start, 0.1, 0.5, 1e-6)
    equal = tr.bound is not None and tr.bound.holds and tr.bound.ci == tr.bound.q
    ok = bool(checked) and all(h for _, h in checked) and ndc4_ok and equal
    verdict(3, ok, f"sandwich on {[c for c, _ in checked]}, derived instance sigma={sigma.round(12).tolist()} "
                   f"q={tr.bound.q if tr.bound else None} ci={tr.bound.ci if tr.bound else None}")


def test_4_wellposedness(verdict):
    rep = wellposedness_check(derived_ndc4_problem(), Variant(SCHOLTES, 1.0), [0, 0, 1], [1e-2, 1e-4],
                              count=64, radius=0.3)
    steps_ok = rep.passed and all(s.iterations <= 10 for s in rep.steps)
    eq = wellposedness_check(corpus.load_problem("continuum2"), Variant(EQUALITY, 1.0), [1, 0], [1e-2, 1e-4],
                             count=64, radius=0.3)
    eq_ok = eq.passed and all(np.max(np.abs(s.x - [1, s.t])) <= 1e-8 for s in eq.steps)
    ok = steps_ok and eq_ok
    verdict(4, ok, f"scholtes {[s.to_json()['pass'] for s in rep.steps]}, "
                   f"equality {[s.to_json()['pass'] for s in eq.steps]}")


def test_5_multiplier_rates(verdict):
    details, ok = [], True
    for name, start, t0 in (("ndc4", [0.25, 0.25, 1], 0.5), ("ndc2fail", [0.5, 0.5], 0.25)):
        prob = corpus.load_problem(name)
        gamma = 0.5
        tr = trace_path(prob, Variant(SCHOLTES, t0), start, t0, gamma, 1e-6)
        lm = limit_multipliers(prob, tr)
        ratios = lm.rate_ratios()
        within = len(ratios) == 2 and all(gamma / 3 <= r <= 3 * gamma for r in ratios)
        agree = lm.discrepancies[-1] <= 1e-2
        ok = ok and within and agree
        details.append(f"{name}: discrepancies={[f'{d:.2e}' for d in lm.discrepancies]} "
                       f"ratios={[round(float(r), 3) for r in ratios]}")
    verdict(5, ok, "; ".join(details))


def test_6_bifurcation_and_continuum(verdict):
    two = multistart_kkt(corpus.load_problem("2min"), Variant(SCHOLTES, 0.25), [0, 0, 1], 0.25, 0.5, 100)
    xs = [c.x for c in two.clusters]
    far = any(np.linalg.norm(a - b) >= 0.1 for i, a in enumerate(xs) for b in xs[i + 1:])
    cont = multistart_kkt(corpus.load_problem("continuum"), Variant(SCHOLTES, 0.1), [0, 0, 1, 0], 0.1, 0.3, 100)
    c2 = corpus.load_problem("continuum2")
    ineq = multistart_kkt(c2, Variant(SCHOLTES, 0.1), [1, 0], 0.1, 0.3, 200)
    degenerate_minimizers = [c for c in ineq.clusters if not c.nondegenerate and c.analysis.report.qi == 0]
    eq = multistart_kkt(c2, Variant(EQUALITY, 0.1), [1, 0], 0.1, 0.3, 200)
    eq_ok = len(eq.clusters) == 1 and eq.clusters[0].nondegenerate
    ok = len(xs) >= 2 and far and cont.continuum and len(degenerate_minimizers) >= 10 and eq_ok
    verdict(6, ok, f"2min clusters={len(xs)} separated={far}; continuum flag={cont.continuum}; "
                   f"continuum2 degenerate minimizers={len(degenerate_minimizers)}; "
                   f"equality clusters={len(eq.clusters)}")


def test_7_numerical_oracles(verdict):
    rng = np.random.default_rng(77)
    deriv_ok = True
    for _ in range(100):
        n = int(rng.integers(1, 5))
        p = random_poly(rng, n, degree=4)
        x = rng.uniform(-1.5, 1.5, n)
        g, fg = p.grad_at(x), fd_gradient(p, x)
        H, fH = p.hess_at(x), fd_jacobian(p.grad_at, x)
        deriv_ok &= bool(np.all(np.abs(g - fg) <= 1e-6 * (1 + np.abs(fg))))
        deriv_ok &= bool(np.all(np.abs(H - fH) <= 1e-6 * (1 + np.abs(fH))))
    inertia_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        A = rng.normal(size=(n, n))
        M = (A + A.T) / 2
        inertia_ok &= tuple(inertia(M)) == ldl_inertia(M)
    worst = 0.0
    for name in corpus.CASE_NAMES:
        case = corpus.load(name)
        for mp in case.points:
            for t in (case.sample_ts() if mp.is_family else (None,)):
                x = mp.point_at(t)
                if mp.is_family:
                    v = Variant(mp.side, t)
                    rows = licq_rows(case.problem, x, regularized_active(case.problem, v, x))
                    Z = tangent_space(case.problem, x, v).columns
                else:
                    rows = mpcc_licq_rows(case.problem, x, mpcc_active(case.problem, x))
                    Z = tangent_space(case.problem, x).columns
                worst = max(worst, float(np.max(np.abs(rows @ Z), initial=0.0)))
    ok = deriv_ok and inertia_ok and worst <= 1e-10
    verdict(7, ok, f"derivatives={deriv_ok} inertia={inertia_ok} tangent residual={worst:.1e}")


def test_8_active_set_inclusions(verdict):
    results = {}
    for name, ts, _, tr in _corpus_traces():
        rows = active_set_inclusions(tr)
        results[f"{name}/{ts.label}"] = bool(rows) and all(all(f.values()) for _, f in rows)
    verdict(8, all(results.values()), json.dumps(results))


def test_9_determinism(verdict, capsys):
    runs = [
        ["multistart", "--problem", "continuum", "--center", "0,0,1,0", "--t", "0.1", "--radius", "0.3",
         "--count", "40", "--seed", "11"],
        ["trace", "--problem", "ndc4", "--start", "0.25,0.25,1", "--t0", "0.5", "--tmin", "1e-4"],
    ]
    same = []
    for argv in runs:
        outs = []
        for _ in range(2):
            main(argv)
            doc = json.loads(capsys.readouterr().out)
            doc.pop("timings")
            outs.append(json.dumps(doc, sort_keys=True, indent=2))
        same.append(outs[0] == outs[1])
    verdict(9, all(same), f"identical reports: {same}")
