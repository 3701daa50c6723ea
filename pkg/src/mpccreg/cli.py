"""Command-line interface.

Every command prints one JSON report on stdout (or writes it to
``--output``) and a short summary on stderr.  Exit codes: 0 success,
1 numerical or internal failure, 2 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import corpus
from .continuation import (
    DIVERGED,
    active_set_inclusions,
    limit_multipliers,
    multistart_kkt,
    trace_path,
    wellposedness_check,
)
from .errors import InputError, MpccError, NotKktError, PreconditionError
from .indices import kkt_index_report, mpcc_index_report
from .model import MpccProblem, Variant
from .stationarity import StationarityClass, recover_kkt_multipliers
from .tolerances import Tolerances

SCHEMA_VERSION = "1"


# -- argument helpers ---------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _load_problem(source: str) -> MpccProblem:
    path = Path(source)
    if path.exists():
        return MpccProblem.load(path)
    if source in corpus.CASE_NAMES:
        return corpus.load_problem(source)
    raise InputError(f"problem {source!r} is neither a file nor a corpus case")


def _point(args, required: bool = True) -> np.ndarray | None:
    if args.point_file:
        try:
            data = json.loads(Path(args.point_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read point file: {exc}") from None
        if not isinstance(data, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in data
        ):
            raise InputError("point file must hold a JSON array of numbers")
        return np.array(data, dtype=float)
    if args.point:
        return np.array(_floats(args.point))
    if required:
        raise InputError("a point is required (--point or --point-file)")
    return None


def _tolerances(args) -> Tolerances:
    try:
        return Tolerances().with_overrides(
            feas=args.tol_feas, active=args.tol_active, stat=args.tol_stat,
            rank=args.tol_rank, eig_zero=args.tol_eig, zero=args.tol_zero,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _classes(cls: StationarityClass) -> list[str]:
    return [c.value for c in StationarityClass if c is not StationarityClass.NOT_STATIONARY and cls.implies(c)]


# -- commands -------------------------------------------------------------------------


def cmd_analyze(args, tol):
    prob = _load_problem(args.problem)
    x = prob.check_point(_point(args))
    if args.variant is None and args.t is None:
        try:
            res = mpcc_index_report(prob, x, tol)
        except MpccError as exc:
            if isinstance(exc, InputError):
                raise
            return prob, {"side": "mpcc", "class": StationarityClass.NOT_STATIONARY.value,
                          "detail": str(exc)}, 0, "not stationary"
        out = res.to_json()
        out["side"] = "mpcc"
        out["classes"] = _classes(res.stationarity)
        r = res.report
        summary = f"class {res.stationarity.value}, NDC {_flags(r.flags)}, qi={r.qi} bi={r.bi} ci={r.ci}"
        return prob, out, 0, summary
    if args.t is None:
        raise InputError("--t is required with --variant")
    variant = Variant(args.variant or "scholtes", args.t)
    try:
        res = kkt_index_report(prob, variant, x, tol)
    except NotKktError as exc:
        mult = recover_kkt_multipliers(prob, variant, x, None, tol.stat, tol.zero, tol.rank, tol.active)
        out = {"side": variant.kind, "t": variant.t, "kkt": False, "detail": str(exc),
               "pattern": mult.active.to_json(), "multipliers": mult.to_json()}
        return prob, out, 0, "not a KKT point"
    out = res.to_json()
    out["side"] = variant.kind
    out["kkt"] = True
    r = res.report
    return prob, out, 0, f"KKT, ND {_flags(r.flags)}, qi={r.qi}"


def cmd_trace(args, tol):
    prob = _load_problem(args.problem)
    x = prob.check_point(_point(args))
    if args.t0 is None:
        raise InputError("--t0 is required")
    variant = Variant(args.variant or "scholtes", args.t0)
    trace = trace_path(prob, variant, x, args.t0, args.gamma, args.tmin, tol)
    out = trace.to_json()
    if trace.limit is not None:
        out["limitMultipliers"] = limit_multipliers(prob, trace).to_json()
        out["inclusions"] = [{"t": t, **flags} for t, flags in active_set_inclusions(trace)]
    code = 1 if trace.verdict == DIVERGED else 0
    summary = (f"{len(trace.records)} records, verdict {trace.verdict}, "
               f"shift {trace.shift}, limit {None if trace.limit_point is None else trace.limit_point.tolist()}")
    return prob, out, code, summary


def cmd_multistart(args, tol):
    prob = _load_problem(args.problem)
    center = prob.check_point(_point(args))
    if args.t is None:
        raise InputError("--t is required")
    variant = Variant(args.variant or "scholtes", args.t)
    res = multistart_kkt(prob, variant, center, args.t, args.radius, args.count,
                         sep_tol=args.sep_tol, seed=args.seed, workers=args.workers, tol=tol)
    summary = f"{len(res.clusters)} clusters from {res.converged}/{res.count} converged seeds, continuum={res.continuum}"
    return prob, res.to_json(), 0, summary


def cmd_wellposedness(args, tol):
    prob = _load_problem(args.problem)
    x = prob.check_point(_point(args))
    variant = Variant(args.variant or "scholtes", 1.0)
    try:
        rep = wellposedness_check(prob, variant, x, _floats(args.t_list), tol,
                                  count=args.count, radius=args.radius, seed=args.seed)
    except PreconditionError as exc:
        raise InputError(f"precondition {exc.flag} violated: {exc}") from None
    return prob, rep.to_json(), 0 if rep.passed else 1, f"well-posedness {'passed' if rep.passed else 'FAILED'}"


def cmd_corpus_verify(args, tol):
    entries = corpus.verify_all(tol, data_dir=args.corpus_dir)
    failed = [e for e in entries if not e.passed]
    for e in failed:
        print(f"FAIL {e.case}/{e.label} t={e.t} {e.check}: expected {e.expected!r}, got {e.actual!r}",
              file=sys.stderr)
    out = {"entries": [e.to_json() for e in entries], "total": len(entries), "failed": len(failed)}
    return None, out, 1 if failed else 0, f"{len(entries) - len(failed)}/{len(entries)} corpus checks passed"


def _flags(flags) -> str:
    return "[" + ",".join("T" if f else "F" for f in flags) + "]"


COMMANDS = {
    "analyze": cmd_analyze,
    "trace": cmd_trace,
    "multistart": cmd_multistart,
    "wellposedness": cmd_wellposedness,
    "corpus-verify": cmd_corpus_verify,
}


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpccreg",
        description="Analyze complementarity-constrained programs and trace their regularizations.",
    )
    common = argparse.ArgumentParser(add_help=False)
    tols = common.add_argument_group("tolerance overrides")
    tols.add_argument("--tol-feas", type=float)
    tols.add_argument("--tol-active", type=float)
    tols.add_argument("--tol-stat", type=float)
    tols.add_argument("--tol-rank", type=float)
    tols.add_argument("--tol-eig", type=float)
    tols.add_argument("--tol-zero", type=float)
    common.add_argument("--output", help="write the JSON report to this file instead of stdout")

    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("--problem", required=True, help="problem JSON file or corpus case name")
    problem.add_argument("--point", "--start", "--center", dest="point",
                         help="comma-separated coordinates")
    problem.add_argument("--point-file", help="JSON array with the coordinates")
    problem.add_argument("--variant", choices=["scholtes", "equality"])

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("analyze", parents=[problem, common], help="analyze a point")
    p.add_argument("--t", type=float, help="regularization parameter (regularized-side analysis)")

    p = sub.add_parser("trace", parents=[problem, common], help="trace KKT points as t decreases")
    p.add_argument("--t0", type=float)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--tmin", type=float, default=1e-8)

    p = sub.add_parser("multistart", parents=[problem, common], help="search for KKT points in a ball")
    p.add_argument("--t", type=float)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sep-tol", type=float, default=1e-6)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("wellposedness", parents=[problem, common],
                       help="check local existence and uniqueness of KKT points near a C-stationary point")
    p.add_argument("--t-list", default="1e-2,1e-4")
    p.add_argument("--radius", type=float, default=0.3)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("corpus-verify", parents=[common], help="check the bundled golden data")
    p.add_argument("--corpus-dir", help="alternative directory with problem and golden files")
    return parser


def stability_hash(report: dict) -> str:
    body = {k: v for k, v in report.items() if k not in ("timings", "stabilityHash")}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _emit(report: dict, output: str | None):
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    report = {
        "schemaVersion": SCHEMA_VERSION,
        "command": {"name": args.command, "args": {k: v for k, v in sorted(vars(args).items())
                                                   if k not in ("command", "output")}},
    }
    try:
        tol = _tolerances(args)
        report["tolerances"] = tol.as_dict()
        report["seed"] = getattr(args, "seed", None)
        prob, results, code, summary = COMMANDS[args.command](args, tol)
    except (InputError, NotKktError) as exc:
        print(f"mpccreg: input error: {exc}", file=sys.stderr)
        return 2
    except MpccError as exc:
        print(f"mpccreg: numerical failure: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort report for the exit-code contract
        print(f"mpccreg: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if prob is not None:
        report["problem"] = {"name": prob.name, "sha256": prob.digest}
    report["results"] = _jsonable(results)
    report["timings"] = {"seconds": time.perf_counter() - start}
    report["stabilityHash"] = stability_hash(report)
    _emit(report, args.output)
    print(f"mpccreg {args.command}: {summary}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
