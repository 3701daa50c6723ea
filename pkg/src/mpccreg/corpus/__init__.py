"""Bundled example problems with golden analysis results.

Golden values are stored as closed-form expressions in ``t`` (strings
such as ``"2+(2*t**2-t)/(1+2*t)"``) and evaluated at sample parameters,
so one expression covers every ``t`` in the case's validity range.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..errors import InputError, MpccError
from ..indices import kkt_index_report, mpcc_index_report
from ..model import MpccProblem, Variant
from ..tolerances import DEFAULT, Tolerances

CASE_NAMES = ("ndc2fail", "ndc4", "ssosc", "2min", "continuum", "continuum2")


# -- closed forms ------------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sqrt": math.sqrt}


@lru_cache(maxsize=None)
def closed_form(expr: str) -> Callable[[float], float]:
    """Compile an arithmetic expression in ``t`` into a function.

    Only numbers, ``t``, ``+ - * / **``, unary signs and ``sqrt`` are
    accepted.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise InputError(f"bad closed form {expr!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and type(node.value) in (int, float):
            v = float(node.value)
            return lambda t: v
        if isinstance(node, ast.Name) and node.id == "t":
            return lambda t: t
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, a, b = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda t: op(a(t), b(t))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            op, a = _UNARY[type(node.op)], build(node.operand)
            return lambda t: op(a(t))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            fn, a = _FUNCS[node.func.id], build(node.args[0])
            return lambda t: fn(a(t))
        raise InputError(f"unsupported element in closed form {expr!r}")

    return build(tree)


# -- golden data -----------------------------------------------------------------------


@dataclass(frozen=True)
class MarkedPoint:
    """A golden point (or family in ``t``) with its expected analysis.

    ``side`` is ``"mpcc"`` for points of the complementarity problem and
    the variant kind (``"scholtes"``/``"equality"``) for KKT points.
    """

    label: str
    side: str
    x: tuple[str, ...]
    pattern: dict[str, list[int]]
    multipliers: dict[str, dict[str, str]]
    indices: dict[str, Any]
    stationarity: str | None = None
    hessian: tuple[tuple[str, ...], ...] | None = None
    reduced_hessian: dict | None = None
    second_order: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_json(cls, d: dict) -> "MarkedPoint":
        return cls(
            label=d["label"],
            side=d["side"],
            x=tuple(d["x"]),
            pattern={k: list(v) for k, v in d["pattern"].items()},
            multipliers={k: dict(v) for k, v in d["multipliers"].items()},
            indices=dict(d["indices"]),
            stationarity=d.get("class"),
            hessian=None if "hessian" not in d else tuple(tuple(r) for r in d["hessian"]),
            reduced_hessian=d.get("reducedHessian"),
            second_order=dict(d.get("secondOrder", {})),
        )

    @property
    def is_family(self) -> bool:
        return self.side != "mpcc"

    def point_at(self, t: float | None = None) -> np.ndarray:
        tt = t if t is not None else 0.0
        return np.array([closed_form(e)(tt) for e in self.x])

    def multipliers_at(self, t: float | None = None) -> dict[str, dict[int, float]]:
        out = {}
        for group, values in self.multipliers.items():
            out[group] = {int(j): closed_form(e)(t if t is not None else 0.0) for j, e in values.items()}
        return out

    def hessian_at(self, t: float | None = None) -> np.ndarray | None:
        if self.hessian is None:
            return None
        tt = t if t is not None else 0.0
        return np.array([[closed_form(e)(tt) for e in row] for row in self.hessian])


@dataclass(frozen=True)
class TraceSpec:
    label: str
    variant: str
    start: tuple[float, ...]
    t0: float
    t_min: float
    verdict: str
    shift: int | None = None


@dataclass(frozen=True)
class GoldenCase:
    name: str
    problem: MpccProblem
    t_max: float
    points: tuple[MarkedPoint, ...]
    traces: tuple[TraceSpec, ...] = ()

    def sample_ts(self) -> tuple[float, ...]:
        return (self.t_max / 2, self.t_max / 8, 1e-4)

    def point(self, label: str) -> MarkedPoint:
        for p in self.points:
            if p.label == label:
                return p
        raise KeyError(label)


def _read(name: str, data_dir=None) -> str:
    if data_dir is None:
        return resources.files(__name__).joinpath("data", name).read_text()
    return (Path(data_dir) / name).read_text()


def _check_name(name: str):
    if name not in CASE_NAMES:
        raise InputError(f"unknown corpus case {name!r}; known: {', '.join(CASE_NAMES)}")


def load_problem(name: str, data_dir=None) -> MpccProblem:
    _check_name(name)
    return MpccProblem.from_json(json.loads(_read(f"{name}.problem.json", data_dir)))


def load(name: str, data_dir=None) -> GoldenCase:
    """Load a case with its golden data.

    ``data_dir`` replaces the bundled data directory (same file layout).

    Raises
    ------
    InputError
        If ``name`` is not one of :data:`CASE_NAMES` or its files are malformed.
    """
    _check_name(name)
    try:
        doc = json.loads(_read(f"{name}.golden.json", data_dir))
        problem = MpccProblem.from_json(json.loads(_read(doc["problem"], data_dir)))
        return _build_case(name, doc, problem)
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"corpus case {name!r} is malformed: {exc!r}") from None


def _build_case(name: str, doc: dict, problem: MpccProblem) -> GoldenCase:
    traces = tuple(
        TraceSpec(tr["label"], tr["variant"], tuple(tr["start"]), tr["t0"], tr["tmin"],
                  tr["verdict"], tr.get("shift"))
        for tr in doc.get("traces", [])
    )
    points = tuple(MarkedPoint.from_json(p) for p in doc["points"])
    return GoldenCase(name, problem, float(doc["tMaxValid"]), points, traces)


# -- verification --------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    case: str
    label: str
    t: float | None
    check: str
    expected: Any
    actual: Any
    passed: bool

    def to_json(self) -> dict:
        return {
            "case": self.case,
            "label": self.label,
            "t": self.t,
            "check": self.check,
            "expected": _plain(self.expected),
            "actual": _plain(self.actual),
            "pass": self.passed,
        }


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_plain(u) for u in v]
    return v


def _verify_point(case: GoldenCase, mp: MarkedPoint, t: float | None, tol: Tolerances,
                  abs_tol: float) -> list[LedgerEntry]:
    entries = []

    def add(check, expected, actual, passed):
        entries.append(LedgerEntry(case.name, mp.label, t, check, expected, actual, bool(passed)))

    x = mp.point_at(t)
    try:
        if mp.is_family:
            res = kkt_index_report(case.problem, Variant(mp.side, t), x, tol)
        else:
            res = mpcc_index_report(case.problem, x, tol)
    except MpccError as exc:
        add("analysis", "success", f"{type(exc).__name__}: {exc}", False)
        return entries

    actual_pattern = res.active.to_json()
    for key, want in mp.pattern.items():
        got = actual_pattern[key]
        add(f"pattern.{key}", sorted(want), got, sorted(want) == got)

    expected_mult = mp.multipliers_at(t)
    got_mult = res.multipliers
    for group, want in expected_mult.items():
        got = getattr(got_mult, group)
        add(f"multipliers.{group}.keys", sorted(want), sorted(got), sorted(want) == sorted(got))
        for j, v in want.items():
            if j in got:
                add(f"multipliers.{group}[{j}]", v, got[j], abs(got[j] - v) <= abs_tol)

    if mp.stationarity is not None:
        add("class", mp.stationarity, res.stationarity.value, res.stationarity.value == mp.stationarity)

    report = res.report.to_json()
    for key, want in mp.indices.items():
        got = report.get(key)
        add(f"indices.{key}", want, got, want == got)

    if mp.hessian is not None:
        want = mp.hessian_at(t)
        add("hessian", want, res.hessian, np.max(np.abs(want - res.hessian)) <= abs_tol)
    if mp.reduced_hessian is not None:
        xi = np.array([closed_form(e)(t) for e in mp.reduced_hessian["direction"]])
        want = closed_form(mp.reduced_hessian["value"])(t)
        got = float(xi @ res.hessian @ xi)
        add("reducedHessian", want, got, abs(got - want) <= abs_tol)
    for key, want in mp.second_order.items():
        got = res.second_order.get(key)
        add(f"secondOrder.{key}", want, got, want == got)
    return entries


def verify_case(case: GoldenCase | str, tolerances: Tolerances = DEFAULT,
                abs_tol: float = 1e-8, data_dir=None) -> list[LedgerEntry]:
    """Recompute every golden quantity of ``case`` and compare."""
    if isinstance(case, str):
        case = load(case, data_dir)
    entries = []
    for mp in case.points:
        ts = case.sample_ts() if mp.is_family else (None,)
        for t in ts:
            entries += _verify_point(case, mp, t, tolerances, abs_tol)
    return entries


def verify_all(tolerances: Tolerances = DEFAULT, abs_tol: float = 1e-8,
               data_dir=None) -> list[LedgerEntry]:
    """Ledger over all cases; an entry per compared quantity."""
    entries = []
    for name in CASE_NAMES:
        entries += verify_case(name, tolerances, abs_tol, data_dir)
    return entries
