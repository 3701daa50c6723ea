import json
from importlib import resources

import numpy as np
import pytest

from mpccreg import corpus
from mpccreg.errors import InputError
from mpccreg.tolerances import Tolerances


@pytest.fixture
def data_copy(tmp_path):
    src = resources.files("mpccreg.corpus").joinpath("data")
    for name in corpus.CASE_NAMES:
        for suffix in (".problem.json", ".golden.json"):
            (tmp_path / f"{name}{suffix}").write_text(src.joinpath(f"{name}{suffix}").read_text())
    return tmp_path


def test_load_examples():
    case = corpus.load("ndc2fail")
    assert case.problem.n == 2 and case.problem.kappa == 1
    assert case.point("x_t").side == "scholtes"
    assert corpus.load_problem("2min").n == 3


def test_unknown_case():
    with pytest.raises(InputError):
        corpus.load("nope")


def test_closed_form_evaluator():
    assert corpus.closed_form("2+(2*t**2-t)/(1+2*t)")(0.5) == pytest.approx(2.0)
    assert corpus.closed_form("-sqrt(t)")(0.25) == -0.5
    for bad in ("__import__('os')", "t.real", "abs(t)", "[t]", "t if t else 1"):
        with pytest.raises(InputError):
            corpus.closed_form(bad)


def test_closed_forms_finite_on_validity_range():
    for name in corpus.CASE_NAMES:
        case = corpus.load(name)
        for mp in case.points:
            if not mp.is_family:
                continue
            for t in np.linspace(1e-6, case.t_max, 25)[:-1]:
                assert np.all(np.isfinite(mp.point_at(t)))
                for group in mp.multipliers_at(t).values():
                    assert all(np.isfinite(v) for v in group.values())


def test_ndc2fail_at_quarter():
    entries = corpus.verify_case("ndc2fail")
    assert entries and all(e.passed for e in entries)
    from mpccreg.indices import kkt_index_report
    from mpccreg.model import SCHOLTES, Variant

    r = kkt_index_report(corpus.load_problem("ndc2fail"), Variant(SCHOLTES, 0.25), [0.5, 0.5])
    assert r.report.qi == 1
    assert r.multipliers.eta[0] == pytest.approx(0.75)


def test_verify_all_passes():
    entries = corpus.verify_all()
    failed = [e.to_json() for e in entries if not e.passed]
    assert not failed
    assert {e.case for e in entries} == set(corpus.CASE_NAMES)


def test_verify_all_with_loose_stationarity_tolerance():
    assert all(e.passed for e in corpus.verify_all(Tolerances(stat=1e-2)))


def test_tampered_multiplier_is_caught(data_copy):
    path = data_copy / "ndc4.golden.json"
    doc = json.loads(path.read_text())
    doc["points"][0]["multipliers"]["eta"]["1"] = "1-t+0.001"
    path.write_text(json.dumps(doc))
    failed = [e for e in corpus.verify_case("ndc4", data_dir=data_copy) if not e.passed]
    assert failed
    assert {e.check for e in failed} == {"multipliers.eta[1]"}


def test_malformed_golden_file(data_copy):
    (data_copy / "ssosc.golden.json").write_text("{")
    with pytest.raises(InputError):
        corpus.load("ssosc", data_dir=data_copy)


def test_ledger_entries_serialize():
    e = corpus.verify_case("ssosc")[0]
    assert json.loads(json.dumps(e.to_json()))["pass"] is True
