import json

import numpy as np
import pytest

from feigmarkov.core import FeigenbaumMap
from feigmarkov.verify import SUITES, VerificationReport, run_suite


@pytest.fixture(scope="module")
def core_report(m):
    return run_suite(m, "core", seed=3)


def test_core_suite_passes(core_report):
    assert core_report.ok, core_report.failed()
    names = [c.name for c in core_report.checks]
    assert names == ["fixed_point_residual", "alpha_cross_oracle", "u_functional_equation", "singular_point"]
    assert all(c.anchor and c.status == "pass" for c in core_report.checks)
    c = core_report.extra["c"]
    assert 0 < c["re"] and 0 < c["im"]


def test_report_json(core_report, tmp_path):
    p = tmp_path / "r.json"
    text = core_report.to_json(p)
    d = json.loads(p.read_text())
    assert d == json.loads(text)
    assert d["suite"] == "core" and d["seed"] == 3 and d["ok"] is True
    assert {"name", "anchor", "status", "measured", "tolerance"} == set(d["checks"][0])


def test_report_is_deterministic(m, core_report):
    assert run_suite(m, "core", seed=3).to_json() == core_report.to_json()


def test_report_only_never_fails():
    rep = VerificationReport("x", 0)
    rep.add("estimate", "a number", False, {"v": np.float64(1.5)}, report_only=True)
    assert rep.ok and rep.checks[0].status == "report-only"
    rep.add("bound", "a bound", False, {"v": 2})
    assert not rep.ok and rep.failed() == ["bound"]
    assert json.loads(rep.to_json())["checks"][0]["measured"] == {"v": 1.5}


def test_unknown_suite(m):
    with pytest.raises(ValueError):
        run_suite(m, "nonsense")
    assert SUITES == ("core", "ifs", "markov", "dim")


def test_markov_suite_reports_r_restriction():
    q = FeigenbaumMap(r=4, coeffs=np.array([-1.0]), alpha=-1.69, order=1, residual=0.0, radius=1.0)
    rep = run_suite(q, "markov")
    assert rep.failed() == ["markov_suite"]
