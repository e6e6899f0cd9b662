"""Acceptance criteria 1-19, one line each.

Every suite of :mod:`feigmarkov.verify` runs once; each criterion reads the
checks it needs.  The summary block is printed at the end of the pytest
session (see conftest.py) and by running this file directly.
"""

import time

import pytest

from feigmarkov.core import solve_feigenbaum
from feigmarkov.verify import run_suite

RESULTS = {}

CRITERIA = {
    1: ("fixed-point residual", ["fixed_point_residual"]),
    2: ("alpha cross-oracle", ["alpha_cross_oracle"]),
    3: ("inverse-branch equation", ["u_functional_equation"]),
    4: ("singular point", ["singular_point"]),
    5: ("tau-arc joint angles", ["tau_joint_angles"]),
    6: ("IFS invariance and disjointness", ["ifs_invariance_disjointness"]),
    7: ("curve self-similarity", ["curve_self_similarity"]),
    8: ("arc simplicity", ["arc_simplicity"]),
    9: ("forward image", ["forward_image"]),
    10: ("Markov census", ["census_depth1", "markov_trichotomy"]),
    11: ("rescale invariance", ["rescale_invariance"]),
    12: ("tiling coverage", ["tiling_coverage"]),
    13: ("diameter decay", ["diameter_decay"]),
    14: ("vein-path length", ["vein_path_length"]),
    15: ("ray scaling", ["ray_scaling"]),
    16: ("dimension bracket", ["bowen_bracket"]),
    17: ("conformal measure", ["conformal_measure"]),
    18: ("Frostman spread", ["frostman"]),
    19: ("M-condition", ["m_condition"]),
}

SUITE_OF = {n: ("core" if n <= 4 else "ifs" if n <= 9 else "markov" if n <= 15 else "dim")
            for n in CRITERIA}


def summary_lines():
    out = []
    for n, (label, _) in CRITERIA.items():
        ok, detail = RESULTS.get(n, (None, "not run"))
        tag = "PASS" if ok else ("FAIL" if ok is False else "SKIP")
        out.append(f"criterion {n:2d} {tag}  {label}: {detail}")
    return out


@pytest.fixture(scope="module")
def timed_map():
    t = time.perf_counter()
    m = solve_feigenbaum(2, order=40)
    return m, time.perf_counter() - t


@pytest.fixture(scope="module")
def reports(timed_map):
    m, _ = timed_map
    cache = {}

    def get(suite):
        if suite not in cache:
            cache[suite] = {c.name: c for c in run_suite(m, suite, seed=0).checks}
        return cache[suite]
    return get


def _fmt(measured):
    parts = []
    for k, v in measured.items():
        if isinstance(v, float):
            parts.append(f"{k}={v:.4g}")
        elif isinstance(v, (int, bool, str)):
            parts.append(f"{k}={v}")
        elif isinstance(v, dict) and all(isinstance(x, (int, float)) for x in v.values()):
            parts.append(f"{k}=" + "/".join(f"{x:.4g}" for x in v.values()))
        elif isinstance(v, list) and len(v) <= 5 and all(isinstance(x, (int, float)) for x in v):
            parts.append(f"{k}=[" + ", ".join(f"{x:.6g}" for x in v) + "]")
    return " ".join(parts)


@pytest.mark.parametrize("n", list(CRITERIA))
def test_criterion(n, reports, timed_map):
    checks = reports(SUITE_OF[n])
    names = CRITERIA[n][1]
    ok = all(checks[x].status == "pass" for x in names)
    detail = "; ".join(_fmt(checks[x].measured) for x in names)
    if n == 1:
        elapsed = timed_map[1]
        ok = ok and elapsed <= 5.0
        detail += f"; solve time {elapsed:.2f} s"
    RESULTS[n] = (ok, detail)
    print(summary_lines()[n - 1])
    assert ok, detail


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
