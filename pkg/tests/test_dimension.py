import math

import numpy as np
import pytest

from feigmarkov import dimension as dim
from feigmarkov.curves import CurveApprox
from feigmarkov.errors import InsufficientDepth, InsufficientResolution, NoBracket
from feigmarkov.ifs import word_derivative_mag


def koch(depth):
    p = np.array([0, 1], dtype=complex)
    rot = np.exp(1j * math.pi / 3)
    for _ in range(depth):
        a, b = p[:-1], p[1:]
        d = (b - a) / 3
        q = np.empty(4 * len(a) + 1, dtype=complex)
        q[0:-1:4] = a
        q[1:-1:4] = a + d
        q[2:-1:4] = a + d + d * rot
        q[3:-1:4] = a + 2 * d
        q[-1] = p[-1]
        p = q
    return CurveApprox(p)


def test_box_counting_koch():
    c = koch(7)
    est = dim.box_counting_oracle(c, dim.default_box_scales(c))
    assert est == pytest.approx(math.log(4) / math.log(3), abs=0.05)


def test_box_counting_segment():
    # coarse boxes carry the +1 end effect of N(delta) ~ 1/delta + 1, so stay fine
    c = CurveApprox(np.linspace(0, 1 + 1j, 7000))
    est = dim.box_counting_oracle(c, [2.0 ** -k for k in range(5, 11)])
    assert est == pytest.approx(1.0, abs=0.03)


def test_box_counting_resolution_guards():
    with pytest.raises(InsufficientResolution):
        dim.box_counting_oracle(CurveApprox(np.linspace(0, 1, 100)), [0.1, 0.2])
    c = koch(7)
    with pytest.raises(InsufficientResolution):
        dim.box_counting_oracle(c, [1e-6, 1e-2])


def _similarity_levels(ratios, n):
    ld = np.zeros(1)
    for _ in range(n):
        ld = (np.log(ratios)[:, None] + ld[None, :]).ravel()
    return ld


def test_cw_bracket_on_a_similarity_system():
    # Cantor-like system with ratios 1/3, 1/3, 1/4: sum r_i^s = 1 fixes s
    r = np.array([1 / 3, 1 / 3, 1 / 4])
    s_true = __import__("scipy.optimize", fromlist=["brentq"]).brentq(
        lambda s: np.sum(r ** s) - 1, 0, 2)
    lo, hi = dim.cw_bracket([_similarity_levels(r, 5)], [_similarity_levels(r, 6)])
    assert lo == pytest.approx(s_true, abs=1e-9) and hi == pytest.approx(s_true, abs=1e-9)


def test_cw_bracket_without_root():
    big = [np.zeros(3)]
    with pytest.raises(NoBracket):
        dim.cw_bracket(big, [np.zeros(9)])


def test_word_log_derivatives_match_chain_rule(m):
    z = dim.basepoint(m)
    ld = dim.word_log_derivatives(m, 3, z)
    assert len(ld) == 27
    for word in [(1, 1, 1), (2, 3, 1), (3, 3, 3)]:
        idx = 0
        for s in word:
            idx = 3 * idx + (s - 1)
        assert ld[idx] == pytest.approx(math.log(float(word_derivative_mag(m, word, z))), abs=1e-9)


def test_partition_sums(m):
    v1, sup1, inf1 = dim.partition_sum(m, 1.0, 6)
    v2, _, _ = dim.partition_sum(m, 1.1, 6)
    assert inf1 <= v1 <= sup1
    assert v2 < v1
    with pytest.raises(ValueError):
        dim.partition_sum(m, 1.0, 0)
    with pytest.raises(ValueError):
        dim.partition_sum(m, -1.0, 3)


def test_pressure_table(m):
    t = dim.pressure_table(m, 4, [0.9, 1.1])
    assert set(t.rows) == {1, 2, 3, 4}
    val, sup, inf = t.rows[4]
    assert np.all(inf <= val) and np.all(val <= sup)
    assert val[0] > val[1]


def test_bowen_roots_decrease_towards_the_bracket(m):
    h6, h8 = dim.bowen_root(m, 6), dim.bowen_root(m, 8)
    assert 1 < h8 < h6 < 1.1
    with pytest.raises(ValueError):
        dim.bowen_root(m, 1)


def test_conformal_measure(m):
    mu = dim.conformal_measure(m, 1.005, 6)
    assert mu.total == pytest.approx(1.0, abs=1e-14)
    assert len(mu.weights) == 3 ** 6
    for prefix in [(), (1,), (2, 3)]:
        parts = sum(mu.cylinder_mass(prefix + (i,)) for i in (1, 2, 3))
        assert parts == pytest.approx(mu.cylinder_mass(prefix), rel=1e-12)
    with pytest.raises(ValueError):
        mu.cylinder_mass((1,) * 7)
    for r, b in dim.conformality_residuals(m, mu):
        assert r <= b


def test_frostman_needs_depth(m):
    mu = dim.conformal_measure(m, 1.005, 6)
    with pytest.raises(InsufficientDepth):
        dim.frostman_ratios(m, mu, 1.005, 5, [0.1])


def test_m_condition_oracles():
    seg = CurveApprox(np.linspace(0, 1, 200))
    q = dim.m_condition_estimate(seg)
    assert q.M_estimate == 1.0 and q.turning == pytest.approx(1.0)
    t = np.linspace(0, math.pi, 301)
    arc = CurveApprox(np.exp(1j * t))
    assert dim.m_condition_estimate(arc).turning == pytest.approx(math.sqrt(2), rel=1e-3)
    # a hook: out along the axis, back along a parallel line; brute force over all triples
    hook = np.concatenate([np.linspace(0, 1, 25), 1 + 0.2j - np.linspace(0, 0.5, 12) + 0j])
    n = len(hook)
    brute = max(abs(hook[k] - hook[i]) / abs(hook[j] - hook[i])
                for i in range(n) for k in range(i + 1, n) for j in range(k + 1, n))
    assert dim.m_condition_estimate(CurveApprox(hook)).M_estimate == pytest.approx(brute)
    assert brute > 2


def test_dimension_report(m):
    rep = dim.dimension_report(m, max_depth=8, m_depth=6)
    assert set(rep) == {"h", "bracket", "box_dim", "M_estimate", "depth"}
    lo, hi = rep["bracket"]
    assert 1 < lo <= rep["h"] <= hi < 2
    assert rep["depth"] == 8
