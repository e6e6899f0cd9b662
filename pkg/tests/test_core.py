import math

import numpy as np
import pytest

from feigmarkov.core import (
    ContinuationPolicy,
    FeigenbaumMap,
    alpha_oracle,
    eval_g,
    eval_g_prime,
    find_x0,
    functional_residual,
    load_map,
    save_map,
    solve_feigenbaum,
)
from feigmarkov.errors import BadCriticality


def test_alpha_value(m):
    # |alpha| to the digits quoted throughout the period-doubling literature
    assert m.alpha < -1
    assert abs(m.abs_alpha - 2.502907875095892) < 1e-9


def test_normalization_and_symmetries(m):
    assert eval_g(m, 0.0) == pytest.approx(1.0, abs=1e-15)
    z = np.array([0.3 + 0.2j, -0.7 + 1.1j, 1.5 - 0.4j])
    assert np.allclose(eval_g(m, -z), eval_g(m, z), atol=1e-13)
    assert np.allclose(eval_g(m, np.conj(z)), np.conj(eval_g(m, z)), atol=1e-13)


def test_functional_equation_on_interval(m):
    x = np.linspace(-1, 1, 257)
    assert np.max(functional_residual(m, x)) <= 1e-10
    assert m.residual <= 1e-10


def test_functional_equation_off_the_series_disc(m):
    # points beyond the trusted disc go through the continuation
    z = np.array([3.0 + 0.5j, -4.0 + 2.0j])
    assert abs(z[0]) > 1
    lhs = eval_g(m, z)
    rhs = m.alpha * eval_g(m, eval_g(m, z / m.alpha))
    assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) <= 1e-8


def test_derivative_matches_central_difference(m):
    z = np.array([0.4 + 0.1j, 0.9 - 0.3j, -0.2 + 0.8j])
    h = 1e-6
    fd = (eval_g(m, z + h) - eval_g(m, z - h)) / (2 * h)
    assert np.allclose(eval_g_prime(m, z), fd, rtol=1e-7, atol=1e-8)


def test_x0(m):
    x0 = find_x0(m)
    assert 0.8 < x0 < 0.9
    assert abs(eval_g(m, x0)) <= 1e-14


def test_alpha_oracle_is_independent(m):
    assert abs(alpha_oracle(2) - m.abs_alpha) <= 1e-6


@pytest.mark.parametrize("r", [0, 1, 3, 2.5])
def test_bad_criticality(r):
    with pytest.raises(BadCriticality):
        solve_feigenbaum(r)
    with pytest.raises(BadCriticality):
        alpha_oracle(r)


def test_bad_criticality_is_a_value_error():
    with pytest.raises(ValueError):
        solve_feigenbaum(5)


def test_policy_validation():
    with pytest.raises(ValueError):
        ContinuationPolicy(max_depth=-1)


def test_save_load_roundtrip(m, tmp_path):
    p = tmp_path / "map.json"
    save_map(m, p)
    m2 = load_map(p)
    assert isinstance(m2, FeigenbaumMap)
    assert m2.alpha == m.alpha and m2.r == m.r and m2.order == m.order
    assert np.array_equal(m2.coeffs, m.coeffs)
    z = np.array([0.5 + 0.5j, 2.0])
    assert np.array_equal(eval_g(m2, z), eval_g(m, z))


def test_coeffs_are_read_only(m):
    with pytest.raises(ValueError):
        m.coeffs[0] = 0.0


def test_quartic_alpha_from_oracle():
    # the cascade oracle also works for r = 4 (|alpha| about 1.6903); the flat
    # critical point costs digits, so only a coarse precision is reachable
    a = alpha_oracle(4, precision=1e-4, max_level=9)
    assert math.isclose(a, 1.6903, abs_tol=2e-3)
