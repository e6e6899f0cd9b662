import numpy as np
import pytest

from feigmarkov.curves import CurveApprox, SymbolWord, hausdorff
from feigmarkov.ifs import (
    build_X,
    curve_L,
    fast_maps,
    forward_image_defect,
    junction_points,
    limit_curve,
    phi_apply,
    phi_apply_with_derivative,
    psi_apply,
    sample_interior,
    system_checks,
    word_apply,
    word_derivative_mag,
)


@pytest.fixture(scope="module")
def X(m, c):
    return build_X(m, resolution=1e-6, c=c)


def test_endpoints_of_the_limit_arc(m, c):
    A = m.abs_alpha
    for i in (1, 2, 3):
        assert np.isfinite(phi_apply(m, i, c))
    # c/|alpha| and c are the ends of I, and each map keeps that orientation
    assert abs(phi_apply(m, 1, c / A) - c / A) <= 1e-10
    assert abs(phi_apply(m, 3, c) - c) <= 1e-10
    assert abs(phi_apply(m, 1, c) - phi_apply(m, 2, c / A)) <= 1e-10
    assert abs(phi_apply(m, 2, c) - phi_apply(m, 3, c / A)) <= 1e-10


def test_psi_relation(m):
    z = 0.4 + 0.3j
    assert psi_apply(m, 1, z) == pytest.approx(phi_apply(m, 1, z))
    with pytest.raises(ValueError):
        psi_apply(m, 0, z)
    with pytest.raises(ValueError):
        phi_apply(m, 4, z)


def test_derivatives_by_finite_differences(m):
    z = 0.8 + 1.2j
    h = 1e-6
    for i in (1, 2, 3):
        _, d = phi_apply_with_derivative(m, i, z)
        fd = abs(phi_apply(m, i, z + h) - phi_apply(m, i, z - h)) / (2 * h)
        assert d == pytest.approx(fd, rel=1e-6)
    w = SymbolWord((3, 1, 2))
    fd = abs(word_apply(m, w, z + h) - word_apply(m, w, z - h)) / (2 * h)
    assert word_derivative_mag(m, w, z) == pytest.approx(fd, rel=1e-5)


def test_fast_maps_agree_with_exact(m, X, rng):
    z = sample_interior(X, 200, rng)
    fm = fast_maps(m)
    for i in (1, 2, 3):
        v, d = fm.apply(i, z)
        v0, d0 = phi_apply_with_derivative(m, i, z)
        assert np.max(np.abs(v - v0)) <= 1e-11
        assert np.max(np.abs(d / d0 - 1)) <= 1e-9


def test_compact_x(m, X, rng):
    assert X.boundary.is_simple() if len(X.boundary) < 20000 else True
    z = sample_interior(X, 50, rng)
    assert X.contains(z).all()
    assert X.contains(np.array([X.interior_point()]))[0]


def test_system_checks(m, X, rng):
    sc = system_checks(m, X, 300, rng)
    assert not any(sc["escaped"].values())
    assert not any(sc["overlap"].values())
    assert sc["adjacency"] == "12,23"
    assert max(sc["contraction"].values()) < 1


def test_junction_points(m, c):
    P = junction_points(m, 3, c)
    assert len(P) == 3 ** 3 + 1
    assert abs(P[0] - c / m.abs_alpha) <= 1e-10 and abs(P[-1] - c) <= 1e-10
    assert np.allclose(P, junction_points(m, 3, c, fast=False), atol=1e-11)


def test_limit_curve_addresses(m, c):
    I = limit_curve(m, 4, c)
    assert I.addresses_monotone()
    assert I.addresses[0] == "00000" and len(I) == 82
    assert I.is_simple()
    with pytest.raises(ValueError):
        limit_curve(m, 0, c)


def test_curve_self_similarity(m, c):
    I = limit_curve(m, 7, c, addresses=False)
    L = curve_L(m, 7, -1, 2, c, I=I)
    n = len(I) - 1
    a = CurveApprox(m.abs_alpha * L.points[:3 * n + 1])
    b = CurveApprox(L.points[n:4 * n + 1])
    assert hausdorff(a, b) <= 2 * max(a.mesh, b.mesh)
    assert L.addresses_monotone()
    with pytest.raises(ValueError):
        curve_L(m, 3, 2, 1, c)


def test_forward_image(m, c):
    assert forward_image_defect(m, 6, c) <= 1e-6
