import math

import numpy as np
import pytest

from feigmarkov.core import eval_g, find_x0
from feigmarkov.errors import OutOfDomain
from feigmarkov.inverse import (
    U,
    arcs_to_csv,
    chi_eval,
    find_c,
    omega_boundary,
    tau_joint_angles,
    u_eval,
    u_star_eval,
    u_star_prime_mag,
)


def _samples(rng, n=200, box=5.0):
    z = rng.uniform(-box, box, n) + 1j * rng.uniform(-box, box, n)
    return z[z.imag != 0]


def test_u_inverts_g(m, rng):
    # forward evaluation of g is the independent oracle
    z = _samples(rng)
    assert np.max(np.abs(eval_g(m, u_eval(m, z)) - z) / np.maximum(1, np.abs(z))) <= 1e-10


def test_u_normalization(m):
    assert abs(u_eval(m, 1.0)) <= 1e-12
    assert abs(u_eval(m, 1.0 / m.alpha) - 1.0) <= 1e-10


def test_u_functional_equation(m, rng):
    z = _samples(rng)
    res = u_eval(m, z) + m.alpha * u_eval(m, u_eval(m, z / m.alpha))
    assert np.max(np.abs(res)) <= 1e-8


def test_u_conjugation_symmetry(m, rng):
    z = _samples(rng, 50)
    assert np.allclose(u_eval(m, np.conj(z)), np.conj(u_eval(m, z)), atol=1e-12)


def test_u_maps_into_right_half_plane(m, rng):
    z = _samples(rng)
    assert np.all(np.abs(np.angle(u_eval(m, z))) <= math.pi / 2 + 1e-9)


@pytest.mark.parametrize("x", [1.5, -3.0])
def test_u_slit(m, x):
    with pytest.raises(OutOfDomain):
        u_eval(m, x)


def test_domain_errors(m):
    with pytest.raises(OutOfDomain):
        U(m, 1 + 1j)
    with pytest.raises(OutOfDomain):
        u_star_eval(m, 1 - 1j)


def test_u_star_is_u_of_conjugate(m):
    z = np.array([0.3 + 1j, 2 + 0.5j])
    assert np.allclose(u_star_eval(m, z), u_eval(m, np.conj(z)))


def test_u_star_derivative_finite_difference(m):
    z = 0.7 + 0.9j
    h = 1e-6
    fd = abs(u_star_eval(m, z + h) - u_star_eval(m, z - h)) / (2 * h)
    assert u_star_prime_mag(m, z) == pytest.approx(fd, rel=1e-6)


def test_singular_point(m):
    sp = find_c(m)
    assert 0 < np.angle(sp.c) < math.pi / 2
    assert abs(chi_eval(m, sp.c) - sp.c) <= 1e-10
    # iterating chi from another start lands on the same point
    assert abs(find_c(m, z0=0.5 + 2j).c - sp.c) <= 1e-10
    assert abs(sp.c - (1.83126 + 2.68315j)) < 1e-4


def test_tau_angles(m):
    ang = tau_joint_angles(m, 4)
    assert len(ang) == 5
    assert np.max(np.abs(ang - math.pi / 2)) <= 1e-2


def test_omega_boundary(m):
    om = omega_boundary(m, n=4)
    assert len(om.tau) == 5
    A = m.abs_alpha
    for k, arc in enumerate(om.tau):
        expect = u_star_eval(m, (-1.0) ** k * A ** k)
        # the joints are critical points of g, so u is only sqrt(eps)-accurate there
        assert abs(arc.points[0] - expect) <= 1e-7
        assert abs(eval_g(m, arc.points[0]) - (-1.0) ** k * A ** k) <= 1e-12 * A ** k
        assert arc.is_simple()
    assert om.real_segment[1] == pytest.approx(A * find_x0(m), rel=1e-14)
    text = arcs_to_csv(om.tau[:2])
    assert text.splitlines()[0] == "re,im,arc_index"
    assert len(text.splitlines()) == 1 + len(om.tau[0]) + len(om.tau[1])
