import numpy as np
import pytest

from feigmarkov.curves import (
    CurveApprox,
    SymbolWord,
    distance_to_polyline,
    hausdorff,
    polyline_area,
    self_intersections,
    winding_contains,
)

SQUARE = np.array([0, 1, 1 + 1j, 1j])


def test_symbol_word_orientation():
    assert SymbolWord((1, 3, 2)).n_anti == 2
    assert SymbolWord((1, 3, 2)).orientation == 1
    assert SymbolWord((3, 1)).orientation == -1
    assert SymbolWord((4, 7), system="Sinf").orientation == 1
    assert str(SymbolWord((1, 2))) == "12"
    assert str(SymbolWord((10, 2), system="Sinf")) == "10.2"


@pytest.mark.parametrize("sym,system", [((4,), "S"), ((0,), "Sinf"), ((1,), "T")])
def test_symbol_word_rejects(sym, system):
    with pytest.raises(ValueError):
        SymbolWord(sym, system=system)


def test_duplicate_vertices_dropped():
    c = CurveApprox([0, 0, 1, 1, 2], addresses=list("abcde"))
    assert len(c) == 3
    assert c.addresses == ["a", "c", "e"]
    assert c.addresses_monotone()


def test_closed_curve_drops_repeated_endpoint():
    c = CurveApprox(np.append(SQUARE, 0), closed=True)
    assert len(c) == 4
    assert c.length == pytest.approx(4.0)


def test_address_count_checked():
    with pytest.raises(ValueError):
        CurveApprox([0, 1], addresses=["a"])


def test_area_and_containment():
    assert polyline_area(SQUARE) == pytest.approx(1.0)
    assert polyline_area(SQUARE[::-1]) == pytest.approx(-1.0)
    sq = CurveApprox(SQUARE, closed=True)
    z = np.array([0.5 + 0.5j, 1.5 + 0.5j, 1.0005 + 0.5j])
    assert list(sq.contains(z)) == [True, False, False]
    assert list(sq.contains(z, tube=1e-3)) == [True, False, True]
    with pytest.raises(ValueError):
        CurveApprox(SQUARE).contains(z)


def test_winding_against_circle_oracle(rng):
    t = np.linspace(0, 2 * np.pi, 721)[:-1]
    circle = np.exp(1j * t)
    z = rng.uniform(-1.5, 1.5, 2000) + 1j * rng.uniform(-1.5, 1.5, 2000)
    far = np.abs(np.abs(z) - 1) > 1e-3
    assert np.array_equal(winding_contains(circle, z[far]), np.abs(z[far]) < 1)


def test_distance_to_polyline():
    seg = CurveApprox([0, 2])
    d = distance_to_polyline(seg, np.array([1 + 1j, 3, -1j]))
    assert np.allclose(d, [1, 1, 1])


def test_hausdorff_oracle():
    a = CurveApprox([0, 1])
    b = CurveApprox([0.5j, 1 + 0.5j])
    assert hausdorff(a, b) == pytest.approx(0.5)
    # one-sided extent: [0, 2] against [0, 1] differ by 1 at the far end
    assert hausdorff(CurveApprox([0, 2]), CurveApprox([0, 1])) == pytest.approx(1.0)


def test_self_intersections():
    assert self_intersections(CurveApprox(SQUARE, closed=True)) == 0
    bow = CurveApprox([0, 1 + 1j, 1, 1j], closed=True)
    assert self_intersections(bow) == 1
    assert not bow.is_simple()


def test_pruned_count_matches_exhaustive(rng):
    walk = np.cumsum(rng.normal(size=400) + 1j * rng.normal(size=400))
    c = CurveApprox(walk)
    n = self_intersections(c)
    assert n > 0
    assert self_intersections(c, prune=True) == n


def test_resample_mesh():
    c = CurveApprox([0, 1, 1 + 1j]).resample(0.1)
    assert c.mesh <= 0.1 + 1e-12
    assert c.length == pytest.approx(2.0)


def test_transforms():
    c = CurveApprox([1j, 2 + 1j], addresses=["0", "1"])
    assert np.allclose(c.conj().points, [-1j, 2 - 1j])
    assert np.allclose(c.scaled(2).points, [2j, 4 + 2j])
    assert c.reversed().addresses == ["1", "0"]
    assert c.diam == pytest.approx(2.0)


def test_csv_roundtrip(tmp_path):
    c = CurveApprox(np.array([0.1 + 0.2j, 1 / 3 - 1j]), addresses=["a", "b"])
    p = tmp_path / "c.csv"
    text = c.to_csv(p)
    assert text.splitlines()[0] == "re,im,address"
    d = CurveApprox.from_csv(p)
    assert np.array_equal(d.points, c.points)
    assert d.addresses == ["a", "b"]


def test_svg_path():
    d = CurveApprox([0, 1 + 1j], closed=False).svg_path()
    assert d.startswith("M0.000000,-0.000000 L1.000000,-1.000000")
    assert CurveApprox(SQUARE, closed=True).svg_path().endswith("Z")
