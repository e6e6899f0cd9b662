import json
import math

import numpy as np
import pytest

from feigmarkov import partition as part
from feigmarkov.core import FeigenbaumMap, eval_g
from feigmarkov.curves import CurveApprox, hausdorff
from feigmarkov.errors import BadCriticality, NotCovered
from feigmarkov.partition import PairClass

TUBE = 2.6e-6


@pytest.fixture(scope="module")
def C2(m):
    return part.census(m, 2)


@pytest.fixture(scope="module")
def small_tiling(m):
    return part.build_tiling(m, max_pieces=300, machine_depth=6)


@pytest.fixture
def quartic():
    # only r matters: everything r = 2 specific must refuse before touching the coefficients
    return FeigenbaumMap(r=4, coeffs=np.array([-1.0]), alpha=-1.69, order=1, residual=0.0, radius=1.0)


def test_depth0_sectors(m):
    S = part.depth0_sectors(m)
    assert len(S) == 2 * (m.r - 1)
    for p in S:
        assert p.depth == 0 and p.x_R == 0 and p.x_R_inf is None
        assert p.contains(np.array([0.5 * p.meta["direction"]]))[0]
    assert S[0].upper != S[1].upper


def test_census_counts(m, C2):
    by_depth = {}
    for p in C2:
        by_depth[p.depth] = by_depth.get(p.depth, 0) + 1
    assert by_depth == {0: 2, 1: 4, 2: 8}


def test_pieces_map_forward_onto_sectors(m, C2):
    # g^n sends the boundary of a depth-n piece onto the boundary of its sector,
    # up to the membership tube 1e-6 diam(X)
    for p in C2:
        if p.depth:
            assert part.forward_check(m, p) <= TUBE
    p = next(q for q in C2 if q.depth == 1)
    w = eval_g(m, p.x_R)
    assert abs(w) <= 1e-9


def test_base_points_are_preimages_of_zero(m, C2):
    for p in C2:
        if p.depth == 2:
            assert abs(eval_g(m, eval_g(m, p.x_R))) <= 1e-8


def test_pair_classes(m, C2):
    d1 = [p for p in C2 if p.depth == 1]
    assert part.classify_pair(d1[0], d1[0]) is PairClass.NESTED
    seen = {part.classify_pair(a, b) for i, a in enumerate(d1) for b in d1[i + 1:]}
    assert PairClass.OVERLAP not in seen
    bounded = [p for p in C2 if p.depth]
    for a in bounded:
        for b in bounded:
            if a is not b:
                assert part.classify_pair(a, b) is not PairClass.OVERLAP


def test_assign_levels(m, C2):
    pieces = [p for p in C2 if p.depth]
    table = part.assign_levels(pieces)
    assert len(table) == len(pieces) * (len(pieces) - 1) // 2
    assert all(p.level >= 1 for p in pieces)
    assert min(p.level for p in pieces if p.depth == 1) == 1


def test_rescale_matches_a_pullback(m):
    C = part.census(m, 2)
    for p in [q for q in C if q.depth == 1]:
        s = part.rescale_piece(m, p)
        assert s.depth == 2
        match = [q for q in C if q.depth == 2 and abs(q.x_R - s.x_R) < 1e-9]
        assert match
        best = min(hausdorff(s.boundary, q.boundary) for q in match)
        assert best <= 3 * s.boundary.mesh


def test_pullback_branch_validation(m, C2):
    with pytest.raises(ValueError):
        part.pullback_piece(m, C2[0], 2)


def test_vein(m, C2):
    p = next(q for q in C2 if q.depth == 1)
    v = part.compute_vein(m, p)
    assert abs(v.arc.points[0] - p.x_R) == 0
    assert v.length >= abs(p.x_R_inf - p.x_R)
    assert v.arc.is_simple()


def test_machine_domain(m):
    D = part.machine_domain(m)
    assert D.delta.is_simple()
    # Delta_0 assembled from arcs agrees with u*(Delta)
    assert hausdorff(D.delta0, D.delta0_image) <= 1e-3 * D.delta.diam
    hd, mesh = part.machinearc_defect(m, D)
    assert hd <= mesh


def test_machine_tile(m):
    pieces = part.machine_tile(m, 3)
    assert len(pieces) == 2 ** 4 - 1
    assert [len(p.gen["word"]) for p in pieces] == sorted(len(p.gen["word"]) for p in pieces)
    with pytest.raises(ValueError):
        part.machine_tile(m, -1)


def test_machine_checks(m):
    mc = part.machine_checks(m, max_word_len=4, samples=100)
    assert not any(mc["overlaps"].values())
    assert mc["base_points_on_segment"]
    assert all(b < a for a, b in zip(mc["area_defect"], mc["area_defect"][1:]))


def test_small_tiling(m, small_tiling):
    T = small_tiling
    assert len(T.pieces) == 300
    assert T.radius == pytest.approx(0.5 / m.abs_alpha)
    areas = [t.area for t in T.pieces if t.gen.get("scale", 0) == 0]
    assert areas == sorted(areas, reverse=True)
    frac = part.tiling_coverage(m, max_pieces=300, tiling=T, grid=200)
    assert 0.5 < frac < 1
    # a smaller budget is a prefix of a larger one
    assert part.tiling_coverage(m, max_pieces=100, tiling=T, grid=200) <= frac
    z = T.pieces[0].inner
    assert T.locate(z) is not None


def test_vein_path(m, small_tiling):
    z = 0.05 + 0.03j
    gaps = []
    for level in (1, 2, 4):
        path = part.vein_path_to_zero(m, z, max_level=level, tiling=small_tiling)
        assert path.points[0] == 0
        assert 1 <= path.meta["levels"] <= level
        gaps.append(path.meta["gap"])
    assert gaps == sorted(gaps, reverse=True) and gaps[-1] < gaps[0]
    assert path.meta["length"] <= 3 * abs(z)
    # the tiling is invariant under z -> |alpha| z, and so are the paths
    big = part.vein_path_to_zero(m, m.abs_alpha * z, max_level=4, tiling=small_tiling)
    assert big.meta["length"] == pytest.approx(m.abs_alpha * path.meta["length"], rel=1e-9)
    assert part.vein_path_to_zero(m, 0j).meta["length"] == 0


def test_nested_chains(m, small_tiling):
    chains = part.nested_chains(m, length=4, count=2, tiling=small_tiling)
    for ch in chains:
        d = [p.diam for p in ch]
        assert all(b < a for a, b in zip(d, d[1:]))
    fit = part.diameter_decay(chains)
    assert fit.lam < 1


def test_diameter_decay_on_exact_geometric_chain():
    class P:
        def __init__(self, d):
            self.diam = d
    fit = part.diameter_decay([[P(2.0 * 0.3 ** k) for k in range(6)]])
    assert fit.lam == pytest.approx(0.3)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.C == pytest.approx(1.0)


def test_rays(m, C2):
    rays = part.rays_at_zero(m)
    assert len(rays) == 2 * m.r
    assert part.external_ray(m, 0).path.points[0] == 0
    p = next(q for q in C2 if q.depth == 1 and q.upper)
    ray = part.external_ray(m, p.x_R, depth=2, pieces=C2)
    assert abs(ray.path.points[0] - p.x_R) <= 1e-12
    clipped = part.clip_to_window(ray.path, 3.0)
    assert np.all(np.abs(clipped.points) <= 3.0)
    assert clipped.is_simple()
    with pytest.raises(NotCovered):
        part.external_ray(m, 0.123 + 0.456j, depth=2, pieces=C2)


def test_ray_scaling(m, C2):
    p = next(q for q in C2 if q.depth == 1 and q.upper)
    x = p.x_R / m.alpha
    C = part.census(m, 2)
    r1 = part.external_ray(m, x, pieces=C)
    r2 = part.external_ray(m, m.abs_alpha * x, pieces=C)
    a = part.clip_to_window(CurveApprox(m.abs_alpha * r1.path.points), 2.0)
    b = part.clip_to_window(r2.path, 2.0)
    assert hausdorff(a, b) <= 3 * max(a.mesh, b.mesh)


def test_only_quadratic(quartic):
    for f in (part.machine_domain, part.build_tiling, lambda q: part.external_ray(q, 1j)):
        with pytest.raises(BadCriticality):
            f(quartic)


def test_exports(m, C2, tmp_path):
    text = part.census_json(C2, tmp_path / "c.json")
    data = json.loads(text)
    assert len(data) == len(C2) - 2
    assert set(data[0]) == {"depth", "gen", "x_R", "area", "diam"}
    assert part.census_json(C2) == text
    part.tiles_svg([p for p in C2 if p.depth], tmp_path / "t.svg")
    svg = (tmp_path / "t.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<path") == len(C2) - 2
