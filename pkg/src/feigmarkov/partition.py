"""Markov partition pieces, the two-map machine on the triangle Delta, veins and rays.

A piece is stored together with its *chart*: a depth-0 sector ``G`` and a
list of elementary maps whose composition sends ``G`` onto the piece.  The
elementary maps are

=========  ===========================================================
``A``      ``z -> z/|alpha|``
``S k``    ``z -> |alpha|^k z``
``N``      ``z -> -z``
``C``      ``z -> conj z``
``R j``    ``z -> exp(2 pi i j / r) z``
``u s``    the inverse branch u on the closed half-plane ``s`` (+1 upper, -1 lower)
``B``      ``u*``, i.e. ``z -> U(conj z)`` on the closed upper half-plane
=========  ===========================================================

Every map in the list has an explicit inverse (``g`` for the branches), so
the chart also gives the forward dynamics needed by veins, vein paths and
rays.  Boundaries are polylines obtained by pushing the sector boundary
through the chart; the sector boundary is built from the scale copies of
the limit curve I that make up L.
"""

from __future__ import annotations

import heapq
import json
import math
import weakref
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .core import FeigenbaumMap, eval_g, find_x0
from .curves import (
    CurveApprox,
    distance_to_polyline,
    hausdorff,
    polyline_area,
    self_intersections,
    winding_contains,
)
from .errors import Ambiguous, BadCriticality, BranchLoss, InsufficientData, NotCovered
from .ifs import _decimate, curve_L
from .inverse import U, find_c, refine_arcs

__all__ = [
    "Piece",
    "Vein",
    "MachineDomain",
    "RayPath",
    "PairClass",
    "DecayFit",
    "Tiling",
    "depth0_sectors",
    "pullback_piece",
    "census",
    "assign_levels",
    "machine_domain",
    "machine_tile",
    "machine_checks",
    "rescale_piece",
    "classify_pair",
    "compute_vein",
    "build_tiling",
    "tiling_coverage",
    "vein_path_to_zero",
    "external_ray",
    "rays_at_zero",
    "clip_to_window",
    "forward_check",
    "machinearc_defect",
    "uncovered_residue",
    "nested_chains",
    "diameter_decay",
    "census_json",
    "tiles_svg",
]

# scale window of the discretised ray L: copies |alpha|^k I for k in [K_MIN, K_MAX]
K_MIN = -14
K_MAX = 30
L_DEPTH = 5


# ---------------------------------------------------------------------------
# data types


@dataclass(eq=False)
class Piece:
    """One cell of the partition.

    ``gen`` is the generation record (kind, word, sector, scale); ``ops`` and
    ``sector`` form the chart.  ``x_R_inf`` is ``None`` for the unbounded
    depth-0 sectors, whose second base point is the direction
    ``meta["direction"]``.  ``level`` is the level within the generated
    census (0 when not computed).
    """

    depth: int | None
    gen: dict
    boundary: CurveApprox
    x_R: complex
    x_R_inf: complex | None
    level: int = 0
    sector: int = 0
    ops: tuple = ()
    inner: complex = 0j
    meta: dict = field(default_factory=dict)

    @property
    def diam(self) -> float:
        return self.boundary.diam

    @property
    def area(self) -> float:
        return self.boundary.area()

    @property
    def upper(self) -> bool:
        return self.inner.imag > 0

    def contains(self, z, tube: float = 0.0):
        return self.boundary.contains(z, tube)

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "gen": self.gen,
            "x_R": [float(self.x_R.real), float(self.x_R.imag)],
            "area": float(self.area),
            "diam": float(self.diam),
        }


@dataclass
class Vein:
    arc: CurveApprox
    length: float


@dataclass
class MachineDomain:
    """The triangle Delta, its image Delta_0 = u*(Delta) and the seed R_2.

    ``delta0`` is the boundary assembled from arcs (real segment, beta_2 and
    part of gamma^+/|alpha|); ``delta0_image`` is u* applied to ``delta``.
    """

    delta: CurveApprox
    delta0: CurveApprox
    delta0_image: CurveApprox
    seed: Piece
    gamma_plus: CurveApprox
    gamma_minus: CurveApprox
    beta1: CurveApprox
    beta2: CurveApprox
    corners: dict


@dataclass
class RayPath:
    target: complex
    arcs: list
    truncation_depth: int

    @property
    def path(self) -> CurveApprox:
        return CurveApprox(np.concatenate([a.points for a in self.arcs]))

    @property
    def mesh(self) -> float:
        return max(a.mesh for a in self.arcs)


class PairClass(str, Enum):
    DISJOINT = "disjoint"
    NESTED = "nested"
    SHARED_ARC = "shared_arc"
    SHARED_BASE_POINT = "shared_base_point"
    # interiors meet but neither piece contains the other
    OVERLAP = "overlap"


class DecayFit(NamedTuple):
    C: float
    lam: float
    r2: float


# ---------------------------------------------------------------------------
# per-map geometry


class _Geometry:
    def __init__(self, m: FeigenbaumMap):
        self.m = m
        self.r = m.r
        self.A = m.abs_alpha
        self.c = find_c(m).c
        self.x0 = find_x0(m)
        Lc = curve_L(m, L_DEPTH, K_MIN, K_MAX, self.c)
        self.L = Lc.points
        self.window = float(np.abs(self.L[-1]))
        self.I_depth = L_DEPTH
        self._sectors = None


_geoms: "weakref.WeakKeyDictionary[FeigenbaumMap, _Geometry]" = weakref.WeakKeyDictionary()


def _geom(m: FeigenbaumMap) -> _Geometry:
    g = _geoms.get(m)
    if g is None:
        g = _Geometry(m)
        _geoms[m] = g
    return g


# ---------------------------------------------------------------------------
# elementary maps


def _clip_lower(z):
    return z.real + 1j * np.minimum(z.imag, 0.0)


def _op(G: _Geometry, op, z):
    k = op[0]
    if k == "A":
        return z / G.A
    if k == "S":
        return z * G.A ** op[1]
    if k == "N":
        return -z
    if k == "C":
        return np.conj(z)
    if k == "R":
        return z * np.exp(2j * np.pi * op[1] / G.r)
    if k == "u":
        if op[1] > 0:
            return np.conj(U(G.m, _clip_lower(np.conj(z))))
        return U(G.m, _clip_lower(z))
    if k == "B":
        return U(G.m, _clip_lower(np.conj(z)))
    raise ValueError(f"unknown map {op!r}")


def _op_inv(G: _Geometry, op, z):
    k = op[0]
    if k == "A":
        return z * G.A
    if k == "S":
        return z / G.A ** op[1]
    if k in ("N", "C"):
        return _op(G, op, z)
    if k == "R":
        return z * np.exp(-2j * np.pi * op[1] / G.r)
    if k == "u":
        return eval_g(G.m, z)
    if k == "B":
        return np.conj(eval_g(G.m, z))
    raise ValueError(f"unknown map {op!r}")


def _apply(G: _Geometry, ops, z):
    z = np.asarray(z, dtype=complex)
    for op in ops:
        z = _op(G, op, z)
    return z


def _apply_inverse(G: _Geometry, ops, z):
    z = np.asarray(z, dtype=complex)
    for op in reversed(ops):
        z = _op_inv(G, op, z)
    return z


def _infinity_image(G: _Geometry, ops):
    """Image of the point at infinity of a sector, or None if it stays at infinity.

    U sends infinity (approached inside the lower half-plane) to c.
    """
    z = None
    for i, op in enumerate(ops):
        if op[0] == "u":
            z = np.conj(G.c) if op[1] > 0 else G.c
        elif op[0] == "B":
            z = G.c
        else:
            continue
        return complex(_apply(G, ops[i + 1:], z))
    return None


def _depth_after(depth, ops):
    d = depth
    for op in ops:
        if d is None:
            return None
        k = op[0]
        if k in ("u", "B"):
            d = d + 1
        elif k == "A":
            d = 2 * d
        elif k == "S":
            if op[1] <= 0:
                d = d * 2 ** (-op[1])
            elif d % 2 ** op[1] == 0:
                d = d // 2 ** op[1]
            else:
                d = None
    return d


def _word(ops) -> str:
    parts = []
    for op in ops:
        parts.append(op[0] if len(op) == 1 else f"{op[0]}{op[1]:+d}")
    return ".".join(parts)


# ---------------------------------------------------------------------------
# depth-0 sectors


def _sector_table(G: _Geometry):
    """(curve_cw, curve_ccw, ray angle, conjugated) for each depth-0 sector.

    A curve is ``(j, star)``: the ray L rotated by 2 pi j / r, conjugated
    first when ``star``.  The upper sectors come first, then their
    conjugates.
    """
    if G._sectors is None:
        r = G.r
        curves = [(0, False)]
        for j in range(1, r // 2):
            curves += [(j, True), (j, False)]
        curves.append((r // 2, True))
        up = [(curves[k - 1], curves[k], np.pi * k / r) for k in range(1, r)]
        G._sectors = [(a, b, th, False) for a, b, th in up] + [(a, b, th, True) for a, b, th in up]
    return G._sectors


def _curve_points(G: _Geometry, rot, star_all=False):
    j, star = rot
    p = np.conj(G.L) if star else G.L
    p = p * np.exp(2j * np.pi * j / G.r)
    return np.conj(p) if star_all else p


def _sector_polygon(G: _Geometry, s: int):
    a, b, th, cj = _sector_table(G)[s]
    pa = _curve_points(G, a, cj)
    pb = _curve_points(G, b, cj)
    t0, t1 = np.angle(pa[-1]), np.angle(pb[-1])
    if cj:
        t0, t1 = t1, t0
        pa, pb = pb, pa
    if t1 < t0:
        t1 += 2 * np.pi
    arc = G.window * np.exp(1j * np.linspace(t0, t1, 33))[1:-1]
    return np.concatenate([[0.0], pa, arc, pb[::-1]])


def _sector_angle(G: _Geometry, s: int) -> float:
    _, _, th, cj = _sector_table(G)[s]
    return -th if cj else th


def depth0_sectors(m: FeigenbaumMap) -> list[Piece]:
    """The 2(r-1) unbounded sectors between consecutive rotations of L and L*.

    Boundaries are truncated at the outer edge of the scale window.
    """
    G = _geom(m)
    out = []
    for s in range(len(_sector_table(G))):
        th = _sector_angle(G, s)
        out.append(Piece(
            depth=0,
            gen={"kind": "sector", "sector": s, "word": ""},
            boundary=CurveApprox(_sector_polygon(G, s), closed=True,
                                 meta={"truncated_at": G.window}),
            x_R=0j, x_R_inf=None, sector=s, ops=(),
            inner=complex(np.exp(1j * th)),
            meta={"direction": complex(np.exp(1j * th))},
        ))
    return out


# ---------------------------------------------------------------------------
# piece construction


def _simplify(z, rel):
    d = float(np.max(np.abs(z - z[0])))
    if d == 0:
        return z
    for _ in range(8):
        n = len(z)
        z = _decimate(z, rel * d)
        if len(z) == n:
            break
    return z


def _build(G: _Geometry, sector: int, ops: tuple, depth, gen: dict, rel: float,
           parent: Piece | None = None, simplify: bool = True) -> Piece:
    """Piece with chart (sector, ops).

    With ``parent`` (a piece whose chart is a prefix of ``ops``) only the
    remaining maps are applied, to the parent's polygon and marked points.
    """
    if parent is None:
        pts = _apply(G, ops, _sector_polygon(G, sector))
        th = _sector_angle(G, sector)
        marks = _apply(G, ops, np.array([0.0, np.exp(1j * th)]))
        x_inf = _infinity_image(G, ops)
    else:
        rest = ops[len(parent.ops):]
        known = parent.x_R_inf is not None
        seed = [parent.x_R, parent.inner] + ([parent.x_R_inf] if known else [])
        both = _apply(G, rest, np.concatenate([parent.boundary.points, seed]))
        n = len(parent.boundary.points)
        pts, marks = both[:n], both[n:]
        x_inf = complex(marks[2]) if known else _infinity_image(G, ops)
    x_R = complex(marks[0])
    pts = np.concatenate([[x_R], pts[1:]])
    if simplify:
        pts = _simplify(pts, rel)
    return Piece(depth=depth, gen=gen, boundary=CurveApprox(pts, closed=True),
                 x_R=x_R, x_R_inf=x_inf, sector=sector, ops=tuple(ops),
                 inner=complex(marks[1]))


def _branch_op(piece: Piece):
    return ("u", 1 if piece.upper else -1)


def pullback_piece(m: FeigenbaumMap, piece: Piece, branch: int, rel: float = 1e-6) -> Piece:
    """The component of g^{-1}(piece) obtained with the branch exp(2 pi i branch / r) u.

    The boundary polygon of ``piece`` is pulled back vertex by vertex.  A
    vertex leaving the sector |arg| < pi/r of u's image means the inverse
    jumped to another sheet; that raises BranchLoss.  The distance of the
    polygon to the critical value 1, relative to its diameter, is kept as
    ``meta["branch_margin"]``.
    """
    G = _geom(m)
    if not 0 <= branch < G.r:
        raise ValueError("branch must be in 0..r-1")
    op = _branch_op(piece)
    raw = _op(G, op, piece.boundary.points)
    small = np.abs(raw) > 1e-9
    if np.any(np.abs(np.angle(raw[small])) > np.pi / G.r + 1e-9):
        raise BranchLoss("pullback left the image sector of u")
    ops = piece.ops + (op,) + ((("R", branch),) if branch else ())
    word = piece.gen.get("word", "")
    gen = {"kind": "pullback", "sector": piece.sector,
           "word": (word + "." if word else "") + f"u{branch}"}
    if piece.depth == 0:
        # start from the untruncated sector data; the window arc maps near x_R_inf
        child = _build(G, piece.sector, ops, 1, gen, rel)
    else:
        child = _build(G, piece.sector, ops, piece.depth + 1, gen, rel, parent=piece)
    child.meta["branch_margin"] = float(
        np.min(np.abs(piece.boundary.points - 1.0)) / max(piece.diam, 1e-300))
    return child


def census(m: FeigenbaumMap, max_depth: int, rel: float = 1e-6) -> list[Piece]:
    """All pieces of depth 0..max_depth, generated by pulling back the sectors."""
    G = _geom(m)
    layer = depth0_sectors(m)
    out = list(layer)
    for _ in range(max_depth):
        layer = [pullback_piece(m, p, j, rel) for p in layer for j in range(G.r)]
        out.extend(layer)
    return out


def rescale_piece(m: FeigenbaumMap, piece: Piece) -> Piece:
    """The piece R/alpha (depth doubles)."""
    G = _geom(m)
    ops = piece.ops + (("A",), ("N",))
    gen = dict(piece.gen)
    gen["scale"] = gen.get("scale", 0) - 1
    return Piece(
        depth=None if piece.depth is None else 2 * piece.depth,
        gen=gen,
        boundary=CurveApprox(piece.boundary.points / m.alpha, closed=True),
        x_R=piece.x_R / m.alpha,
        x_R_inf=None if piece.x_R_inf is None else piece.x_R_inf / m.alpha,
        sector=piece.sector, ops=ops, inner=piece.inner / m.alpha,
        meta=dict(piece.meta),
    )


def forward_check(m: FeigenbaumMap, piece: Piece, n_samples: int = 200) -> float:
    """Distance of g^n(sampled boundary) from the depth-0 sector boundary, relative to scale.

    Boundary vertices are pushed back through the chart; the images must
    lie on the two curves bounding the sector (or on its window arc).
    """
    G = _geom(m)
    pts = piece.boundary.points
    idx = np.unique(np.linspace(1, len(pts) - 1, min(n_samples, len(pts) - 1)).astype(int))
    back = _apply_inverse(G, piece.ops, pts[idx])
    poly = CurveApprox(_sector_polygon(G, piece.sector), closed=True)
    keep = np.isfinite(back) & (np.abs(back) < 0.5 * G.window)
    d = distance_to_polyline(poly, back[keep])
    return float(np.max(d / np.maximum(1.0, np.abs(back[keep])))) if keep.any() else 0.0


# ---------------------------------------------------------------------------
# pair classification and levels


def _tube_for(p1: Piece, p2: Piece, tube):
    if tube is not None:
        return tube
    return 2e-3 * min(p1.diam, p2.diam)


def _side_counts(p: Piece, q: Piece, tube, sample):
    pts = p.boundary.points
    if len(pts) > sample:
        pts = pts[np.linspace(0, len(pts) - 1, sample).astype(int)]
    d = distance_to_polyline(q.boundary, pts)
    inside = winding_contains(q.boundary.points, pts)
    on = d <= tube
    return pts, inside & ~on, ~inside & ~on, on, d


def classify_pair(p1: Piece, p2: Piece, tube: float | None = None, sample: int = 600) -> PairClass:
    """Decide the Markov relation of two pieces from winding tests and boundary proximity.

    Raises Ambiguous when the only evidence for nesting or overlap sits
    within three tube widths of the other boundary.
    """
    tube = _tube_for(p1, p2, tube)
    b1, b2 = p1.boundary.points, p2.boundary.points
    if (b1.real.min() > b2.real.max() + tube or b2.real.min() > b1.real.max() + tube
            or b1.imag.min() > b2.imag.max() + tube or b2.imag.min() > b1.imag.max() + tube):
        return PairClass.DISJOINT
    pts1, in1, out1, on1, d1 = _side_counts(p1, p2, tube, sample)
    pts2, in2, out2, on2, d2 = _side_counts(p2, p1, tube, sample)
    # inner points of each piece break ties when a boundary lies on the other one
    c1 = bool(p2.contains(np.array([p1.inner]))[0])
    c2 = bool(p1.contains(np.array([p2.inner]))[0])

    def weak(inside, d):
        return 0 < inside.sum() <= 2 and float(np.max(d[inside])) < 3 * tube

    one_in_two = not out1.any() and (in1.any() or c1)
    two_in_one = not out2.any() and (in2.any() or c2)
    if one_in_two or two_in_one:
        if (one_in_two and not in1.any() and weak(in2, d2)) or (two_in_one and not in2.any() and weak(in1, d1)):
            raise Ambiguous("nesting decided within the tube")
        return PairClass.NESTED
    if in1.any() or in2.any() or c1 or c2:
        if weak(in1, d1) and not in2.any() and not (c1 or c2):
            raise Ambiguous("overlap decided within the tube")
        if weak(in2, d2) and not in1.any() and not (c1 or c2):
            raise Ambiguous("overlap decided within the tube")
        return PairClass.OVERLAP
    if not on1.any() and not on2.any():
        return PairClass.DISJOINT
    touch = np.concatenate([pts1[on1], pts2[on2]])
    extent = float(np.max(np.abs(touch - touch[0]))) if len(touch) else 0.0
    if extent > 10 * tube:
        return PairClass.SHARED_ARC
    if abs(p1.x_R - p2.x_R) <= 10 * tube and np.all(np.abs(touch - p1.x_R) <= 10 * tube):
        return PairClass.SHARED_BASE_POINT
    return PairClass.SHARED_ARC if len(touch) > 1 else PairClass.DISJOINT


def assign_levels(pieces: Sequence[Piece], tube: float | None = None) -> dict:
    """Level of every bounded piece within the given family: 1 + number of strict containers.

    Returns the pair classification table as well, keyed by index pairs.
    The levels are relative to the supplied (finite) family.
    """
    bounded = [i for i, p in enumerate(pieces) if p.x_R_inf is not None or p.depth != 0]
    table = {}
    containers = {i: 0 for i in bounded}
    for a in range(len(bounded)):
        for b in range(a + 1, len(bounded)):
            i, j = bounded[a], bounded[b]
            cls = classify_pair(pieces[i], pieces[j], tube)
            table[(i, j)] = cls
            if cls is PairClass.NESTED:
                if pieces[i].area < pieces[j].area:
                    containers[i] += 1
                else:
                    containers[j] += 1
    for i in bounded:
        pieces[i].level = containers[i] + 1
    return table


# ---------------------------------------------------------------------------
# veins


def _vein_points(G: _Geometry, ops, theta, rel, lo=K_MIN, hi=K_MAX):
    e = np.exp(1j * theta)

    def f(k, t):
        return _apply(G, ops, e * G.A ** (np.asarray(k, float) + t))

    ts, zs = refine_arcs(f, range(lo, hi), rel=rel, init=5)
    return np.concatenate([zs[0]] + [z[1:] for z in zs[1:]])


def compute_vein(m: FeigenbaumMap, piece: Piece, rel: float = 1e-3) -> Vein:
    """Image of the straight ray of the base sector under the chart, from x_R to x_R_inf."""
    G = _geom(m)
    th = _sector_angle(G, piece.sector)
    if not piece.ops:
        arc = CurveApprox(np.exp(1j * th) * np.array([0.0, G.window]))
        return Vein(arc, float(G.window))
    z = _vein_points(G, piece.ops, th, rel)
    pts = [np.array([piece.x_R]), z]
    if piece.x_R_inf is not None:
        pts.append(np.array([piece.x_R_inf]))
    arc = CurveApprox(np.concatenate(pts), meta={"tail": abs(z[-1] - pts[-1][-1])})
    return Vein(arc, arc.length)


# ---------------------------------------------------------------------------
# the machine


def _require_quadratic(m):
    if m.r != 2:
        raise BadCriticality("the machine, tiling and rays are implemented for r = 2")


def machine_domain(m: FeigenbaumMap, rel: float = 1e-6) -> MachineDomain:
    _require_quadratic(m)
    G = _geom(m)
    A, x0, c = G.A, G.x0, G.c
    L = G.L
    B = lambda z: _op(G, ("B",), np.asarray(z, dtype=complex))  # noqa: E731
    gm = np.concatenate([[x0], B(L)])                      # gamma^-: x0 -> c
    gp = np.concatenate([[x0], B(-np.conj(L))])            # gamma^+: x0 -> c
    inner = np.abs(L) <= abs(c) * (1 + 1e-12)
    Lc = L[inner]                                           # L from 0 to c
    g1 = np.concatenate([[x0], B(Lc)])                      # gamma_1^-: x0 -> c/|alpha|
    k = np.abs(Lc) <= abs(c) / A * (1 + 1e-12)
    beta2 = np.concatenate([[x0], B(Lc[k])])                # x0 -> p = u*(c/|alpha|)
    beta1 = B(Lc[~k | (np.abs(Lc - c / A) < 1e-14)])        # p -> c/|alpha|
    p = complex(B(c / A))
    # Delta: [0, x0], gamma_1^-, then L back from c/|alpha| to 0
    Ld = L[np.abs(L) <= abs(c) / A * (1 + 1e-12)]
    delta = np.concatenate([[0.0], g1, Ld[::-1]])
    delta = _simplify(delta, rel)
    # Delta_0: [x0/|alpha|, x0], beta_2, then gamma^+/|alpha| back from p to x0/|alpha|
    gpa = gp / A
    j = int(np.argmin(np.abs(gpa - p)))
    delta0 = np.concatenate([[x0 / A], beta2, gpa[:j + 1][::-1]])
    delta0_img = B(delta)
    seed_ops = (("B",), ("A",))
    seed = _build(G, 0, seed_ops, 2, {"kind": "machine", "word": "", "sector": 0}, rel)
    return MachineDomain(
        delta=CurveApprox(delta, closed=True),
        delta0=CurveApprox(_simplify(delta0, rel), closed=True),
        delta0_image=CurveApprox(_simplify(delta0_img, rel), closed=True),
        seed=seed,
        gamma_plus=CurveApprox(gp), gamma_minus=CurveApprox(gm),
        beta1=CurveApprox(beta1), beta2=CurveApprox(beta2),
        corners={"x0": x0, "x0/|alpha|": x0 / A, "c/|alpha|": c / A, "u*(c/|alpha|)": p},
    )


def machinearc_defect(m: FeigenbaumMap, domain: MachineDomain | None = None) -> tuple[float, float]:
    """(Hausdorff distance, mesh) between beta_1 and the part of gamma^+/|alpha| past u*(c/|alpha|)."""
    G = _geom(m)
    D = domain or machine_domain(m)
    g = D.gamma_plus.points / G.A
    j = int(np.argmin(np.abs(g - D.corners["u*(c/|alpha|)"])))
    arc = CurveApprox(g[j:])
    return hausdorff(arc, D.beta1), max(arc.mesh, D.beta1.mesh)


def _machine_child(G, piece: Piece, letter: str, rel: float) -> Piece:
    op = ("A",) if letter == "A" else ("B",)
    depth = None if piece.depth is None else (2 * piece.depth if letter == "A" else piece.depth + 1)
    gen = {"kind": "machine", "word": letter + piece.gen["word"], "sector": piece.sector}
    return _build(G, piece.sector, piece.ops + (op,), depth, gen, rel, parent=piece)


def machine_tile(m: FeigenbaumMap, max_word_len: int, rel: float = 1e-6,
                 domain: MachineDomain | None = None) -> list[Piece]:
    """Pieces w(R_2) for all words w over {A, B} with |w| <= max_word_len, shortest first.

    The word is written in composition order: ``"BA"`` is B(A(R_2)).
    """
    _require_quadratic(m)
    if max_word_len < 0:
        raise ValueError("max_word_len must be >= 0")
    G = _geom(m)
    D = domain or machine_domain(m, rel)
    layer = [D.seed]
    out = [D.seed]
    for _ in range(max_word_len):
        layer = [_machine_child(G, p, x, rel) for p in layer for x in "AB"]
        out.extend(layer)
    return out


def machine_checks(m: FeigenbaumMap, max_word_len: int = 6, samples: int = 200,
                   rng=None, domain: MachineDomain | None = None) -> dict:
    """Sampled checks of the machine: disjointness of A(Delta), B(Delta), R_2, area defect, base points."""
    _require_quadratic(m)
    G = _geom(m)
    D = domain or machine_domain(m)
    rng = np.random.default_rng(0) if rng is None else rng
    delta = D.delta
    Ad = CurveApprox(delta.points / G.A, closed=True)
    Bd = CurveApprox(_op(G, ("B",), delta.points), closed=True)
    R2 = D.seed.boundary
    regions = {"A(Delta)": Ad, "B(Delta)": Bd, "R2": R2}
    tube = 1e-6 * delta.diam
    overlaps = {}
    names = list(regions)
    for a in names:
        pts = _interior_samples(regions[a], samples, rng)
        for b in names:
            if a == b:
                continue
            inside = regions[b].contains(pts) & (distance_to_polyline(regions[b], pts) > tube)
            overlaps[f"{a}|{b}"] = int(inside.sum())
    pieces = machine_tile(m, max_word_len, rel=1e-5, domain=D)
    total = delta.area()
    defects = []
    acc = 0.0
    by_len = {}
    for p in pieces:
        by_len.setdefault(len(p.gen["word"]), []).append(p.area)
    for n in sorted(by_len):
        acc += sum(by_len[n])
        defects.append((total - acc) / total)
    base_ok = all(abs(p.x_R.imag) <= 1e-9 and 0 < p.x_R.real < G.x0 for p in pieces)
    return {"overlaps": overlaps, "area_defect": defects, "base_points_on_segment": base_ok,
            "n_pieces": len(pieces)}


def _interior_samples(curve: CurveApprox, n, rng):
    p = curve.points
    lo = complex(p.real.min(), p.imag.min())
    hi = complex(p.real.max(), p.imag.max())
    out = []
    tries = 0
    while sum(len(o) for o in out) < n and tries < 50:
        z = lo.real + (hi.real - lo.real) * rng.random(4 * n) + 1j * (
            lo.imag + (hi.imag - lo.imag) * rng.random(4 * n))
        out.append(z[curve.contains(z)])
        tries += 1
    z = np.concatenate(out)[:n]
    return z


# ---------------------------------------------------------------------------
# tiling of a neighbourhood of 0


@dataclass
class Tiling:
    """Pieces covering a disc around 0, largest first.

    Base tiles are g^{-2}-pullbacks of the machine pieces of
    F = +-(Delta u Delta*) and meet the annulus ``radius/|alpha| <= |z| <= radius``;
    each base tile is followed by its copies tile/alpha^k, k = 1..n_copies.
    """

    radius: float
    pieces: list
    n_copies: int
    _index: dict = field(default_factory=dict, repr=False)

    def _boxes(self, key, members):
        if key not in self._index:
            bb = np.array([[p.boundary.points.real.min(), p.boundary.points.real.max(),
                            p.boundary.points.imag.min(), p.boundary.points.imag.max()]
                           for p in members]).reshape(-1, 4)
            self._index[key] = (members, bb)
        return self._index[key]

    def locate(self, z: complex, direction: complex | None = None) -> Piece | None:
        """First piece containing z, optionally among those based on the ray R^+ direction."""
        if direction is None:
            members, bb = self._boxes(None, self.pieces)
        else:
            key = (round(direction.real, 12), round(direction.imag, 12))
            members, bb = self._boxes(key, [p for p in self.pieces if _on_axis(p.x_R, direction)])
        hit = np.nonzero((bb[:, 0] <= z.real) & (z.real <= bb[:, 1])
                         & (bb[:, 2] <= z.imag) & (z.imag <= bb[:, 3]))[0]
        for i in hit:
            if winding_contains(members[i].boundary.points, np.array([z]))[0]:
                return members[i]
        return None


_TAUS = ((), (("C",),), (("N",),), (("C",), ("N",)))


def _tiles_of(G, mp: Piece, radius, r_in, rel, pre_pts=16):
    """Base tiles +-u(|alpha| tau(P))/alpha of a machine piece P that meet the annulus."""
    out = []
    P = mp.boundary.points
    probe = P[np.linspace(0, len(P) - 1, min(pre_pts, len(P))).astype(int)]
    for tau in _TAUS:
        q = _apply(G, tau, probe) * G.A
        side = 1 if np.mean(q.imag) > 0 else -1
        v = _op(G, ("u", side), q) / G.A
        span = np.max(np.abs(v - v[0]))
        rv = np.abs(v)
        if rv.min() > radius + span or rv.max() < r_in - span:
            continue
        head = tau + (("S", 1), ("u", side))
        mid = _build(G, mp.sector, mp.ops + head, None, {}, rel, parent=mp, simplify=False)
        for sig in ((), (("N",),)):
            tail = sig + (("A",), ("N",))
            t = _build(G, mp.sector, mid.ops + tail, _depth_after(mp.depth, head + tail),
                       {"kind": "tile", "word": mp.gen["word"], "sector": mp.sector,
                        "tau": _word(tau), "sign": "-" if sig else "+", "scale": 0},
                       rel, parent=mid)
            rt = np.abs(t.boundary.points)
            if rt.min() <= radius and rt.max() >= r_in:
                out.append(t)
    return out


def _copy_tile(G, t: Piece, k: int) -> Piece:
    ops = t.ops + (("A",), ("N",)) * k
    gen = dict(t.gen)
    gen["scale"] = -k
    f = G.m.alpha ** (-k)
    return Piece(depth=None if t.depth is None else t.depth * 2 ** k, gen=gen,
                 boundary=CurveApprox(t.boundary.points * f, closed=True),
                 x_R=t.x_R * f, x_R_inf=None if t.x_R_inf is None else t.x_R_inf * f,
                 level=t.level, sector=t.sector, ops=ops, inner=t.inner * f)


_TILING_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def build_tiling(m: FeigenbaumMap, radius: float | None = None, max_pieces: int = 5000,
                 machine_depth: int = 10, rel: float = 1e-3, resolution: float | None = None) -> Tiling:
    """Tiles covering the disc |z| <= radius (default |1/alpha|/2), largest base tiles first.

    ``max_pieces`` counts every tile placed, rescaled copies included.  The
    ordering does not depend on ``max_pieces``, so a larger budget always
    extends a smaller one.
    """
    _require_quadratic(m)
    G = _geom(m)
    if radius is None:
        radius = 0.5 / G.A
    if resolution is None:
        resolution = radius / 250
    n_copies = max(0, int(math.ceil(math.log(radius / resolution) / math.log(G.A))))
    key = (radius, machine_depth, rel)
    cache = _TILING_CACHE.setdefault(m, {})
    if key not in cache:
        D = machine_domain(m, rel=min(rel, 1e-5))
        seed = _build(G, 0, D.seed.ops, 2, D.seed.gen, rel)
        r_in = radius / G.A
        layer = [seed]
        base = []
        for d in range(machine_depth + 1):
            for p in layer:
                base.extend(_tiles_of(G, p, radius, r_in, rel))
            if d < machine_depth:
                layer = [_machine_child(G, p, x, rel) for p in layer for x in "AB"]
        base.sort(key=lambda t: (-t.area, t.gen["word"], t.gen["tau"], t.gen["sign"]))
        cache[key] = base
    base = cache[key]
    pieces = []
    for t in base:
        for k in range(n_copies + 1):
            if len(pieces) >= max_pieces:
                break
            t.level = 1
            pieces.append(t if k == 0 else _copy_tile(G, t, k))
    return Tiling(radius=radius, pieces=pieces, n_copies=n_copies)


def _grid_in_disc(radius, n):
    xs = np.linspace(-radius, radius, n)
    X, Y = np.meshgrid(xs, xs)
    Z = (X + 1j * Y).ravel()
    return Z[np.abs(Z) <= radius]


def _covered(pieces, Z, tube):
    cov = np.abs(Z.imag) <= tube
    for t in pieces:
        b = t.boundary.points
        sel = (~cov) & (Z.real >= b.real.min()) & (Z.real <= b.real.max()) & \
              (Z.imag >= b.imag.min()) & (Z.imag <= b.imag.max())
        if sel.any():
            idx = np.nonzero(sel)[0]
            cov[idx[winding_contains(b, Z[idx])]] = True
    return cov


def tiling_coverage(m: FeigenbaumMap, radius: float | None = None, max_pieces: int = 5000,
                    grid: int = 500, tiling: Tiling | None = None, return_mask: bool = False):
    """Fraction of the disc covered by the closed tiles plus a tube around the real line.

    The area is measured on a ``grid`` x ``grid`` lattice clipped to the
    disc; the tube half-width is 1e-6 times the diameter of X (2.6e-6).
    """
    G = _geom(m)
    if tiling is None:
        tiling = build_tiling(m, radius, max_pieces)
    Z = _grid_in_disc(tiling.radius, grid)
    cov = _covered(tiling.pieces[:max_pieces], Z, 2.6e-6)
    frac = float(cov.mean())
    if return_mask:
        return frac, Z, cov
    return frac


def uncovered_residue(m: FeigenbaumMap, tiling: Tiling, grid: int = 300, band: float = 0.05) -> dict:
    """Where the uncovered part of the disc sits.

    Compares the share of uncovered lattice points lying within
    ``band * radius`` of the lines e^{i pi j / r} R (and within that distance of
    0) with the share of all lattice points there.
    """
    G = _geom(m)
    rho = tiling.radius
    Z = _grid_in_disc(rho, grid)
    cov = _covered(tiling.pieces, Z, 2.6e-6)
    w = band * rho
    near_line = np.zeros(len(Z), bool)
    for j in range(G.r):
        e = np.exp(1j * np.pi * j / G.r)
        near_line |= np.abs((Z / e).imag) <= w
    near_zero = np.abs(Z) <= w
    miss = ~cov
    out = {"uncovered": float(miss.mean()),
           "line_share_uncovered": float(near_line[miss].mean()) if miss.any() else 0.0,
           "line_share_all": float(near_line.mean()),
           "zero_share_uncovered": float(near_zero[miss].mean()) if miss.any() else 0.0,
           "zero_share_all": float(near_zero.mean())}
    return out


# ---------------------------------------------------------------------------
# nested chains and diameter decay


def nested_chains(m: FeigenbaumMap, length: int = 6, count: int = 4, rel: float = 1e-5,
                  tiling: Tiling | None = None) -> list[list[Piece]]:
    """Chains R_2 = P_0 > P_1 > ... > P_{length-1} of nested pieces.

    For a tile t = Phi(R_2) lying in the upper depth-0 sector R_0 the map
    Psi = A o B o Phi sends R_2 into A(B(R_0)) = R_2, so the iterates
    Psi^k(R_2) are nested.  One chain per tile, for the ``count`` largest
    suitable tiles.
    """
    _require_quadratic(m)
    G = _geom(m)
    if tiling is None:
        tiling = build_tiling(m, max_pieces=600)
    cands = [t for t in tiling.pieces if t.gen.get("scale", 0) == 0 and _on_axis(t.x_R, 1j)]
    if not cands:
        raise InsufficientData("no tile inside the upper sector")
    D = machine_domain(m, rel=rel)
    chains = []
    for t in cands[:count]:
        phi = t.ops[2:]  # drop the (B, A) that builds R_2 from R_0
        chain = [D.seed]
        for _ in range(length - 1):
            prev = chain[-1]
            ops = prev.ops + phi + (("B",), ("A",))
            gen = {"kind": "chain", "word": t.gen["word"], "tau": t.gen["tau"],
                   "sign": t.gen["sign"], "step": len(chain), "sector": 0}
            chain.append(_build(G, 0, ops, _depth_after(prev.depth, phi + (("B",), ("A",))),
                                gen, rel, parent=prev))
        chains.append(chain)
    return chains


def diameter_decay(chains: Sequence[Sequence[Piece]]) -> DecayFit:
    """Fit log(diam R_k / diam R_1) = log C + k log lambda over all chains.

    C is then raised to the smallest value for which every member obeys
    diam R_k <= C lambda^k diam R_1.
    """
    ks, ys = [], []
    for ch in chains:
        if len(ch) < 2:
            continue
        d0 = ch[0].diam
        for k, p in enumerate(ch):
            ks.append(k)
            ys.append(math.log(p.diam / d0))
    if len(set(ks)) < 2:
        raise InsufficientData("need nested chains with at least two pieces")
    ks = np.array(ks, float)
    ys = np.array(ys)
    slope, icept = np.polyfit(ks, ys, 1)
    pred = icept + slope * ks
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    lam = math.exp(slope)
    C = float(np.max(np.exp(ys - slope * ks)))
    return DecayFit(C=C, lam=lam, r2=r2)


# ---------------------------------------------------------------------------
# vein paths


def _on_axis(x, direction, tol=1e-9):
    """x lies on the open ray R^+ * direction."""
    y = x / direction
    return abs(y.imag) <= tol * max(1.0, abs(y)) and y.real > 0


def _segment_image(G, ops, y, rel=1e-3):
    """Image under the chart of the segment [0, y] on the straight ray i R^+."""
    if y == 0:
        return np.array([complex(_apply(G, ops, 0.0))])

    def f(k, t):
        return _apply(G, ops, y * t)

    ts, zs = refine_arcs(f, [0], rel=rel, init=9)
    return zs[0]


def vein_path_to_zero(m: FeigenbaumMap, z: complex, max_level: int = 6,
                      tiling: Tiling | None = None) -> CurveApprox:
    """Curve from 0 towards z made of vein arcs of nested pieces.

    ``z`` is first scaled by a power of |alpha| into the tiled disc (the
    family of pieces is invariant under that scaling).  From 0 the path
    runs along the axis to the base point of the tile containing z, then
    along the vein of each piece to the base point of the next, smaller
    piece containing z.  ``meta`` records the length, the number of levels
    used and the distance from the end point to z.
    """
    _require_quadratic(m)
    G = _geom(m)
    z = complex(z)
    if z == 0:
        return CurveApprox(np.array([0j]), meta={"length": 0.0, "levels": 0, "gap": 0.0})
    if tiling is None:
        tiling = build_tiling(m)
    rho = tiling.radius
    k = max(0, int(math.ceil(math.log(abs(z) / rho) / math.log(G.A))))
    zs = z / G.A ** k
    tube = 2.6e-6
    t0 = tiling.locate(zs)
    if t0 is None:
        if abs(zs.imag) <= tube:
            pts = np.array([0.0, zs.real + 0j])
            return CurveApprox(pts * G.A ** k, meta={"length": abs(z), "levels": 0, "gap": 0.0})
        raise NotCovered("point not covered by the generated tiling")
    arcs = [np.array([0j, t0.x_R])]
    ops = t0.ops
    d = np.exp(1j * _sector_angle(G, t0.sector))
    w = complex(_apply_inverse(G, ops, zs))
    level = 1
    while level < max_level:
        if not np.isfinite(w) or w == 0:
            break
        kk = int(math.floor(math.log(abs(w) / rho) / math.log(G.A))) + 1
        ws = w / G.A ** kk
        t = tiling.locate(ws, d)
        if t is None:
            break
        # the vein of the current piece runs from its base point to that of the next
        arcs.append(_segment_image(G, ops, t.x_R * G.A ** kk))
        ops = t.ops + (("S", kk),) + ops
        d = np.exp(1j * _sector_angle(G, t.sector))
        w = complex(_apply_inverse(G, t.ops, ws))
        level += 1
    pts = np.concatenate(arcs) * G.A ** k
    end = pts[-1]
    curve = CurveApprox(pts)
    curve.meta.update({"length": curve.length, "levels": level, "gap": abs(end - z)})
    return curve


# ---------------------------------------------------------------------------
# external rays


def _tail_points(G, q):
    """Arc of the rotated or conjugated ray through q = +-c or +-c*, from q to the window edge."""
    base = G.L[np.abs(G.L) >= abs(G.c) * (1 - 1e-12)]
    for sgn in (1, -1):
        for cj in (False, True):
            v = sgn * (np.conj(G.c) if cj else G.c)
            if abs(v - q) <= 1e-9 * abs(q):
                p = np.conj(base) if cj else base
                return sgn * p
    raise NotCovered("tail point is not one of +-c, +-c*")


def _concat_cancel(path, arc, tol):
    """Append ``arc`` (starting at path[-1]) and cancel any stretch retraced backwards."""
    if len(path) < 2 or len(arc) < 2:
        return np.concatenate([path, arc[1:]])
    d = distance_to_polyline(CurveApprox(path), arc)
    k = 0
    while k + 1 < len(arc) and d[k + 1] <= tol:
        k += 1
    if k == 0:
        return np.concatenate([path, arc[1:]])
    j = int(np.argmin(np.abs(path - arc[k])))
    return np.concatenate([path[:j + 1], arc[k + 1:]])


def _ray_from_chart(G, sector, ops):
    """Arcs of the ray from the base point of the piece (sector, ops) to infinity.

    The first arc is the image of the boundary curve of the sector that is
    L for the upper sector and -L for the lower one.  Every branch in the
    chart sends infinity to one of +-c, +-c*; from there the ray continues
    along the image of the corresponding tail of the invariant ray.
    """
    first = G.L if sector == 0 else -G.L
    arcs = [np.concatenate([[complex(_apply(G, ops, 0.0))], _apply(G, ops, first)])]
    for i, op in enumerate(ops):
        if op[0] not in ("u", "B"):
            continue
        q = np.conj(G.c) if (op[0] == "u" and op[1] > 0) else G.c
        tail = _tail_points(G, q)
        arcs.append(_apply(G, ops[i + 1:], tail))
    return arcs


def external_ray(m: FeigenbaumMap, x: complex, depth: int = 4,
                 pieces: Sequence[Piece] | None = None, tol: float = 1e-9) -> RayPath:
    """Ray from x to the edge of the scale window along boundary arcs of pieces.

    x must be 0 or the base point of a piece of depth <= ``depth``; among
    several pieces with that base point the one of smallest depth lying in
    the upper half-plane is used.
    """
    _require_quadratic(m)
    G = _geom(m)
    x = complex(x)
    if x == 0:
        return RayPath(target=0j, arcs=[CurveApprox(np.concatenate([[0j], G.L]))],
                       truncation_depth=0)
    if pieces is None:
        pieces = census(m, depth, rel=1e-6)
    hits = [p for p in pieces if p.depth and p.depth <= depth
            and abs(p.x_R - x) <= tol * max(1.0, abs(x))]
    if not hits:
        raise NotCovered("x is not a base point of a generated piece")
    hits.sort(key=lambda p: (p.depth, not p.upper, p.gen.get("word", "")))
    p = hits[0]
    raw = _ray_from_chart(G, p.sector, p.ops)
    scale = max(abs(x), 1e-12)
    path = raw[0]
    for a in raw[1:]:
        path = _concat_cancel(path, a, 1e-9 * scale)
    # split back into arcs only for reporting; keep a single cleaned arc
    arc = CurveApprox(path, meta={"piece": p.gen})
    return RayPath(target=x, arcs=[arc], truncation_depth=p.depth)


def rays_at_zero(m: FeigenbaumMap) -> list[CurveApprox]:
    """The 2r rays to 0: rotations of L and of L* by 2 pi j / r."""
    G = _geom(m)
    out = []
    for j in range(G.r):
        w = np.exp(2j * np.pi * j / G.r)
        out.append(CurveApprox(np.concatenate([[0j], G.L * w])))
        out.append(CurveApprox(np.concatenate([[0j], np.conj(G.L) * w])))
    return out


def clip_to_window(curve: CurveApprox, radius: float) -> CurveApprox:
    """Initial stretch of the curve before it first leaves the disc of the given radius."""
    p = curve.points
    out = np.nonzero(np.abs(p) > radius)[0]
    if len(out):
        p = p[:out[0]]
    return CurveApprox(p)


# ---------------------------------------------------------------------------
# export


def census_json(pieces: Sequence[Piece], path=None) -> str:
    data = [p.to_dict() for p in pieces if p.depth != 0]
    text = json.dumps(data, indent=1, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def tiles_svg(pieces: Sequence[Piece], path=None, width: int = 800) -> str:
    """One path per piece; fill colour keyed by depth parity."""
    pts = np.concatenate([p.boundary.points for p in pieces])
    lo = complex(pts.real.min(), pts.imag.min())
    hi = complex(pts.real.max(), pts.imag.max())
    span = max(hi.real - lo.real, hi.imag - lo.imag) or 1.0
    s = width / span
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{width}" '
             f'viewBox="0 0 {width} {width}">']
    for p in pieces:
        q = (p.boundary.points - lo) * s
        d = " ".join(f"{'M' if i == 0 else 'L'}{v.real:.3f},{width - v.imag:.3f}"
                     for i, v in enumerate(q)) + " Z"
        fill = "#d8e4f0" if (p.depth or 0) % 2 == 0 else "#f0dcc8"
        lines.append(f'<path d="{d}" fill="{fill}" stroke="#333" stroke-width="0.3"/>')
    lines.append("</svg>")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
