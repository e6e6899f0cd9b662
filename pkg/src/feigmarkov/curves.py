"""Polylines in the complex plane with optional symbolic addresses.

Every region the library deals with (the compact X, Markov pieces, arcs of
the invariant ray) is only available as a polyline, so the geometric
predicates here (winding, tube distance, Hausdorff distance, simplicity)
carry most of the verification work.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "SymbolWord",
    "CurveApprox",
    "hausdorff",
    "winding_contains",
    "distance_to_polyline",
    "self_intersections",
    "polyline_area",
]

_CHUNK = 2_000_000


@dataclass(frozen=True)
class SymbolWord:
    """A finite word over the maps of an IFS.

    ``system='S'`` uses the alphabet {1, 2, 3} where maps 1 and 2 are
    antiholomorphic and 3 is holomorphic; ``system='Sinf'`` uses positive
    integers, all antiholomorphic.
    """

    symbols: tuple = ()
    system: str = "S"

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if self.system == "S":
            if any(s not in (1, 2, 3) for s in self.symbols):
                raise ValueError("symbols of S must lie in {1,2,3}")
        elif self.system == "Sinf":
            if any(s < 1 for s in self.symbols):
                raise ValueError("symbols of S-infinity are positive integers")
        else:
            raise ValueError(f"unknown system {self.system!r}")

    @property
    def n_anti(self) -> int:
        if self.system == "S":
            return sum(1 for s in self.symbols if s != 3)
        return len(self.symbols)

    @property
    def orientation(self) -> int:
        return -1 if self.n_anti % 2 else 1

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        if self.system == "S":
            return "".join(str(s) for s in self.symbols)
        return ".".join(str(s) for s in self.symbols)


@dataclass(eq=False)
class CurveApprox:
    """Ordered polyline, optionally closed, with optional vertex addresses."""

    points: np.ndarray
    addresses: Sequence[str] | None = None
    closed: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        if len(pts) > 1:
            keep = np.ones(len(pts), bool)
            keep[1:] = pts[1:] != pts[:-1]
            if not keep.all():
                pts = pts[keep]
                if self.addresses is not None:
                    self.addresses = [a for a, k in zip(self.addresses, keep) if k]
        if self.closed and len(pts) > 2 and pts[0] == pts[-1]:
            pts = pts[:-1]
            if self.addresses is not None:
                self.addresses = list(self.addresses)[:-1]
        self.points = pts
        if self.addresses is not None and len(self.addresses) != len(pts):
            raise ValueError("one address per vertex required")

    def __len__(self):
        return len(self.points)

    # -- geometry -----------------------------------------------------
    def ring(self) -> np.ndarray:
        """Vertices with the first repeated at the end when closed."""
        if self.closed:
            return np.append(self.points, self.points[:1])
        return self.points

    def segments(self):
        p = self.ring()
        return p[:-1], p[1:]

    @property
    def length(self) -> float:
        return float(np.sum(np.abs(np.diff(self.ring()))))

    @property
    def mesh(self) -> float:
        d = np.abs(np.diff(self.ring()))
        return float(d.max()) if len(d) else 0.0

    @property
    def diam(self) -> float:
        return _diameter(self.points)

    def area(self) -> float:
        return abs(polyline_area(self.points))

    def scaled(self, s) -> "CurveApprox":
        return CurveApprox(self.points * s, self.addresses, self.closed, dict(self.meta))

    def conj(self) -> "CurveApprox":
        return CurveApprox(np.conj(self.points), self.addresses, self.closed, dict(self.meta))

    def reversed(self) -> "CurveApprox":
        a = None if self.addresses is None else list(self.addresses)[::-1]
        return CurveApprox(self.points[::-1], a, self.closed, dict(self.meta))

    def contains(self, z, tube: float = 0.0) -> np.ndarray:
        """Winding-number membership; points within ``tube`` of the curve count as inside."""
        if not self.closed:
            raise ValueError("membership needs a closed curve")
        inside = winding_contains(self.points, z)
        if tube > 0:
            inside |= distance_to_polyline(self, z) <= tube
        return inside

    def distance(self, z) -> np.ndarray:
        return distance_to_polyline(self, z)

    def is_simple(self) -> bool:
        return self_intersections(self, first_only=True) == 0

    def addresses_monotone(self) -> bool:
        if self.addresses is None:
            return True
        a = list(self.addresses)
        return all(x < y for x, y in zip(a, a[1:]))

    def resample(self, spacing: float) -> "CurveApprox":
        """Insert vertices so no segment is longer than ``spacing``."""
        p = self.ring()
        out = [p[:1]]
        for a, b in zip(p[:-1], p[1:]):
            k = max(1, int(np.ceil(abs(b - a) / spacing)))
            t = np.arange(1, k + 1) / k
            out.append(a + (b - a) * t)
        pts = np.concatenate(out)
        if self.closed:
            pts = pts[:-1]
        return CurveApprox(pts, None, self.closed)

    # -- export -------------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "address"])
        addr = self.addresses if self.addresses is not None else [""] * len(self)
        for z, a in zip(self.points, addr):
            w.writerow([f"{z.real:.17g}", f"{z.imag:.17g}", a])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path, closed=False) -> "CurveApprox":
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        pts = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        addr = [r["address"] for r in rows]
        if not any(addr):
            addr = None
        return cls(pts, addr, closed)

    def svg_path(self, flip: bool = True) -> str:
        p = self.ring()
        y = -p.imag if flip else p.imag
        d = " ".join(f"{'M' if i == 0 else 'L'}{x:.6f},{v:.6f}"
                     for i, (x, v) in enumerate(zip(p.real, y)))
        if self.closed:
            d += " Z"
        return d


# ---------------------------------------------------------------------------


def _diameter(p):
    p = np.asarray(p)
    if len(p) < 2:
        return 0.0
    if len(p) > 2000:
        from scipy.spatial import ConvexHull
        xy = np.column_stack([p.real, p.imag])
        try:
            p = p[ConvexHull(xy).vertices]
        except Exception:
            pass
    best = 0.0
    for i in range(0, len(p), 2000):
        d = np.abs(p[i:i + 2000, None] - p[None, :])
        best = max(best, float(d.max()))
    return best


def polyline_area(points) -> float:
    """Signed shoelace area of a closed polygon."""
    p = np.asarray(points)
    q = np.roll(p, -1)
    return 0.5 * float(np.sum(p.real * q.imag - q.real * p.imag))


def winding_contains(polygon, z) -> np.ndarray:
    """Even-odd crossing test of ``z`` against a closed polygon.

    Edges are bucketed into horizontal bands so each query point is only
    tested against edges that can cross its horizontal line.
    """
    poly = np.asarray(polygon, dtype=complex)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros(len(z), bool)
    if len(poly) < 3 or len(z) == 0:
        return out
    a = poly
    b = np.roll(poly, -1)
    ylo = np.minimum(a.imag, b.imag)
    yhi = np.maximum(a.imag, b.imag)
    y0, y1 = ylo.min(), yhi.max()
    cand = (z.imag >= y0) & (z.imag <= y1)
    if not cand.any():
        return out
    nb = int(min(1024, max(1, len(a) // 16)))
    h = (y1 - y0) / nb or 1.0
    band = np.clip(((z.imag - y0) / h).astype(np.int64), 0, nb - 1)
    e0 = np.clip(((ylo - y0) / h).astype(np.int64), 0, nb - 1)
    e1 = np.clip(((yhi - y0) / h).astype(np.int64), 0, nb - 1)
    # edge list per band (an edge spanning several bands appears in each)
    span = e1 - e0 + 1
    eidx = np.repeat(np.arange(len(a)), span)
    ebands = np.repeat(e0, span) + (np.arange(span.sum()) - np.repeat(np.cumsum(span) - span, span))
    order = np.argsort(ebands, kind="stable")
    eidx = eidx[order]
    estart = np.searchsorted(ebands[order], np.arange(nb + 1))
    pidx = np.nonzero(cand)[0]
    porder = pidx[np.argsort(band[pidx], kind="stable")]
    pstart = np.searchsorted(band[porder], np.arange(nb + 1))
    for k in range(nb):
        pts = porder[pstart[k]:pstart[k + 1]]
        if len(pts) == 0:
            continue
        ed = eidx[estart[k]:estart[k + 1]]
        aa, bb = a[ed], b[ed]
        step = max(1, _CHUNK // max(1, len(ed)))
        for i in range(0, len(pts), step):
            zz = z[pts[i:i + step], None]
            cond = (aa.imag > zz.imag) != (bb.imag > zz.imag)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = aa.real + (zz.imag - aa.imag) * (bb.real - aa.real) / (bb.imag - aa.imag)
            cross = cond & (zz.real < xint)
            out[pts[i:i + step]] = (np.count_nonzero(cross, axis=1) % 2) == 1
    return out


def _seg_dist(z, a, b):
    d = b - a
    dd = np.abs(d) ** 2
    dd = np.where(dd == 0, 1.0, dd)
    t = np.clip(((z - a) * np.conj(d)).real / dd, 0.0, 1.0)
    return np.abs(z - (a + t * d))


def distance_to_polyline(curve: CurveApprox, z) -> np.ndarray:
    """Exact distance from points to a polyline.

    Segments are grouped into consecutive blocks with bounding circles; only
    blocks whose lower bound beats the best upper bound are scanned exactly.
    """
    a, b = curve.segments()
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if len(a) == 0:
        return np.abs(z - curve.points[0])
    if len(a) * len(z) <= _CHUNK:
        return np.min(_seg_dist(z[:, None], a[None, :], b[None, :]), axis=1)
    bs = 64
    nblk = -(-len(a) // bs)
    pad = nblk * bs - len(a)
    A = np.concatenate([a, np.repeat(a[-1:], pad)]).reshape(nblk, bs)
    B = np.concatenate([b, np.repeat(b[-1:], pad)]).reshape(nblk, bs)
    lo = np.minimum(A.real.min(1), B.real.min(1)) + 1j * np.minimum(A.imag.min(1), B.imag.min(1))
    hi = np.maximum(A.real.max(1), B.real.max(1)) + 1j * np.maximum(A.imag.max(1), B.imag.max(1))
    cen = 0.5 * (lo + hi)
    rad = np.maximum(np.abs(A - cen[:, None]).max(1), np.abs(B - cen[:, None]).max(1))
    out = np.empty(len(z))
    step = max(1, _CHUNK // nblk)
    for i in range(0, len(z), step):
        zz = z[i:i + step]
        D = np.abs(zz[:, None] - cen[None, :])
        ub = np.min(D + rad[None, :], axis=1)
        pi, bi = np.nonzero(D - rad[None, :] <= ub[:, None])
        best = np.full(len(zz), np.inf)
        for j in range(0, len(pi), max(1, _CHUNK // bs)):
            sl = slice(j, j + max(1, _CHUNK // bs))
            d = np.min(_seg_dist(zz[pi[sl], None], A[bi[sl]], B[bi[sl]]), axis=1)
            np.minimum.at(best, pi[sl], d)
        out[i:i + step] = best
    return out


def hausdorff(c1, c2, densify: float | None = None) -> float:
    """Symmetric Hausdorff distance between two polylines.

    Vertices of each curve are measured against the segments of the other,
    which is exact for polylines up to the vertex sampling of the first
    curve; ``densify`` resamples both curves first.
    """
    if densify:
        c1 = c1.resample(densify)
        c2 = c2.resample(densify)
    return float(max(_directed(c1, c2), _directed(c2, c1)))


def _directed(c1, c2):
    # prune with a KD-tree on vertices, then finish with exact segment distances
    p1 = c1.points
    p2 = c2.points
    tree = cKDTree(np.column_stack([p2.real, p2.imag]))
    dv, _ = tree.query(np.column_stack([p1.real, p1.imag]))
    # points whose nearest vertex is already close cannot set the max unless
    # the max is tiny; refine the worst candidates exactly
    order = np.argsort(dv)[::-1]
    best = 0.0
    for i in range(0, len(order), 4096):
        idx = order[i:i + 4096]
        if dv[idx[0]] <= best:
            break
        d = distance_to_polyline(c2, p1[idx])
        best = max(best, float(d.max()))
    return best


def _seg_intersect(a, b, c, d):
    """Proper or touching intersection of segments ab and cd (broadcast)."""
    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    d1 = cross(b - a, c - a)
    d2 = cross(b - a, d - a)
    d3 = cross(d - c, a - c)
    d4 = cross(d - c, b - c)
    return (np.sign(d1) * np.sign(d2) <= 0) & (np.sign(d3) * np.sign(d4) <= 0) & \
        _bbox_overlap(a, b, c, d)


def _bbox_overlap(a, b, c, d):
    return ((np.maximum(a.real, b.real) >= np.minimum(c.real, d.real))
            & (np.maximum(c.real, d.real) >= np.minimum(a.real, b.real))
            & (np.maximum(a.imag, b.imag) >= np.minimum(c.imag, d.imag))
            & (np.maximum(c.imag, d.imag) >= np.minimum(a.imag, b.imag)))


def self_intersections(curve: CurveApprox, first_only: bool = False, prune: bool = False) -> int:
    """Count intersecting pairs of non-adjacent segments by exhaustive testing.

    With ``prune`` only pairs from blocks of consecutive segments whose
    bounding boxes overlap are tested; the count is the same.
    """
    a, b = curve.segments()
    n = len(a)
    if prune and n > 256:
        return _pruned_intersections(a, b, curve.closed, first_only)
    count = 0
    step = max(1, _CHUNK // max(1, n))
    j = np.arange(n)
    for i0 in range(0, n, step):
        i = np.arange(i0, min(n, i0 + step))[:, None]
        mask = j[None, :] > i + 1
        if curve.closed:
            mask &= ~((i == 0) & (j[None, :] == n - 1))
        hit = _seg_intersect(a[i], b[i], a[None, :], b[None, :]) & mask
        count += int(np.count_nonzero(hit))
        if first_only and count:
            return count
    return count


def _pruned_intersections(a, b, closed, first_only, bs=64):
    n = len(a)
    nblk = -(-n // bs)
    lo_x = np.array([min(a[i:i + bs].real.min(), b[i:i + bs].real.min()) for i in range(0, n, bs)])
    hi_x = np.array([max(a[i:i + bs].real.max(), b[i:i + bs].real.max()) for i in range(0, n, bs)])
    lo_y = np.array([min(a[i:i + bs].imag.min(), b[i:i + bs].imag.min()) for i in range(0, n, bs)])
    hi_y = np.array([max(a[i:i + bs].imag.max(), b[i:i + bs].imag.max()) for i in range(0, n, bs)])
    ov = (lo_x[:, None] <= hi_x[None, :]) & (lo_x[None, :] <= hi_x[:, None]) \
        & (lo_y[:, None] <= hi_y[None, :]) & (lo_y[None, :] <= hi_y[:, None])
    count = 0
    for p, q in zip(*np.nonzero(np.triu(ov))):
        i = np.arange(p * bs, min(n, (p + 1) * bs))[:, None]
        j = np.arange(q * bs, min(n, (q + 1) * bs))[None, :]
        mask = j > i + 1
        if closed:
            mask &= ~((i == 0) & (j == n - 1))
        hit = _seg_intersect(a[i], b[i], a[j], b[j]) & mask
        count += int(np.count_nonzero(hit))
        if first_only and count:
            return count
    return count
