"""Partition sums, the Bowen root h, a discrete conformal measure and Frostman ratios for S.

All sums run over the 3^m words of the system S = {phi_1, phi_2, phi_3}.
Words are enumerated innermost map first, so the array index of a word is
its ternary expansion with the outermost map as leading digit and every
level-m array refines the level-(m-1) array in blocks of three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .core import FeigenbaumMap
from .curves import CurveApprox, distance_to_polyline, winding_contains
from .errors import InsufficientDepth, InsufficientResolution, NoBracket
from .ifs import CompactX, build_X, fast_maps, junction_points, limit_curve, sample_interior

__all__ = [
    "PressureTable",
    "ConformalMeasure",
    "DimensionEstimate",
    "QuasicircleReport",
    "basepoint",
    "word_log_derivatives",
    "partition_sum",
    "pressure_table",
    "bowen_root",
    "cw_bracket",
    "box_counting_oracle",
    "conformal_measure",
    "conformality_residuals",
    "frostman_ratios",
    "m_condition_estimate",
    "estimate_dimension",
    "dimension_report",
]


@dataclass
class PressureTable:
    """Rows ``rows[m] = (value, sup_value, inf_value)``, each an array over ``s_values``."""

    depth: int
    s_values: np.ndarray
    rows: dict
    basepoint: complex


@dataclass
class ConformalMeasure:
    """Weights of the cylinders phi_e(X), |e| = n, proportional to |phi_e'(z)|^s."""

    s: float
    n: int
    weights: np.ndarray
    basepoint: complex
    positions: np.ndarray = field(repr=False, default=None)
    log_derivs: np.ndarray = field(repr=False, default=None)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def cylinder_mass(self, prefix: Sequence[int]) -> float:
        """Mass of phi_prefix(X); symbols are 1, 2, 3."""
        k = len(prefix)
        if k > self.n:
            raise ValueError("prefix longer than the measure depth")
        idx = 0
        for s in prefix:
            idx = 3 * idx + (s - 1)
        block = 3 ** (self.n - k)
        return float(self.weights[idx * block:(idx + 1) * block].sum())


@dataclass
class DimensionEstimate:
    bowen_roots: dict
    h: float
    error: float
    box_dim: float | None
    bracket: tuple
    naive_bracket: tuple
    depth: int


@dataclass
class QuasicircleReport:
    """``turning`` is max (|xi_1 - xi_3| + |xi_3 - xi_2|) / |xi_1 - xi_2| on a coarser sample."""

    M_estimate: float
    depth: int
    turning: float | None = None


# ---------------------------------------------------------------------------
# word enumeration


_X_CACHE: dict = {}


def _X(m: FeigenbaumMap) -> CompactX:
    X = _X_CACHE.get(id(m))
    if X is None or X[0] is not m:
        X = (m, build_X(m, resolution=1e-6))
        _X_CACHE[id(m)] = X
    return X[1]


def basepoint(m: FeigenbaumMap, X: CompactX | None = None) -> complex:
    """A point of Int(X) off I: the grid point farthest from both the boundary of X and I."""
    X = X or _X(m)
    b = X.boundary.points
    xs = np.linspace(b.real.min(), b.real.max(), 80)
    ys = np.linspace(b.imag.min(), b.imag.max(), 80)
    Z = (xs[:, None] + 1j * ys[None, :]).ravel()
    Z = Z[winding_contains(b, Z)]
    I = CurveApprox(junction_points(m, 6, X.c))
    d = np.minimum(distance_to_polyline(X.boundary, Z), distance_to_polyline(I, Z))
    return complex(Z[np.argmax(d)])


def _levels(m: FeigenbaumMap, z: complex, n: int):
    """Yield (k, points, log|phi_w'(z)|) for k = 0..n, all words of length k."""
    fm = fast_maps(m)
    Z = np.array([complex(z)])
    ld = np.zeros(1)
    yield 0, Z, ld
    for k in range(1, n + 1):
        newZ = np.empty(3 * len(Z), dtype=complex)
        newL = np.empty(3 * len(Z))
        # word index = 3^(k-1) * (i-1) + index of the inner word
        for i in (1, 2, 3):
            v, d = fm.apply(i, Z)
            sl = slice((i - 1) * len(Z), i * len(Z))
            newZ[sl] = v
            newL[sl] = ld + np.log(d)
        Z, ld = newZ, newL
        yield k, Z, ld


def word_log_derivatives(m: FeigenbaumMap, n: int, z: complex) -> np.ndarray:
    """log|phi_e'(z)| for the 3^n words e of length n."""
    for k, _, ld in _levels(m, z, n):
        if k == n:
            return ld


def _sum(ld, s):
    # log-sum-exp for stability at large depth
    a = s * ld
    mx = a.max()
    return float(np.exp(mx) * np.exp(a - mx).sum())


def _log_sum(ld, s):
    a = s * ld
    mx = a.max()
    return float(mx + np.log(np.exp(a - mx).sum()))


def _samples(m, count, rng):
    X = _X(m)
    return sample_interior(X, count, rng, margin=0.02 * X.diam)


def _collect(m, n, points, levels):
    """Per-point log-derivative arrays at the requested levels."""
    out = {k: [] for k in levels}
    for z in points:
        for k, _, ld in _levels(m, z, n):
            if k in out:
                out[k].append(ld)
    return {k: np.array(v) for k, v in out.items()}


def partition_sum(m: FeigenbaumMap, s: float, mlen: int, z: complex | None = None,
                  n_samples: int = 6, rng=None):
    """(sum at z, sum of per-word sup, sum of per-word inf) of |phi_e'|^s over |e| = mlen.

    sup and inf are taken over z and ``n_samples`` interior sample points of X.
    """
    if mlen < 1:
        raise ValueError("mlen must be >= 1")
    if s < 0:
        raise ValueError("s must be >= 0")
    rng = np.random.default_rng(0) if rng is None else rng
    z = basepoint(m) if z is None else complex(z)
    pts = np.concatenate([[z], _samples(m, n_samples, rng)])
    L = _collect(m, mlen, pts, [mlen])[mlen]
    return _sum(L[0], s), _sum(L.max(axis=0), s), _sum(L.min(axis=0), s)


def pressure_table(m: FeigenbaumMap, n: int, s_values, z: complex | None = None,
                   n_samples: int = 6, rng=None) -> PressureTable:
    rng = np.random.default_rng(0) if rng is None else rng
    z = basepoint(m) if z is None else complex(z)
    s_values = np.asarray(s_values, dtype=float)
    pts = np.concatenate([[z], _samples(m, n_samples, rng)])
    data = _collect(m, n, pts, list(range(1, n + 1)))
    rows = {}
    for k, L in data.items():
        hi, lo = L.max(axis=0), L.min(axis=0)
        rows[k] = np.array([[_sum(L[0], s), _sum(hi, s), _sum(lo, s)] for s in s_values]).T
    return PressureTable(depth=n, s_values=s_values, rows=rows, basepoint=z)


def _root_of(f, lo=0.0, hi=2.0, what="partition sum"):
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 > fhi):
        raise NoBracket(f"{what} does not straddle 1 on [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=1e-12)


def bowen_root(m: FeigenbaumMap, mlen: int, z: complex | None = None,
               log_derivs: np.ndarray | None = None) -> float:
    """The s in [0, 2] with sum_{|e| = mlen} |phi_e'(z)|^s = 1."""
    if mlen < 2:
        raise ValueError("mlen must be >= 2")
    ld = word_log_derivatives(m, mlen, basepoint(m) if z is None else z) \
        if log_derivs is None else log_derivs
    return _root_of(lambda s: _log_sum(ld, s))


def cw_bracket(L_prev: np.ndarray, L_next: np.ndarray) -> tuple[float, float]:
    """Bracket for h from the ratios Z_m(x)/Z_{m-1}(x) at several points x.

    For the transfer operator with weight |phi_i'|^s the spectral radius
    lies between the minimum and maximum over x of L f(x)/f(x) for any
    positive f; with f = Z_{m-1} that ratio is Z_m/Z_{m-1}.  h is where the
    spectral radius equals 1, hence between the roots of max_x and min_x
    of log(Z_m/Z_{m-1}).
    """
    def ratios(s):
        return np.array([_log_sum(b, s) - _log_sum(a, s) for a, b in zip(L_prev, L_next)])

    lo = _root_of(lambda s: ratios(s).min(), what="minimum ratio")
    hi = _root_of(lambda s: ratios(s).max(), what="maximum ratio")
    return lo, hi


# ---------------------------------------------------------------------------
# box counting


def box_counting_oracle(curve: CurveApprox, scales: Sequence[float]) -> float:
    """Slope of log N(delta) against log(1/delta); the polyline is densified below each scale."""
    pts = curve.points
    if len(pts) < 3 ** 8:
        raise InsufficientResolution("box counting needs at least 3^8 vertices")
    scales = sorted(float(d) for d in scales)
    seg = np.abs(np.diff(pts))
    if scales[0] < 2 * float(np.quantile(seg, 0.99)):
        raise InsufficientResolution("smallest scale below the polyline resolution")
    counts = []
    for d in scales:
        # subdivide each segment so consecutive points are closer than d/2
        k = np.maximum(1, np.ceil(2 * seg / d).astype(int))
        if k.max() > 1:
            rep = np.repeat(np.arange(len(seg)), k)
            frac = np.concatenate([np.arange(j) / j for j in k]) if len(k) < 2e5 else \
                (np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)) / np.repeat(k, k)
            dense = np.concatenate([pts[rep] + frac * (pts[rep + 1] - pts[rep]), pts[-1:]])
        else:
            dense = pts
        cells = np.floor(dense.real / d).astype(np.int64) * 1_000_003 + np.floor(dense.imag / d).astype(np.int64)
        counts.append(len(np.unique(cells)))
    slope = np.polyfit(np.log(1.0 / np.array(scales)), np.log(counts), 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# conformal measure


def conformal_measure(m: FeigenbaumMap, s: float, n: int, z: complex | None = None) -> ConformalMeasure:
    """w_e = |phi_e'(z)|^s / sum over |e| = n, as masses on the cylinders phi_e(X)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = basepoint(m) if z is None else complex(z)
    for k, Z, ld in _levels(m, z, n):
        if k == n:
            a = s * ld
            w = np.exp(a - a.max())
            w = w / w.sum()
            return ConformalMeasure(s=s, n=n, weights=w, basepoint=z, positions=Z, log_derivs=ld)


def conformality_residuals(m: FeigenbaumMap, mu: ConformalMeasure, h: float | None = None):
    """Per map i: (|mu(phi_i X) - sum_e w_e |phi_i'(phi_e z)|^h|, bound).

    The bound follows from bounded distortion: comparing the two sums word
    by word, each term ratio lies in Z_1 [K^-h, K^h] where Z_1 is the
    level-1 sum at z and K the distortion of the words of length n - 1,
    measured at z and the n-th level points.
    """
    h = mu.s if h is None else h
    fm = fast_maps(m)
    n = mu.n
    Z = mu.positions
    block = 3 ** (n - 1)
    # distortion of the length-(n-1) words between z and the points phi_j(z)
    ld = mu.log_derivs
    first = np.array([ld[(i - 1) * block:i * block] for i in (1, 2, 3)])
    inner = word_log_derivatives(m, n - 1, mu.basepoint)
    # phi_{i d}'(z) = phi_i'(phi_d z) phi_d'(z); compare across the three inner starts
    ld1 = word_log_derivatives(m, 1, mu.basepoint)
    z1 = np.exp(h * ld1).sum()
    K = 1.0
    out = []
    for i in (1, 2, 3):
        _, d = fm.apply(i, Z)
        rhs = float(np.sum(mu.weights * d ** h))
        lhs = float(mu.weights[(i - 1) * block:i * block].sum())
        # outer derivative of phi_i along the cylinders of length n-1
        dist = first[i - 1] - inner
        K = max(K, float(np.exp(dist.max() - dist.min())))
        out.append((abs(lhs - rhs), lhs * max(abs(z1 * K ** h - 1), abs(1 - z1 / K ** h))))
    return out


def frostman_ratios(m: FeigenbaumMap, mu: ConformalMeasure, h: float, centers: int | np.ndarray,
                    radii: Sequence[float], rng=None) -> tuple[float, float]:
    """Extremes of mu(B(x, r)) / r^h over centers x in I and the given radii.

    A cylinder is treated as a disc about phi_e(z) of radius |phi_e'(z)| diam(X)/2
    and counted with the fraction of its diameter inside the ball.
    """
    if mu.n < 8:
        raise InsufficientDepth("Frostman ratios need a measure of depth >= 8")
    X = _X(m)
    rad = 0.5 * X.diam * np.exp(mu.log_derivs)
    radii = np.asarray(radii, dtype=float)
    if radii.max() > X.diam:
        raise InsufficientDepth("radii must not exceed diam X")
    if radii.min() < 4 * rad.max():
        raise InsufficientDepth("radii below the cylinder scale at this depth")
    if np.ndim(centers) == 0:
        rng = np.random.default_rng(0) if rng is None else rng
        J = junction_points(m, 8, X.c)
        centers = J[rng.choice(len(J), int(centers), replace=False)]
    P = mu.positions
    ratios = []
    for x in np.asarray(centers):
        dist = np.abs(P - x)
        for r in radii:
            near = dist <= r + rad
            frac = np.clip((r - dist[near]) / (2 * rad[near]) + 0.5, 0.0, 1.0)
            ratios.append(float(np.sum(mu.weights[near] * frac)) / r ** h)
    ratios = np.array(ratios)
    return float(ratios.min()), float(ratios.max())


# ---------------------------------------------------------------------------
# quasicircle


def m_condition_estimate(curve: CurveApprox, samples: int = 3000, rng=None,
                         depth: int | None = None, turning_samples: int = 300) -> QuasicircleReport:
    """max |xi_3 - xi_1| / |xi_2 - xi_1| over ordered triples xi_1 < xi_3 < xi_2 of sampled vertices."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = curve.points
    p = pts
    if len(p) > samples:
        p = p[np.sort(rng.choice(len(p), samples, replace=False))]
    M = 1.0
    for i in range(len(p) - 2):
        d = np.abs(p[i + 1:] - p[i])
        run = np.maximum.accumulate(d)
        ok = d > 0
        if ok.any():
            M = max(M, float(np.max(run[ok] / d[ok])))
    q = pts
    if len(q) > turning_samples:
        q = q[np.sort(rng.choice(len(q), turning_samples, replace=False))]
    D = np.abs(q[:, None] - q[None, :])
    T = 1.0
    for i in range(len(q) - 2):
        # S[k, j] = |q_k - q_i| + |q_k - q_j| for i < k < j
        S = D[i, i + 1:, None] + D[i + 1:, i + 1:]
        S = np.where(np.triu(np.ones(S.shape, dtype=bool), 1), S, -np.inf)  # keep k < j
        best = S.max(axis=0)[1:]
        chord = D[i, i + 2:]
        ok = chord > 0
        if ok.any():
            T = max(T, float(np.max(best[ok] / chord[ok])))
    return QuasicircleReport(M_estimate=M, depth=curve.meta.get("depth", depth) or 0, turning=T)


# ---------------------------------------------------------------------------
# estimate and report


def estimate_dimension(m: FeigenbaumMap, max_depth: int = 14, min_depth: int = 10,
                       n_samples: int = 4, rng=None, box_depth: int | None = 12,
                       box_scales: Sequence[float] | None = None) -> DimensionEstimate:
    """Bowen roots h_m for m = min_depth..max_depth and brackets for h at max_depth.

    ``bracket`` comes from :func:`cw_bracket` on the two deepest levels;
    ``naive_bracket`` from the roots of the per-word sup and inf sums.
    """
    if min_depth < 2 or max_depth < min_depth:
        raise ValueError("need 2 <= min_depth <= max_depth")
    rng = np.random.default_rng(0) if rng is None else rng
    z = basepoint(m)
    pts = np.concatenate([[z], _samples(m, n_samples, rng)])
    keep = set(range(min_depth, max_depth + 1)) | {max_depth - 1}
    roots = {}
    L_prev = []
    L_last = []
    hi_sum = lo_sum = None
    for j, x in enumerate(pts):
        for k, _, ld in _levels(m, x, max_depth):
            if k not in keep:
                continue
            if j == 0 and k >= min_depth:
                roots[k] = bowen_root(m, k, log_derivs=ld)
            if k == max_depth - 1:
                L_prev.append(ld)
            if k == max_depth:
                L_last.append(ld)
                hi_sum = ld.copy() if hi_sum is None else np.maximum(hi_sum, ld)
                lo_sum = ld.copy() if lo_sum is None else np.minimum(lo_sum, ld)
    lo, hi = cw_bracket(L_prev, L_last)
    naive = (bowen_root(m, max_depth, log_derivs=lo_sum), bowen_root(m, max_depth, log_derivs=hi_sum))
    box = None
    if box_depth is not None:
        curve = limit_curve(m, box_depth, addresses=False)
        box = box_counting_oracle(curve, box_scales or default_box_scales(curve))
    return DimensionEstimate(bowen_roots=roots, h=0.5 * (lo + hi), error=0.5 * (hi - lo),
                             box_dim=box, bracket=(lo, hi), naive_bracket=naive, depth=max_depth)


def default_box_scales(curve: CurveApprox, count: int = 6, finest: float | None = None):
    """Dyadic scales from diam/2^3 down, stopping above the polyline resolution."""
    seg = np.abs(np.diff(curve.points))
    floor_ = 2 * float(np.quantile(seg, 0.99)) if finest is None else finest
    top = curve.diam / 8
    k_max = int(math.floor(math.log2(top / floor_)))
    ks = range(max(0, k_max - count + 1), k_max + 1)
    return [top * 2.0 ** -k for k in ks]


def dimension_report(m: FeigenbaumMap, max_depth: int = 14, m_depth: int = 12) -> dict:
    est = estimate_dimension(m, max_depth=max_depth, min_depth=min(10, max_depth))
    q = m_condition_estimate(limit_curve(m, m_depth, addresses=False), depth=m_depth)
    return {"h": float(est.h), "bracket": [float(est.bracket[0]), float(est.bracket[1])],
            "box_dim": None if est.box_dim is None else float(est.box_dim),
            "M_estimate": float(q.M_estimate), "depth": int(max_depth)}
