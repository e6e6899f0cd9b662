"""Verification suites: tolerance-backed checks plus report-only estimates.

Each check records a short anchor describing the mathematical statement it
tests.  ``report-only`` checks never fail a run.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dimension as dim
from . import partition as part
from .core import FeigenbaumMap, alpha_oracle, functional_residual
from .curves import CurveApprox, hausdorff, self_intersections
from .errors import FeigError
from .ifs import build_X, curve_L, distortion_constant, forward_image_defect, limit_curve, system_checks
from .inverse import find_c, tau_joint_angles, u_eval

__all__ = ["Check", "VerificationReport", "run_suite", "SUITES"]

SUITES = ("core", "ifs", "markov", "dim")


@dataclass
class Check:
    name: str
    anchor: str
    status: str
    measured: dict
    tolerance: float | None = None


@dataclass
class VerificationReport:
    suite: str
    seed: int
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def failed(self) -> list:
        return [c.name for c in self.checks if c.status == "fail"]

    def add(self, name, anchor, passed, measured, tolerance=None, report_only=False):
        status = "report-only" if report_only else ("pass" if passed else "fail")
        self.checks.append(Check(name, anchor, status, _clean(measured), tolerance))

    def to_dict(self) -> dict:
        d = {"suite": self.suite, "seed": self.seed, "ok": self.ok,
             "checks": [asdict(c) for c in self.checks]}
        d.update(self.extra)
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


# ---------------------------------------------------------------------------
# core


def _core(m, rep, rng):
    x = np.linspace(0.0, 1.0, 512)
    res = float(np.max(functional_residual(m, x)))
    rep.add("fixed_point_residual", "g solves the renormalization fixed-point equation",
            res <= 1e-10, {"residual": res}, 1e-10)
    a_or = alpha_oracle(m.r)
    diff = abs(m.abs_alpha - a_or)
    rep.add("alpha_cross_oracle", "alpha agrees with the period-doubling cascade",
            diff <= 1e-6, {"alpha": m.alpha, "oracle": a_or, "diff": diff}, 1e-6)
    z = rng.uniform(-5, 5, 200) + 1j * rng.uniform(-5, 5, 200)
    fe = float(np.max(np.abs(u_eval(m, z) + m.alpha * u_eval(m, u_eval(m, z / m.alpha)))))
    rep.add("u_functional_equation", "u(z) = -alpha u(u(z/alpha))", fe <= 1e-8, {"max": fe}, 1e-8)
    sp = find_c(m)
    arg = math.atan2(sp.c.imag, sp.c.real)
    ok = sp.defect <= 1e-10 and 0 < arg < math.pi / m.r
    rep.add("singular_point", "chi has an attracting fixed point c in the sector",
            ok, {"defect": sp.defect, "arg": arg, "iterations": sp.iterations}, 1e-10)
    rep.extra["c"] = {"re": sp.c.real, "im": sp.c.imag, "defect": sp.defect}


# ---------------------------------------------------------------------------
# ifs


def _ifs(m, rep, rng):
    ang = tau_joint_angles(m, 4)
    dev = float(np.max(np.abs(ang - math.pi / m.r)))
    rep.add("tau_joint_angles", "consecutive boundary arcs of omega meet at angle pi/r",
            dev <= 1e-2, {"angles": list(ang), "max_dev": dev}, 1e-2)
    X = build_X(m)
    sc = system_checks(m, X, 500, rng)
    ok = not any(sc["escaped"].values()) and not any(sc["overlap"].values()) and sc["adjacency"] == "12,23"
    rep.add("ifs_invariance_disjointness", "phi_i(X) in X, disjoint interiors, adjacency iff |i-j| <= 1",
            ok, {"escaped": sc["escaped"], "overlap": {f"{i}{j}": v for (i, j), v in sc["overlap"].items()},
                 "adjacency": sc["adjacency"]}, X.tube)
    rep.add("contraction", "the maps contract the hyperbolic metric", max(sc["contraction"].values()) < 1,
            {"ratio": sc["contraction"]}, 1.0)
    K = distortion_constant(m, X, max_len=6, rng=rng)
    rep.add("distortion_constant", "uniformly bounded distortion", True, {"K": K}, report_only=True)
    c = find_c(m).c
    I = limit_curve(m, 10, c, addresses=False)
    L = curve_L(m, 10, -2, 3, c, I=I)
    # copies |alpha|^k I for k = -2..3; |alpha| times copies -2..2 against copies -1..3
    n = len(I.points) - 1
    a = CurveApprox(m.abs_alpha * L.points[:5 * n + 1])
    b = CurveApprox(L.points[n:6 * n + 1])
    hd = hausdorff(a, b)
    mesh = max(a.mesh, b.mesh)
    rep.add("curve_self_similarity", "L is invariant under multiplication by |alpha|",
            hd <= 2 * mesh, {"hausdorff": hd, "mesh": mesh}, 2 * mesh)
    n4 = self_intersections(limit_curve(m, 4, c))
    n8 = self_intersections(limit_curve(m, 8, c))
    rep.add("arc_simplicity", "I is a simple arc", n4 == 0 and n8 == 0,
            {"depth4": n4, "depth8": n8}, 0)
    fd = forward_image_defect(m, 8, c)
    rep.add("forward_image", "g maps L_0 onto the conjugate of L_inf", fd <= 1e-6,
            {"relative_distance": fd}, 1e-6)


# ---------------------------------------------------------------------------
# markov


def _markov(m, rep, rng):
    if m.r != 2:
        rep.add("markov_suite", "partition machinery", False, {"r": m.r, "reason": "implemented for r = 2"})
        return
    C = part.census(m, 4)
    d1 = sum(1 for p in C if p.depth == 1)
    rep.add("census_depth1", "2r(r-1) pieces of depth 1", d1 == 2 * m.r * (m.r - 1), {"count": d1}, 0)
    bounded = [p for p in C if p.depth]
    n_over = 0
    n_amb = 0
    for i in range(len(bounded)):
        for j in range(i + 1, len(bounded)):
            try:
                if part.classify_pair(bounded[i], bounded[j]) is part.PairClass.OVERLAP:
                    n_over += 1
            except FeigError:
                n_amb += 1
    rep.add("markov_trichotomy", "two pieces are disjoint or nested", n_over == 0 and n_amb == 0,
            {"overlaps": n_over, "ambiguous": n_amb, "pairs": len(bounded) * (len(bounded) - 1) // 2}, 0)
    worst = 0.0
    for p in [q for q in C if q.depth in (1, 2)]:
        s = part.rescale_piece(m, p)
        cands = [q for q in C if q.depth == 2 * p.depth and abs(q.x_R - s.x_R) < 1e-9]
        best = min((hausdorff(s.boundary, q.boundary) / (3 * max(s.boundary.mesh, q.boundary.mesh))
                    for q in cands), default=math.inf)
        worst = max(worst, best)
    rep.add("rescale_invariance", "R/alpha is a piece of twice the depth", worst <= 1.0,
            {"max_hausdorff_over_3mesh": worst}, 1.0)
    T = part.build_tiling(m, max_pieces=5000)
    curve = {n: part.tiling_coverage(m, max_pieces=n, tiling=T) for n in (500, 1000, 2000, 5000)}
    rep.add("tiling_coverage", "the pieces cover a neighbourhood of 0", curve[5000] >= 0.99,
            {"coverage": curve}, 0.99)
    fit = part.diameter_decay(part.nested_chains(m, length=6, tiling=T))
    rep.add("diameter_decay", "nested pieces shrink geometrically", fit.lam < 1 and fit.r2 > 0.9,
            fit._asdict(), 0.9)
    zs = _disc_points(rng, 100, 1.0)
    Cs = {}
    for n in (2500, 5000):
        Tn = part.build_tiling(m, max_pieces=n)
        ratios = []
        for z in zs:
            try:
                ratios.append(part.vein_path_to_zero(m, z, tiling=Tn).meta["length"] / abs(z))
            except FeigError:
                pass
        Cs[n] = (max(ratios), len(ratios))
    stable = abs(Cs[5000][0] / Cs[2500][0] - 1) <= 0.2
    rep.add("vein_path_length", "paths to 0 of length at most C|z|", stable,
            {"C": {k: v[0] for k, v in Cs.items()}, "paths": {k: v[1] for k, v in Cs.items()}}, 0.2)
    worst = 0.0
    pts = [p.x_R / m.alpha for p in C if p.depth in (1, 2) and p.upper][:5]
    for x in pts:
        r1 = part.external_ray(m, x, pieces=C)
        r2 = part.external_ray(m, m.abs_alpha * x, pieces=C)
        a = part.clip_to_window(CurveApprox(m.abs_alpha * r1.path.points), 2.0)
        b = part.clip_to_window(r2.path, 2.0)
        worst = max(worst, hausdorff(a, b) / (3 * max(a.mesh, b.mesh)))
    rep.add("ray_scaling", "ray(|alpha| x) = |alpha| ray(x)", worst <= 1.0,
            {"max_hausdorff_over_3mesh": worst, "points": len(pts)}, 1.0)
    mc = part.machine_checks(m, rng=rng)
    ok = not any(mc["overlaps"].values()) and mc["base_points_on_segment"] \
        and mc["area_defect"][-1] < mc["area_defect"][0]
    rep.add("machine", "A(Delta), B(Delta), R_2 tile Delta", ok, mc, 0)
    hd, mesh = part.machinearc_defect(m)
    rep.add("machinearc", "gamma^+/|alpha| meets gamma_1^- along beta_1", hd <= mesh,
            {"hausdorff": hd, "mesh": mesh}, mesh)


def _disc_points(rng, n, radius):
    out = []
    while len(out) < n:
        z = complex(*rng.uniform(-radius, radius, 2))
        if 0 < abs(z) <= radius:
            out.append(z)
    return out


# ---------------------------------------------------------------------------
# dim


def _dim(m, rep, rng, max_depth=14):
    est = dim.estimate_dimension(m, max_depth=max_depth, min_depth=10, rng=rng)
    lo, hi = est.bracket
    ok = hi - lo < 0.02 and 1 < lo and hi < 2 and lo - 0.05 <= est.box_dim <= hi + 0.05
    rep.add("bowen_bracket", "1 < dim I < 2, matching box counting", ok,
            {"bracket": [lo, hi], "naive_bracket": list(est.naive_bracket), "box_dim": est.box_dim,
             "bowen_roots": est.bowen_roots}, 0.02)
    h = est.h
    mx = []
    resid_ok = True
    for n in range(8, 13):
        mu = dim.conformal_measure(m, h, n)
        mx.append(float(mu.weights.max()))
        if n == 12:
            res = dim.conformality_residuals(m, mu)
            resid_ok = all(r <= b for r, b in res) and abs(mu.total - 1) <= 1e-12
    mono = all(b < a for a, b in zip(mx, mx[1:]))
    rep.add("conformal_measure", "mu is h-conformal and has no atoms", resid_ok and mono,
            {"max_weight": mx, "residuals": [list(r) for r in res]})
    X = dim._X(m)
    radii = [X.diam / 4 * 2.0 ** -k for k in range(6)]
    spread = {}
    for n in (10, 12):
        lo_r, hi_r = dim.frostman_ratios(m, dim.conformal_measure(m, h, n), h, 50, radii,
                                         np.random.default_rng(rep.seed))
        spread[n] = hi_r / lo_r
    rep.add("frostman", "mu(B(x, r)) is comparable to r^h", abs(spread[12] / spread[10] - 1) < 0.25,
            {"spread": spread}, 0.25)
    Ms = {d: dim.m_condition_estimate(limit_curve(m, d, addresses=False), depth=d,
                                      rng=np.random.default_rng(rep.seed)) for d in (8, 10, 12)}
    vals = [q.M_estimate for q in Ms.values()]
    rep.add("m_condition", "L is a quasicircle", (max(vals) - min(vals)) / min(vals) < 0.1,
            {"M": {d: q.M_estimate for d, q in Ms.items()}, "turning": {d: q.turning for d, q in Ms.items()}},
            0.1)


_RUNNERS = {"core": _core, "ifs": _ifs, "markov": _markov, "dim": _dim}


def run_suite(m: FeigenbaumMap, suite: str = "all", seed: int = 0) -> VerificationReport:
    if suite != "all" and suite not in _RUNNERS:
        raise ValueError(f"unknown suite {suite!r}")
    rep = VerificationReport(suite=suite, seed=seed)
    for name in (SUITES if suite == "all" else (suite,)):
        _RUNNERS[name](m, rep, np.random.default_rng(seed))
    return rep
