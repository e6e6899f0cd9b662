"""The inverse branch u of g and the antiholomorphic maps u* and chi.

Internally everything is expressed through ``U``, the branch of ``g^{-1}`` on
the closed lower half-plane with ``U(1) = 0`` and ``U(1/alpha) = 1``.  Real
points are treated as limits from below.  Then

* ``u(z) = U(z)`` for ``z`` in the lower half-plane,
* ``u(z) = conj U(conj z)`` for ``z`` in the upper half-plane,
* ``u*(z) = U(conj z)`` and ``chi(z) = |alpha| u*(z)``.

Inside the disc ``|z| <= RU`` values come from Newton's method on
``g(w) = z``.  Seeds are taken from a table filled once per map by
continuation outward from 1; queries outside the disc go through
``U(z) = |alpha| U(conj U(conj(z)/alpha))``.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import FeigenbaumMap, eval_g, eval_g_and_prime, find_x0
from .curves import CurveApprox
from .errors import BranchLoss, NonConvergence, OutOfDomain

__all__ = [
    "SingularPoint",
    "OmegaBoundary",
    "U",
    "U_prime",
    "u_eval",
    "u_star_eval",
    "chi_eval",
    "u_star_prime_mag",
    "find_c",
    "omega_boundary",
    "refine_arc",
    "refine_arcs",
    "arcs_to_csv",
    "tau_joint_angles",
]

RU = 4.0
_LOCAL = 0.1


@dataclass(frozen=True)
class SingularPoint:
    c: complex
    iterations: int
    defect: float

    def to_dict(self):
        return {"re": float(self.c.real), "im": float(self.c.imag), "defect": float(self.defect)}


@dataclass
class OmegaBoundary:
    tau: list
    real_segment: tuple


# ---------------------------------------------------------------------------
# seed table


class _BranchTable:
    """Values of U on a grid of the lower half-disc, used only as Newton seeds."""

    def __init__(self, m: FeigenbaumMap, h: float = 0.025):
        self.m = m
        r = m.r
        self.x0 = find_x0(m)
        self.a = m.abs_alpha * self.x0          # U(alpha)
        # leading coefficient of g(w) - alpha ~ k (w - a)^r near the critical point a
        t = np.exp(2j * np.pi * np.arange(16) / 16)
        dlt = 1e-2
        self.k_alpha = float(np.mean((eval_g(m, self.a + dlt * t) - m.alpha) / (dlt * t) ** r).real)
        self.c1 = float(m.coeffs[0])

        n = int(math.ceil((RU + 2 * h) / h))
        xs = np.arange(-n, n + 1) * h
        ys = -np.arange(0, n + 1) * h
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        Z = X + 1j * Y
        inside = np.abs(Z) <= RU + 2 * h
        val = np.full(Z.shape, np.nan + 0j)
        done = np.zeros(Z.shape, bool)

        near = inside & ((np.abs(Z - 1) < _LOCAL) | (np.abs(Z - m.alpha) < _LOCAL))
        zs = Z[near]
        w, ok = self._newton(zs, self.local_seed(zs))
        ok &= self._in_sector(w)
        idx = np.nonzero(near)
        val[idx[0][ok], idx[1][ok]] = w[ok]
        done[idx[0][ok], idx[1][ok]] = True

        shifts = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        while True:
            todo = inside & ~done
            if not todo.any():
                break
            seed = np.full(Z.shape, np.nan + 0j)
            src = np.full(Z.shape, np.nan + 0j)
            for di, dj in shifts:
                sd = np.roll(done, (di, dj), axis=(0, 1))
                sv = np.roll(val, (di, dj), axis=(0, 1))
                sz = np.roll(Z, (di, dj), axis=(0, 1))
                # np.roll wraps around; a wrapped neighbour is never adjacent
                if di == 1:
                    sd[0, :] = False
                elif di == -1:
                    sd[-1, :] = False
                if dj == 1:
                    sd[:, 0] = False
                elif dj == -1:
                    sd[:, -1] = False
                pick = todo & sd & np.isnan(seed)
                seed[pick] = sv[pick]
                src[pick] = sz[pick]
            front = todo & ~np.isnan(seed)
            if not front.any():
                break
            zf = Z[front]
            w0 = seed[front]
            _, dg = eval_g_and_prime(m, w0)
            w1 = w0 + (zf - src[front]) / dg
            w, ok = self._newton(zf, w1)
            ok &= self._in_sector(w) & (np.abs(w - w0) < 0.5)
            fi = np.nonzero(front)
            val[fi[0][ok], fi[1][ok]] = w[ok]
            done[fi[0][ok], fi[1][ok]] = True
            # points that failed from every neighbour are dropped
            bad = np.zeros(Z.shape, bool)
            bad[fi[0][~ok], fi[1][~ok]] = True
            inside &= ~bad
        self.z = Z[done]
        self.w = val[done]
        self.tree = cKDTree(np.column_stack([self.z.real, self.z.imag]))

    def local_seed(self, z):
        """Leading-order inverse near the two critical values 1 and alpha."""
        m = self.m
        r = m.r
        z = np.asarray(z, dtype=complex)
        out = np.empty_like(z)
        n1 = np.abs(z - 1) <= np.abs(z - m.alpha)
        th = _angle_below(z[n1] - 1)
        rho = np.abs(z[n1] - 1) / abs(self.c1)
        out[n1] = rho ** (1.0 / r) * np.exp(1j * (th + np.pi) / r)
        th = _angle_below(z[~n1] - m.alpha)
        rho = np.abs(z[~n1] - m.alpha) / abs(self.k_alpha)
        out[~n1] = self.a + rho ** (1.0 / r) * np.exp(1j * (np.pi + th / r))
        return out

    def _in_sector(self, w):
        ang = np.angle(w)
        eps = 1e-7
        return (np.abs(w) < 1e-12) | ((ang >= -eps) & (ang <= np.pi / self.m.r + eps))

    def _newton(self, z, w, iters=30, tol=1e-15):
        m = self.m
        w = np.array(w, dtype=complex)
        active = np.ones(len(w), bool)
        for _ in range(iters):
            if not active.any():
                break
            wa = w[active]
            try:
                f, df = eval_g_and_prime(m, wa)
            except OutOfDomain:
                f = np.full(len(wa), np.nan + 0j)
                df = f
            with np.errstate(all="ignore"):
                step = (f - z[active]) / df
            step[~np.isfinite(step)] = np.nan
            w[active] = wa - step
            small = np.abs(step) <= tol * np.maximum(1.0, np.abs(wa)) * 4
            idx = np.nonzero(active)[0]
            active[idx[small | np.isnan(step)]] = False
        with np.errstate(all="ignore"):
            try:
                res = np.abs(eval_g(m, np.where(np.isfinite(w), w, 0)) - z)
            except OutOfDomain:
                res = np.full(len(w), np.inf)
        ok = np.isfinite(w) & (res <= 1e-12 * np.maximum(1.0, np.abs(z)))
        return w, ok

    def solve(self, z):
        """U on points of the closed lower half-disc ``|z| <= RU``."""
        m = self.m
        z = np.asarray(z, dtype=complex)
        out = np.empty_like(z)
        at1 = z == 1
        ata = z == m.alpha
        out[at1] = 0.0
        out[ata] = self.a
        rest = ~(at1 | ata)
        zr = z[rest]
        near = (np.abs(zr - 1) < _LOCAL) | (np.abs(zr - m.alpha) < _LOCAL)
        seed = np.empty_like(zr)
        seed[near] = self.local_seed(zr[near])
        far = ~near
        if far.any():
            _, j = self.tree.query(np.column_stack([zr[far].real, zr[far].imag]))
            w0 = self.w[j]
            _, dg = eval_g_and_prime(m, w0)
            seed[far] = w0 + (zr[far] - self.z[j]) / dg
        w, ok = self._newton(zr, seed)
        ok &= self._in_sector(w)
        if not ok.all():
            bad = np.nonzero(~ok)[0]
            w[bad] = self._walk(zr[bad])
        out[rest] = w
        return out

    def _walk(self, z, nsub=64):
        """Fallback: continuation in small steps from the nearest table point."""
        m = self.m
        _, j = self.tree.query(np.column_stack([z.real, z.imag]))
        z0 = self.z[j]
        w = self.w[j].copy()
        for t in np.linspace(0, 1, nsub + 1)[1:]:
            p = z0 + (z - z0) * t
            _, dg = eval_g_and_prime(m, w)
            w, ok = self._newton(p, w + (z - z0) / nsub / dg)
            if not ok.all():
                raise BranchLoss(f"continuation failed near {p[~ok][0]}")
        if not self._in_sector(w).all():
            raise BranchLoss("inverse branch left the sector")
        return w


_tables: "weakref.WeakKeyDictionary[FeigenbaumMap, _BranchTable]" = weakref.WeakKeyDictionary()


def _table(m: FeigenbaumMap) -> _BranchTable:
    t = _tables.get(m)
    if t is None:
        t = _BranchTable(m)
        _tables[m] = t
    return t


def _angle_below(z):
    """Argument in [-pi, 0] for points of the closed lower half-plane."""
    th = np.angle(z)
    return np.where(th > 0, th - 2 * np.pi, th)


# ---------------------------------------------------------------------------
# public evaluation


def _as_array(z):
    a = np.asarray(z, dtype=complex)
    return np.atleast_1d(a), a.ndim == 0


def U(m: FeigenbaumMap, z, max_depth: int = 200):
    """Branch of ``g^{-1}`` on the closed lower half-plane (real points from below)."""
    a, scalar = _as_array(z)
    if np.any(a.imag > 1e-12 * np.maximum(1.0, np.abs(a))):
        raise OutOfDomain("U is defined on the closed lower half-plane")
    a = a.real + 1j * np.minimum(a.imag, 0.0)
    out = _U(m, a, max_depth)
    return out[0] if scalar else out


def _U(m, z, depth):
    tab = _table(m)
    out = np.empty_like(z)
    small = np.abs(z) <= RU
    if small.any():
        out[small] = tab.solve(z[small])
    big = ~small
    if big.any():
        if depth <= 0:
            raise OutOfDomain("recursion depth exhausted")
        inner = _U(m, np.conj(z[big]) / m.alpha, depth - 1)
        b = np.conj(inner)
        b = b.real + 1j * np.minimum(b.imag, 0.0)
        out[big] = m.abs_alpha * _U(m, b, depth - 1)
    return out


def U_prime(m: FeigenbaumMap, z, w=None):
    """Complex derivative of U; ``w = U(z)`` may be supplied."""
    if w is None:
        w = U(m, z)
    _, dg = eval_g_and_prime(m, w)
    return 1.0 / dg


def u_eval(m: FeigenbaumMap, z):
    """The inverse branch u with u(1) = 0 and u(1/alpha) = 1.

    Defined on both open half-planes and on the real segment [alpha, 1].
    """
    a, scalar = _as_array(z)
    real = a.imag == 0
    if np.any(real & ((a.real < m.alpha) | (a.real > 1))):
        raise OutOfDomain("u is not defined on the slit outside (alpha, 1)")
    up = a.imag > 0
    out = np.empty_like(a)
    if up.any():
        out[up] = np.conj(U(m, np.conj(a[up])))
    if (~up).any():
        out[~up] = U(m, a[~up])
    return out[0] if scalar else out


def u_star_eval(m: FeigenbaumMap, z):
    """u*(z) = u(conj z) on the closed upper half-plane."""
    a, scalar = _as_array(z)
    if np.any(a.imag < -1e-12 * np.maximum(1.0, np.abs(a))):
        raise OutOfDomain("u* is defined on the closed upper half-plane")
    out = U(m, np.conj(a))
    return out[0] if scalar else out


def chi_eval(m: FeigenbaumMap, z):
    """chi(z) = |alpha| u*(z)."""
    return m.abs_alpha * u_star_eval(m, z)


def u_star_prime_mag(m: FeigenbaumMap, z, w=None):
    """|d u*/d conj(z)| at z, i.e. |U'(conj z)|."""
    return np.abs(U_prime(m, np.conj(np.asarray(z, dtype=complex)), w))


# ---------------------------------------------------------------------------


def find_c(m: FeigenbaumMap, tol: float = 1e-12, z0: complex = 1j,
           max_iter: int = 500) -> SingularPoint:
    """Attracting fixed point of chi in the upper half-plane."""
    z = complex(z0)
    best = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        zn = complex(chi_eval(m, z))
        step = abs(zn - z)
        z = zn
        # run on until the steps stop shrinking (round-off floor)
        if step < best:
            best, stall = step, 0
        else:
            stall += 1
        if step <= 4e-16 * abs(z) or (stall >= 3 and best <= tol):
            break
    else:
        if not best <= tol:
            raise NonConvergence("chi iteration did not settle")
    defect = abs(complex(chi_eval(m, z)) - z)
    if not defect <= tol * max(1.0, abs(z)):
        raise NonConvergence(f"fixed point defect {defect:.2e}")
    if not 0 < np.angle(z) < np.pi / m.r:
        raise NonConvergence("fixed point left the sector")
    return SingularPoint(c=z, iterations=it, defect=defect)


def refine_arc(f, t0: float, t1: float, rel: float = 1e-4, max_pts: int = 200000,
               init: int = 17, atol: float | None = None):
    """Sample the curve ``t -> f(t)`` adaptively.

    A segment is split while the midpoint deviates from its chord by more
    than ``rel`` times the diameter of the whole arc (or by more than
    ``atol`` when that is given).
    """
    t = np.linspace(t0, t1, init)
    z = np.asarray(f(t))
    diam = np.max(np.abs(z - z[0]))
    if diam == 0:
        return t, z
    thr = rel * diam if atol is None else atol
    for _ in range(60):
        tm = 0.5 * (t[:-1] + t[1:])
        zm = np.asarray(f(tm))
        dev = np.abs(zm - 0.5 * (z[:-1] + z[1:]))
        split = dev > thr
        if not split.any() or len(t) + split.sum() > max_pts:
            break
        t = np.insert(t, np.nonzero(split)[0] + 1, tm[split])
        z = np.insert(z, np.nonzero(split)[0] + 1, zm[split])
    return t, z


def refine_arcs(f, keys, rel: float = 1e-4, atol: float | None = None,
                init: int = 9, max_rounds: int = 60):
    """Adaptive sampling of several arcs ``t -> f(key, t)``, t in [0, 1], at once.

    ``f`` receives arrays of keys and parameters, so each refinement round
    costs one vectorized evaluation for all arcs together.
    """
    keys = list(keys)
    ts = [np.linspace(0.0, 1.0, init) for _ in keys]
    kk = np.repeat(np.arange(len(keys)), init)
    vals = np.asarray(f(np.array(keys)[kk], np.concatenate(ts)))
    zs = list(np.split(vals, len(keys)))
    thr = []
    for z in zs:
        d = np.max(np.abs(z - z[0]))
        thr.append(rel * d if atol is None else atol)
    active = list(range(len(keys)))
    for _ in range(max_rounds):
        if not active:
            break
        mids = [0.5 * (ts[a][:-1] + ts[a][1:]) for a in active]
        kk = np.concatenate([np.full(len(mm), keys[a]) for a, mm in zip(active, mids)])
        zm_all = np.asarray(f(kk, np.concatenate(mids)))
        parts = np.split(zm_all, np.cumsum([len(mm) for mm in mids])[:-1])
        still = []
        for a, tm, zm in zip(active, mids, parts):
            z = zs[a]
            split = np.abs(zm - 0.5 * (z[:-1] + z[1:])) > thr[a]
            if split.any():
                pos = np.nonzero(split)[0] + 1
                ts[a] = np.insert(ts[a], pos, tm[split])
                zs[a] = np.insert(z, pos, zm[split])
                still.append(a)
        active = still
    return ts, zs


def omega_boundary(m: FeigenbaumMap, n: int = 6, pts_per_arc: int = 17,
                   rel: float = 1e-4) -> OmegaBoundary:
    """Arcs tau_0 .. tau_n of the boundary of omega = u*(upper half-plane).

    ``tau_0 = u*([1, alpha^2])`` and ``tau_{k+1} = chi(tau_k)``, so
    ``tau_k = u*((-1)^k [|alpha|^k, |alpha|^(k+2)])``; each arc is sampled
    directly from that formula with a log-spaced parameter, which keeps the
    sampling of late arcs as fine as that of early ones.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    A = m.abs_alpha

    def f(k, t):
        return u_star_eval(m, (-1.0) ** k * A ** (k + 2 * t))

    ts, zs = refine_arcs(f, range(n + 1), rel=rel, init=pts_per_arc)
    tau = []
    for k, (t, z) in enumerate(zip(ts, zs)):
        addr = [f"{k}:{x:.6f}" for x in t]
        tau.append(CurveApprox(z, addr, meta={"arc_index": k}))
    x0 = find_x0(m)
    return OmegaBoundary(tau=tau, real_segment=(0.0, A * x0))


def arcs_to_csv(arcs, path=None) -> str:
    """Rows ``re,im,arc_index`` for a list of arcs."""
    lines = ["re,im,arc_index"]
    for k, arc in enumerate(arcs):
        for z in arc.points:
            lines.append(f"{z.real:.17g},{z.imag:.17g},{k}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def tau_joint_angles(m: FeigenbaumMap, n_max: int = 4, eps: float = 1e-6) -> np.ndarray:
    """Angle between tau_n and tau_{n+2} at their common endpoint, n = 0..n_max.

    The joint is ``u*(x)`` with ``x = (-1)^n |alpha|^(n+2)``; the two arcs
    leave it towards ``u*(x(1 - eps))`` and ``u*(x(1 + eps))``.
    """
    A = m.abs_alpha
    out = []
    for n in range(n_max + 1):
        x = (-1.0) ** n * A ** (n + 2)
        J = u_star_eval(m, complex(x))
        d1 = u_star_eval(m, complex(x * (1 - eps))) - J
        d2 = u_star_eval(m, complex(x * (1 + eps))) - J
        out.append(abs(np.angle(d2 / d1)))
    return np.array(out)
