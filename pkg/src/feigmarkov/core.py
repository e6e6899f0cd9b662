"""The Feigenbaum fixed point g(x) = alpha * g(g(x / alpha)).

The map is stored through its even representation ``g(z) = F(z**r)`` with
``F(w) = 1 + sum_k c_k w**k``, which makes ``g(0) = 1`` and the symmetries
``g(-z) = g(z)``, ``g(conj z) = conj g(z)`` structural.  Outside the disc
where the truncated series is trusted, ``g`` is continued through the
functional equation itself.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import BadCriticality, NonConvergence, OutOfDomain

__all__ = [
    "FeigenbaumMap",
    "ContinuationPolicy",
    "solve_feigenbaum",
    "eval_g",
    "eval_g_prime",
    "eval_g_and_prime",
    "find_x0",
    "alpha_oracle",
    "functional_residual",
    "save_map",
    "load_map",
]


@dataclass(frozen=True, eq=False)
class FeigenbaumMap:
    """Solved fixed point of period-doubling renormalization.

    Attributes
    ----------
    r : int
        Criticality (even, >= 2).
    coeffs : ndarray
        ``c_1 .. c_N`` with ``g(z) = 1 + sum_k c_k z**(r*k)``.
    alpha : float
        Spatial rescaling, ``alpha < -1``.
    order : int
        Truncation order ``N``.
    residual : float
        Sup of ``|g(x) - alpha*g(g(x/alpha))|`` on 512 points of [0, 1].
    radius : float
        Radius of the disc on which the truncated series is trusted.
    """

    r: int
    coeffs: np.ndarray
    alpha: float
    order: int
    residual: float
    radius: float
    _dcoeffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        k = np.arange(1, len(c) + 1)
        d = self.r * k * c
        d.setflags(write=False)
        object.__setattr__(self, "_dcoeffs", d)

    @property
    def abs_alpha(self) -> float:
        return abs(self.alpha)

    def to_dict(self) -> dict:
        return {
            "r": int(self.r),
            "order": int(self.order),
            "alpha": float(self.alpha),
            "coeffs": [float(v) for v in self.coeffs],
            "residual": float(self.residual),
            "radius": float(self.radius),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeigenbaumMap":
        return cls(r=int(d["r"]), coeffs=np.array(d["coeffs"], dtype=float),
                   alpha=float(d["alpha"]), order=int(d["order"]),
                   residual=float(d["residual"]), radius=float(d["radius"]))

    # -- raw series ---------------------------------------------------
    def series(self, z):
        w = z ** self.r
        return 1.0 + w * P.polyval(w, self.coeffs)

    def series_prime(self, z):
        w = z ** self.r
        return z ** (self.r - 1) * P.polyval(w, self._dcoeffs)


@dataclass(frozen=True)
class ContinuationPolicy:
    """How far ``g`` may be continued by ``g(z) = alpha*g(g(z/alpha))``."""

    max_depth: int = 48
    tol: float = 1e-12

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


DEFAULT_POLICY = ContinuationPolicy()


def save_map(m: FeigenbaumMap, path) -> None:
    with open(path, "w") as fh:
        json.dump(m.to_dict(), fh, indent=1)


def load_map(path) -> FeigenbaumMap:
    with open(path) as fh:
        return FeigenbaumMap.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# evaluation


def _g_rec(m, z, depth, policy, want_prime):
    inside = np.abs(z) <= m.radius
    val = np.empty_like(z)
    der = np.empty_like(z) if want_prime else None
    if inside.any():
        zi = z[inside]
        val[inside] = m.series(zi)
        if want_prime:
            der[inside] = m.series_prime(zi)
    out = ~inside
    if out.any():
        if depth >= policy.max_depth:
            raise OutOfDomain("continuation depth exhausted")
        zo = z[out]
        v, dv = _g_rec(m, zo / m.alpha, depth + 1, policy, want_prime)
        bad = ~np.isfinite(v)
        if bad.any():
            v = np.where(bad, 0.0, v)
        w, dw = _g_rec(m, v, depth + 1, policy, want_prime)
        w = m.alpha * w
        if bad.any():
            w[bad] = np.inf
        val[out] = w
        if want_prime:
            d = dw * dv
            if bad.any():
                d[bad] = np.inf
            der[out] = d
    return val, der


def _prep(z):
    a = np.asarray(z)
    scalar = a.ndim == 0
    a = np.atleast_1d(a)
    if not np.iscomplexobj(a):
        a = a.astype(float)
    return a, scalar


def eval_g(m: FeigenbaumMap, z, policy: ContinuationPolicy | None = None):
    """Evaluate g at ``z`` (scalar or array).

    Inside ``m.radius`` the truncated series is used, outside the map is
    continued recursively through ``g(z) = alpha * g(g(z / alpha))``.
    Values whose continuation runs into the singular set come back as
    ``inf``.
    """
    a, scalar = _prep(z)
    val, _ = _g_rec(m, a, 0, policy or DEFAULT_POLICY, False)
    return val[0] if scalar else val


def eval_g_and_prime(m: FeigenbaumMap, z, policy: ContinuationPolicy | None = None):
    a, scalar = _prep(z)
    val, der = _g_rec(m, a, 0, policy or DEFAULT_POLICY, True)
    if scalar:
        return val[0], der[0]
    return val, der


def eval_g_prime(m: FeigenbaumMap, z, policy: ContinuationPolicy | None = None):
    return eval_g_and_prime(m, z, policy)[1]


def functional_residual(m: FeigenbaumMap, x) -> np.ndarray:
    x = np.asarray(x)
    return eval_g(m, x) - m.alpha * eval_g(m, eval_g(m, x / m.alpha))


# ---------------------------------------------------------------------------
# solving


def _series_c(c, r, z):
    w = z ** r
    return 1.0 + w * P.polyval(w, c)


def _newton_lsq(c, r, xs, max_iter, tol):
    """Gauss-Newton on the collocation residual with column equilibration."""

    def res(cc):
        a = 1.0 / _series_c(cc, r, 1.0)
        R = _series_c(cc, r, xs) - a * _series_c(cc, r, _series_c(cc, r, xs / a))
        if np.iscomplexobj(R):
            return np.concatenate([R.real, R.imag])
        return R

    n = len(c)
    F = res(c)
    for it in range(max_iter):
        J = np.empty((len(F), n))
        for j in range(n):
            h = 1e-7 * max(1.0, abs(c[j]))
            d = np.zeros(n)
            d[j] = h
            J[:, j] = (res(c + d) - res(c - d)) / (2 * h)
        s = np.linalg.norm(J, axis=0)
        s[s == 0] = 1.0
        step = np.linalg.lstsq(J / s, -F, rcond=None)[0] / s
        # backtrack on the residual norm; the first steps from a crude guess
        # can overshoot
        lam = 1.0
        f0 = np.linalg.norm(F)
        while True:
            cn = c + lam * step
            Fn = res(cn)
            if np.all(np.isfinite(Fn)) and (np.linalg.norm(Fn) <= f0 or lam < 1e-3):
                break
            lam *= 0.5
        c, F = cn, Fn
        if np.max(np.abs(lam * step)) <= tol * max(1.0, np.max(np.abs(c))):
            break
    return c, np.max(np.abs(F))


def _validity_radius(r, coeffs, tol):
    half = coeffs[: len(coeffs) // 2]
    th = np.linspace(0, np.pi / r, 33)
    rad = 0.0
    for rho in np.arange(0.05, 6.0, 0.01):
        z = rho * np.exp(1j * th)
        d = np.max(np.abs(_series_c(coeffs, r, z) - _series_c(half, r, z)))
        if not d <= tol:
            break
        rad = rho
    return float(rad)


def solve_feigenbaum(r: int = 2, order: int = 40, tol: float = 1e-12,
                     max_iter: int = 60) -> FeigenbaumMap:
    """Solve the Cvitanovic-Feigenbaum equation for criticality ``r``.

    A low-order Newton solve on Chebyshev nodes of [0, 1] (in ``w = x**r``)
    provides the starting point; the full-order coefficients are then fitted
    by least squares on those nodes together with points on the circle
    ``|x**r| = rho``, which pins down the high Taylor coefficients that the
    real nodes alone cannot resolve in double precision.

    Raises
    ------
    BadCriticality
        If ``r`` is odd or smaller than 2.
    NonConvergence
        If the collocation residual stays above ``tol``.
    """
    if int(r) != r or r < 2 or r % 2:
        raise BadCriticality(f"criticality must be an even integer >= 2, got {r}")
    r = int(r)
    if order < 10:
        raise ValueError("order must be >= 10")
    if not tol > 0:
        raise ValueError("tol must be positive")

    n1 = 10
    k = np.arange(1, n1 + 1)
    w_nodes = (np.cos(np.pi * (2 * k - 1) / (2 * n1)) + 1) / 2
    c = np.zeros(n1)
    c[0] = -1.5
    c, _ = _newton_lsq(c, r, w_nodes ** (1.0 / r), max_iter, 1e-14)

    k = np.arange(1, order + 1)
    w_nodes = (np.cos(np.pi * (2 * k - 1) / (2 * order)) + 1) / 2
    xr = w_nodes ** (1.0 / r)
    th = np.pi * (np.arange(order) + 0.5) / order
    best = None
    # the circle must stay small enough that g(x/alpha) remains inside the
    # convergence disc; flatter maps (larger r) need smaller circles
    for rho_w in (3.0, 1.0, 0.6):
        circle = (rho_w * np.exp(1j * th)) ** (1.0 / r)
        xs = np.concatenate([xr, circle]).astype(complex)
        cc = np.zeros(order)
        cc[:n1] = c
        cc, _ = _newton_lsq(cc, r, xs, max_iter, 1e-15)
        if not np.all(np.isfinite(cc)):
            continue
        alpha = 1.0 / _series_c(cc, r, 1.0)
        node_res = np.max(np.abs(_series_c(cc, r, xr)
                                 - alpha * _series_c(cc, r, _series_c(cc, r, xr / alpha))))
        if best is None or node_res < best[0]:
            best = (node_res, cc, alpha)
        if node_res <= tol:
            break
    if best is None:
        raise NonConvergence("Newton iteration diverged")
    node_res, cc, alpha = best
    if not node_res <= tol:
        raise NonConvergence(f"collocation residual {node_res:.3e} > tol {tol:.1e}")
    if not alpha < -1:
        raise NonConvergence(f"converged to a spurious solution with alpha={alpha}")
    radius = _validity_radius(r, cc, tol)
    grid = np.linspace(0.0, 1.0, 512)
    tmp = FeigenbaumMap(r=r, coeffs=cc, alpha=alpha, order=order, residual=0.0,
                        radius=max(radius, 1.0))
    residual = float(np.max(np.abs(functional_residual(tmp, grid))))
    return FeigenbaumMap(r=r, coeffs=cc, alpha=float(alpha), order=order,
                         residual=residual, radius=tmp.radius)


def find_x0(m: FeigenbaumMap) -> float:
    """The unique zero of g in (0, 1)."""
    f = lambda x: float(eval_g(m, x))
    if not f(0.0) > 0 > f(1.0):
        raise NonConvergence("g does not change sign on [0, 1]")
    x0 = brentq(f, 0.0, 1.0, xtol=1e-16, rtol=1e-15, maxiter=200)
    return float(x0)


# ---------------------------------------------------------------------------
# independent estimate of alpha from the superstable cascade


def _orbit(mu, r, n):
    """Return f^n(0) and its mu-derivative for f(x) = 1 - mu*|x|**r."""
    x, dx = 0.0, 0.0
    for _ in range(n):
        ax = abs(x)
        p = ax ** r
        dp = r * ax ** (r - 1) * math.copysign(1.0, x) * dx if ax > 0 else 0.0
        x, dx = 1.0 - mu * p, -p - mu * dp
    return x, dx


def _superstable(r, n, guess, lo, hi):
    period = 2 ** n
    mu = guess
    for _ in range(60):
        f, df = _orbit(mu, r, period)
        if df == 0:
            break
        step = f / df
        mu_new = mu - step
        if not lo < mu_new < hi:
            mu_new = 0.5 * (mu + (lo if mu_new <= lo else hi))
        if abs(mu_new - mu) < 1e-15 * mu:
            return mu_new
        mu = mu_new
    f, _ = _orbit(mu, r, period)
    if abs(f) > 1e-9:
        raise NonConvergence(f"superstable parameter for period {period} not found")
    return mu


def alpha_oracle(r: int = 2, precision: float = 1e-7, max_level: int = 12) -> float:
    """Estimate ``|alpha|`` from the superstable cascade of ``1 - mu|x|^r``.

    ``d_n = f^{2^(n-1)}(0)`` is the cycle point closest to the critical point
    at the superstable parameter of period ``2^n``; ``d_n / d_{n+1}`` tends to
    ``alpha`` geometrically with ratio ``1/delta``, so successive ratios are
    Richardson-extrapolated.  Double precision limits the cascade to about
    twelve levels, beyond which the superstable parameters are no longer
    resolved.
    """
    if int(r) != r or r < 2 or r % 2:
        raise BadCriticality(f"criticality must be an even integer >= 2, got {r}")
    r = int(r)
    mus = [1.0]
    # period 4: first sign change of f^4(0) above mu=1
    grid = np.linspace(1.0 + 1e-6, 2.0, 4001)
    vals = np.array([_orbit(mu, r, 4)[0] for mu in grid])
    idx = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
    if len(idx) == 0:
        raise NonConvergence("no period-4 superstable parameter found")
    mus.append(brentq(lambda mu: _orbit(mu, r, 4)[0], grid[idx[0]], grid[idx[0] + 1],
                      xtol=1e-16))
    delta = 4.669
    d_cur = _orbit(mus[1], r, 2)[0]
    ratios, extrap = [], []
    for n in range(3, max_level + 1):
        step = (mus[-1] - mus[-2]) / delta
        mu = _superstable(r, n, mus[-1] + step, mus[-1] + 0.1 * step, mus[-1] + 3 * step)
        delta = (mus[-1] - mus[-2]) / (mu - mus[-1])
        mus.append(mu)
        d_next = _orbit(mu, r, 2 ** (n - 1))[0]
        ratios.append(d_cur / d_next)
        d_cur = d_next
        if len(ratios) >= 2:
            extrap.append((delta * ratios[-1] - ratios[-2]) / (delta - 1.0))
        if len(extrap) >= 2 and abs(extrap[-1] - extrap[-2]) < precision:
            return abs(extrap[-1])
    if len(extrap) >= 2 and abs(extrap[-1] - extrap[-2]) < 100 * precision:
        return abs(extrap[-1])
    raise NonConvergence("cascade ratios did not settle to the requested precision")
