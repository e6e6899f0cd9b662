"""The iterated function systems S = {phi_1, phi_2, phi_3} and S_inf = {psi_k}.

``phi_1(z) = u*(|alpha| z)``, ``phi_2(z) = u*(alpha^2 z)`` and
``phi_3 = chi o chi`` map the compact X into itself; their limit set I is
an arc from c/|alpha| to c and the invariant ray is L = U_n |alpha|^n I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FeigenbaumMap, eval_g
from .curves import CurveApprox, SymbolWord, distance_to_polyline, winding_contains
from .errors import InsufficientData
from .inverse import U, U_prime, chi_eval, find_c, refine_arcs, u_star_eval

__all__ = [
    "CompactX",
    "build_X",
    "phi_apply",
    "phi_apply_with_derivative",
    "psi_apply",
    "word_apply",
    "word_derivative_mag",
    "FastMaps",
    "fast_maps",
    "distortion_constant",
    "limit_curve",
    "junction_points",
    "curve_L",
    "hyperbolic_distance",
    "sample_interior",
    "system_checks",
    "forward_image_defect",
]


# ---------------------------------------------------------------------------
# exact maps


def phi_apply(m: FeigenbaumMap, i: int, z):
    """phi_i(z) for i in {1, 2, 3}."""
    A = m.abs_alpha
    if i == 1:
        return u_star_eval(m, A * np.asarray(z))
    if i == 2:
        return u_star_eval(m, A * A * np.asarray(z))
    if i == 3:
        return chi_eval(m, chi_eval(m, z))
    raise ValueError(f"no map phi_{i}")


def phi_apply_with_derivative(m: FeigenbaumMap, i: int, z):
    """phi_i(z) and |phi_i'(z)| (derivative in z or conj z as appropriate)."""
    A = m.abs_alpha
    z = np.asarray(z, dtype=complex)
    if i in (1, 2):
        s = A ** i
        zeta = s * np.conj(z)
        w = U(m, zeta)
        return w, s * np.abs(U_prime(m, zeta, w))
    if i == 3:
        z1 = np.conj(z)
        w1 = U(m, z1)
        d1 = A * np.abs(U_prime(m, z1, w1))
        z2 = np.conj(A * w1)
        w2 = U(m, z2)
        d2 = A * np.abs(U_prime(m, z2, w2))
        return A * w2, d1 * d2
    raise ValueError(f"no map phi_{i}")


def psi_apply(m: FeigenbaumMap, k: int, z):
    """psi_k(z) = u*(|alpha|^k z)."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    return u_star_eval(m, m.abs_alpha ** k * np.asarray(z))


def _as_word(w):
    if isinstance(w, SymbolWord):
        return w
    return SymbolWord(tuple(w))


def word_apply(m: FeigenbaumMap, w, z):
    """Composition phi_{e1} o ... o phi_{en}(z) (or psi_* for S_inf words)."""
    w = _as_word(w)
    z = np.asarray(z, dtype=complex)
    for s in reversed(w.symbols):
        z = psi_apply(m, s, z) if w.system == "Sinf" else phi_apply(m, s, z)
    return z


def word_derivative_mag(m: FeigenbaumMap, w, z):
    """|(phi_w)'(z)| by the chain rule; antiholomorphic factors contribute |f'(conj z)|."""
    w = _as_word(w)
    z = np.asarray(z, dtype=complex)
    d = np.ones(z.shape)
    A = m.abs_alpha
    for s in reversed(w.symbols):
        if w.system == "Sinf":
            zeta = A ** s * np.conj(z)
            v = U(m, zeta)
            d = d * A ** s * np.abs(U_prime(m, zeta, v))
            z = v
        else:
            z, ds = phi_apply_with_derivative(m, s, z)
            d = d * ds
    return d


# ---------------------------------------------------------------------------
# fast evaluation by local Taylor expansions


class FastMaps:
    """phi_1, phi_2, phi_3 with derivative magnitudes, via cached local expansions.

    The upper half-plane is cut into square cells of side ``cell``.  On each
    cell the holomorphic function behind phi_i (in the variable conj z for
    the antiholomorphic maps) is expanded in a Taylor series whose
    coefficients come from an FFT of exact values on a circle of radius
    ``rho``.  Cells closer than ``rho + margin`` to the real axis, and points
    far outside the covered window, fall back to exact evaluation.
    """

    def __init__(self, m: FeigenbaumMap, cell: float = 0.25, rho: float = 0.5,
                 nfft: int = 64, degree: int = 40, margin: float = 0.15,
                 window: float = 8.0):
        self.m = m
        self.cell = cell
        self.rho = rho
        self.nfft = nfft
        self.degree = degree
        self.margin = margin
        self.window = window
        self._coef = {}

    def _cell_ok(self, ci, cj):
        cy = (cj + 0.5) * self.cell
        return cy >= self.rho + self.margin and abs((ci + 0.5) * self.cell) <= self.window \
            and cy <= self.window

    def _build(self, i, ci, cj):
        m = self.m
        z0 = complex((ci + 0.5) * self.cell, (cj + 0.5) * self.cell)
        th = 2 * np.pi * np.arange(self.nfft) / self.nfft
        circ = self.rho * np.exp(1j * th)
        if i in (1, 2):
            # phi_i(z) = F(conj z) with F(zeta) = U(|alpha|^i zeta)
            zeta = np.conj(z0) + circ
            vals = U(m, m.abs_alpha ** i * zeta)
        else:
            vals = phi_apply(m, 3, z0 + circ)
        c = np.fft.fft(vals) / self.nfft
        c = c[: self.degree + 1] / self.rho ** np.arange(self.degree + 1)
        dc = c[1:] * np.arange(1, self.degree + 1)
        self._coef[(i, ci, cj)] = (c, dc)
        return c, dc

    def apply(self, i: int, z, want_derivative: bool = True):
        """Return phi_i(z) and |phi_i'(z)|."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        z = z.ravel()
        out = np.empty_like(z)
        der = np.empty(len(z))
        ci = np.floor(z.real / self.cell).astype(np.int64)
        cj = np.floor(z.imag / self.cell).astype(np.int64)
        key = ci * 100003 + cj
        uniq, inv = np.unique(key, return_inverse=True)
        exact = np.zeros(len(z), bool)
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
        for k in range(len(uniq)):
            idx = order[bounds[k]:bounds[k + 1]]
            a, b = int(ci[idx[0]]), int(cj[idx[0]])
            if not self._cell_ok(a, b):
                exact[idx] = True
                continue
            c, dc = self._coef.get((i, a, b)) or self._build(i, a, b)
            z0 = complex((a + 0.5) * self.cell, (b + 0.5) * self.cell)
            t = z[idx] - z0
            if i in (1, 2):
                t = np.conj(t)
            out[idx] = np.polynomial.polynomial.polyval(t, c)
            if want_derivative:
                der[idx] = np.abs(np.polynomial.polynomial.polyval(t, dc))
        if exact.any():
            v, d = phi_apply_with_derivative(self.m, i, z[exact])
            out[exact] = v
            der[exact] = d
        return out.reshape(shape), der.reshape(shape)


_fast_cache = {}


def fast_maps(m: FeigenbaumMap) -> FastMaps:
    fm = _fast_cache.get(id(m))
    if fm is None or fm.m is not m:
        fm = FastMaps(m)
        _fast_cache[id(m)] = fm
    return fm


# ---------------------------------------------------------------------------
# the compact X


@dataclass
class CompactX:
    """Carrier of the IFS: the closure of u*(Pi) minus omega/|alpha|.

    ``left`` runs from the top of tau_0/|alpha| up the imaginary axis and
    along tau_2, tau_4, ... to c; ``right`` is u* of the ray i[|u(alpha^2)|, oo),
    from its start to c; ``bottom`` runs from the start of ``right`` along
    tau_3/|alpha|, tau_5/|alpha|, ... to c/|alpha| and back along
    ..., tau_4/|alpha|, tau_2/|alpha| to the start of ``left``.
    """

    bottom: CurveApprox
    left: CurveApprox
    right: CurveApprox
    corners: dict
    c: complex
    resolution: float
    _boundary: CurveApprox | None = field(default=None, repr=False)

    @property
    def boundary(self) -> CurveApprox:
        if self._boundary is None:
            pts = np.concatenate([self.bottom.points, self.left.points[1:],
                                  self.right.points[::-1][1:-1]])
            self._boundary = CurveApprox(pts, closed=True)
        return self._boundary

    @property
    def diam(self) -> float:
        return self.boundary.diam

    @property
    def tube(self) -> float:
        return 1e-6 * self.diam

    def contains(self, z, tube: float | None = None):
        t = self.tube if tube is None else tube
        return self.boundary.contains(z, tube=t)

    def interior_point(self) -> complex:
        """A point well inside X (the deepest of a coarse grid)."""
        b = self.boundary.points
        xs = np.linspace(b.real.min(), b.real.max(), 60)
        ys = np.linspace(b.imag.min(), b.imag.max(), 60)
        Z = (xs[:, None] + 1j * ys[None, :]).ravel()
        Z = Z[winding_contains(b, Z)]
        d = distance_to_polyline(self.boundary, Z)
        return complex(Z[np.argmax(d)])


def _decimate(z, atol):
    """Drop vertices whose removal moves the polyline by less than atol."""
    while len(z) > 3:
        mid = z[1:-1:2]
        left = z[0:-2:2]
        right = z[2::2]
        ok = np.abs(mid - 0.5 * (left + right)) <= atol
        if not ok.any():
            break
        keep = np.ones(len(z), bool)
        keep[1:-1:2] = ~ok
        z = z[keep]
        if ok.all():
            continue
        break
    return z


def _chi2_chain(m, first, limit, atol, max_arcs=400):
    """Arcs first, chi^2(first), chi^4(first), ... concatenated until they reach ``limit``.

    chi^2 contracts, so the image of an adequately sampled arc is again
    adequately sampled; surplus vertices are thinned out as the arcs shrink.
    """
    out = [first]
    arc = first
    for _ in range(max_arcs):
        if abs(arc[-1] - limit) < atol:
            out.append(np.array([limit]))
            return np.concatenate(out)
        arc = chi_eval(m, chi_eval(m, arc))
        arc = _decimate(arc, 0.5 * atol)
        out.append(arc[1:])
    raise InsufficientData("arc chain did not reach its limit point")


def build_X(m: FeigenbaumMap, resolution: float = 5e-7, c: complex | None = None) -> CompactX:
    """Boundary polylines of X, sampled so that chords deviate less than ``resolution``."""
    if c is None:
        c = find_c(m).c
    A = m.abs_alpha
    b = abs(complex(u_star_eval(m, A * A)))          # |u(alpha^2)|, top of tau_0
    p_left = 1j * b / A                               # top of tau_0/|alpha|

    def tau(k, t):
        return u_star_eval(m, (-1.0) ** k * A ** (k + 2 * t))

    def ray(j, t):
        return u_star_eval(m, 1j * b * A ** (2 * j + 2 * t))

    _, (tau1, tau2) = refine_arcs(tau, [1, 2], atol=0.5 * resolution)
    _, (ray0,) = refine_arcs(ray, [0], atol=0.5 * resolution)
    even = _chi2_chain(m, tau2, c, resolution)
    odd = _chi2_chain(m, chi_eval(m, chi_eval(m, tau1)), c, resolution)
    # left side: the segment i[b/|alpha|, b] followed by tau_2, tau_4, ...
    seg = 1j * np.linspace(b / A, b, max(2, int(np.ceil((b - b / A) / 0.01)) + 1))
    left = CurveApprox(np.concatenate([seg, even[1:]]))
    right = CurveApprox(_chi2_chain(m, ray0, c, resolution))
    # bottom: tau_3/|alpha|, tau_5/|alpha|, ... to c/|alpha|, then the even chain backwards
    bottom = CurveApprox(np.concatenate([odd, even[::-1][1:]]) / A)
    corners = {
        "c": c,
        "c_over_alpha": c / A,
        "left_bottom": p_left,
        "right_bottom": complex(right.points[0]),
    }
    return CompactX(bottom=bottom, left=left, right=right, corners=corners, c=c,
                    resolution=resolution)


def sample_interior(X: CompactX, n: int, rng, margin: float = 0.0):
    """Uniform random points of X (rejection sampling)."""
    b = X.boundary.points
    lo = complex(b.real.min(), b.imag.min())
    hi = complex(b.real.max(), b.imag.max())
    out = []
    got = 0
    while got < n:
        k = 4 * (n - got) + 16
        z = lo.real + (hi.real - lo.real) * rng.random(k) + 1j * (lo.imag + (hi.imag - lo.imag) * rng.random(k))
        z = z[winding_contains(b, z)]
        if margin > 0 and len(z):
            z = z[distance_to_polyline(X.boundary, z) > margin]
        out.append(z)
        got += len(z)
    return np.concatenate(out)[:n]


def hyperbolic_distance(x, y):
    """Distance in the upper half-plane for the density 1/(2 Im z)."""
    x = np.asarray(x)
    y = np.asarray(y)
    return np.arctanh(np.abs(x - y) / np.abs(x - np.conj(y)))


# ---------------------------------------------------------------------------
# limit set


def junction_points(m: FeigenbaumMap, depth: int, c: complex | None = None,
                    fast: bool = True) -> np.ndarray:
    """The 3^depth + 1 cylinder junctions of I in arc order.

    ``P_0 = [c/|alpha|, c]`` and ``P_n`` is the concatenation of phi_1(P),
    phi_2(P) and phi_3(P) with shared endpoints dropped; all three maps send
    c/|alpha| to the left end of their cylinder and c to its right end.
    """
    if c is None:
        c = find_c(m).c
    P = np.array([c / m.abs_alpha, c])
    fm = fast_maps(m) if fast else None
    for _ in range(depth):
        if fm is not None:
            im = [fm.apply(i, P, want_derivative=False)[0] for i in (1, 2, 3)]
        else:
            im = [phi_apply(m, i, P) for i in (1, 2, 3)]
        P = np.concatenate([im[0], im[1][1:], im[2][1:]])
    return P


def _ternary(n, width):
    digits = np.zeros((len(n), width), dtype=np.int64)
    q = n.copy()
    for k in range(width - 1, -1, -1):
        digits[:, k] = q % 3
        q //= 3
    return ["".join(map(str, row)) for row in digits]


def limit_curve(m: FeigenbaumMap, depth: int, c: complex | None = None,
                fast: bool = True, addresses: bool = True) -> CurveApprox:
    """Polyline through the cylinder junctions of I, from c/|alpha| to c.

    Vertex k carries the ternary expansion of k (width depth+1) as its
    address, so addresses increase along the arc.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    P = junction_points(m, depth, c, fast)
    addr = _ternary(np.arange(len(P)), depth + 1) if addresses else None
    return CurveApprox(P, addr, meta={"depth": depth})


def curve_L(m: FeigenbaumMap, depth: int, scale_min: int, scale_max: int,
            c: complex | None = None, I: CurveApprox | None = None) -> CurveApprox:
    """The invariant ray on the scale window: union of |alpha|^n I, n in [scale_min, scale_max]."""
    if scale_min > scale_max:
        raise ValueError("scale_min must not exceed scale_max")
    if I is None:
        I = limit_curve(m, depth, c, addresses=False)
    A = m.abs_alpha
    pts = []
    addr = []
    base = I.points
    width = len(str(len(base)))
    for n in range(scale_min, scale_max + 1):
        p = base * A ** n
        if pts:
            p = p[1:]
        pts.append(p)
        start = 0 if len(addr) == 0 else 1
        addr.extend(f"{n - scale_min:04d}.{k:0{width}d}" for k in range(start, len(base)))
    return CurveApprox(np.concatenate(pts), addr,
                       meta={"depth": I.meta.get("depth"), "scales": (scale_min, scale_max)})


def distortion_constant(m: FeigenbaumMap, X: CompactX, max_len: int = 8,
                        samples: int = 24, rng=None) -> float:
    """max over words w (|w| <= max_len) of sup/inf of |phi_w'| over sample points of X."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = np.concatenate([sample_interior(X, samples, rng),
                          X.boundary.points[:: max(1, len(X.boundary) // samples)]])
    fm = fast_maps(m)
    # images and derivatives for all words, built from the innermost map outward
    Z = pts[None, :]
    D = np.ones_like(Z, dtype=float)
    K = 1.0
    for _ in range(max_len):
        newZ, newD = [], []
        for i in (1, 2, 3):
            v, d = fm.apply(i, Z)
            newZ.append(v)
            newD.append(D * d)
        Z = np.concatenate(newZ, axis=0)
        D = np.concatenate(newD, axis=0)
        K = max(K, float(np.max(D.max(axis=1) / D.min(axis=1))))
    return K


def system_checks(m: FeigenbaumMap, X: CompactX, n_samples: int = 500, rng=None,
                  tube: float | None = None) -> dict:
    """Sampled checks of the system S on X.

    ``escaped[i]``: vertices of phi_i(boundary X) outside X by more than the
    tube; ``overlap[(i, j)]``: images phi_i(z) of interior samples lying in
    phi_j(X) deeper than the tube; ``adjacency``: string of the pairs (i, j)
    whose image boundaries come within the tube; ``contraction[i]``: the
    largest hyperbolic distance ratio over sample pairs.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    tube = X.tube if tube is None else tube
    fm = fast_maps(m)
    B = X.boundary.points
    imgs = {}
    escaped = {}
    for i in (1, 2, 3):
        v, _ = fm.apply(i, B, want_derivative=False)
        imgs[i] = CurveApprox(v, closed=True)
        out = ~X.contains(v, tube=tube)
        escaped[i] = int(out.sum())
    Z = sample_interior(X, n_samples, rng)
    overlap = {}
    near = []
    for i in (1, 2, 3):
        p, _ = fm.apply(i, Z, want_derivative=False)
        for j in (1, 2, 3):
            if i == j:
                continue
            deep = imgs[j].contains(p) & (distance_to_polyline(imgs[j], p) > tube)
            overlap[(i, j)] = int(deep.sum())
            if i < j:
                d = float(np.min(distance_to_polyline(imgs[j], imgs[i].points)))
                if d <= tube:
                    near.append(f"{i}{j}")
    x = sample_interior(X, n_samples, rng)
    y = sample_interior(X, n_samples, rng)
    contraction = {}
    for i in (1, 2, 3):
        fx, _ = fm.apply(i, x, want_derivative=False)
        fy, _ = fm.apply(i, y, want_derivative=False)
        contraction[i] = float(np.max(hyperbolic_distance(fx, fy) / hyperbolic_distance(x, y)))
    return {"escaped": escaped, "overlap": overlap, "adjacency": ",".join(near),
            "contraction": contraction}


def forward_image_defect(m: FeigenbaumMap, depth: int = 8, c: complex | None = None,
                         scale_max: int = 12) -> float:
    """Largest distance from g(L_0) to conj(L_inf), relative to |g(z)|.

    L_0 is I; L_inf is the union of |alpha|^n I for n >= 1.  Vertices whose
    image leaves the sampled part of L_inf (those near c, where g has a pole)
    are skipped.
    """
    if c is None:
        c = find_c(m).c
    I = limit_curve(m, depth, c, addresses=False)
    Linf = curve_L(m, depth, 1, scale_max, c, I=I)
    R = abs(Linf.points[-1])
    # |g| grows like 1/|z - c|^2 near c; keep vertices safely inside the window
    p = I.points[np.abs(I.points - c) > 4 * abs(c) / np.sqrt(R)]
    w = eval_g(m, p)
    w = w[np.abs(w) < 0.5 * R]
    d = distance_to_polyline(CurveApprox(np.conj(Linf.points)), w)
    return float(np.max(d / np.abs(w)))


def check_data(n):
    if n < 2:
        raise InsufficientData("need at least two points")
