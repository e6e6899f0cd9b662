"""Command-line interface: ``feigmarkov {solve,curve,tiles,dim,rays,verify}``.

Usage errors exit with status 2, failed asserted checks with status 1.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import load_map, save_map, solve_feigenbaum
from .curves import CurveApprox
from .errors import FeigError

__all__ = ["main", "build_parser", "write_svg"]


def _scales(text):
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError("expected INT..INT") from None
    if lo > hi:
        raise argparse.ArgumentTypeError("lower scale exceeds upper scale")
    return lo, hi


def _point(text):
    try:
        re, im = text.split(",")
        return complex(float(re), float(im))
    except ValueError:
        raise argparse.ArgumentTypeError("expected RE,IM") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="feigmarkov", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="solve the fixed-point equation and save the map")
    s.add_argument("--r", type=int, default=2)
    s.add_argument("--order", type=int, default=40)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--out", required=True)

    s = sub.add_parser("curve", help="sample the invariant ray L")
    s.add_argument("--map")
    s.add_argument("--depth", type=int, default=8)
    s.add_argument("--scales", type=_scales, default=(-4, 4))
    s.add_argument("--svg")
    s.add_argument("--csv")

    s = sub.add_parser("tiles", help="tile a disc around 0 with partition pieces")
    s.add_argument("--map")
    s.add_argument("--depth", type=int, default=10)
    s.add_argument("--radius", type=float)
    s.add_argument("--max-pieces", type=int, default=5000)
    s.add_argument("--svg")
    s.add_argument("--census")

    s = sub.add_parser("dim", help="estimate the dimension of I")
    s.add_argument("--map")
    s.add_argument("--max-depth", type=int, default=14)
    s.add_argument("--report")

    s = sub.add_parser("rays", help="external ray to a base point")
    s.add_argument("--map")
    s.add_argument("--point", type=_point, required=True)
    s.add_argument("--depth", type=int, default=4)
    s.add_argument("--svg")

    s = sub.add_parser("verify", help="run a verification suite")
    s.add_argument("--map")
    s.add_argument("--suite", choices=["core", "ifs", "markov", "dim", "all"], default="core")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report")
    return p


def _map(path):
    return load_map(path) if path else solve_feigenbaum(2)


def write_svg(curves, path, width=800, fills=None):
    """Curves as SVG paths, scaled into a width x width square with y pointing up."""
    pts = np.concatenate([c.points for c in curves])
    lo = complex(pts.real.min(), pts.imag.min())
    span = max(pts.real.max() - lo.real, pts.imag.max() - lo.imag) or 1.0
    s = width / span
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{width}" '
           f'viewBox="0 0 {width} {width}">']
    for k, c in enumerate(curves):
        q = (c.points - lo) * s
        q = CurveApprox(q.real + 1j * (width - q.imag), closed=c.closed)
        fill = fills[k] if fills else "none"
        out.append(f'<path d="{q.svg_path(flip=False)}" fill="{fill}" stroke="#222" stroke-width="0.5"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def _cmd_solve(a, parser):
    if a.r < 2 or a.r % 2:
        parser.error("--r must be an even integer >= 2")
    if a.order < 4:
        parser.error("--order must be >= 4")
    m = solve_feigenbaum(a.r, order=a.order, tol=a.tol)
    save_map(m, a.out)
    print(f"alpha = {m.alpha:.16g}  residual = {m.residual:.3g}")
    return 0


def _cmd_curve(a, parser):
    if a.depth < 1:
        parser.error("--depth must be >= 1")
    from .ifs import curve_L
    from .inverse import find_c
    m = _map(a.map)
    L = curve_L(m, a.depth, a.scales[0], a.scales[1], find_c(m).c)
    if a.csv:
        L.to_csv(a.csv)
    if a.svg:
        write_svg([L], a.svg)
    print(f"{len(L)} vertices, mesh {L.mesh:.3g}")
    return 0


def _cmd_tiles(a, parser):
    if a.depth < 0:
        parser.error("--depth must be >= 0")
    if a.max_pieces < 1:
        parser.error("--max-pieces must be >= 1")
    if a.radius is not None and a.radius <= 0:
        parser.error("--radius must be positive")
    from . import partition as part
    m = _map(a.map)
    T = part.build_tiling(m, a.radius, a.max_pieces, machine_depth=a.depth)
    cov = part.tiling_coverage(m, max_pieces=a.max_pieces, tiling=T)
    if a.svg:
        part.tiles_svg(T.pieces, a.svg)
    if a.census:
        part.census_json(T.pieces, a.census)
    print(f"{len(T.pieces)} pieces, coverage {cov:.4f} of the disc of radius {T.radius:.6g}")
    return 0


def _cmd_dim(a, parser):
    if a.max_depth < 2:
        parser.error("--max-depth must be >= 2")
    from .dimension import dimension_report
    m = _map(a.map)
    rep = dimension_report(m, a.max_depth)
    text = json.dumps(rep, indent=1, sort_keys=True)
    if a.report:
        with open(a.report, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_rays(a, parser):
    if a.depth < 0:
        parser.error("--depth must be >= 0")
    from . import partition as part
    m = _map(a.map)
    x, pieces = a.point, None
    if x != 0:
        # snap to the nearest base point of a piece of depth <= --depth
        pieces = part.census(m, a.depth)
        bases = [p.x_R for p in pieces if p.depth]
        if not bases:
            parser.error("--depth too small to produce base points")
        x = min(bases, key=lambda b: (abs(b - a.point), -b.imag))
    ray = part.external_ray(m, x, a.depth, pieces=pieces)
    path = part.clip_to_window(ray.path, max(4.0, 4 * abs(x)))
    if a.svg:
        write_svg([path], a.svg)
    print(f"ray to {x.real:.9g}{x.imag:+.9g}i (|snap| {abs(x - a.point):.3g}): "
          f"{len(path)} vertices, truncation depth {ray.truncation_depth}")
    return 0


def _cmd_verify(a, parser):
    from .verify import run_suite
    m = _map(a.map)
    rep = run_suite(m, a.suite, a.seed)
    text = rep.to_json(a.report)
    for c in rep.checks:
        print(f"{c.status:12s} {c.name}")
    if not rep.ok:
        print("failed: " + ", ".join(rep.failed()), file=sys.stderr)
        return 1
    if not a.report:
        print(text)
    return 0


_COMMANDS = {"solve": _cmd_solve, "curve": _cmd_curve, "tiles": _cmd_tiles, "dim": _cmd_dim,
             "rays": _cmd_rays, "verify": _cmd_verify}


def _join_negative(argv):
    # let "--scales -2..2" and "--point -0.2,0.1" through; argparse reads them as flags
    out = []
    for tok in argv:
        if out and out[-1] in ("--scales", "--point") and tok.startswith("-"):
            out[-1] = out[-1] + "=" + tok
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(_join_negative(sys.argv[1:] if argv is None else list(argv)))
    try:
        return _COMMANDS[a.cmd](a, parser)
    except (OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FeigError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
