"""Tile the disc |z| <= |1/alpha|/2 and print the coverage curve.

Writes demos/out/tiles.svg (first 800 tiles) and demos/out/census.json.
Building the full tiling takes about half a minute.
"""

from pathlib import Path

from feigmarkov import partition as part
from feigmarkov.core import solve_feigenbaum

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

m = solve_feigenbaum(2)
T = part.build_tiling(m, max_pieces=5000)
print(f"radius {T.radius:.6f}, {len(T.pieces)} tiles, {T.n_copies} rescaled copies per base tile")
for n in (250, 500, 1000, 2000, 5000):
    print(f"  {n:5d} tiles  coverage {part.tiling_coverage(m, max_pieces=n, tiling=T):.4f}")

res = part.uncovered_residue(m, T)
print(f"uncovered share near the axes: {res['line_share_uncovered']:.2f}"
      f" (axes hold {res['line_share_all']:.2f} of the disc)")

part.tiles_svg(T.pieces[:800], out / "tiles.svg")
part.census_json(T.pieces, out / "census.json")
print("wrote", out / "tiles.svg")
