"""Draw the limit arc I and the invariant ray L, and print where c sits.

Writes demos/out/ray.svg and demos/out/ray.csv.
"""

from pathlib import Path

from feigmarkov.cli import write_svg
from feigmarkov.core import solve_feigenbaum
from feigmarkov.ifs import curve_L, limit_curve
from feigmarkov.inverse import find_c

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

m = solve_feigenbaum(2)
sp = find_c(m)
print(f"alpha = {m.alpha:.15f}")
print(f"c     = {sp.c.real:.12f} {sp.c.imag:+.12f}i  ({sp.iterations} chi steps)")

I = limit_curve(m, 8, sp.c)
L = curve_L(m, 8, -3, 1, sp.c, I=I)
print(f"I: {len(I)} vertices, length {I.length:.4f}, simple: {I.is_simple()}")
L.to_csv(out / "ray.csv")
write_svg([L], out / "ray.svg")
print("wrote", out / "ray.svg")
