"""Bowen roots by word length, the bracket for dim I and a box count."""

import numpy as np

from feigmarkov import dimension as dim
from feigmarkov.core import solve_feigenbaum

m = solve_feigenbaum(2)
est = dim.estimate_dimension(m, max_depth=12, min_depth=6, rng=np.random.default_rng(0))
print(" m   Bowen root at the base point")
for k, h in sorted(est.bowen_roots.items()):
    print(f"{k:2d}   {h:.6f}")
lo, hi = est.bracket
print(f"bracket from Z_m/Z_(m-1): [{lo:.6f}, {hi:.6f}]")
print(f"per-word sup/inf roots:   [{est.naive_bracket[0]:.6f}, {est.naive_bracket[1]:.6f}]")
print(f"box counting, depth 12:    {est.box_dim:.4f}")

mu = dim.conformal_measure(m, est.h, 10)
print("mass of the three first-level cylinders:",
      ", ".join(f"{mu.cylinder_mass((i,)):.4f}" for i in (1, 2, 3)))
