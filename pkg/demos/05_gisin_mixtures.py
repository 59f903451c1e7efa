"""Two preparations of the same mixed state evolve identically on average.

{|0>, |1>} and {|+>, |->} with equal weights both give rho0 = I/2 on the
two chosen sites. A linear master equation cannot tell them apart, and
neither may any faithful unraveling.
"""
import numpy as np

from grwlab import UnequalInitialDensity, build_grid, build_model, gisin_mixture_test
from grwlab.model import basis_state, nearest_site

grid = build_grid(64, -8.0, 8.0)
model = build_model(grid, lam=1.0, r_c=1.0, mass=100.0)
e0, e1 = basis_state(grid, nearest_site(grid, -2.0)), basis_state(grid, nearest_site(grid, 2.0))
plus, minus = (e0 + e1) / np.sqrt(2), (e0 - e1) / np.sqrt(2)

for meth in ("jump", "diffusive", "repeated_z", "repeated_x"):
    rep = gisin_mixture_test(model, [(0.5, e0), (0.5, e1)], [(0.5, plus), (0.5, minus)],
                             meth, 500, 1.0, seed=11, dt=0.01, threads=4)
    print(f"{meth:<11} worst d / 3 sigma {rep.max_ratio():.3f}  {'PASS' if rep.passed else 'FAIL'}")

try:
    gisin_mixture_test(model, [(0.5, e0), (0.5, e1)], [(0.5, plus), (0.5, e0)], "jump", 10, 1.0, seed=11)
except UnequalInitialDensity as exc:
    print("mismatched ensembles rejected:", exc)
