"""Collapse-induced decoherence of a two-branch superposition.

The master equation is integrated for a cat state with branches 4 apart,
and the off-diagonal block is fitted against lambda (1 - exp(-d^2 / 4 r_c^2)).
"""
import numpy as np

from grwlab import build_grid, build_model, cat_state, evolve_master, stable_step
from grwlab.lindblad import decoherence_rate, fit_decay_rate
from grwlab.observables import coherence_block_norm

grid = build_grid(128, -8.0, 8.0)
model = build_model(grid, lam=1.0, r_c=1.0, mass=100.0)
psi = cat_state(grid, -2.0, 2.0, 0.3)

out = evolve_master(model, psi, 3.0, stable_step(model, 0.1, 0.005), 0.1)
block = np.array([coherence_block_norm(grid, rho) for rho in out.states])

for t, c in list(zip(out.times, block))[::5]:
    print(f"t = {t:4.1f}   |rho_LR| = {c:.4f}")

print("fitted rate ", round(fit_decay_rate(out.times, block), 4))
print("closed form ", round(decoherence_rate(1.0, 1.0, 4.0), 4))
