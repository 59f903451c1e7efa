"""Quantum-jump unraveling against the master equation.

Each trajectory is a Schroedinger flight broken by Poisson collapses; the
average of many |psi><psi| should sit within Monte Carlo error of rho(t).
"""
from grwlab import build_grid, build_model, cat_state, equivalence_report, evolve_master, run_ensemble, stable_step
from grwlab.ensemble import mc_errors

grid = build_grid(64, -8.0, 8.0)
model = build_model(grid, lam=1.0, r_c=1.0, mass=100.0)
psi = cat_state(grid, -2.0, 2.0, 0.3)
T, out_dt = 2.0, 0.1

oracle = evolve_master(model, psi, T, stable_step(model, out_dt, 0.005), out_dt)
rec = run_ensemble(model, psi, "jump", 1000, T, 0.005, out_dt, seed=7, threads=4)
rep = equivalence_report([rec], oracle)

sig = mc_errors(rec)
print(f"{rec.n_trajectories} trajectories, mean jumps {rec.event_counts.mean():.2f}")
print(f"largest sigma_MC {sig.max():.4f}, worst d / 3 sigma {rep.max_ratio():.3f}")
print("PASS" if rep.passed else "FAIL")
