"""Collision model: a qubit ancilla per collapse center, reset every tau.

Tracing the ancillas out gives a CPTP map whose error against the master
equation is O(tau). Measuring them in the z or x basis unravels the same map
into jump-like and diffusion-like trajectories.
"""
from grwlab import build_grid, build_model, cat_state, equivalence_report, evolve_master, run_ensemble, run_repeated, stable_step, trace_distance

grid = build_grid(64, -8.0, 8.0)
model = build_model(grid, lam=1.0, r_c=1.0, mass=100.0)
psi = cat_state(grid, -2.0, 2.0, 0.3)
T = 1.0
oracle = evolve_master(model, psi, T, stable_step(model, 0.1, 0.005), 0.1)

for tau in (0.02, 0.01, 0.005):
    traced = run_repeated(model, psi, round(T / tau), tau, "traced")
    print(f"tau = {tau:<6} traced error {trace_distance(traced.final, oracle.final):.3e}")

tau = 0.01
traced = run_repeated(model, psi, round(T / tau), tau, "traced", output_every=10)
recs = [run_ensemble(model, psi, b, 500, T, tau, 0.1, seed=5, threads=4) for b in ("repeated_z", "repeated_x")]
rep = equivalence_report(recs, traced)
print("z and x readouts vs traced channel:", "PASS" if rep.passed else "FAIL")
