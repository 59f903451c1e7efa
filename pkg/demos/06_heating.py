"""Collapse heating of a free particle.

Each collapse narrows the packet and so raises its kinetic energy. The
ensemble-averaged energy then grows linearly at lambda / (4 m r_c^2),
independent of the state. On a coarse lattice the smallest r_c reads
a little low, since the kick then resolves only a few sites.
"""
from grwlab import build_grid, build_model, evolve_master, gaussian_packet, heating_rate, stable_step
from grwlab.observables import exact_mean_jump_kick, expected_heating_rate

grid = build_grid(160, -12.8, 12.8)
psi = gaussian_packet(grid, 0.0, 0.0, 1.5)

for r_c in (0.5, 1.0, 2.0):
    model = build_model(grid, lam=1.0, r_c=r_c, mass=1.0)
    oracle = evolve_master(model, psi, 0.5, stable_step(model, 0.1, 0.005), 0.1)
    slope = heating_rate(model, oracle)
    kick = model.lam * exact_mean_jump_kick(model, psi)
    print(f"r_c = {r_c:<4} slope {slope:.4f}  lambda * mean kick {kick:.4f}  "
          f"closed form {expected_heating_rate(1.0, 1.0, r_c):.4f}")
