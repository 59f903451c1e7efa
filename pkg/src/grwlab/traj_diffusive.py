"""Unitary white-noise unraveling: collapse-free, norm-preserving trajectories.

One step is ``psi <- exp(i sqrt(lambda) sum_f dw_f K_f) U(dt) psi``. Both
factors are unitary and the noise generator is diagonal, so the noise factor
is an entrywise phase. Averaged over the noise, each step applies the exact
dephasing ``rho_jk -> rho_jk exp(-lambda dt (1 - C_jk))`` after the
Hamiltonian flight, which is a Lie splitting of the master equation with
weak order one.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch
from .lindblad import MasterTrajectory, steps_between
from .model import SystemModel
from .observables import OBSERVABLE_NAMES, state_observables
from .propagate import precompute_propagator
from .streams import RandomStream, as_stream
from .traj_jump import TrajectoryRecord


def sample_noise_increment(rng: RandomStream, n_f: int, dt: float) -> np.ndarray:
    """``n_f`` independent Wiener increments of variance dt."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return np.sqrt(dt) * rng.standard_normal(n_f)


def noise_phases(model: SystemModel, dw) -> np.ndarray:
    """Diagonal of the generator ``sqrt(lambda) sum_f dw_f K_f``; ``dw`` may be batched."""
    return np.sqrt(model.lam) * (np.asarray(dw) @ model.bank.diagonals)


def diffusive_step(model: SystemModel, psi, dt: float, dw) -> np.ndarray:
    """One exactly unitary step; ``psi`` may be a ``(B, n)`` batch with matching ``dw``."""
    psi = np.asarray(psi)
    dw = np.asarray(dw)
    if psi.shape[-1] != model.dim or dw.shape[-1] != model.bank.n_f:
        raise DimensionMismatch(f"state {psi.shape} / noise {dw.shape} vs model dim {model.dim}")
    U = precompute_propagator(model.hamiltonian, dt).matrix
    out = psi @ U.T
    if model.lam == 0:
        return out
    return np.exp(1j * noise_phases(model, dw)) * out


def _propagate_batch(model: SystemModel, states, n_out, steps_per_out, dt, streams):
    """Advance a ``(B, n)`` batch; each row draws its noise from its own stream."""
    U_T = np.ascontiguousarray(precompute_propagator(model.hamiltonian, dt).matrix.T)
    K = model.bank.diagonals
    amp = np.sqrt(model.lam * dt)
    snaps = [states.copy()]
    for _ in range(n_out):
        if model.lam:
            z = np.stack([s.standard_normal((steps_per_out, model.bank.n_f)) for s in streams])
            phases = np.exp(1j * amp * (z @ K))  # (B, steps, n)
        for s in range(steps_per_out):
            states = states @ U_T
            if model.lam:
                states = states * phases[:, s, :]
        snaps.append(states.copy())
    return np.stack(snaps, axis=1)  # (B, n_times, n)


def run_diffusive_batch(
    model: SystemModel,
    psi0s,
    t_final: float,
    dt: float,
    output_dt: float,
    streams: list[RandomStream],
) -> np.ndarray:
    psi0s = np.atleast_2d(np.asarray(psi0s, dtype=complex))
    n_out = steps_between(t_final, output_dt, "t_final")
    k = steps_between(output_dt, dt, "output_dt")
    return _propagate_batch(model, psi0s, n_out, k, dt, streams)


def run_diffusive_trajectory(
    model: SystemModel,
    psi0,
    t_final: float,
    dt: float,
    output_dt: float,
    rng,
    trajectory_id: int = 0,
    keep_states: bool = False,
    boundary_x: float | None = None,
) -> TrajectoryRecord:
    rng = as_stream(rng, trajectory_id)
    snaps = run_diffusive_batch(model, psi0, t_final, dt, output_dt, [rng])[0]
    obs = state_observables(model, snaps, boundary_x)
    return TrajectoryRecord(
        times=output_dt * np.arange(len(snaps)),
        observables={k: obs[k] for k in OBSERVABLE_NAMES},
        events=[],
        final_state=snaps[-1],
        seed=rng.seed,
        trajectory_id=trajectory_id,
        states=snaps if keep_states else None,
    )


def dephasing_factors(model: SystemModel, dt: float) -> np.ndarray:
    """Noise average of one phase kick: ``exp(-lambda dt (1 - C))`` entrywise."""
    return np.exp(-model.lam * dt * (1.0 - model.bank.overlap))


def diffusive_mean_evolution(model: SystemModel, rho0, t_final: float, dt: float, output_dt: float) -> MasterTrajectory:
    """Exact ensemble average of the diffusive scheme at step dt (no sampling).

    This is the deterministic map the Monte Carlo ensemble estimates; its
    distance to the master-equation solution is the scheme's weak bias.
    """
    rho = np.array(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    n_out = steps_between(t_final, output_dt, "t_final")
    k = steps_between(output_dt, dt, "output_dt")
    U = precompute_propagator(model.hamiltonian, dt).matrix
    D = dephasing_factors(model, dt)
    states = [rho.copy()]
    for _ in range(n_out):
        for _ in range(k):
            rho = D * (U @ rho @ U.conj().T)
        states.append(rho.copy())
    return MasterTrajectory(output_dt * np.arange(n_out + 1), np.array(states))
