"""GRW jump unraveling: exact unitary flights interrupted by Poisson collapses.

The jump rate is the constant lambda because the bank is complete, so jump
times can be drawn up front and the state propagated exactly to each one.
Between events the state is carried in the eigenbasis of H, where a flight
of any duration is a diagonal phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotNormalized, ZeroOverlap
from .lindblad import steps_between
from .model import CollapseBank, SystemModel
from .observables import OBSERVABLE_NAMES, state_observables
from .streams import RandomStream, as_stream

NORM_TOL = 1e-10


@dataclass
class JumpEvent:
    time: float
    center_index: int
    energy_kick: float


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    events: list[JumpEvent]
    final_state: np.ndarray
    seed: int
    trajectory_id: int
    states: np.ndarray | None = None  # (n_times, n) when requested
    outcomes: object = None  # AncillaOutcomeLog for repeated-interaction runs
    extra: dict = field(default_factory=dict)

    @property
    def n_events(self) -> int:
        return len(self.events)


def sample_jump_time(rng: RandomStream, lam: float) -> float:
    """Waiting time to the next collapse; ``inf`` when lambda is zero."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if lam == 0:
        return np.inf
    return float(rng.exponential(1.0 / lam))


def collapse_weights(bank: CollapseBank, psi) -> np.ndarray:
    """``||K_f psi||^2`` for every center f."""
    return bank.diagonals**2 @ (np.abs(psi) ** 2)


def sample_collapse_center(rng: RandomStream, bank: CollapseBank, psi) -> int:
    psi = np.asarray(psi)
    norm2 = float(np.vdot(psi, psi).real)
    if abs(norm2 - 1.0) > NORM_TOL:
        raise NotNormalized(f"state norm^2 = {norm2}")
    cdf = np.cumsum(collapse_weights(bank, psi))
    f = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(f, bank.n_f - 1)


def apply_jump(bank: CollapseBank, f: int, psi) -> np.ndarray:
    phi = bank.diagonals[f] * np.asarray(psi)
    nrm = np.linalg.norm(phi)
    if nrm <= 1e-14:
        raise ZeroOverlap(f"||K_{f} psi|| = {nrm:.3e}")
    return phi / nrm


def run_jump_trajectory(
    model: SystemModel,
    psi0,
    t_final: float,
    output_dt: float,
    rng,
    trajectory_id: int = 0,
    keep_states: bool = False,
    boundary_x: float | None = None,
) -> TrajectoryRecord:
    rng = as_stream(rng, trajectory_id)
    if not output_dt > 0:
        raise ValueError(f"output_dt must be positive, got {output_dt}")
    n_out = steps_between(t_final, output_dt, "t_final")
    energies, V = model.spectrum
    Vh = V.conj().T
    bank = model.bank

    psi = np.array(psi0, dtype=complex)
    coef = Vh @ psi  # eigenbasis amplitudes at time t
    t = 0.0
    next_jump = sample_jump_time(rng, model.lam)
    events: list[JumpEvent] = []
    snapshots = [psi.copy()]

    for k in range(1, n_out + 1):
        t_out = k * output_dt
        while next_jump <= t_out:
            coef = coef * np.exp(-1j * energies * (next_jump - t))
            t = next_jump
            psi = V @ coef
            e_before = float(energies @ np.abs(coef) ** 2)
            f = sample_collapse_center(rng, bank, psi / np.linalg.norm(psi))
            psi = apply_jump(bank, f, psi)
            coef = Vh @ psi
            events.append(JumpEvent(t, f, float(energies @ np.abs(coef) ** 2) - e_before))
            next_jump = t + sample_jump_time(rng, model.lam)
        coef = coef * np.exp(-1j * energies * (t_out - t))
        t = t_out
        psi = V @ coef
        snapshots.append(psi)

    snaps = np.array(snapshots)
    times = output_dt * np.arange(n_out + 1)
    obs = state_observables(model, snaps, boundary_x)
    return TrajectoryRecord(
        times=times,
        observables={k: obs[k] for k in OBSERVABLE_NAMES},
        events=events,
        final_state=snaps[-1],
        seed=rng.seed,
        trajectory_id=trajectory_id,
        states=snaps if keep_states else None,
    )
