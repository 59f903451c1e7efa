"""Physical diagnostics: moments, energy, heating, jump kicks and branch weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryOutsideGrid, DimensionMismatch, InsufficientPoints, NotHermitian
from .model import GridSpec, SystemModel

OBSERVABLE_NAMES = ("mean_x", "var_x", "energy", "weight_left", "weight_right")
IMAG_TOL = 1e-10


def expval(op, state) -> float:
    """``<psi|A|psi>`` for a vector, ``tr(rho A)`` for a matrix."""
    op = np.asarray(op)
    state = np.asarray(state)
    n = op.shape[0]
    if op.shape != (n, n) or state.shape[0] != n or state.shape not in ((n,), (n, n)):
        raise DimensionMismatch(f"operator {op.shape} vs state {state.shape}")
    if np.max(np.abs(op - op.conj().T), initial=0.0) > 1e-10:
        raise NotHermitian("operator is not Hermitian")
    if state.ndim == 1:
        val = np.vdot(state, op @ state)
    else:
        val = np.einsum("ij,ji->", state, op)
    if abs(val.imag) > IMAG_TOL * max(1.0, abs(val.real)):
        raise NotHermitian(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def _check_boundary(grid: GridSpec, boundary_x):
    if boundary_x is None:
        return grid.midpoint
    if not grid.x_min < boundary_x < grid.x_max:
        raise BoundaryOutsideGrid(f"boundary {boundary_x} outside ({grid.x_min}, {grid.x_max})")
    return boundary_x


def _populations(state):
    state = np.asarray(state)
    if state.ndim == 2:
        return np.real(np.diag(state))
    return np.abs(state) ** 2


def branch_weights(grid: GridSpec, state, boundary_x: float | None = None) -> tuple[float, float]:
    b = _check_boundary(grid, boundary_x)
    p = _populations(state)
    left = grid.x < b
    wl = float(np.sum(p[left]))
    wr = float(np.sum(p[~left]))
    s = wl + wr
    return wl / s, wr / s


def coherence_block_norm(grid: GridSpec, rho, boundary_x: float | None = None) -> float:
    """Frobenius norm of the left-right block of rho in the position basis."""
    b = _check_boundary(grid, boundary_x)
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    left = grid.x < b
    return float(np.linalg.norm(rho[np.ix_(left, ~left)]))


def state_observables(model: SystemModel, states, boundary_x: float | None = None) -> dict[str, np.ndarray]:
    """Observable set for a batch of pure states of shape ``(B, n)``."""
    b = _check_boundary(model.grid, boundary_x)
    states = np.atleast_2d(states)
    p = np.abs(states) ** 2
    norm = p.sum(axis=1)
    x = model.grid.x
    mean_x = p @ x / norm
    var_x = p @ x**2 / norm - mean_x**2
    Hpsi = states @ model.hamiltonian.T
    energy = np.real(np.sum(states.conj() * Hpsi, axis=1)) / norm
    left = x < b
    wl = p[:, left].sum(axis=1) / norm
    return {
        "mean_x": mean_x,
        "var_x": var_x,
        "energy": energy,
        "weight_left": wl,
        "weight_right": 1.0 - wl,
    }


def density_observables(model: SystemModel, rho, boundary_x: float | None = None) -> dict[str, float]:
    x = model.grid.x
    p = np.real(np.diag(rho))
    mean_x = float(p @ x)
    wl, wr = branch_weights(model.grid, rho, boundary_x)
    return {
        "mean_x": mean_x,
        "var_x": float(p @ x**2 - mean_x**2),
        "energy": expval(model.hamiltonian, rho),
        "weight_left": wl,
        "weight_right": wr,
        "coherence_block_norm": coherence_block_norm(model.grid, rho, boundary_x),
    }


@dataclass(frozen=True)
class ObservableSet:
    """Observables bound to a model; callable on a state or a density matrix."""

    model: SystemModel
    boundary_x: float | None = None
    names: tuple = OBSERVABLE_NAMES + ("coherence_block_norm",)

    def __call__(self, state) -> dict[str, float]:
        state = np.asarray(state)
        if state.ndim == 2:
            return density_observables(self.model, state, self.boundary_x)
        out = {k: float(v[0]) for k, v in state_observables(self.model, state, self.boundary_x).items()}
        out["coherence_block_norm"] = coherence_block_norm(self.model.grid, state, self.boundary_x)
        return out


def energy_series(model: SystemModel, oracle) -> np.ndarray:
    H = model.hamiltonian
    return np.array([np.real(np.einsum("ij,ji->", r, H)) for r in oracle.states])


def heating_rate(model: SystemModel, oracle) -> float:
    """Least-squares slope of ``<H>(t)`` along a master-equation trajectory.

    For a free particle the expected slope is ``lambda / (4 m r_c^2)``.
    """
    if len(oracle.times) < 3:
        raise InsufficientPoints(f"need at least 3 time points, got {len(oracle.times)}")
    e = energy_series(model, oracle)
    return float(np.polyfit(oracle.times, e, 1)[0])


def expected_heating_rate(lam: float, mass: float, r_c: float) -> float:
    return lam / (4.0 * mass * r_c**2)


def jump_energy_kick(model: SystemModel, psi_before, f: int) -> float:
    from .traj_jump import apply_jump

    H = model.hamiltonian
    psi_after = apply_jump(model.bank, f, psi_before)
    return expval(H, psi_after) - expval(H, psi_before)


def mean_jump_kick(model: SystemModel, psi, rng, n_samples: int):
    """Monte Carlo mean and standard error of the kick over sampled collapse centers."""
    from .traj_jump import sample_collapse_center

    psi = np.asarray(psi)
    centers = np.array([sample_collapse_center(rng, model.bank, psi) for _ in range(n_samples)])
    phi = model.bank.diagonals[centers] * psi[None, :]
    phi /= np.linalg.norm(phi, axis=1, keepdims=True)
    after = np.real(np.sum(phi.conj() * (phi @ model.hamiltonian.T), axis=1))
    kicks = after - expval(model.hamiltonian, psi)
    return float(kicks.mean()), float(kicks.std(ddof=1) / np.sqrt(n_samples))


def exact_mean_jump_kick(model: SystemModel, psi) -> float:
    """``sum_f <psi|K_f H K_f|psi> - <psi|H|psi>``: the kick averaged over centers."""
    psi = np.asarray(psi)
    K = model.bank.diagonals
    phi = K * psi[None, :]
    after = np.real(np.sum(phi.conj() * (phi @ model.hamiltonian.T)))
    return float(after - expval(model.hamiltonian, psi))
