"""Deterministic integration of the GRW master equation.

    d rho / dt = -i [H, rho] + lambda (sum_f K_f rho K_f - rho)

With diagonal K_f the collapse term is an entrywise product with the bank
overlap ``C[j, k] = sum_f K_f[j] K_f[k]``, so the right-hand side costs two
matrix products per evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, PositivityLost, StepTooLarge
from .model import SystemModel

POSITIVITY_ABORT = -1e-6


@dataclass(frozen=True, eq=False)
class MasterTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, n, n)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def lindblad_rhs(model: SystemModel, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (model.dim, model.dim):
        raise DimensionMismatch(f"rho has shape {rho.shape}, model dimension is {model.dim}")
    H = model.hamiltonian
    out = -1j * (H @ rho - rho @ H)
    if model.lam:
        out += model.lam * (model.bank.overlap * rho - rho)
    return out


def rk4_step(model: SystemModel, rho, dt: float) -> np.ndarray:
    k1 = lindblad_rhs(model, rho)
    k2 = lindblad_rhs(model, rho + 0.5 * dt * k1)
    k3 = lindblad_rhs(model, rho + 0.5 * dt * k2)
    k4 = lindblad_rhs(model, rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def steps_between(span: float, dt: float, what: str = "interval") -> int:
    """Number of dt steps in ``span``; ``span`` must be an integer multiple of dt."""
    n = int(round(span / dt))
    if n < 1 or abs(n * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"{what} {span} is not an integer multiple of dt={dt}")
    return n


def check_step(model: SystemModel, dt: float):
    if not dt > 0:
        raise StepTooLarge(f"dt must be positive, got {dt}")
    if model.lam > 0 and dt > 0.1 / model.lam * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds 0.1/lambda={0.1 / model.lam}")
    hn = model.h_norm
    if hn > 0 and dt > 0.1 / hn * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds 0.1/||H||={0.1 / hn}")


def stable_step(model: SystemModel, output_dt: float, dt_max: float | None = None) -> float:
    """Largest step within the stability guard that divides ``output_dt``."""
    limits = [output_dt]
    if dt_max is not None:
        limits.append(dt_max)
    if model.lam > 0:
        limits.append(0.1 / model.lam)
    if model.h_norm > 0:
        limits.append(0.1 / model.h_norm)
    n = int(np.ceil(output_dt / min(limits) - 1e-9))
    return output_dt / n


def evolve_master(
    model: SystemModel,
    rho0,
    t_final: float,
    dt: float,
    output_dt: float | None = None,
    check_positivity: bool = True,
) -> MasterTrajectory:
    """Fixed-step RK4 integration, recording every ``output_dt`` (default: every step)."""
    check_step(model, dt)
    rho = np.array(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    if rho.shape != (model.dim, model.dim):
        raise DimensionMismatch(f"rho0 has shape {rho.shape}")
    n_steps = steps_between(t_final, dt, "t_final")
    stride = 1 if output_dt is None else steps_between(output_dt, dt, "output_dt")
    if n_steps % stride:
        raise ValueError("t_final must be an integer multiple of output_dt")
    times = [0.0]
    states = [rho.copy()]
    for step in range(1, n_steps + 1):
        rho = rk4_step(model, rho, dt)
        if step % stride == 0:
            # restore exact Hermiticity lost to round-off
            rho = 0.5 * (rho + rho.conj().T)
            if check_positivity:
                lo = np.linalg.eigvalsh(rho)[0]
                if lo < POSITIVITY_ABORT:
                    raise PositivityLost(f"min eigenvalue {lo:.3e} at t={step * dt:.4g}; reduce dt")
            times.append(step * dt)
            states.append(rho.copy())
    return MasterTrajectory(np.array(times), np.array(states))


def decoherence_rate(lam: float, r_c: float, separation: float) -> float:
    """Closed-form decay rate of coherences between points ``separation`` apart."""
    return lam * (1.0 - np.exp(-(separation**2) / (4.0 * r_c**2)))


def fit_decay_rate(times, values) -> float:
    """Least-squares slope of ``-log(values)`` against time."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    slope = np.polyfit(times, np.log(values), 1)[0]
    return float(-slope)
