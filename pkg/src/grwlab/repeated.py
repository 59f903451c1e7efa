"""Repeated-interaction (collision) model.

Fresh ancilla qubits, each prepared in ``|up>``, collide one at a time with
the system through ``H_tot = H (x) 1 + sqrt(lambda / tau) L (x) sigma_y``
for a duration tau. The collision induces the Kraus pair
``k_up = <up|V|up>``, ``k_down = <down|V|up>`` with ``V = exp(-i H_tot tau)``.
Discarding the ancillas gives the channel; measuring them in the z or x
basis gives jumpy or diffusive trajectories of the same channel.

For the GRW bank a collision round is a free flight ``exp(-i H tau)``
followed by one ancilla per collapse operator. The operators are diagonal,
so each coupling pair is ``(cos(theta K_f), sin(theta K_f))`` with
``theta = sqrt(lambda tau)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from numba import njit

from .errors import DimensionMismatch, NotNormalized
from .lindblad import MasterTrajectory
from .propagate import eigh_checked, precompute_propagator
from .streams import as_stream
from .traj_jump import TrajectoryRecord

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
NORM_TOL = 1e-10


class Basis(str, Enum):
    Z = "z_basis"
    X = "x_basis"


@dataclass(frozen=True)
class FiniteSystem:
    """A small system without a position grid (e.g. a qubit)."""

    hamiltonian: np.ndarray
    lam: float

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True, eq=False)
class KrausPair:
    k_up: np.ndarray
    k_down: np.ndarray
    tau: float
    coupling: float
    diagonal: bool = False  # k_up, k_down hold diagonals only

    @property
    def dim(self) -> int:
        return self.k_up.shape[0]

    @property
    def unitary_only(self) -> bool:
        return not np.any(self.k_down)

    def matrices(self):
        if self.diagonal:
            return np.diag(self.k_up), np.diag(self.k_down)
        return self.k_up, self.k_down

    def trace_residual(self) -> float:
        ku, kd = self.matrices()
        s = ku.conj().T @ ku + kd.conj().T @ kd
        return float(np.max(np.abs(s - np.eye(self.dim))))

    @cached_property
    def channel_factor(self) -> np.ndarray:
        """Entrywise factor of the channel on rho (diagonal pairs only)."""
        u, d = self.k_up, self.k_down
        return np.outer(u, u.conj()) + np.outer(d, d.conj())

    def measurement_ops(self, basis) -> tuple[np.ndarray, np.ndarray]:
        """Effective operators for outcomes 0 and 1 (up/down or plus/minus)."""
        if Basis(basis) is Basis.Z:
            return self.k_up, self.k_down
        s = np.sqrt(0.5)
        return s * (self.k_up + self.k_down), s * (self.k_up - self.k_down)


@dataclass
class AncillaOutcomeLog:
    outcomes: np.ndarray  # uint8, one per collision
    basis: Basis

    def __len__(self):
        return len(self.outcomes)


def build_kraus_pair(model, l_op, tau: float, include_hamiltonian: bool = True) -> KrausPair:
    """Exact Kraus pair of one collision, from the joint system-ancilla unitary."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    L = np.asarray(l_op, dtype=complex)
    n = model.dim
    if L.shape != (n, n):
        raise DimensionMismatch(f"l_op has shape {L.shape}, system dimension is {n}")
    if np.max(np.abs(L - L.conj().T)) > 1e-10:
        raise ValueError("l_op must be Hermitian")
    g = np.sqrt(model.lam / tau)
    H = np.asarray(model.hamiltonian) if include_hamiltonian else np.zeros((n, n))
    H_tot = np.kron(H, np.eye(2)) + g * np.kron(L, SIGMA_Y)
    e, v = eigh_checked(H_tot)
    V = (v * np.exp(-1j * e * tau)[None, :]) @ v.conj().T
    # index 2*i + a with a = 0 for up, 1 for down
    return KrausPair(V[0::2, 0::2].copy(), V[1::2, 0::2].copy(), float(tau), float(g))


def diagonal_kraus_pair(lam: float, l_diag, tau: float) -> KrausPair:
    """Closed-form pair for a diagonal ``l_op`` with no Hamiltonian part."""
    theta = np.sqrt(lam * tau)
    l_diag = np.asarray(l_diag, dtype=float)
    return KrausPair(
        np.cos(theta * l_diag).astype(complex),
        np.sin(theta * l_diag).astype(complex),
        float(tau),
        float(np.sqrt(lam / tau)),
        diagonal=True,
    )


def unitary_pair(model, tau: float) -> KrausPair:
    U = precompute_propagator(model.hamiltonian, tau).matrix
    return KrausPair(np.array(U), np.zeros_like(U), float(tau), 0.0)


def collision_round(model, tau: float, l_ops=None) -> list[KrausPair]:
    """Kraus pairs making up one time step tau.

    Without ``l_ops`` the model's collapse bank is used (free flight, then
    one diagonal collision per K_f). With explicit operators, the first
    collision carries the Hamiltonian.
    """
    if l_ops is None:
        bank = model.bank
        pairs = [unitary_pair(model, tau)] if np.any(model.hamiltonian) else []
        if model.lam == 0:
            return pairs  # every collapse collision would be the identity
        return pairs + [diagonal_kraus_pair(model.lam, bank.diagonals[f], tau) for f in range(bank.n_f)]
    return [build_kraus_pair(model, L, tau, include_hamiltonian=(i == 0)) for i, L in enumerate(l_ops)]


def channel_step(kraus: KrausPair, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (kraus.dim, kraus.dim):
        raise DimensionMismatch(f"rho {rho.shape} vs Kraus dimension {kraus.dim}")
    if kraus.diagonal:
        return kraus.channel_factor * rho
    ku, kd = kraus.k_up, kraus.k_down
    out = ku @ rho @ ku.conj().T
    if not kraus.unitary_only:
        out = out + kd @ rho @ kd.conj().T
    return out


def channel_round(pairs, rho) -> np.ndarray:
    for p in pairs:
        rho = channel_step(p, rho)
    return rho


def _apply(op, diagonal, states):
    return states * op if diagonal else states @ op.T


def measured_step(kraus: KrausPair, psi, basis, rng) -> tuple[np.ndarray, int]:
    psi = np.asarray(psi)
    if psi.shape != (kraus.dim,):
        raise DimensionMismatch(f"state {psi.shape} vs Kraus dimension {kraus.dim}")
    if abs(np.vdot(psi, psi).real - 1.0) > NORM_TOL:
        raise NotNormalized("state is not normalized")
    rng = as_stream(rng)
    m0, m1 = kraus.measurement_ops(basis)
    a = _apply(m0, kraus.diagonal, psi)
    b = _apply(m1, kraus.diagonal, psi)
    p0 = float(np.vdot(a, a).real)
    p1 = float(np.vdot(b, b).real)
    if rng.random() < p0 / (p0 + p1):
        return a / np.sqrt(p0), 0
    return b / np.sqrt(p1), 1


def measured_step_batch(kraus: KrausPair, states, basis, uniforms):
    """Vectorized measured step for a ``(B, n)`` batch with one uniform per row."""
    m0, m1 = kraus.measurement_ops(basis)
    a = _apply(m0, kraus.diagonal, states)
    b = _apply(m1, kraus.diagonal, states)
    p0 = np.sum(np.abs(a) ** 2, axis=1)
    p1 = np.sum(np.abs(b) ** 2, axis=1)
    first = uniforms < p0 / (p0 + p1)
    out = np.where(first[:, None], a / np.sqrt(np.where(first, p0, 1.0))[:, None],
                   b / np.sqrt(np.where(first, 1.0, p1))[:, None])
    return out, (~first).astype(np.uint8)


def _observables(model, states):
    if hasattr(model, "grid"):
        from .observables import state_observables

        return state_observables(model, states)
    H = model.hamiltonian
    return {"energy": np.real(np.sum(states.conj() * (states @ H.T), axis=1))}


@njit(cache=True)
def _diagonal_block(states, ops0, ops1, uniforms, bits):
    """Measure a run of diagonal real-valued collisions on every row of ``states``.

    Diagonal operators only rescale amplitudes, so the outcome probabilities
    follow from the populations and the running product of chosen factors.
    """
    B, n = states.shape
    F = ops0.shape[0]
    for b in range(B):
        w = np.empty(n)
        for j in range(n):
            w[j] = states[b, j].real ** 2 + states[b, j].imag ** 2
        r = np.ones(n)
        for f in range(F):
            p0 = 0.0
            p1 = 0.0
            for j in range(n):
                p0 += w[j] * ops0[f, j] * ops0[f, j]
                p1 += w[j] * ops1[f, j] * ops1[f, j]
            if uniforms[b, f] < p0 / (p0 + p1):
                for j in range(n):
                    w[j] *= ops0[f, j] * ops0[f, j] / p0
                    r[j] *= ops0[f, j]
                bits[b, f] = 0
            else:
                for j in range(n):
                    w[j] *= ops1[f, j] * ops1[f, j] / p1
                    r[j] *= ops1[f, j]
                bits[b, f] = 1
        norm = 0.0
        for j in range(n):
            states[b, j] *= r[j]
            norm += states[b, j].real ** 2 + states[b, j].imag ** 2
        norm = np.sqrt(norm)
        for j in range(n):
            states[b, j] /= norm


def _segments(pairs, basis):
    """Group consecutive real diagonal pairs so they can go through the kernel."""
    segs = []
    for p in pairs:
        m0, m1 = p.measurement_ops(basis)
        fast = p.diagonal and not p.unitary_only and not np.any(m0.imag) and not np.any(m1.imag)
        if fast and segs and segs[-1][0] == "diag":
            segs[-1][1].append(p)
        else:
            segs.append(("diag" if fast else "plain", [p]))
    out = []
    for kind, group in segs:
        if kind == "diag":
            ops = [g.measurement_ops(basis) for g in group]
            out.append((kind, group, np.array([o[0].real for o in ops]), np.array([o[1].real for o in ops])))
        else:
            out.append((kind, group, None, None))
    return out


def run_repeated_batch(model, psi0s, n_collisions, tau, basis, streams, l_ops=None, output_every=1):
    """Measured collisions for a batch; returns ``(snapshots, outcomes, step_changes)``.

    ``snapshots`` has shape ``(B, n_out + 1, n)``. ``outcomes`` holds one bit per
    ancilla collision (free-flight steps are not collisions). ``step_changes``
    is ``||psi_{k+1} - psi_k||`` per round.
    """
    pairs = collision_round(model, tau, l_ops)
    n_coupling = sum(not p.unitary_only for p in pairs)
    segments = _segments(pairs, basis)
    states = np.atleast_2d(np.array(psi0s, dtype=complex))
    B = states.shape[0]
    if n_collisions % output_every:
        raise ValueError("n_collisions must be a multiple of output_every")
    snaps = [states.copy()]
    outcomes = np.zeros((B, n_collisions * n_coupling), dtype=np.uint8)
    changes = np.zeros((B, n_collisions))
    col = 0
    for block in range(n_collisions // output_every):
        u = np.stack([s.random((output_every, n_coupling)) for s in streams]) if n_coupling else None
        for r in range(output_every):
            before = states.copy()
            c = 0
            for kind, group, ops0, ops1 in segments:
                if kind == "diag":
                    k = len(group)
                    bits = np.zeros((B, k), dtype=np.uint8)
                    _diagonal_block(states, ops0, ops1, np.ascontiguousarray(u[:, r, c:c + k]), bits)
                    outcomes[:, col:col + k] = bits
                    col += k
                    c += k
                    continue
                p = group[0]
                if p.unitary_only:
                    states = _apply(p.k_up, p.diagonal, states)
                    continue
                states, bits = measured_step_batch(p, states, basis, u[:, r, c])
                outcomes[:, col] = bits
                col += 1
                c += 1
            changes[:, block * output_every + r] = np.linalg.norm(states - before, axis=1)
        snaps.append(states.copy())
    return np.stack(snaps, axis=1), outcomes, changes


def run_repeated(
    model,
    psi0,
    n_collisions: int,
    tau: float,
    mode: str,
    rng=0,
    l_ops=None,
    output_every: int = 1,
    trajectory_id: int = 0,
):
    """Traced mode returns a :class:`MasterTrajectory`; measured modes a :class:`TrajectoryRecord`."""
    if n_collisions < 1:
        raise ValueError("n_collisions must be >= 1")
    psi0 = np.asarray(psi0, dtype=complex)
    times = tau * output_every * np.arange(n_collisions // output_every + 1)
    if mode == "traced":
        pairs = collision_round(model, tau, l_ops)
        rho = np.outer(psi0, psi0.conj())
        states = [rho]
        for k in range(1, n_collisions + 1):
            rho = channel_round(pairs, rho)
            if k % output_every == 0:
                states.append(rho)
        return MasterTrajectory(times, np.array(states))
    basis = {"z_measured": Basis.Z, "x_measured": Basis.X}[mode]
    rng = as_stream(rng, trajectory_id)
    snaps, outcomes, changes = run_repeated_batch(model, psi0, n_collisions, tau, basis, [rng], l_ops, output_every)
    snaps = snaps[0]
    return TrajectoryRecord(
        times=times,
        observables=_observables(model, snaps),
        events=[],
        final_state=snaps[-1],
        seed=rng.seed,
        trajectory_id=trajectory_id,
        states=snaps,
        outcomes=AncillaOutcomeLog(outcomes[0], basis),
        extra={"step_changes": changes[0]},
    )


def _outcome_op(pair: KrausPair, basis, bit):
    m = pair.measurement_ops(basis)[bit]
    return np.diag(m) if pair.diagonal else m


def sequential_outcome_distribution(pairs, psi, bases) -> dict:
    """Outcome statistics when each ancilla is measured right after its collision.

    Returns ``{bits: (probability, unnormalized conditional state)}``.
    """
    psi = np.asarray(psi, dtype=complex)
    out = {}
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        phi = psi
        for p, b, basis in zip(pairs, bits, bases):
            phi = _outcome_op(p, basis, b) @ phi
        out[bits] = (float(np.vdot(phi, phi).real), phi)
    return out


def deferred_outcome_distribution(pairs, psi, bases) -> dict:
    """Same statistics from the stored joint state, measuring all ancillas at the end."""
    psi = np.asarray(psi, dtype=complex)
    k = len(pairs)
    n = psi.shape[0]
    joint = np.zeros((n,) + (2,) * k, dtype=complex)
    joint[(slice(None),) + (0,) * k] = psi
    for j, p in enumerate(pairs):
        ku, kd = p.matrices()
        up = [slice(None)] * (k + 1)
        down = list(up)
        up[j + 1], down[j + 1] = 0, 1
        # ancilla j starts in |up>; only that slice is populated
        src = joint[tuple(up)]
        new = np.zeros_like(joint)
        new[tuple(up)] = np.tensordot(ku, src, axes=(1, 0))
        new[tuple(down)] = np.tensordot(kd, src, axes=(1, 0))
        # later ancillas are untouched; contract the system index only
        joint = new
    # rotate each ancilla into its measurement basis
    for j, basis in enumerate(bases):
        if Basis(basis) is Basis.X:
            Hd = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
            joint = np.moveaxis(np.tensordot(Hd, joint, axes=(1, j + 1)), 0, j + 1)
    out = {}
    for bits in itertools.product((0, 1), repeat=k):
        phi = joint[(slice(None),) + bits]
        out[bits] = (float(np.vdot(phi, phi).real), phi)
    return out
