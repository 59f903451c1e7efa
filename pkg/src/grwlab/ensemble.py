"""Reproducible trajectory ensembles, Monte Carlo error bars and equivalence checks.

Trajectory ``i`` always draws from ``RandomStream(seed, i)`` and trajectories
are grouped into fixed-size chunks whose partial sums are reduced in chunk
order. Neither depends on the number of worker threads, so results are
bit-identical for any ``threads`` value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DimensionMismatch, LatticeMismatch, TooFewTrajectories, UnequalInitialDensity
from .lindblad import MasterTrajectory, steps_between
from .model import SystemModel
from .observables import OBSERVABLE_NAMES, density_observables, state_observables
from .repeated import Basis, run_repeated_batch
from .streams import RandomStream
from .traj_diffusive import run_diffusive_batch
from .traj_jump import run_jump_trajectory

METHODS = ("jump", "diffusive", "repeated_z", "repeated_x")
CHUNK_SIZE = 100
N_BOOT = 100
MAX_BOOT_GROUPS = 100
DETERMINISTIC_ATOL = 1e-9

__all__ = [
    "METHODS",
    "RandomStream",
    "EnsembleRecord",
    "Report",
    "run_ensemble",
    "trace_distance",
    "mc_error",
    "mc_errors",
    "equivalence_report",
    "gisin_mixture_test",
]


@dataclass(eq=False)
class EnsembleRecord:
    times: np.ndarray
    mean_rho: np.ndarray  # (n_times, n, n)
    observable_means: dict[str, np.ndarray]
    observable_stderrs: dict[str, np.ndarray]
    n_trajectories: int
    method: str
    seed: int
    states: np.ndarray | None = None  # (m, n_times, n)
    trajectory_observables: dict[str, np.ndarray] = field(default_factory=dict)  # (m, n_times)
    event_counts: np.ndarray | None = None  # jumps, or down/minus outcomes, per trajectory
    _mc_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_times(self) -> int:
        return len(self.times)

    def purity(self) -> np.ndarray:
        return np.real(np.einsum("tij,tji->t", self.mean_rho, self.mean_rho))


@dataclass
class Report:
    """Tabular comparison result; ``rows`` are dicts, ``passed`` is the verdict."""

    title: str
    rows: list[dict]
    observable_rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    @property
    def observables_passed(self) -> bool:
        return all(r["pass"] for r in self.observable_rows)

    def failures(self) -> list[dict]:
        return [r for r in self.rows if not r["pass"]]

    def max_ratio(self) -> float:
        return max((r["distance"] / r["threshold"] for r in self.rows), default=0.0)


def trace_distance(rho, sigma) -> float:
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"{rho.shape} vs {sigma.shape}")
    diff = rho - sigma
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def _initial_state(psi0, stream: RandomStream) -> np.ndarray:
    """A fixed state, or a draw from a list of ``(weight, state)`` pairs."""
    if isinstance(psi0, (list, tuple)):
        w = np.array([p[0] for p in psi0], dtype=float)
        cdf = np.cumsum(w / w.sum())
        k = min(int(np.searchsorted(cdf, stream.random(), side="right")), len(psi0) - 1)
        return np.asarray(psi0[k][1], dtype=complex)
    return np.asarray(psi0, dtype=complex)


def _run_chunk(model, psi0, method, ids, seed, t_final, dt, output_dt, boundary_x):
    streams = [RandomStream(seed, i) for i in ids]
    starts = np.array([_initial_state(psi0, s) for s in streams])
    if method == "jump":
        recs = [
            run_jump_trajectory(model, starts[k], t_final, output_dt, streams[k], i, keep_states=True, boundary_x=boundary_x)
            for k, i in enumerate(ids)
        ]
        snaps = np.array([r.states for r in recs])
        counts = np.array([r.n_events for r in recs])
    elif method == "diffusive":
        snaps = run_diffusive_batch(model, starts, t_final, dt, output_dt, streams)
        counts = np.zeros(len(ids), dtype=int)
    elif method in ("repeated_z", "repeated_x"):
        basis = Basis.Z if method == "repeated_z" else Basis.X
        n_coll = steps_between(t_final, dt, "t_final")
        every = steps_between(output_dt, dt, "output_dt")
        snaps, outcomes, _ = run_repeated_batch(model, starts, n_coll, dt, basis, streams, output_every=every)
        counts = outcomes.sum(axis=1).astype(int)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    # (n_times, n, n) partial sum of projectors for this chunk
    partial = np.einsum("bti,btj->tij", snaps, snaps.conj())
    return snaps, partial, counts


def run_ensemble(
    model: SystemModel,
    psi0,
    method: str,
    m: int,
    t_final: float,
    dt: float,
    output_dt: float,
    seed: int,
    threads: int = 1,
    keep_states: bool = True,
    boundary_x: float | None = None,
    chunk_size: int = CHUNK_SIZE,
) -> EnsembleRecord:
    """Average ``m`` trajectories of one unraveling.

    ``dt`` is the fixed step for ``diffusive`` and the collision duration tau
    for the repeated-interaction methods; the jump engine is event driven and
    ignores it. ``psi0`` is a state or a list of ``(weight, state)`` pairs.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    n_out = steps_between(t_final, output_dt, "t_final")
    chunks = [list(range(a, min(a + chunk_size, m))) for a in range(0, m, chunk_size)]

    def work(ids):
        return _run_chunk(model, psi0, method, ids, seed, t_final, dt, output_dt, boundary_x)

    with threadpool_limits(limits=1, user_api="blas"):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, chunks))
        else:
            results = [work(c) for c in chunks]

    total = np.zeros((n_out + 1, model.dim, model.dim), dtype=complex)
    for _, partial, _ in results:
        total += partial
    mean_rho = total / m
    states = np.concatenate([r[0] for r in results], axis=0)
    counts = np.concatenate([r[2] for r in results])

    traj_obs = {k: np.empty((m, n_out + 1)) for k in OBSERVABLE_NAMES}
    for t in range(n_out + 1):
        o = state_observables(model, states[:, t, :], boundary_x)
        for k in OBSERVABLE_NAMES:
            traj_obs[k][:, t] = o[k]
    means = {k: v.mean(axis=0) for k, v in traj_obs.items()}
    errs = {k: (v.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(n_out + 1)) for k, v in traj_obs.items()}
    return EnsembleRecord(
        times=output_dt * np.arange(n_out + 1),
        mean_rho=mean_rho,
        observable_means=means,
        observable_stderrs=errs,
        n_trajectories=m,
        method=method,
        seed=int(seed),
        states=states if keep_states else None,
        trajectory_observables=traj_obs,
        event_counts=counts,
    )


def mc_error(record: EnsembleRecord, t_index: int, n_boot: int = N_BOOT) -> float:
    """Bootstrap Monte Carlo error of ``mean_rho`` at one output time, in trace distance.

    Trajectories are assigned round-robin to at most ``MAX_BOOT_GROUPS``
    groups whose projector sums are resampled with replacement. The result
    is the root-mean-square trace distance between resampled means and the
    ensemble mean, which tracks the typical distance of the ensemble mean
    from its expectation and scales as ``1/sqrt(m)``.
    """
    m = record.n_trajectories
    if m < 10:
        raise TooFewTrajectories(f"need at least 10 trajectories, got {m}")
    if record.states is None:
        raise ValueError("record was built with keep_states=False")
    key = (int(t_index), n_boot)
    if key in record._mc_cache:
        return record._mc_cache[key]
    S = record.states[:, t_index, :]
    n = S.shape[1]
    G = min(m, MAX_BOOT_GROUPS)
    K = -(-m // G)
    padded = np.zeros((K * G, n), dtype=complex)
    padded[:m] = S
    blocks = padded.reshape(K, G, n)  # trajectory i lands in group i % G
    sums = np.matmul(blocks.transpose(1, 2, 0), blocks.conj().transpose(1, 0, 2))
    sizes = np.bincount(np.arange(m) % G, minlength=G).astype(float)
    ref = record.mean_rho[t_index]
    rng = RandomStream(record.seed, (1 << 63) + int(t_index)).generator
    W = rng.multinomial(G, np.full(G, 1.0 / G), size=n_boot).astype(float)
    boot = (W @ sums.reshape(G, n * n)).reshape(n_boot, n, n) / (W @ sizes)[:, None, None]
    diff = boot - ref[None]
    diff = 0.5 * (diff + np.conj(np.swapaxes(diff, 1, 2)))
    d2 = (0.5 * np.abs(np.linalg.eigvalsh(diff)).sum(axis=1)) ** 2
    val = float(np.sqrt(d2.mean()))
    record._mc_cache[key] = val
    return val


def mc_errors(record: EnsembleRecord, n_boot: int = N_BOOT) -> np.ndarray:
    return np.array([mc_error(record, t, n_boot) for t in range(record.n_times)])


def _same_lattice(a, b) -> bool:
    return len(a) == len(b) and np.allclose(a, b, rtol=0, atol=1e-9)


def equivalence_report(records: list[EnsembleRecord], oracle: MasterTrajectory, model: SystemModel | None = None, n_sigma: float = 3.0) -> Report:
    """Trace-distance checks of every record against the oracle and each other.

    Thresholds are ``n_sigma`` Monte Carlo errors (combined in quadrature for
    record pairs) plus a ``1e-9`` floor for deterministic agreement. With a
    model, mean energy and branch weights are also compared with their
    standard errors; those rows are reported separately.
    """
    for r in records:
        if not _same_lattice(r.times, oracle.times):
            raise LatticeMismatch(f"{r.method} record times do not match the oracle lattice")
    sig = {id(r): mc_errors(r) for r in records}
    rows = []
    for r in records:
        for t in range(len(oracle.times)):
            d = trace_distance(r.mean_rho[t], oracle.states[t])
            thr = n_sigma * sig[id(r)][t] + DETERMINISTIC_ATOL
            rows.append({"t": float(oracle.times[t]), "pair": f"{r.method}:oracle", "distance": d,
                         "sigma": float(sig[id(r)][t]), "threshold": thr, "pass": bool(d <= thr)})
    for i, a in enumerate(records):
        for b in records[i + 1:]:
            for t in range(len(oracle.times)):
                d = trace_distance(a.mean_rho[t], b.mean_rho[t])
                s = float(np.hypot(sig[id(a)][t], sig[id(b)][t]))
                thr = n_sigma * s + DETERMINISTIC_ATOL
                rows.append({"t": float(oracle.times[t]), "pair": f"{a.method}:{b.method}", "distance": d,
                             "sigma": s, "threshold": thr, "pass": bool(d <= thr)})
    obs_rows = []
    if model is not None:
        ref = [density_observables(model, rho) for rho in oracle.states]
        for r in records:
            for name in ("energy", "weight_left", "weight_right"):
                for t in range(len(oracle.times)):
                    diff = float(r.observable_means[name][t] - ref[t][name])
                    err = float(r.observable_stderrs[name][t])
                    thr = n_sigma * err + DETERMINISTIC_ATOL
                    obs_rows.append({"t": float(oracle.times[t]), "method": r.method, "observable": name,
                                     "difference": diff, "stderr": err, "pass": bool(abs(diff) <= thr)})
    return Report("equivalence", rows, obs_rows, {"n_sigma": n_sigma})


def mixture_density(ensemble) -> np.ndarray:
    return sum(w * np.outer(np.asarray(p), np.asarray(p).conj()) for w, p in ensemble)


def gisin_mixture_test(
    model: SystemModel,
    ensemble_a,
    ensemble_b,
    method: str,
    m: int,
    t_final: float,
    seed: int,
    dt: float = 0.005,
    output_dt: float = 0.1,
    threads: int = 1,
    n_sigma: float = 3.0,
) -> Report:
    """Compare averaged evolutions of two pure-state ensembles with the same rho0.

    Both ensembles share ``seed``, so identical ensembles give identical
    averages; the quadrature threshold is conservative for the correlated
    case.
    """
    rho_a = mixture_density(ensemble_a)
    rho_b = mixture_density(ensemble_b)
    gap = float(np.max(np.abs(rho_a - rho_b)))
    if gap > 1e-10:
        raise UnequalInitialDensity(f"initial density matrices differ by {gap:.3e}")
    ra = run_ensemble(model, list(ensemble_a), method, m, t_final, dt, output_dt, seed, threads)
    rb = run_ensemble(model, list(ensemble_b), method, m, t_final, dt, output_dt, seed, threads)
    sa, sb = mc_errors(ra), mc_errors(rb)
    rows = []
    for t in range(ra.n_times):
        d = trace_distance(ra.mean_rho[t], rb.mean_rho[t])
        s = float(np.hypot(sa[t], sb[t]))
        thr = n_sigma * s + DETERMINISTIC_ATOL
        rows.append({"t": float(ra.times[t]), "pair": f"{method}:a:b", "distance": d, "sigma": s,
                     "threshold": thr, "pass": bool(d <= thr)})
    return Report("gisin", rows, meta={"method": method, "records": (ra, rb)})
