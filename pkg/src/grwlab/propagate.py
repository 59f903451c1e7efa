"""Exact unitary steps from cached spectral decompositions."""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EigenFailure, NotHermitian


def eigh_checked(H):
    try:
        return np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def _hash_operator(H) -> str:
    return hashlib.sha1(np.ascontiguousarray(H).tobytes()).hexdigest()


@dataclass(frozen=True, eq=False)
class UnitaryPropagator:
    matrix: np.ndarray
    dt: float
    source_hash: tuple

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def unitarity_residual(self) -> float:
        U = self.matrix
        return float(np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))))


def spectral_exponential(energies, vectors, t) -> np.ndarray:
    """``V diag(exp(-i e t)) V^dagger``."""
    return (vectors * np.exp(-1j * energies * t)[None, :]) @ vectors.conj().T


class PropagatorCache:
    """Decompose H once, then exponentiate the eigenvalues per requested dt.

    Lookups and inserts are guarded by a lock so the cache can be shared by
    worker threads.
    """

    def __init__(self, H):
        self.H = np.asarray(H)
        self.key = _hash_operator(self.H)
        self.energies, self.vectors = eigh_checked(self.H)
        self._store: dict[float, UnitaryPropagator] = {}
        self._lock = threading.Lock()

    def get(self, dt: float) -> UnitaryPropagator:
        dt = float(dt)
        with self._lock:
            hit = self._store.get(dt)
        if hit is not None:
            return hit
        U = spectral_exponential(self.energies, self.vectors, dt)
        U.setflags(write=False)
        prop = UnitaryPropagator(U, dt, (self.key, dt))
        with self._lock:
            return self._store.setdefault(dt, prop)

    def __len__(self):
        return len(self._store)


_caches: dict[str, PropagatorCache] = {}
_caches_lock = threading.Lock()


def cache_for(H) -> PropagatorCache:
    key = _hash_operator(H)
    with _caches_lock:
        cache = _caches.get(key)
        if cache is None:
            cache = _caches[key] = PropagatorCache(H)
    return cache


def precompute_propagator(H, dt: float) -> UnitaryPropagator:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return cache_for(H).get(dt)


def unitary_step(U: UnitaryPropagator, psi) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape[-1] != U.dim:
        raise DimensionMismatch(f"state of length {psi.shape[-1]} vs propagator of size {U.dim}")
    return U.matrix @ psi


def hermitian_expi(G, tol: float = 1e-10) -> np.ndarray:
    """``exp(+iG)`` for Hermitian G; diagonal G is exponentiated entrywise."""
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {G.shape}")
    if np.max(np.abs(G - G.conj().T), initial=0.0) > tol:
        raise NotHermitian("generator is not Hermitian")
    off = G - np.diag(np.diag(G))
    if not np.any(off):
        return np.diag(np.exp(1j * np.real(np.diag(G))))
    e, v = eigh_checked(G)
    return (v * np.exp(1j * e)[None, :]) @ v.conj().T
