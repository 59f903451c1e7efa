"""Discretized single-particle Hilbert space shared by every dynamics engine.

Units are hbar = 1 throughout. The position grid is periodic, so the grid is
really a ring of circumference ``x_max - x_min``; distances between grid
points and collapse centers use the minimum image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateBank,
    DimensionMismatch,
    InvalidGrid,
    OverlapTooLarge,
    PacketClipped,
)

# documentation constants: the literature GRW values (SI units); desk-scale
# runs never use them directly
GRW_LAMBDA_SI = 1e-16  # 1/s
GRW_RC_SI = 1e-7  # m

COMPLETENESS_TOL = 1e-12
HERMITICITY_TOL = 1e-12
CLIP_AMPLITUDE = 1e-8


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic 1D grid with ``n_sites`` points starting at ``x_min``."""

    n_sites: int
    x_min: float
    x_max: float

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_sites

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen(self.x_min + self.dx * np.arange(self.n_sites))

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.x_min + self.x_max)

    def periodic_distance(self, a, b):
        """Minimum-image separation between positions ``a`` and ``b``."""
        d = np.asarray(a) - np.asarray(b)
        return d - self.length * np.round(d / self.length)


def build_grid(n_sites: int, x_min: float, x_max: float) -> GridSpec:
    if int(n_sites) != n_sites or n_sites < 8:
        raise InvalidGrid(f"n_sites must be an integer >= 8, got {n_sites}")
    if not x_max > x_min:
        raise InvalidGrid(f"x_max ({x_max}) must exceed x_min ({x_min})")
    return GridSpec(int(n_sites), float(x_min), float(x_max))


@dataclass(frozen=True)
class CollapseBank:
    """Discretized Gaussian localization operators.

    Every operator is diagonal in the position basis, so only the diagonals
    are stored: ``diagonals[f, j]`` is the entry of K_f at site j. The bank
    satisfies ``sum_f K_f**2 == 1`` site by site.
    """

    diagonals: np.ndarray
    centers: np.ndarray
    renorm_factor: float
    site_factors: np.ndarray
    r_c: float

    @property
    def n_f(self) -> int:
        return self.diagonals.shape[0]

    @property
    def dim(self) -> int:
        return self.diagonals.shape[1]

    def operator(self, f: int) -> np.ndarray:
        return np.diag(self.diagonals[f]).astype(complex)

    @property
    def operators(self) -> list[np.ndarray]:
        return [self.operator(f) for f in range(self.n_f)]

    def completeness_residual(self) -> float:
        return float(np.max(np.abs(np.sum(self.diagonals**2, axis=0) - 1.0)))

    @cached_property
    def overlap(self) -> np.ndarray:
        """``C[j, k] = sum_f K_f[j] K_f[k]``; the collapse term acts as ``rho * C``."""
        return _frozen(self.diagonals.T @ self.diagonals)


def build_collapse_bank(grid: GridSpec, r_c: float) -> CollapseBank:
    """Gaussian bank with one collapse center per grid point.

    Raw entries are ``(pi r_c^2)^(-1/4) exp(-(x_j - x_f)^2 / (2 r_c^2)) sqrt(dx)``.
    A global scalar brings the largest site sum of squares to one, then each
    site is rescaled so completeness holds exactly.
    """
    if not r_c > 0:
        raise ValueError(f"r_c must be positive, got {r_c}")
    if r_c < grid.dx / 4:
        raise DegenerateBank(f"r_c={r_c} is below dx/4={grid.dx / 4}; Gaussian unresolvable")
    x = grid.x
    centers = x.copy()
    d = grid.periodic_distance(centers[:, None], x[None, :])
    raw = (np.pi * r_c**2) ** (-0.25) * np.exp(-(d**2) / (2 * r_c**2)) * np.sqrt(grid.dx)
    sums = np.sum(raw**2, axis=0)
    renorm = 1.0 / np.sqrt(sums.max())
    scaled = raw * renorm
    site = 1.0 / np.sqrt(np.sum(scaled**2, axis=0))
    diag = scaled * site[None, :]
    bank = CollapseBank(_frozen(diag), _frozen(centers), float(renorm), _frozen(site), float(r_c))
    assert bank.completeness_residual() <= COMPLETENESS_TOL
    return bank


def build_hamiltonian(grid: GridSpec, mass: float = 1.0, potential=None) -> np.ndarray:
    """Kinetic term ``-(1/2m) d^2/dx^2`` by periodic central differences, plus a potential."""
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    n = grid.n_sites
    c = 1.0 / (2.0 * mass * grid.dx**2)
    H = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    H[idx, idx] = 2 * c
    H[idx, (idx + 1) % n] = -c
    H[(idx + 1) % n, idx] = -c
    if potential is not None:
        v = np.asarray(potential, dtype=float)
        if v.shape != (n,):
            raise DimensionMismatch(f"potential has shape {v.shape}, expected ({n},)")
        H[idx, idx] += v
    return H


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Everything a dynamics engine needs: H, the collapse bank and the rates."""

    grid: GridSpec
    hamiltonian: np.ndarray
    bank: CollapseBank
    lam: float
    r_c: float
    mass: float = 1.0
    potential: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        H = self.hamiltonian
        if H.shape != (self.grid.n_sites,) * 2:
            raise DimensionMismatch(f"hamiltonian shape {H.shape} does not match grid")
        if np.max(np.abs(H - H.conj().T), initial=0.0) > HERMITICITY_TOL:
            raise ValueError("hamiltonian is not Hermitian")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.r_c > 0 or not self.mass > 0:
            raise ValueError("r_c and mass must be positive")
        if H.flags.writeable:
            object.__setattr__(self, "hamiltonian", _frozen(H))

    @property
    def dim(self) -> int:
        return self.grid.n_sites

    @cached_property
    def spectrum(self):
        """Eigen-decomposition ``(energies, vectors)`` of H, computed once."""
        from .propagate import eigh_checked

        e, v = eigh_checked(self.hamiltonian)
        return _frozen(e), _frozen(v)

    @property
    def h_norm(self) -> float:
        e, _ = self.spectrum
        return float(np.max(np.abs(e))) if e.size else 0.0

    @cached_property
    def position(self) -> np.ndarray:
        return _frozen(np.diag(self.grid.x).astype(complex))

    def with_lambda(self, lam: float) -> "SystemModel":
        return SystemModel(self.grid, self.hamiltonian, self.bank, float(lam), self.r_c, self.mass, self.potential)

    def with_hamiltonian(self, H) -> "SystemModel":
        return SystemModel(self.grid, np.array(H, dtype=complex), self.bank, self.lam, self.r_c, self.mass)


def build_model(
    grid: GridSpec,
    lam: float = 1.0,
    r_c: float = 1.0,
    mass: float = 1.0,
    potential=None,
    free: bool = True,
) -> SystemModel:
    """Assemble a :class:`SystemModel`; ``free=False`` gives H = 0 (plus potential)."""
    if free:
        H = build_hamiltonian(grid, mass, potential)
    else:
        H = np.zeros((grid.n_sites,) * 2, dtype=complex)
        if potential is not None:
            v = np.asarray(potential, dtype=float)
            if v.shape != (grid.n_sites,):
                raise DimensionMismatch(f"potential has shape {v.shape}")
            H[np.diag_indices(grid.n_sites)] = v
    bank = build_collapse_bank(grid, r_c)
    pot = None if potential is None else _frozen(np.asarray(potential, dtype=float))
    return SystemModel(grid, H, bank, float(lam), float(r_c), float(mass), pot)


def _normalize(psi):
    return psi / np.linalg.norm(psi)


def gaussian_packet(grid: GridSpec, x0: float, p0: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    """Normalized packet ``exp(-(x-x0)^2/(4 sigma^2) + i p0 x)`` on the grid."""
    if sigma < grid.dx:
        raise ValueError(f"sigma={sigma} is below the grid spacing {grid.dx}")
    if x0 - 3 * sigma < grid.x_min or x0 + 3 * sigma > grid.x_max:
        raise PacketClipped(f"packet at x0={x0} with sigma={sigma} is within 3 sigma of the boundary")
    x = grid.x
    psi = _normalize(np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * p0 * x))
    # the ring closes between x[-1] and x_max; check both ends
    edge = max(abs(psi[0]), abs(psi[-1]))
    if edge > CLIP_AMPLITUDE:
        raise PacketClipped(f"packet amplitude {edge:.2e} at the grid boundary")
    return psi


def cat_state(grid: GridSpec, x1: float, x2: float, sigma: float) -> np.ndarray:
    """Equal-weight superposition of two well-separated Gaussian packets."""
    if abs(x1 - x2) < 6 * sigma:
        raise OverlapTooLarge(f"|x1 - x2| = {abs(x1 - x2)} < 6 sigma = {6 * sigma}")
    a = gaussian_packet(grid, x1, 0.0, sigma)
    b = gaussian_packet(grid, x2, 0.0, sigma)
    return _normalize(a + b)


def basis_state(grid: GridSpec, j: int) -> np.ndarray:
    psi = np.zeros(grid.n_sites, dtype=complex)
    psi[j] = 1.0
    return psi


def uniform_state(grid: GridSpec) -> np.ndarray:
    return np.full(grid.n_sites, 1 / np.sqrt(grid.n_sites), dtype=complex)


def nearest_site(grid: GridSpec, x: float) -> int:
    return int(np.argmin(np.abs(grid.periodic_distance(grid.x, x))))


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi)
    return np.outer(psi, psi.conj())
