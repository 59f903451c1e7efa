import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grwlab import (
    DegenerateBank,
    DimensionMismatch,
    InvalidGrid,
    OverlapTooLarge,
    PacketClipped,
    branch_weights,
    build_collapse_bank,
    build_grid,
    build_hamiltonian,
    build_model,
    cat_state,
    expval,
    gaussian_packet,
    uniform_state,
)
from grwlab.model import GRW_LAMBDA_SI, GRW_RC_SI, nearest_site


def test_grid_spacing():
    assert build_grid(64, -8, 8).dx == 0.25
    assert build_grid(8, 0, 1).dx == 0.125
    g = build_grid(64, -8, 8)
    assert g.x[0] == -8 and np.isclose(g.x[-1], 8 - 0.25)


@pytest.mark.parametrize("args", [(4, -1, 1), (64, 1, 1), (64, 2, -2)])
def test_grid_rejects(args):
    with pytest.raises(InvalidGrid):
        build_grid(*args)


def test_periodic_distance_is_minimum_image():
    g = build_grid(16, 0, 16)
    assert abs(g.periodic_distance(0.0, 15.0)) == 1.0
    assert abs(g.periodic_distance(2.0, 10.0)) == 8.0
    assert abs(g.periodic_distance(1.0, 12.0)) == 5.0


@settings(max_examples=30, deadline=None)
@given(n=st.integers(8, 96), r_c=st.floats(0.3, 3.0), width=st.floats(4.0, 30.0))
def test_bank_completeness_and_range(n, r_c, width):
    g = build_grid(n, -width / 2, width / 2)
    if r_c < g.dx / 4:
        return
    bank = build_collapse_bank(g, r_c)
    assert bank.completeness_residual() <= 1e-12
    assert np.all(bank.diagonals >= 0) and np.all(bank.diagonals <= 1)


def test_bank_entries_in_unit_interval_bruteforce():
    g = build_grid(16, -4, 4)
    for r_c in (0.2, 0.5, 1.0, 3.0):
        K = build_collapse_bank(g, r_c).diagonals
        for f in range(16):
            for j in range(16):
                assert 0.0 <= K[f, j] <= 1.0


def test_bank_operators_commute(grid64):
    bank = build_collapse_bank(grid64, 1.0)
    ops = bank.operators
    for a in ops[:8]:
        for b in ops[::9]:
            assert np.array_equal(a @ b, b @ a)


def test_bank_renormalization_is_mild(grid64):
    bank = build_collapse_bank(grid64, 1.0)
    # a resolved Gaussian already sums to ~1; the correction is tiny
    assert abs(bank.renorm_factor - 1) < 1e-6
    assert np.max(np.abs(bank.site_factors - 1)) < 1e-6


def test_bank_overlap_matches_closed_form(grid64):
    # [DERIVED] sum_f K_f(x) K_f(x') = exp(-(x - x')^2 / (4 r_c^2))
    bank = build_collapse_bank(grid64, 1.0)
    x = grid64.x
    d = grid64.periodic_distance(x[:, None], x[None, :])
    assert np.max(np.abs(bank.overlap - np.exp(-(d**2) / 4))) < 1e-6


def test_degenerate_bank(grid64):
    with pytest.raises(DegenerateBank):
        build_collapse_bank(grid64, grid64.dx / 10)


def test_hamiltonian_hermitian_and_annihilates_constants(grid64):
    H = build_hamiltonian(grid64, 1.0)
    assert np.max(np.abs(H - H.conj().T)) <= 1e-14
    assert np.max(np.abs(H @ uniform_state(grid64))) < 1e-12


def test_hamiltonian_potential_dimension(grid64):
    with pytest.raises(DimensionMismatch):
        build_hamiltonian(grid64, 1.0, np.zeros(5))


def test_gaussian_energy_matches_continuum():
    # [DERIVED] psi ~ exp(-x^2/(4 sigma^2)) has <p^2> = 1/(4 sigma^2), so <H> = <p^2>/2m = 1/(8 sigma^2)
    g = build_grid(128, -12, 12)
    psi = gaussian_packet(g, 0.0, 0.0, 1.0)
    H = build_hamiltonian(g, 1.0)
    e = expval(H, psi)
    assert e == pytest.approx(0.125, rel=0.02)
    # direct quadrature of |psi'|^2 / 2 as an independent oracle
    x = g.x
    dpsi = np.gradient(np.exp(-(x**2) / 4), x)
    quad = 0.5 * np.sum(dpsi**2) / np.sum(np.exp(-(x**2) / 2))
    assert e == pytest.approx(quad, rel=0.02)


def test_gaussian_packet_norm_and_mean(grid64):
    for x0 in (-1.3, 0.0, 1.5):
        psi = gaussian_packet(grid64, x0, 0.5, 0.7)
        assert abs(np.vdot(psi, psi).real - 1) <= 1e-12
        assert abs(np.sum(grid64.x * np.abs(psi) ** 2) - x0) <= grid64.dx / 10


def test_gaussian_packet_rejects(grid64):
    with pytest.raises(PacketClipped):
        gaussian_packet(grid64, grid64.x_max, 0.0, 0.5)
    with pytest.raises(ValueError):
        gaussian_packet(grid64, 0.0, 0.0, grid64.dx / 2)


def test_cat_state(grid64):
    psi = cat_state(grid64, -2, 2, 0.3)
    assert abs(np.vdot(psi, psi).real - 1) <= 1e-12
    wl, wr = branch_weights(grid64, psi)
    assert abs(wl - 0.5) < 1e-6 and abs(wr - 0.5) < 1e-6
    with pytest.raises(OverlapTooLarge):
        cat_state(grid64, 1.0, 1.0, 0.3)


def test_model_is_immutable(grid64):
    m = build_model(grid64, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        m.hamiltonian[0, 0] = 1.0
    with pytest.raises(Exception):
        m.lam = 2.0
    assert m.with_lambda(2.0).lam == 2.0 and m.lam == 1.0


def test_model_free_false_has_zero_h(grid64):
    assert not np.any(build_model(grid64, free=False).hamiltonian)


def test_documentation_constants():
    assert GRW_LAMBDA_SI == 1e-16 and GRW_RC_SI == 1e-7


def test_nearest_site(grid64):
    assert grid64.x[nearest_site(grid64, 2.0)] == 2.0
