import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from grwlab import (
    NotNormalized,
    RandomStream,
    ZeroOverlap,
    basis_state,
    branch_weights,
    build_grid,
    build_model,
    cat_state,
    gaussian_packet,
    run_ensemble,
    run_jump_trajectory,
    uniform_state,
)
from grwlab.propagate import precompute_propagator
from grwlab.traj_jump import apply_jump, collapse_weights, sample_collapse_center, sample_jump_time


def test_zero_rate_never_jumps():
    assert sample_jump_time(RandomStream(0), 0.0) == np.inf


def test_waiting_time_mean():
    s = RandomStream(11)
    x = np.array([sample_jump_time(s, 2.0) for _ in range(100_000)])
    assert abs(x.mean() - 0.5) <= 3 * x.std() / np.sqrt(len(x))


def test_event_counts_are_poisson():
    s = RandomStream(12)
    counts = np.empty(10_000)
    for i in range(len(counts)):
        t, k = sample_jump_time(s, 10.0), 0
        while t <= 1.0:
            k += 1
            t += sample_jump_time(s, 10.0)
        counts[i] = k
    assert 0.95 <= counts.var(ddof=1) / counts.mean() <= 1.05


def test_centers_follow_kernel_profile():
    g = build_grid(32, -4, 4)
    model = build_model(g, 1.0, 0.8)
    j = 10
    psi = basis_state(g, j)
    expected = model.bank.diagonals[:, j] ** 2
    s = RandomStream(13)
    draws = np.array([sample_collapse_center(s, model.bank, psi) for _ in range(100_000)])
    obs = np.bincount(draws, minlength=32)
    keep = expected * len(draws) >= 5
    f_exp = expected[keep] * len(draws)
    f_obs = obs[keep]
    f_exp *= f_obs.sum() / f_exp.sum()
    assert stats.chisquare(f_obs, f_exp).pvalue > 0.01
    assert np.argmax(obs) == j


def test_uniform_state_gives_uniform_centers():
    g = build_grid(16, -4, 4)
    bank = build_model(g).bank
    assert np.allclose(collapse_weights(bank, uniform_state(g)), 1 / 16, atol=1e-14)
    s = RandomStream(14)
    obs = np.bincount([sample_collapse_center(s, bank, uniform_state(g)) for _ in range(32_000)], minlength=16)
    assert stats.chisquare(obs).pvalue > 0.01


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_weights_sum_to_one(seed):
    g = build_grid(24, -6, 6)
    bank = build_model(g).bank
    r = np.random.default_rng(seed)
    psi = r.normal(size=24) + 1j * r.normal(size=24)
    psi /= np.linalg.norm(psi)
    assert abs(collapse_weights(bank, psi).sum() - 1) < 1e-12


def test_sampling_rejects_unnormalized(grid64, packet_model):
    with pytest.raises(NotNormalized):
        sample_collapse_center(RandomStream(0), packet_model.bank, 2 * uniform_state(grid64))


def test_posterior_width():
    g = build_grid(128, -20, 20)
    model = build_model(g, 1.0, 1.0)
    sigma = np.sqrt(2.0)  # amplitude exp(-x^2 / (2 * 2^2)): amplitude width 2
    psi = gaussian_packet(g, 0.0, 0.0, sigma)
    post = apply_jump(model.bank, int(np.argmin(np.abs(g.x))), psi)
    p = np.abs(post) ** 2
    var = np.sum(g.x**2 * p) - np.sum(g.x * p) ** 2
    # [DERIVED] product of amplitude Gaussians of widths 2 and r_c = 1
    amp_width = 2 * 1 / np.sqrt(2**2 + 1**2)
    assert amp_width == pytest.approx(2 / np.sqrt(5))
    # |psi|^2 std of an amplitude Gaussian of width s is s / sqrt(2)
    assert np.sqrt(2 * var) == pytest.approx(amp_width, rel=0.05)


@pytest.mark.parametrize("sigma", [0.3, 0.3 / np.sqrt(2)])
def test_jump_selects_branch(sigma):
    g = build_grid(128, -8, 8)
    psi = cat_state(g, -2, 2, sigma)
    post = apply_jump(build_model(g).bank, int(np.argmin(np.abs(g.x + 2))), psi)
    wl, wr = branch_weights(g, post)
    # [DERIVED] Gaussian integral: wr / wl = exp(-d^2 / (r_c^2 + 2 sigma^2)) with d = 4
    assert wr / wl == pytest.approx(np.exp(-16 / (1 + 2 * sigma**2)), rel=0.02)
    assert abs(np.linalg.norm(post) - 1) < 1e-12
    if sigma < 0.25:  # amplitude width 0.3
        assert wr < 1e-6


def test_zero_overlap(grid64):
    model = build_model(grid64, 1.0, 0.3)
    with pytest.raises(ZeroOverlap):
        apply_jump(model.bank, 0, basis_state(grid64, 32))


def test_lambda_zero_is_schrodinger(grid64, packet):
    model = build_model(grid64, 0.0, 1.0)
    rec = run_jump_trajectory(model, packet, 2.0, 0.5, RandomStream(1))
    U = precompute_propagator(model.hamiltonian, 2.0).matrix
    assert rec.n_events == 0
    assert np.max(np.abs(rec.final_state - U @ packet)) < 1e-10


def test_record_shapes_and_norm(packet_model, packet):
    rec = run_jump_trajectory(packet_model, packet, 3.0, 0.1, 5, keep_states=True)
    assert all(len(v) == len(rec.times) for v in rec.observables.values())
    assert np.max(np.abs(np.linalg.norm(rec.states, axis=1) - 1)) < 1e-10
    for ev in rec.events:
        assert 0 <= ev.time <= 3.0 and 0 <= ev.center_index < packet_model.bank.n_f


def test_mean_event_count():
    g = build_grid(16, -4, 4)
    model = build_model(g, 1.0, 1.0, 1.0)
    rec = run_ensemble(model, uniform_state(g), "jump", 10_000, 5.0, 0.0, 0.5, 21, keep_states=False)
    n = rec.event_counts
    assert abs(n.mean() - 5) <= 3 * n.std() / np.sqrt(len(n))


def test_interevent_times_exponential_for_any_state():
    g = build_grid(16, -4, 4)
    model = build_model(g, 1.0, 1.0, 1.0)
    for psi0 in (basis_state(g, 3), uniform_state(g)):
        # the first five gaps of a T = 20 run are complete with probability 1 - 2e-5,
        # so keeping only those avoids the short-gap bias of a fixed window
        gaps = []
        for k in range(2000):
            rec = run_jump_trajectory(model, psi0, 20.0, 20.0, RandomStream(31, k))
            t = np.array([0.0] + [e.time for e in rec.events[:5]])
            gaps.extend(np.diff(t))
        assert stats.kstest(gaps, "expon").pvalue > 0.01


def test_mean_kick_on_wide_packet():
    # [DERIVED] heating slope / lambda = 1 / (4 m r_c^2) = 0.25
    g = build_grid(256, -40, 40)
    model = build_model(g, 1.0, 1.0, 1.0)
    psi = gaussian_packet(g, 0.0, 0.0, 4.0)
    kicks = []
    k = 0
    while len(kicks) < 2000:
        rec = run_jump_trajectory(model, psi, 0.5, 0.5, RandomStream(41, k))
        kicks.extend(e.energy_kick for e in rec.events[:1])
        k += 1
    assert np.mean(kicks) == pytest.approx(0.25, rel=0.10)
