import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grwlab import (
    Basis,
    FiniteSystem,
    RandomStream,
    build_grid,
    build_kraus_pair,
    build_model,
    collision_round,
    deferred_outcome_distribution,
    equivalence_report,
    evolve_master,
    expval,
    run_ensemble,
    run_repeated,
    sequential_outcome_distribution,
    trace_distance,
)
from grwlab.errors import DimensionMismatch, NotNormalized
from grwlab.propagate import precompute_propagator
from grwlab.repeated import channel_round, channel_step, diagonal_kraus_pair, measured_step

SZ = np.diag([1.0, -1.0]).astype(complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def _herm(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def _state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


@pytest.fixture(scope="module")
def model16():
    return build_model(build_grid(16, -8, 8), 1.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def psi16():
    return _state(np.random.default_rng(16), 16)


def test_decoupled_limit(model16):
    m = model16.with_lambda(0.0)
    k = build_kraus_pair(m, np.eye(16), 0.01)
    assert np.max(np.abs(k.k_up - precompute_propagator(m.hamiltonian, 0.01).matrix)) < 1e-12
    assert np.max(np.abs(k.k_down)) < 1e-15


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), tau=st.floats(1e-4, 0.5))
def test_trace_preservation_random_l(seed, tau):
    r = np.random.default_rng(seed)
    sys = FiniteSystem(_herm(r, 16), 1.3)
    assert build_kraus_pair(sys, _herm(r, 16), tau).trace_residual() <= 1e-12


def test_small_tau_expansion():
    r = np.random.default_rng(0)
    sys = FiniteSystem(_herm(r, 6), 1.0)
    L = _herm(r, 6)
    errs = [np.linalg.norm(build_kraus_pair(sys, L, tau).k_down - np.sqrt(tau) * L, 2) for tau in (1e-2, 1e-3)]
    # leading correction is O(tau^{3/2}): a factor sqrt(10) * 10 per decade
    assert np.log10(errs[0] / errs[1]) == pytest.approx(1.5, abs=0.1)


def test_closed_form_diagonal_pair_matches_exponentiation():
    r = np.random.default_rng(1)
    l = r.uniform(0, 1, 5)
    sys = FiniteSystem(np.zeros((5, 5)), 2.0)
    a = diagonal_kraus_pair(2.0, l, 0.03)
    b = build_kraus_pair(sys, np.diag(l), 0.03)
    ku, kd = a.matrices()
    assert np.max(np.abs(ku - b.k_up)) < 1e-12 and np.max(np.abs(kd - b.k_down)) < 1e-12


def test_channel_unitary_limit_and_trace(model16, psi16):
    m = model16.with_lambda(0.0)
    rho = np.outer(psi16, psi16.conj())
    out = channel_round(collision_round(m, 0.05), rho)
    assert abs(np.trace(out @ out).real - 1) < 1e-12
    r = np.random.default_rng(2)
    a = r.normal(size=(16, 16)) + 1j * r.normal(size=(16, 16))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    for p in collision_round(model16, 0.05):
        assert abs(np.trace(channel_step(p, rho)) - 1) < 1e-12
    with pytest.raises(DimensionMismatch):
        channel_step(collision_round(model16, 0.05)[0], np.eye(3))


def test_channel_round_is_positive(model16, psi16):
    tr = run_repeated(model16, psi16, 200, 0.01, "traced", output_every=20)
    for rho in tr.states:
        assert np.linalg.eigvalsh(rho).min() >= -1e-8
        assert abs(np.trace(rho) - 1) < 1e-12 * 200


def test_continuum_limit(model16, psi16):
    oracle = evolve_master(model16, psi16, 1.0, 0.001, 0.5).final
    errs = []
    for tau in (2e-3, 1e-3):
        tr = run_repeated(model16, psi16, round(1 / tau), tau, "traced", output_every=round(0.5 / tau))
        errs.append(trace_distance(tr.final, oracle))
    assert 1.5 <= errs[0] / errs[1] <= 2.5


def test_traced_unitary_limit_conserves_energy(model16, psi16):
    m = model16.with_lambda(0.0)
    tr = run_repeated(m, psi16, 100, 0.01, "traced", output_every=10)
    e = [expval(m.hamiltonian, rho) for rho in tr.states]
    assert np.max(np.abs(np.array(e) - e[0])) < 1e-10


def test_measured_step_unitary_limit(model16, psi16):
    m = model16.with_lambda(0.0)
    pair = build_kraus_pair(m, np.eye(16), 0.01)
    for basis in (Basis.Z, "z_basis"):
        psi, bit = measured_step(pair, psi16, basis, RandomStream(3))
        assert bit == 0
        assert np.max(np.abs(psi - pair.k_up @ psi16)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_outcome_probabilities_sum_to_one(seed):
    r = np.random.default_rng(seed)
    pair = build_kraus_pair(FiniteSystem(_herm(r, 8), 1.0), _herm(r, 8), 0.05)
    psi = _state(r, 8)
    for basis in Basis:
        m0, m1 = pair.measurement_ops(basis)
        p = np.linalg.norm(m0 @ psi) ** 2 + np.linalg.norm(m1 @ psi) ** 2
        assert abs(p - 1) < 1e-12


def test_measured_step_rejects_unnormalized(model16):
    pair = collision_round(model16, 0.01)[1]
    with pytest.raises(NotNormalized):
        measured_step(pair, np.ones(16, dtype=complex), Basis.Z, RandomStream(0))


def test_qubit_z_outcome_fraction():
    lam, tau = 1.0, 0.01
    rec = run_repeated(FiniteSystem(np.zeros((2, 2)), lam), PLUS, 20_000, tau, "z_measured", rng=7, l_ops=[SZ])
    bits = rec.outcomes.outcomes
    assert len(rec.outcomes) == 20_000
    p = np.sin(np.sqrt(lam * tau)) ** 2  # = lambda tau to first order
    assert abs(bits.mean() - p) <= 3 * np.sqrt(p * (1 - p) / len(bits))
    # long quiet stretches between rare down outcomes
    assert np.mean(np.diff(np.flatnonzero(bits))) > 50


def test_x_basis_steps_are_diffusive():
    sys = FiniteSystem(np.zeros((2, 2)), 1.0)
    taus = np.array([1e-2, 1e-3, 1e-4])
    # first few collisions only: over long runs the state localizes and the steps shrink
    sizes = [np.mean([run_repeated(sys, PLUS, 10, t, "x_measured", rng=RandomStream(8, k), l_ops=[SZ])
                      .extra["step_changes"] for k in range(200)]) for t in taus]
    slope = np.polyfit(np.log(taus), np.log(sizes), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.1)


def test_deferred_choice_is_exact():
    r = np.random.default_rng(9)
    for n, k in ((2, 3), (4, 2), (8, 3)):
        sys = FiniteSystem(_herm(r, n), 1.7)
        pairs = [build_kraus_pair(sys, _herm(r, n), 0.2, include_hamiltonian=(i == 0)) for i in range(k)]
        psi = _state(r, n)
        for bases in itertools.product(list(Basis), repeat=k):
            seq = sequential_outcome_distribution(pairs, psi, bases)
            dfr = deferred_outcome_distribution(pairs, psi, bases)
            assert abs(sum(p for p, _ in seq.values()) - 1) < 1e-12
            for bits in seq:
                assert abs(seq[bits][0] - dfr[bits][0]) <= 1e-10
                assert np.max(np.abs(seq[bits][1] - dfr[bits][1])) <= 1e-10


def test_measured_averages_match_channel(model16, psi16):
    tau, T = 0.01, 1.0
    traced = run_repeated(model16, psi16, 100, tau, "traced", output_every=10)
    recs = [run_ensemble(model16, psi16, meth, 4000, T, tau, 0.1, 12, threads=4) for meth in ("repeated_z", "repeated_x")]
    rep = equivalence_report(recs, traced)
    assert rep.passed


def test_measured_record_layout(model16, psi16):
    rec = run_repeated(model16, psi16, 20, 0.01, "x_measured", rng=3, output_every=5)
    assert rec.states.shape == (5, 16)
    assert rec.outcomes.basis is Basis.X
    # one ancilla per collapse center each round, the free flight is not a collision
    assert len(rec.outcomes) == 20 * 16
    assert np.max(np.abs(np.linalg.norm(rec.states, axis=1) - 1)) < 1e-10
