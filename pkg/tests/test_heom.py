import numpy as np
import pytest

import oracles
from vibtransfer import heom
from vibtransfer.correlation import high_temp_map
from vibtransfer.heom import (BrownianBath, DepthUnstable, OverdampedRegime, bcf_decompose,
                              boltzmann_site_populations, correlation_from_modes, heom_propagate,
                              hierarchy_indices, spectral_density, thermal_check)
from vibtransfer.stochastic import DimerSpec

DIMER = DimerSpec.with_offset(8.0)


def bath(omega=8.0, lam=0.2, beta=0.1):
    return BrownianBath(lam=lam, omega=omega, gamma=2.0 / 3.0, beta=beta, n_matsubara=1)


@pytest.fixture(scope="module")
def fig_runs():
    return {w: heom_propagate(DIMER, bath(w)) for w in (4.0, 6.0, 8.0, 9.0)}


def test_spectral_density_examples():
    b = bath()
    assert spectral_density(b, b.omega) == pytest.approx(2 * b.lam * b.omega / b.gamma)
    assert spectral_density(b, 0.0) == 0.0
    assert spectral_density(b, 8.0) == pytest.approx(4.8)
    x = np.linspace(0.1, 30, 50)
    np.testing.assert_allclose(spectral_density(b, x), oracles.brownian_spectral_density(0.2, 8.0, 2 / 3, x))


def test_modes_and_rates():
    b = bath()
    assert b.zeta == pytest.approx(np.sqrt(64 - 1 / 9))
    assert b.zeta == pytest.approx(7.9930, abs=1e-4)
    modes = bcf_decompose(b)
    assert len(modes) == 3
    pair = sorted([modes[0].rate, modes[1].rate], key=lambda z: z.imag)
    np.testing.assert_allclose(pair, [1 / 3 - 1j * b.zeta, 1 / 3 + 1j * b.zeta])
    assert modes[2].rate == pytest.approx(2 * np.pi / 0.1)
    assert all(m.rate.real > 0 for m in modes)
    assert modes[0].partner == 1 and modes[1].partner == 0 and modes[2].partner == 2


def test_overdamped_rejected():
    with pytest.raises(OverdampedRegime):
        bcf_decompose(BrownianBath(0.2, 0.3, 2.0, 0.1))
    with pytest.raises(ValueError):
        BrownianBath(-0.2, 8.0, 2 / 3, 0.1)


@pytest.mark.parametrize("omega", [4.0, 8.0])
def test_correlation_matches_quadrature(omega):
    b = bath(omega)
    modes = bcf_decompose(b)
    for t in np.linspace(0, 10, 21):
        ref = oracles.brownian_correlation(b.lam, b.omega, b.gamma, b.beta, t)
        got = correlation_from_modes(modes, t)
        assert abs(got - ref) <= 1e-3 * abs(ref)


def test_classical_amplitude_band():
    # Re C(0) is the classical fluctuation amplitude; tau = 2 / gamma
    b = bath()
    gamma0 = correlation_from_modes(bcf_decompose(b), 0.0).real * (2 / b.gamma)
    assert 12.0 <= gamma0 <= 13.0
    assert high_temp_map(b.lam, b.beta, 2 / b.gamma) == pytest.approx(12.0)


def test_hierarchy_indices():
    idx = hierarchy_indices(3, 6)
    assert len(idx) == 84 and idx[0] == (0, 0, 0)
    members = set(idx)
    for n in idx:
        for k in range(3):
            if n[k]:
                lower = list(n)
                lower[k] -= 1
                assert tuple(lower) in members


@pytest.mark.parametrize("delta", [0.0, 8.0])
def test_decoupled_limit_is_rabi(delta):
    d = DimerSpec.with_offset(delta)
    res = heom_propagate(d, bath(lam=1e-8), horizon=10.0)
    t = res.trajectory.t
    assert np.abs(res.trajectory.p1 - oracles.rabi_p1(delta, 1.0, t)).max() <= 1e-4


def test_trace_and_hermiticity(fig_runs):
    for res in fig_runs.values():
        assert res.trace_error <= 1e-6
        assert res.hermiticity_error <= 1e-8
        assert res.meta["n_ados"] == 84


def test_transferred_population_ordering(fig_runs):
    p = {w: res.trajectory.transferred[-1] for w, res in fig_runs.items()}
    assert p[8.0] > p[9.0] > p[4.0] > p[6.0]


def test_dt_halving(fig_runs):
    half = heom_propagate(DIMER, bath(8.0), dt=5e-4)
    assert abs(half.trajectory.p1[-1] - fig_runs[8.0].trajectory.p1[-1]) <= 1e-6


def test_depth_convergence_at_resonance(fig_runs):
    deeper = heom_propagate(DIMER, bath(8.0), depth=7)
    a, b = fig_runs[8.0].trajectory.p1[-1], deeper.trajectory.p1[-1]
    assert abs(b - a) <= 1e-3 * abs(a)


def test_matches_pure_dephasing_solution():
    # with J = 0 the coupling commutes with H and the coherence decay is an
    # exact Gaussian average, independent of the hierarchy
    d = DimerSpec(8.0, 0.0, 1e-12)
    b = bath(8.0)
    gen, _ = heom.heom_generator(d.hamiltonian(), heom.SIGMA_Z, bcf_decompose(b), 6)
    step = np.linalg.matrix_power(heom.rk4_step_matrix(gen, 1e-3), 500)
    state = np.zeros(gen.shape[0], dtype=complex)
    state[:4] = 0.5
    got = []
    for _ in range(6):
        state = step @ state
        got.append(state[1] / 0.5)
    times = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    ref = oracles.pure_dephasing_coherence(b.lam, b.omega, b.gamma, b.beta, 8.0, times)
    np.testing.assert_allclose(got, ref, atol=1e-4)


def test_depth_unstable(monkeypatch):
    monkeypatch.setattr(heom, "NORM_LIMIT", 0.5)
    with pytest.raises(DepthUnstable):
        heom_propagate(DIMER, bath(), depth=2, horizon=1.0)


def test_output_stride_validation():
    with pytest.raises(ValueError):
        heom_propagate(DIMER, bath(), dt=0.003, output_dt=0.01)


def test_boltzmann_populations():
    assert boltzmann_site_populations(DimerSpec.with_offset(0.0), 3.0) == pytest.approx((0.5, 0.5))
    p1, p2 = boltzmann_site_populations(DIMER, 1e-9)
    assert p1 == pytest.approx(0.5, abs=1e-8)
    p1, _ = boltzmann_site_populations(DIMER, 0.1)
    assert p1 < 0.5


def test_thermal_check_homodimer():
    res = heom_propagate(DimerSpec.with_offset(0.0), bath(8.0, beta=1.0), horizon=40.0)
    report = thermal_check(res.trajectory, DimerSpec.with_offset(0.0), 1.0)
    assert report.boltzmann == pytest.approx((0.5, 0.5))
    assert abs(report.populations[0] - 0.5) <= 0.02


def test_thermal_check_relaxes_below_half(fig_runs):
    report = thermal_check(fig_runs[8.0].trajectory, DIMER, 0.1)
    # the classical model equilibrates at 1/2; the quantum bath drives P1 below it
    assert report.populations[0] < 0.5
    assert report.boltzmann[0] < 0.5
