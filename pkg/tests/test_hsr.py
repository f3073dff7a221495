import warnings

import numpy as np
import pytest

import oracles
from vibtransfer.hsr import (HsrModel, _oscillates, critical_gamma, critical_gamma_estimate, hsr_eigenvalues,
                             hsr_propagate, markovian_gamma, numeric_eigenvalues, relaxation_rate)
from vibtransfer.correlation import CorrelationSpec
from vibtransfer.noise import TimeGrid
from vibtransfer.stochastic import DimerSpec, transfer_rate

HOMO = DimerSpec.with_offset(0.0)
GRID = TimeGrid.from_horizon(0.01, 20.0)


def _sorted(vals):
    vals = np.asarray(vals, dtype=complex)
    key = np.round(vals, 8)
    return vals[np.lexsort((key.imag, key.real))]


def test_unitary_limit_is_rabi():
    traj = hsr_propagate(HsrModel(HOMO, 0.0), GRID)
    np.testing.assert_allclose(traj.p1, np.cos(traj.t) ** 2, atol=1e-10)


def test_unitary_limit_detuned():
    d = DimerSpec.with_offset(5.0)
    traj = hsr_propagate(HsrModel(d, 0.0), GRID)
    np.testing.assert_allclose(traj.p1, oracles.rabi_p1(5.0, 1.0, traj.t), atol=1e-10)


def test_strong_dephasing_slows_transfer():
    slow = hsr_propagate(HsrModel(HOMO, 100.0), GRID)
    crit = hsr_propagate(HsrModel(HOMO, 4.0), GRID)
    i = int(round(5.0 / GRID.dt))
    assert slow.p1[i] > crit.p1[i]


def test_eigenvalues_random_gamma():
    rng = np.random.default_rng(1)
    for gamma in rng.uniform(0, 10, 50):
        num = _sorted(numeric_eigenvalues(HsrModel(HOMO, gamma)))
        ref = _sorted(hsr_eigenvalues(1.0, gamma))
        assert np.abs(num - ref).max() <= 1e-10


def test_eigenvalue_examples():
    assert np.allclose(hsr_eigenvalues(1.0, 4.0)[2:], [-2.0, -2.0], atol=0)
    np.testing.assert_allclose(_sorted(hsr_eigenvalues(1.0, 0.0)), _sorted([0, 0, 2j, -2j]), atol=1e-15)
    np.testing.assert_allclose(_sorted(hsr_eigenvalues(1.0, 5.0)), _sorted([0, -5, -1, -4]), atol=1e-15)


def test_liouvillian_preserves_trace_and_hermiticity():
    d = DimerSpec.with_offset(2.0)
    traj = hsr_propagate(HsrModel(d, 3.0), GRID)
    np.testing.assert_allclose(traj.p1 + traj.p2, 1.0, atol=1e-12)
    assert np.all(traj.p1 * traj.p2 - np.abs(traj.coherence) ** 2 >= -1e-12)


@pytest.mark.parametrize("gamma,expect", [(0.5, True), (2.0, True), (3.0, True), (3.5, True), (4.0, False), (4.5, False), (8.0, False),
                                          (20.0, False)])
def test_oscillation_crossover(gamma, expect):
    traj = hsr_propagate(HsrModel(HOMO, gamma), GRID)
    assert _oscillates(traj.p1) is expect


def _integral_rate(gamma):
    traj = hsr_propagate(HsrModel(HOMO, gamma), TimeGrid.from_horizon(0.01, 200.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return transfer_rate(traj).rate_r


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
def test_integral_rate_closed_form(gamma):
    # z = P1 - P2 obeys z'' + gamma z' + 4 J^2 z = 0, so int (P1 - 1/2) dt = gamma / 8
    assert _integral_rate(gamma) == pytest.approx(8.0 / gamma, rel=1e-8)


def test_relaxation_rate_peaks_at_critical_damping():
    best = relaxation_rate(HsrModel(HOMO, 4.0))
    assert best == pytest.approx(2.0)
    assert all(best > relaxation_rate(HsrModel(HOMO, g)) for g in (1.0, 2.0, 8.0, 16.0))


def test_critical_gamma_homodimer_exact():
    res = critical_gamma(HOMO)
    assert res.value == 4.0 and not res.scanned


def test_critical_gamma_heterodimer():
    d = DimerSpec.with_offset(8.0)
    assert critical_gamma_estimate(d) == pytest.approx(np.sqrt(68.0))
    res = critical_gamma(d)
    assert res.scanned
    assert abs(res.value - np.sqrt(68.0)) <= 0.25 * np.sqrt(68.0)


def test_relaxation_rate_criterion_reproduces_homodimer():
    gammas = np.linspace(1.0, 8.0, 701)
    rates = [relaxation_rate(HsrModel(HOMO, g)) for g in gammas]
    assert gammas[int(np.argmax(rates))] == pytest.approx(4.0, abs=0.011)


def test_markovian_gamma():
    spec = CorrelationSpec.single(1.5, 0.01)
    assert markovian_gamma(spec) == 3.0
    with pytest.raises(ValueError):
        HsrModel(HOMO, -1.0)
