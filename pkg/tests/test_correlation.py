import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from vibtransfer.correlation import (CorrelationSpec, KernelTerm, combined, effective_damping, eval_kernel,
                                     high_temp_map, line_shape, reorganization_from_gamma0)

gamma0s = st.floats(0.1, 20.0)
taus = st.floats(0.1, 10.0)
omegas = st.floats(0.0, 15.0)


def test_kernel_at_zero_is_amplitude():
    assert eval_kernel(KernelTerm(3.0, 1.5, 4.0), 0.0) == 2.0


def test_kernel_unit_decay():
    assert eval_kernel(KernelTerm(1.0, 1.0), 1.0) == pytest.approx(0.36787944117, rel=1e-10)


def test_combined_kernel_at_zero():
    spec = combined([(6.0, 6.0, 2.8), (2.0, 2.0, 0.0)])
    assert eval_kernel(spec, 0.0) == pytest.approx(2.0, abs=1e-15)
    assert spec.sigma2 == pytest.approx(2.0)


@given(gamma0s, taus, omegas, st.floats(0.0, 50.0))
def test_kernel_is_even(g0, tau, w, t):
    term = KernelTerm(g0, tau, w)
    assert eval_kernel(term, t) == eval_kernel(term, -t)


def test_kernel_array_shape():
    t = np.linspace(-3, 3, 7)
    assert eval_kernel(CorrelationSpec.single(1.0, 1.0), t).shape == (7,)


@pytest.mark.parametrize("bad", [dict(gamma0=0.0, tau=1.0), dict(gamma0=1.0, tau=-1.0),
                                 dict(gamma0=1.0, tau=1.0, omega=-2.0)])
def test_term_validation(bad):
    with pytest.raises(ValueError):
        KernelTerm(**bad)


def test_effective_damping_examples():
    assert effective_damping(KernelTerm(7.0, 2.0, 0.0)) == 7.0
    assert effective_damping(KernelTerm(12.0, 3.0, 4.0)) == pytest.approx(12.0 / 145.0, rel=1e-12)
    assert 12.0 / 145.0 == pytest.approx(0.08276, abs=1e-5)


@settings(max_examples=60)
@given(gamma0s, taus, omegas)
def test_effective_damping_is_kernel_integral(g0, tau, w):
    term = KernelTerm(g0, tau, w)
    ref = oracles.kernel_integral(g0, tau, w, 50 * tau)
    assert effective_damping(term) == pytest.approx(ref, rel=1e-8, abs=1e-10)


@given(gamma0s, taus, omegas)
def test_effective_damping_is_line_shape_slope(g0, tau, w):
    # g(t) = gamma_eff t + c + O(exp(-t/tau)), so the slope converges long
    # before g/t does (g/t carries c/t, about 1e-3 relative at 1e3 tau)
    term = KernelTerm(g0, tau, w)
    t = 1e3 * tau
    gamma_eff = effective_damping(term)
    slope = (line_shape(term, 2 * t) - line_shape(term, t)) / t
    assert abs(slope - gamma_eff) <= 1e-4 * gamma_eff
    offset = g0 / tau * (w * w - 1 / tau**2) / (1 / tau**2 + w * w) ** 2
    assert abs(line_shape(term, t) / t - gamma_eff - offset / t) <= 1e-9 * gamma_eff


def test_line_shape_zero_at_origin():
    spec = combined([(6.0, 6.0, 2.8), (2.0, 2.0, 0.0)])
    assert line_shape(spec, 0.0) == 0.0


@pytest.mark.parametrize("g0,tau", [(1.0, 1.0), (12.0, 3.0), (0.3, 0.05)])
def test_line_shape_exponential_closed_form(g0, tau):
    t = np.linspace(0, 20, 101)
    ref = g0 * tau * (np.exp(-t / tau) - 1 + t / tau)
    np.testing.assert_allclose(line_shape(KernelTerm(g0, tau), t), ref, rtol=1e-12, atol=1e-13)


def test_line_shape_fig2_point_matches_double_integral():
    ref = oracles.line_shape_simpson([(12.0, 3.0, 8.0)], 5.0)
    assert line_shape(KernelTerm(12.0, 3.0, 8.0), 5.0) == pytest.approx(ref, rel=1e-8)


def test_line_shape_random_draws_match_double_integral():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        g0, tau, w, t = rng.uniform(0.1, 20), rng.uniform(0.1, 10), rng.uniform(0, 15), rng.uniform(0, 20)
        ref = oracles.line_shape_simpson([(g0, tau, w)], t)
        worst = max(worst, abs(line_shape(KernelTerm(g0, tau, w), t) - ref) / max(abs(ref), 1e-300))
    assert worst <= 1e-8


def test_line_shape_monotone_for_exponential_and_nonnegative_otherwise():
    t = np.linspace(0, 30, 3001)
    g = line_shape(KernelTerm(5.0, 2.0, 0.0), t)
    assert np.all(np.diff(g) >= 0)
    for w in (0.5, 3.0, 8.0, 15.0):
        assert line_shape(KernelTerm(5.0, 2.0, w), t).min() >= -1e-14


def test_line_shape_is_additive_over_terms():
    t = np.linspace(0, 10, 50)
    a, b = KernelTerm(6.0, 6.0, 2.8), KernelTerm(2.0, 2.0, 0.0)
    np.testing.assert_allclose(line_shape(CorrelationSpec((a, b)), t), line_shape(a, t) + line_shape(b, t))


def test_high_temp_map_examples():
    assert high_temp_map(0.2, 0.1, 3.0) == pytest.approx(12.0)
    beta = 2 * 0.74 / 1.5
    assert high_temp_map(0.74, beta, 1.0) / 1.0 == pytest.approx(1.5)
    assert high_temp_map(0.0, 0.1, 3.0) == 0.0
    assert reorganization_from_gamma0(12.0, 0.1, 3.0) == pytest.approx(0.2)


def test_spec_helpers_roundtrip():
    spec = CorrelationSpec.from_sigma(3.0, 1.0, 5.0)
    assert spec.terms[0].gamma0 == pytest.approx(9.0)
    assert CorrelationSpec.from_dict(spec.to_dict()) == spec
    assert spec.with_omega(2.0).terms[0].omega == 2.0
    assert spec.scaled(2.0).sigma2 == pytest.approx(2 * spec.sigma2)
    with pytest.raises(ValueError):
        CorrelationSpec(())
