"""Independent reference computations used only by the tests.

None of these share code paths with the package: they go back to the
defining integrals or to textbook closed forms.
"""

import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad, simpson


def kernel(gamma0, tau, omega, t):
    return gamma0 / tau * np.cos(omega * t) * np.exp(-np.abs(t) / tau)


def line_shape_simpson(terms, t, n=10_000):
    """g(t) = int_0^t (t - s) L(s) ds by composite Simpson on n intervals."""
    s = np.linspace(0.0, t, n + 1)
    integrand = sum((t - s) * kernel(g0, tau, w, s) for g0, tau, w in terms)
    return simpson(integrand, x=s)


def kernel_integral(gamma0, tau, omega, upper):
    # oscillatory cases hit quad's roundoff warning well below the tolerance we test
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(lambda s: kernel(gamma0, tau, omega, s), 0.0, upper, limit=2000,
                    epsabs=0.0, epsrel=1e-12)[0]


def rabi_p1(delta, j, t):
    """Site-1 population of the bare dimer started on site 1."""
    omega = np.hypot(delta, 2 * j)
    return 1.0 - (4 * j * j / omega**2) * np.sin(0.5 * omega * t) ** 2


def exponential_transfer(kappa, t):
    return 0.5 * (1.0 - np.exp(-2.0 * kappa * t))


def brownian_spectral_density(lam, w0, gamma, x):
    return 2 * lam * gamma * w0**2 * x / ((w0**2 - x**2) ** 2 + gamma**2 * x**2)


def brownian_correlation(lam, w0, gamma, beta, t):
    """C(t) = (1/pi) int_0^inf J(x) [coth(beta x / 2) cos(x t) - i sin(x t)] dx."""

    def sym(x):
        x = np.maximum(x, 1e-300)
        return brownian_spectral_density(lam, w0, gamma, x) / np.tanh(beta * x / 2)

    def anti(x):
        return brownian_spectral_density(lam, w0, gamma, x)

    if t == 0:
        re = quad(sym, 0, 4 * w0, limit=2000, points=[w0])[0] + quad(sym, 4 * w0, np.inf, limit=2000)[0]
        return re / np.pi + 0j
    re = quad(sym, 0, np.inf, weight="cos", wvar=t, limlst=200)[0]
    im = -quad(anti, 0, np.inf, weight="sin", wvar=t, limlst=200)[0]
    return (re + 1j * im) / np.pi


def pure_dephasing_coherence(lam, w0, gamma, beta, delta, t_values, n=4000):
    """rho_12(t)/rho_12(0) for H = delta/2 sigma_z + sigma_z X (exact Gaussian result).

    With sigma_z eigenvalues +/-1 the decay is exp(-4 int_0^t (t - s) Re C(s) ds)
    times the bare phase exp(-i delta t).
    """
    t_max = max(t_values)
    s = np.linspace(0.0, t_max, n + 1)
    re_c = np.array([brownian_correlation(lam, w0, gamma, beta, x).real for x in s])
    out = []
    for t in t_values:
        mask = s <= t + 1e-12
        phi = simpson((t - s[mask]) * re_c[mask], x=s[mask]) if mask.sum() > 2 else 0.0
        out.append(np.exp(-1j * delta * t - 4.0 * phi))
    return np.array(out)
