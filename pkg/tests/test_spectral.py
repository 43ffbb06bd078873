import numpy as np
import pytest

from blowlab.errors import ConfigError, DomainError
from blowlab.profiles import GridSpec, SphericalDomain1D, solve_profile
from blowlab.spectral import (
    first_eigenpair,
    half_sphere_lambda1,
    rayleigh,
    regime_exponent,
)
from conftest import FINE, MEDIUM, band, cap, cap_complement


def test_half_sphere_closed_form_oracle():
    # independent route: plug phi = cos^a into the operator on a dense grid
    # and check the eigen identity before trusting the formula
    n = 3
    a = 0.5 * (n + 2.0)
    theta = np.linspace(1e-4, np.pi / 2 - 1e-4, 10_000)
    phi = np.cos(theta) ** a
    dphi = -a * np.cos(theta) ** (a - 1) * np.sin(theta)
    d2phi = a * (a - 1) * np.cos(theta) ** (a - 2) * np.sin(theta) ** 2 - a * np.cos(
        theta) ** a
    lap = d2phi + (n - 2.0) * (np.cos(theta) / np.sin(theta)) * dphi
    pot = 0.25 * n * (n + 2.0) / np.cos(theta) ** 2
    lam_field = (-lap + pot * phi) / phi
    assert np.max(np.abs(lam_field - half_sphere_lambda1(n))) < 1e-6
    assert half_sphere_lambda1(3) == pytest.approx(8.75)
    assert half_sphere_lambda1(4) == pytest.approx(15.0)
    assert half_sphere_lambda1(6) == pytest.approx(32.0)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_half_sphere_eigenvalue(n, half_sphere_eigen):
    eig = half_sphere_eigen[n]
    exact = half_sphere_lambda1(n)
    assert abs(eig.lambda1 / exact - 1.0) < 1e-3
    assert abs(eig.mu1 - n) < 1e-3
    assert eig.regime == "alpha-2"


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_half_sphere_lower_bound(n):
    # lambda1 on the half sphere exceeds n(n+2)/4 since rho = cos <= 1
    prof = solve_profile(
        SphericalDomain1D("polar-sphere", 0.0, np.pi / 2,
                          bc_lo="regular-pole", bc_hi="blowup"),
        n, grid=MEDIUM)
    eig = first_eigenpair(prof)
    assert eig.lambda1 > 0.25 * n * (n + 2.0)


def test_eigenfunction_positive_normalized(half_sphere_eigen):
    eig = half_sphere_eigen[3]
    assert np.all(eig.phi[1:-1] > 0)
    # eigenfunction shape phi ~ cos^{(n+2)/2}, checked clear of the wall
    # cells where the truncated weight distorts the discrete ground state
    theta = eig.profile.theta
    sel = (theta > 0) & (theta <= np.pi / 2 - 0.05)
    shape = eig.phi[sel] / np.cos(theta[sel]) ** 2.5
    assert np.max(shape) / np.min(shape) - 1.0 < 1e-2


def test_rayleigh_consistency(half_sphere_eigen):
    eig = half_sphere_eigen[3]
    rq = rayleigh(eig.profile, eig.phi)
    assert abs(rq / eig.lambda1 - 1.0) < 1e-8


def test_rayleigh_variational(half_sphere_eigen):
    eig = half_sphere_eigen[3]
    prof = eig.profile
    bump = np.sin(np.pi * prof.theta / prof.theta[-1]) ** 2
    perturbed = eig.phi + 0.05 * bump * np.max(eig.phi)
    perturbed[-1] = 0.0
    assert rayleigh(prof, perturbed) >= eig.lambda1 - 1e-12


def test_rayleigh_errors(half_sphere_eigen):
    prof = half_sphere_eigen[3].profile
    with pytest.raises(ConfigError):
        rayleigh(prof, np.ones(7))
    bad = np.ones_like(prof.theta)
    with pytest.raises(DomainError):
        rayleigh(prof, bad)  # does not vanish at the wall


def test_cutoff_family_trend_n4():
    # the cutoff family phi_s bounds lambda1 from above; its Dirichlet
    # energy scales like s^(n-3) = s while the potential part deflates as
    # the excluded cap shrinks (only logarithmically at n = 4, so the raw
    # quotient cannot show the s-trend at desk scale -- see the ledger)
    n = 4
    svals = (0.1, 0.2, 0.4)

    def cutoff(prof, s):
        phi = np.clip((prof.theta - 2.0 * s) / s + 1.0, 0.0, 1.0)
        phi[0] = 0.0
        return phi

    def gradient_quotient(prof, phi):
        theta = prof.theta
        w_mid = np.sin(0.5 * (theta[1:] + theta[:-1])) ** (n - 2)
        h = np.diff(theta)
        num = np.sum(w_mid * (np.diff(phi) / h) ** 2 * h)
        w_node = np.sin(theta) ** (n - 2)
        den = np.trapezoid(w_node * phi**2, theta)
        return num / den

    prof = solve_profile(cap_complement(0.02), n, grid=GridSpec(3200, 2.0))
    eig = first_eigenpair(prof)
    quotients = [rayleigh(prof, cutoff(prof, s)) for s in svals]
    assert all(eig.lambda1 <= q for q in quotients)
    grads = [gradient_quotient(prof, cutoff(prof, s)) for s in svals]
    assert grads[0] < grads[1] < grads[2]
    slope = np.polyfit(np.log(svals), np.log(grads), 1)[0]
    assert slope > 0.8
    # the limsup mechanism: for fixed s the quotient decreases with r
    prof_big = solve_profile(cap_complement(0.1), n, grid=MEDIUM)
    for s in svals:
        assert rayleigh(prof, cutoff(prof, s)) < rayleigh(
            prof_big, cutoff(prof_big, s))


def test_nested_cap_monotonicity():
    lams = []
    for theta0 in (0.6, 0.9, 1.2, 1.5):
        eig = first_eigenpair(solve_profile(cap(theta0), 3, grid=MEDIUM))
        lams.append(eig.lambda1)
    gaps = -np.diff(lams)
    assert np.all(gaps > 1e-6)


def test_n3_lower_bound_fixtures():
    fixtures = [cap(0.5), cap(1.0), cap(2.0), cap(2.8),
                band(0.7, 2.2), cap_complement(0.4)]
    for dom in fixtures:
        eig = first_eigenpair(solve_profile(dom, 3, grid=MEDIUM))
        assert eig.lambda1 > 0.75, dom.label
        assert eig.mu1 > max(0.5, 1.0)


def test_cap_complement_vanishing_trend_n4():
    lams = {}
    for r in (0.4, 0.2, 0.1, 0.05):
        eig = first_eigenpair(solve_profile(cap_complement(r), 4, grid=MEDIUM))
        lams[r] = eig.lambda1
        assert eig.mu1 > max(1.0, 1.0)
    assert lams[0.4] > lams[0.2] > lams[0.1] > lams[0.05]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_convex_cap_regime(n):
    for theta0 in (np.pi / 3, np.pi / 2):
        eig = first_eigenpair(solve_profile(cap(theta0), n, grid=MEDIUM))
        assert eig.mu1 > 2.0
        assert regime_exponent(eig).exponent == 2.0


def test_eigenfunction_decay_bound(half_sphere_eigen):
    eig = half_sphere_eigen[3]
    prof = eig.profile
    assert eig.nu_hat > 0
    assert abs(eig.nu_hat - 2.5) < 1e-2
    # discrete derivative bound rho|dphi| + rho^2|d2phi| <= C rho^nu nodewise
    from blowlab.profiles import _fd_derivative_arrays

    dphi, d2phi = _fd_derivative_arrays(prof.theta, eig.phi)
    mask = (prof.rho >= 1e-3) & (prof.rho <= 1e-1)
    lhs = prof.rho[mask] * np.abs(dphi[mask]) + prof.rho[mask] ** 2 * np.abs(
        d2phi[mask])
    c_fit = np.max(lhs / prof.rho[mask] ** eig.nu_hat)
    assert np.isfinite(c_fit) and c_fit > 0
    assert np.all(lhs <= c_fit * prof.rho[mask] ** eig.nu_hat + 1e-15)


def test_regime_dispatch(half_sphere_eigen):
    eig = half_sphere_eigen[3]
    form = regime_exponent(eig)
    assert form.kind == "power" and form.exponent == 2.0
    # synthetic branches
    import copy

    log_case = copy.copy(eig)
    log_case.mu1 = 2.0 + 1e-9
    log_case.regime = "log"
    form = regime_exponent(log_case)
    assert form.kind == "power-log"
    slow = copy.copy(eig)
    slow.mu1 = 1.4
    slow.regime = "alpha-mu"
    form = regime_exponent(slow)
    assert form.kind == "power" and abs(form.exponent - 1.4) < 1e-12
    r = np.array([0.1])
    assert form.evaluate(r)[0] == pytest.approx(0.1**1.4)


def test_circle_arc_rejected(half_sphere_eigen):
    arc = SphericalDomain1D("circle-arc", 0.0, np.pi / 2)
    prof = solve_profile(arc, 3, grid=MEDIUM)
    with pytest.raises(ConfigError):
        first_eigenpair(prof)
