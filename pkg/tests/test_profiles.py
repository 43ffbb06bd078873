import numpy as np
import pytest

from blowlab.errors import BoundFailureError, ConfigError, DomainError
from blowlab.profiles import (
    GridSpec,
    SphericalDomain1D,
    check_rho_bounds,
    cone_solution,
    graded_nodes,
    profile_from_csv,
    profile_to_csv,
    solve_profile,
)
from conftest import FINE, MEDIUM, band, cap, cap_complement, half_sphere

# Richardson extrapolation of g(0) on the pi/3 cap (node counts 800/1600/3200,
# grading 2.0); extrapolation spread 2.4e-7
CAP_PI3_N3_G0 = 1.2629685418


def exact_half_sphere(n, theta):
    return np.cos(theta) ** (-0.5 * (n - 2.0))


@pytest.mark.parametrize("n", [3, 6])
def test_half_sphere_closed_form(n, half_sphere_profiles):
    prof = half_sphere_profiles[n]
    mask = prof.theta <= np.pi / 2 - 0.1
    err = np.abs(prof.g[mask] / exact_half_sphere(n, prof.theta[mask]) - 1.0)
    assert np.max(err) <= 1e-3


def test_half_sphere_pole_value(half_sphere_profiles):
    # forced by u = x_n^(-1/2) restricted to the axis
    assert abs(half_sphere_profiles[3].g[0] - 1.0) < 5e-6


def test_half_plane_wedge_arc():
    # the opening-pi wedge is a half space; its arc factor is sin^(-1/2)
    arc = SphericalDomain1D("circle-arc", 0.0, np.pi)
    prof = solve_profile(arc, 3, grid=FINE)
    mask = (prof.theta > 0.1) & (prof.theta < np.pi - 0.1)
    err = np.abs(prof.g[mask] * np.sin(prof.theta[mask]) ** 0.5 - 1.0)
    assert np.max(err) <= 1e-3


def test_cap_pi3_golden_value(cap_pi3_n3_profile):
    assert abs(cap_pi3_n3_profile.g[0] - CAP_PI3_N3_G0) < 5e-6


def test_scaled_residual_norm(half_sphere_profiles):
    for prof in half_sphere_profiles.values():
        assert prof.scaled_residual_norm() <= 1e-6


def test_monotone_truncation():
    dom = cap(np.pi / 3)
    gs = []
    for M in (1e2, 1e3):
        prof = solve_profile(dom, 3, schedule=[M], grid=MEDIUM, max_levels=1)
        gs.append(prof.g)
    assert np.all(gs[0] <= gs[1] + 1e-10)


def test_domain_monotonicity():
    small = solve_profile(cap(np.pi / 3), 3, grid=MEDIUM)
    large = solve_profile(cap(np.pi / 2), 3, grid=MEDIUM)
    from scipy.interpolate import CubicSpline

    interp = CubicSpline(large.theta[:-1], large.g[:-1])
    inner = small.theta < np.pi / 3 - 0.05
    assert np.all(small.g[inner] >= interp(small.theta[inner]) - 1e-10)


def test_cone_solution_halfspace_axis(half_sphere_profiles):
    val = cone_solution(half_sphere_profiles[3], 4.0, 0.0)
    assert abs(val - 0.5) < 1e-5


@pytest.mark.parametrize("n", [3, 6])
def test_cone_solution_homogeneity(n, half_sphere_profiles):
    prof = half_sphere_profiles[n]
    v1 = cone_solution(prof, 0.3, 0.7)
    v2 = cone_solution(prof, 1.2, 0.7)
    assert abs(v2 / v1 - 2.0 ** (-(n - 2.0))) < 1e-12


def test_cone_solution_interpolation_consistency(cap_pi3_n3_profile):
    prof = cap_pi3_n3_profile
    # spline at nodes reproduces node values; between nodes it stays within
    # interpolation error of a fine-grid node evaluation
    j = np.searchsorted(prof.theta, np.pi / 6)
    at_node = cone_solution(prof, 1.0, prof.theta[j])
    assert abs(at_node - prof.g[j]) < 1e-12
    fine = solve_profile(prof.domain, 3, grid=GridSpec(6400, 2.0))
    v_coarse = cone_solution(prof, 1.0, np.pi / 6)
    v_fine = cone_solution(fine, 1.0, np.pi / 6)
    assert abs(v_coarse / v_fine - 1.0) < 1e-6


def test_cone_solution_guard_near_wall(cap_pi3_n3_profile):
    theta_bad = cap_pi3_n3_profile.theta[-1] - 1e-9
    with pytest.raises(DomainError):
        cone_solution(cap_pi3_n3_profile, 1.0, theta_bad)
    with pytest.raises(DomainError):
        cone_solution(cap_pi3_n3_profile, -1.0, 0.5)


def test_rho_bounds_half_sphere(half_sphere_profiles):
    # rho = cos(theta) = sin(d): the ratio approaches 1 at the wall
    c1, c2 = check_rho_bounds(half_sphere_profiles[3])
    assert c1 >= np.sin(0.2) / 0.2 - 1e-3
    assert c1 <= c2
    d = half_sphere_profiles[3].wall_distance()
    mask = (d > 0.01) & (d < 0.05)
    ratio = half_sphere_profiles[3].rho[mask] / d[mask]
    assert np.max(np.abs(ratio - 1.0)) < 5e-3


def test_rho_bounds_wedge_two_resolutions():
    dom = SphericalDomain1D("circle-arc", 0.0, np.pi / 2)
    vals = []
    for count in (1600, 3200):
        prof = solve_profile(dom, 3, grid=GridSpec(count, 2.0))
        vals.append(check_rho_bounds(prof))
    assert abs(vals[0][0] - vals[1][0]) < 1e-2
    for c1, c2 in vals:
        assert 0 < c1 <= c2 < 1e6


def test_bad_configurations():
    with pytest.raises(ConfigError):
        SphericalDomain1D("polar-sphere", 0.5, 0.2)
    with pytest.raises(ConfigError):
        SphericalDomain1D("polar-sphere", 0.1, 1.0, bc_lo="regular-pole")
    with pytest.raises(ConfigError):
        SphericalDomain1D("circle-arc", 0.0, 1.0, bc_lo="regular-pole")
    with pytest.raises(ConfigError):
        SphericalDomain1D("klein-bottle", 0.0, 1.0)
    with pytest.raises(ConfigError):
        solve_profile(cap(1.0), 3, schedule=[1e3, 1e2], grid=MEDIUM)
    with pytest.raises(ConfigError):
        solve_profile(cap(1.0), 2, grid=MEDIUM)
    with pytest.raises(ConfigError):
        GridSpec(count=100)


def test_graded_nodes_cluster_toward_blowup():
    dom = cap(1.0)
    theta = graded_nodes(dom, 400, 2.0)
    gaps = np.diff(theta)
    assert gaps[-1] < gaps[0] / 50
    dom2 = band(0.5, 2.0)
    theta2 = graded_nodes(dom2, 400, 2.0)
    gaps2 = np.diff(theta2)
    assert gaps2[0] < gaps2[200] / 50 and gaps2[-1] < gaps2[200] / 50


def test_serialization_roundtrip(tmp_path, cap_pi3_n3_profile):
    path = tmp_path / "profile.csv"
    profile_to_csv(cap_pi3_n3_profile, path)
    back = profile_from_csv(path)
    assert back.n == cap_pi3_n3_profile.n
    assert np.allclose(back.g, cap_pi3_n3_profile.g, rtol=0, atol=0)
    assert back.domain.geometry == "polar-sphere"


def test_rho_bound_failure_detection():
    prof = solve_profile(cap(1.0), 3, grid=MEDIUM)
    prof.rho = prof.rho * 1e9  # corrupt the weight
    with pytest.raises(BoundFailureError):
        check_rho_bounds(prof)
