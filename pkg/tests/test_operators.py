import numpy as np
import pytest

from blowlab.errors import ConfigError, DomainError
from blowlab.operators import (
    MetricFamily,
    OperatorSpec,
    TensorMesh,
    apply_operator,
    conformal_operator,
    conformal_quadratic_metric,
    euclidean_operator,
    scalar_curvature,
    structure_constant,
)
from blowlab.polynomials import Polynomial


def conformal_curvature_oracle(n, q, pts):
    # S = -(4(n-1)/(n-2)) u^(-(n+2)/(n-2)) Lap u with u = 1 + q|x|^2
    u = 1.0 + q * np.sum(pts**2, axis=1)
    return -(4.0 * (n - 1.0) / (n - 2.0)) * u ** (-(n + 2.0) / (n - 2.0)) * 2 * n * q


@pytest.mark.parametrize("n,q", [(3, 0.3), (4, 0.2), (6, 0.3)])
def test_scalar_curvature_against_conformal_identity(n, q):
    met = conformal_quadratic_metric(n, q)
    pts = np.vstack([np.zeros(n), 0.1 * np.arange(1, n + 1) / n,
                     0.3 * np.eye(n)[0]])
    s = scalar_curvature(met, pts)
    oracle = conformal_curvature_oracle(n, q, pts)
    assert np.max(np.abs(s / oracle - 1.0)) < 1e-8
    assert s[0] == pytest.approx(-8.0 * n * (n - 1.0) * q / (n - 2.0), rel=1e-10)


def test_curvature_richardson_guard():
    # sane metrics agree between steps; no exception
    met = conformal_quadratic_metric(3, 0.5)
    scalar_curvature(met, np.array([[0.2, 0.1, -0.1]]))


def test_metric_validation():
    n = 3
    zero = Polynomial.zero(n)
    linear = Polynomial.coordinate(n, 0)
    h = [[linear if i == j == 0 else zero for j in range(n)] for i in range(n)]
    with pytest.raises(ConfigError):
        MetricFamily(n=n, h=h)
    asym = [[zero for _ in range(n)] for _ in range(n)]
    asym[0][1] = Polynomial.radius_squared(n)
    with pytest.raises(ConfigError):
        MetricFamily(n=n, h=asym)
    with pytest.raises(ConfigError):
        conformal_quadratic_metric(5, 0.1)  # 4/(n-2) not an integer


def test_structure_constants():
    assert structure_constant(euclidean_operator(3), 1.0) == 0.0
    n = 3

    def drift_b(pts):
        out = np.zeros((pts.shape[0], n))
        out[:, 0] = np.linalg.norm(pts, axis=1)
        return out

    drift = OperatorSpec(n=n, a=euclidean_operator(n).a, b=drift_b,
                         c=lambda p: np.zeros(p.shape[0]), label="drift")
    assert structure_constant(drift, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_conformal_structure_constant_stable():
    op = conformal_operator(conformal_quadratic_metric(3, 0.3))
    assert op.c_l is not None and np.isfinite(op.c_l)
    again = structure_constant(op, 1.0, samples=8192, seed=77)
    assert abs(again / op.c_l - 1.0) < 0.01


def test_structure_inequality_resampled():
    op = conformal_operator(conformal_quadratic_metric(3, 0.3))
    from blowlab.operators import _ball_samples

    pts = _ball_samples(3, 1.0, 2048, seed=1234, exclude_inner=1e-4)
    a, b, c = op.coefficients(pts)
    r = np.linalg.norm(pts, axis=1)
    lhs = (np.sum(np.abs(a - np.eye(3)), axis=(1, 2)) + r * np.sum(np.abs(b), axis=1)
           + r**2 * np.abs(c))
    assert np.all(lhs <= op.c_l * r**2 * (1.0 + 1e-9))


def test_ellipticity_within_ball():
    op = conformal_operator(conformal_quadratic_metric(3, 0.3))
    from blowlab.operators import _ball_samples

    radius = 0.3
    pts = _ball_samples(3, radius, 512, seed=3)
    a, _, _ = op.coefficients(pts)
    eigs = np.linalg.eigvalsh(a)
    assert np.min(eigs) >= 1.0 - op.c_l * radius**2
    assert np.min(eigs) > 0


def test_apply_halfspace_solution():
    # u = x3^(-1/2) solves Lap u = 3/4 u^5; scaled residual below 1e-6
    n = 3
    axes = (np.linspace(0.0, 0.2, 5), np.linspace(0.0, 0.2, 5),
            np.linspace(0.3, 0.8, 401))
    mesh = TensorMesh(axes)
    pts = mesh.points()
    fld = (pts[:, 2] ** -0.5).reshape(mesh.shape)
    lap = apply_operator(euclidean_operator(n), fld, mesh)
    res = lap - 0.75 * fld**5
    x3 = pts[:, 2].reshape(mesh.shape)
    interior = np.zeros(mesh.shape, dtype=bool)
    interior[1:-1, 1:-1, 1:-1] = True
    assert np.max(np.abs(res[interior]) * x3[interior] ** 4.5) < 1e-6


def test_apply_ball_solution_identity():
    # Lap u_R = n(n-2)/4 u_R^((n+2)/(n-2)) to discretization order
    from blowlab.solver import exact_ball

    n, R = 3, 1.0
    axes = tuple(np.linspace(-0.35, 0.35, 57) for _ in range(3))
    mesh = TensorMesh(axes)
    pts = mesh.points()
    u = exact_ball(n, R, pts).reshape(mesh.shape)
    lap = apply_operator(euclidean_operator(n), u, mesh)
    res = lap - 0.75 * u**5
    interior = np.zeros(mesh.shape, dtype=bool)
    interior[1:-1, 1:-1, 1:-1] = True
    assert np.max(np.abs(res[interior]) / np.abs(lap[interior])) < 1e-3


def test_apply_constant_field():
    mesh = TensorMesh(tuple(np.linspace(0, 1, 9) for _ in range(3)))
    fld = np.full(mesh.shape, 2.5)
    out = apply_operator(euclidean_operator(3), fld, mesh)
    assert np.max(np.abs(out)) < 1e-12


def test_apply_second_order_convergence():
    n = 3
    errs = []
    hs = []
    for count in (21, 41, 81):
        axes = tuple(np.linspace(0.2, 1.0, count) for _ in range(n))
        mesh = TensorMesh(axes)
        pts = mesh.points()
        u = np.exp(pts[:, 0]) * np.sin(pts[:, 1] + 0.3 * pts[:, 2])
        lap_exact = (np.exp(pts[:, 0]) * np.sin(pts[:, 1] + 0.3 * pts[:, 2])
                     * (1.0 - 1.0 - 0.09))
        lap = apply_operator(euclidean_operator(n), u.reshape(mesh.shape), mesh)
        interior = np.zeros(mesh.shape, dtype=bool)
        interior[1:-1, 1:-1, 1:-1] = True
        errs.append(np.max(np.abs(lap - lap_exact.reshape(mesh.shape))[interior]))
        hs.append(0.8 / (count - 1))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 2.0) <= 0.1


def test_apply_shape_mismatch():
    mesh = TensorMesh(tuple(np.linspace(0, 1, 9) for _ in range(3)))
    with pytest.raises(ConfigError):
        apply_operator(euclidean_operator(3), np.zeros((4, 4, 4)), mesh)


def test_structure_constant_radius_guard():
    op = euclidean_operator(3)
    with pytest.raises(DomainError):
        structure_constant(op, 5.0)
