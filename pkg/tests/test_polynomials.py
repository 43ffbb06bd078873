import numpy as np
import pytest

from blowlab.polynomials import Polynomial


def test_algebra_and_eval():
    r2 = Polynomial.radius_squared(3)
    pts = np.array([[1.0, 2.0, 3.0], [0.5, 0.0, -0.5]])
    assert np.allclose(r2(pts), [14.0, 0.5])
    p = (1.0 + 0.3 * r2) ** 2
    expected = (1.0 + 0.3 * np.sum(pts**2, axis=1)) ** 2
    assert np.allclose(p(pts), expected)
    q = p - Polynomial.constant(3, 1.0)
    assert q.min_degree() == 2
    assert q.degree() == 4


def test_derivatives_exact():
    x = Polynomial.coordinate(3, 0)
    y = Polynomial.coordinate(3, 1)
    p = x * x * y + 2.0 * y
    dp_dx = p.derivative(0)
    dp_dy = p.derivative(1)
    pt = np.array([1.5, -2.0, 0.3])
    assert dp_dx(pt) == pytest.approx(2 * 1.5 * -2.0)
    assert dp_dy(pt) == pytest.approx(1.5**2 + 2.0)
    hess = p.hessian()
    assert hess[0][0](pt) == pytest.approx(2 * -2.0)
    assert hess[0][1](pt) == pytest.approx(2 * 1.5)
    assert hess[2][2](pt) == pytest.approx(0.0)


def test_validation():
    with pytest.raises(ValueError):
        Polynomial(2, {(1,): 1.0})
    with pytest.raises(ValueError):
        Polynomial(2, {(-1, 0): 1.0})
    with pytest.raises(ValueError):
        Polynomial.coordinate(2, 0) ** -1
