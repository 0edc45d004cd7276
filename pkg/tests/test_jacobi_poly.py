import math

import numpy as np
import pytest
from scipy.special import eval_jacobi as sp_jacobi, gammaln, poch

from jacobiflow.jacobi_poly import JacobiParams, eval_jacobi, jacobi_zeros


def series_jacobi(n, a, b, x):
    # hypergeometric form: (a+1)_n/n! 2F1(-n, n+a+b+1; a+1; (1-x)/2)
    z = (1 - x) / 2
    tot = 0.0
    for k in range(n + 1):
        term = poch(-n, k) * poch(n + a + b + 1, k) / (poch(a + 1, k) * math.factorial(k))
        tot += term * z ** k
    return poch(a + 1, n) / math.factorial(n) * tot


def test_degree_zero_and_symmetry():
    assert eval_jacobi(JacobiParams(0, 2.0, 0.3), 0.7) == 1.0
    assert eval_jacobi(JacobiParams(1, 1.5, 1.5), 0.0) == 0.0


def test_against_series():
    jp = JacobiParams(3, 0.5, 1.5)
    assert eval_jacobi(jp, 0.3) == pytest.approx(series_jacobi(3, 0.5, 1.5, 0.3), rel=1e-13)


@pytest.mark.parametrize("n, a, b", [(4, 0.0, 0.0), (7, 2.5, -0.5), (12, 30.0, 5.0)])
def test_against_scipy(n, a, b):
    xs = np.linspace(-0.99, 0.99, 21)
    got = eval_jacobi(JacobiParams(n, a, b), xs)
    assert np.allclose(got, sp_jacobi(n, a, b, xs), rtol=1e-11, atol=1e-11)


def test_invalid_params():
    with pytest.raises(ValueError):
        JacobiParams(2, -1.0, 0.0)
    with pytest.raises(ValueError):
        JacobiParams(0, 1.0, 1.0).__class__(-1, 1.0, 1.0)


def test_linear_zero():
    a, b = 2.0, 0.5
    z = jacobi_zeros(JacobiParams(1, a, b))
    assert z[0] == pytest.approx((b - a) / (a + b + 2))


def test_quadratic_zeros():
    a = 3.0
    z = jacobi_zeros(JacobiParams(2, a, a))
    r = 1 / math.sqrt(2 * a + 3)
    assert np.allclose(z, [-r, r], atol=1e-15)


def test_degree5_sign_changes():
    jp = JacobiParams(5, 5.0, 5.0)
    z = jacobi_zeros(jp)
    assert np.allclose(z, -z[::-1], atol=1e-15)
    grid = np.linspace(-1, 1, 20000)
    v = eval_jacobi(jp, grid)
    flips = grid[:-1][np.sign(v[:-1]) != np.sign(v[1:])]
    assert flips.size == 5
    assert np.allclose(flips, z, atol=2e-4)


@pytest.mark.parametrize("n, a, b", [(10, 0.0, 0.0), (40, 3.0, 60.0), (200, 1e4, 1e3)])
def test_zeros_are_roots(n, a, b):
    jp = JacobiParams(n, a, b)
    z = jacobi_zeros(jp)
    assert np.all(np.diff(z) > 0) and -1 < z[0] and z[-1] < 1
    # residual relative to |P_n'| * spacing, the natural scale of the root error
    h = 1e-7 * np.minimum(np.diff(np.r_[-1, z]), np.diff(np.r_[z, 1]))
    dv = (eval_jacobi(jp, z + h) - eval_jacobi(jp, z - h)) / (2 * h)
    assert np.max(np.abs(eval_jacobi(jp, z) / dv)) < 1e-12


def test_interlacing():
    for n in (3, 8, 15):
        hi = jacobi_zeros(JacobiParams(n, 1.2, 4.0))
        lo = jacobi_zeros(JacobiParams(n - 1, 1.2, 4.0))
        assert np.all(hi[:-1] < lo) and np.all(lo < hi[1:])
