import math

import numpy as np
import pytest

from jacobiflow import (Domain, IntegratorOptions, NotInImageError, ParticleState,
                        discriminant, esp_closed_form, esp_invert, integrate_interior,
                        integrate_noncompact, jacobi_zeros, lyapunov_check, moment_ode_oracle,
                        solve_from_boundary)
from jacobiflow.detflow import esp_forward, log_abs_discriminant, log_potential
from jacobiflow.errors import GrowthGuardError
from jacobiflow.jacobi_poly import JacobiParams
from jacobiflow.moments import MomentVector, empirical_moments


def random_interior(rng, N, lo=-0.95, hi=0.95):
    while True:
        x = np.sort(rng.uniform(lo, hi, N))
        if N == 1 or np.min(np.diff(x)) > 1e-3:
            return x


def test_scalar_compact_exact():
    t = np.linspace(0, 1, 11)
    tr = integrate_interior([0.5], 3.0, 2.0, times=t)
    assert np.allclose(tr.coords[:, 0], 0.2 + 0.3 * np.exp(-5 * t), rtol=1e-9, atol=1e-12)


def test_scalar_noncompact_exact():
    t = np.linspace(0, 1, 11)
    tr = integrate_noncompact([2.0], 3.0, 2.0, times=t)
    # dx/dt = (q-p) + (q+p) x has its fixed point at (p-q)/(p+q) = 0.2
    assert np.allclose(tr.coords[:, 0], 0.2 + 1.8 * np.exp(5 * t), rtol=1e-9)
    assert tr.coords[1, 0] > tr.coords[0, 0]


def test_long_time_limit():
    rng = np.random.default_rng(11)
    p = q = 10.0
    z = jacobi_zeros(JacobiParams(5, 5.0, 5.0))
    tr = integrate_interior(random_interior(rng, 5), p, q, t_end=20 / (p + q - 4))
    assert np.max(np.abs(tr.coords[-1] - z)) < 1e-8


@pytest.mark.parametrize("N, p, q", [(3, 5.0, 4.0), (6, 9.0, 13.0), (8, 30.0, 8.5)])
def test_oracle_equivalence(N, p, q):
    rng = np.random.default_rng(N)
    x0 = random_interior(rng, N)
    ts = np.linspace(0, 1.0 / (p + q), 50)
    tr = integrate_interior(x0, p, q, times=ts)
    a, b = 1.3, 0.1
    S0 = empirical_moments(x0, a, b, 8)
    orc = moment_ode_oracle(S0, p, q, a, b, N, ts)
    gap = max(np.max(np.abs(empirical_moments(tr.coords[i], a, b, 8).values - orc[i].values))
              for i in range(ts.size))
    assert gap < 1e-6


def test_ordering_preserved():
    rng = np.random.default_rng(5)
    x0 = random_interior(rng, 12)
    tr = integrate_interior(x0, 14.0, 12.5, times=np.linspace(0, 0.3, 40))
    assert np.all(np.diff(tr.coords, axis=1) > 0)
    assert tr.stats["min_log_abs_disc"] > -math.inf


def test_esp_forward_examples():
    assert np.allclose(esp_forward(np.zeros(4)), 0)
    assert np.allclose(esp_forward([1.0, 2.0, 3.0]), [6, 11, 6])
    rng = np.random.default_rng(2)
    x = rng.normal(size=6)
    coef = np.poly(x)  # monic, coefficients of prod (z - x_i)
    signs = (-1.0) ** np.arange(1, 7)
    assert np.allclose(esp_forward(x), coef[1:] * signs, rtol=1e-12, atol=1e-12)


def test_esp_invert_examples():
    assert np.allclose(esp_invert([6.0, 11.0, 6.0]).coords, [1, 2, 3])
    rng = np.random.default_rng(4)
    for N in range(1, 11):
        x = random_interior(rng, N, -0.9, 0.9)
        assert np.allclose(esp_invert(esp_forward(x)).coords, x, atol=1e-10)
    with pytest.raises(NotInImageError):
        esp_invert([0.0, 1.0])  # z^2 + 1


def test_esp_invert_double_root():
    x = np.array([-0.4, 0.25, 0.25, 0.7])
    back = esp_invert(esp_forward(x)).coords
    assert np.allclose(back, x, atol=1e-7)


def test_esp_closed_form_anchors():
    p, q, N = 7.0, 4.0, 3
    x0 = np.array([-0.6, 0.1, 0.5])
    traj = esp_closed_form(esp_forward(x0), p, q)
    assert np.allclose(traj(0.0), esp_forward(x0), rtol=0, atol=1e-15)
    e1 = traj.components[0]
    assert set(np.round(e1.rates, 12)) <= {0.0, -(p + q)}
    assert e1(1e3) == pytest.approx(N * (p - q) / (p + q))
    ts = np.linspace(0, 2, 9)
    tr = integrate_interior(x0, p, q, times=ts)
    for i, t in enumerate(ts):
        assert np.allclose(esp_forward(tr.coords[i]), traj(t), atol=1e-8)


def test_esp_noncompact_growth():
    p, q = 3.5, 2.5
    x0 = np.array([1.2, 2.0])
    traj = esp_closed_form(esp_forward(x0), p, q, Domain.NoncompactChamber)
    assert max(traj.components[0].rates) == pytest.approx(p + q)
    ts = np.linspace(0, 0.5, 6)
    tr = integrate_noncompact(x0, p, q, times=ts)
    e1 = tr.coords.sum(axis=1)
    k = 2 * (p - q) / (p + q)
    closed = k + (x0.sum() - k) * np.exp((p + q) * ts)
    assert np.allclose(e1, closed, rtol=1e-8)
    assert np.allclose(e1, traj(ts)[:, 0], rtol=1e-8)


def test_growth_guard():
    with pytest.raises(GrowthGuardError):
        integrate_noncompact([1.5, 3.0], 3.0, 2.0, t_end=20.0,
                             opts=IntegratorOptions(growth_guard=1e6))


def test_discriminant_examples():
    assert discriminant([0.1, 0.1, 0.5]) == 0.0
    assert discriminant([0.1, 1.0]) == 0.0
    assert discriminant([-0.5, 0.5]) == pytest.approx(-0.5625)
    s, logd = log_abs_discriminant([-0.5, 0.5])
    assert s == -1.0 and logd == pytest.approx(math.log(0.5625))


def test_boundary_split():
    ts = np.linspace(0, 0.05, 30)
    tr = solve_from_boundary([0.3, 0.3], 4.0, 4.0, times=ts)
    assert np.all(np.diff(tr.coords[1:], axis=1) > 0)
    assert np.allclose(tr.coords[0], [0.3, 0.3])


def test_boundary_to_zeros():
    p = q = 5.0
    tr = solve_from_boundary([-1.0, -1.0, 1.0], p, q, t_end=20 / (p + q - 2))
    assert np.max(np.abs(tr.coords[-1] - jacobi_zeros(JacobiParams(3, 2.0, 2.0)))) < 1e-7


def test_boundary_noncompact():
    p, q = 4.0, 3.0
    ts = np.linspace(0, 0.2, 11)
    tr = solve_from_boundary([1.0, 1.0], p, q, Domain.NoncompactChamber, times=ts)
    assert np.all(tr.coords[1:, 0] > 1) and np.all(np.diff(tr.coords[1:], axis=1) > 0)
    k = 2 * (p - q) / (p + q)
    assert np.allclose(tr.coords.sum(axis=1), k + (2 - k) * np.exp((p + q) * ts), rtol=1e-7)


def test_lyapunov():
    p, q = 9.0, 6.0
    z = jacobi_zeros(JacobiParams.from_model(5, p, q))
    flat = integrate_interior(z, p, q, times=np.linspace(0, 1, 5))
    assert np.ptp(lyapunov_check(flat).values) < 1e-9
    rng = np.random.default_rng(8)
    tr = integrate_interior(random_interior(rng, 5), p, q, times=np.linspace(0, 3, 60))
    rep = lyapunov_check(tr)
    assert rep.monotone and rep.min_increment >= -1e-10
    assert rep.values[-1] == pytest.approx(log_potential(z, p, q), abs=1e-8)


def test_csv_is_reproducible():
    ts = np.linspace(0, 0.1, 5)
    a = integrate_interior([-0.2, 0.4], 3.0, 3.5, times=ts).to_csv()
    b = integrate_interior([-0.2, 0.4], 3.0, 3.5, times=ts).to_csv()
    assert a == b and a.splitlines()[0] == "t,x_1,x_2"
