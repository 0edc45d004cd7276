import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jacobiflow import (DomainError, Regime, RegimeLimitSpec, cumulants_to_moments, evaluate,
                        free_add, limit_recursion, moments_to_cumulants, mp_moments,
                        predict_limit, semicircle_moments)
from jacobiflow.errors import ConfigError
from jacobiflow.freeprob import (Dirac, EmpiricalMoments, EvenSqrt, FreeAdd, MarchenkoPastur,
                                 Scale, Semicircle, Square, catalan, dirac_moments, even_sqrt,
                                 expr_from_json, expr_to_json, scale_measure, square_measure)
from jacobiflow.moments import MomentVector
from test_moments import ALL_CONSTANTS

cumulant_lists = st.lists(st.floats(-2, 2), min_size=6, max_size=6)


def test_semicircle_cumulants():
    k = moments_to_cumulants(semicircle_moments(2.0, 8))
    assert np.allclose(k, [0, 0, 1, 0, 0, 0, 0, 0, 0], atol=1e-14)
    assert np.allclose(moments_to_cumulants(dirac_moments(0.7, 5)), [0, 0.7, 0, 0, 0, 0],
                       atol=1e-14)


def test_mp_cumulants():
    c, t = 1.6, 0.45
    k = moments_to_cumulants(mp_moments(c, t, 7))
    assert np.allclose(k[1:], c * t ** np.arange(1, 8), rtol=1e-13)


def test_cumulants_to_moments_examples():
    assert np.allclose(cumulants_to_moments([0, 0, 1, 0, 0, 0, 0]).values, [1, 0, 1, 0, 2, 0, 5])
    t = 0.8
    m = cumulants_to_moments(t ** np.arange(5)).values
    assert np.allclose(m[1:4], [t, 2 * t ** 2, 5 * t ** 3])


@settings(max_examples=50, deadline=None)
@given(cumulant_lists)
def test_round_trip(ks):
    k = np.array([0.0] + ks)
    assert np.allclose(moments_to_cumulants(cumulants_to_moments(k)), k, atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(cumulant_lists, cumulant_lists, cumulant_lists)
def test_free_add_commutes_and_associates(a, b, c):
    A, B, C = (cumulants_to_moments([0.0] + x) for x in (a, b, c))
    ab = free_add(A, B).values
    assert np.allclose(ab, free_add(B, A).values, rtol=1e-12, atol=1e-12)
    left = free_add(free_add(A, B), C).values
    right = free_add(A, free_add(B, C)).values
    assert np.allclose(left, right, rtol=1e-12, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(cumulant_lists, cumulant_lists, st.floats(-3, 3))
def test_scaling_rules(a, b, v):
    A, B = (cumulants_to_moments([0.0] + x) for x in (a, b))
    lhs = scale_measure(free_add(A, B), v).values
    rhs = free_add(scale_measure(A, v), scale_measure(B, v)).values
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)
    kv = moments_to_cumulants(scale_measure(A, v))
    assert np.allclose(kv, moments_to_cumulants(A) * v ** np.arange(7), rtol=1e-10, atol=1e-10)


def test_free_add_examples():
    assert np.allclose(free_add(dirac_moments(0.3, 6), dirac_moments(-1.1, 6)).values,
                       dirac_moments(-0.8, 6).values)
    assert np.allclose(free_add(mp_moments(0.4, 1.5, 8), mp_moments(1.1, 1.5, 8)).values,
                       mp_moments(1.5, 1.5, 8).values, rtol=1e-13)
    l1, l2 = 1.0, 2.5
    assert np.allclose(free_add(semicircle_moments(l1, 8), semicircle_moments(l2, 8)).values,
                       semicircle_moments(math.hypot(l1, l2), 8).values, rtol=1e-13)


def test_scale_examples():
    sc = semicircle_moments(1.7, 8)
    assert np.array_equal(scale_measure(sc, 1.0).values, sc.values)
    assert np.allclose(scale_measure(sc, -1.0).values, sc.values)
    assert scale_measure(mp_moments(1, 1, 4), -2.0).support == "real"


def test_even_sqrt_examples():
    assert np.allclose(even_sqrt(dirac_moments(1.0, 4)).values, [1, 0, 1, 0, 1, 0, 1, 0, 1])
    assert np.allclose(even_sqrt(dirac_moments(0.0, 3)).values, dirac_moments(0.0, 6).values)
    es = even_sqrt(mp_moments(1.0, 1.0, 3)).values
    assert np.allclose(es[[2, 4, 6]], [1, 2, 5])
    with pytest.raises(DomainError):
        even_sqrt(semicircle_moments(1.0, 4))


def test_square_examples():
    bern = even_sqrt(dirac_moments(1.0, 4))
    assert np.allclose(square_measure(bern).values, dirac_moments(1.0, 4).values)
    for lam in (1.0, 2.0, 2 * math.sqrt(2)):
        sq = square_measure(semicircle_moments(lam, 10)).values
        assert np.allclose(sq, mp_moments(1.0, lam ** 2 / 4, 5).values, rtol=1e-12)
    mu = mp_moments(0.7, 2.0, 5)
    assert np.allclose(square_measure(even_sqrt(mu)).values, mu.values)
    with pytest.raises(DomainError, match="symmetric"):
        square_measure(dirac_moments(0.5, 6))


def test_family_examples():
    assert np.allclose(semicircle_moments(2.0, 6).values, [1, 0, 1, 0, 2, 0, 5])
    assert np.allclose(semicircle_moments(0.0, 6).values, dirac_moments(0.0, 6).values)
    assert semicircle_moments(2 * math.sqrt(2), 2)[2] == pytest.approx(2.0)
    assert np.allclose(mp_moments(1, 1, 2).values, [1, 1, 2])
    assert np.allclose(mp_moments(0, 1, 4).values, [1, 0, 0, 0, 0])
    assert np.allclose(mp_moments(2, 1, 2).values, [1, 2, 6])
    assert [catalan(k) for k in range(6)] == [1, 1, 2, 5, 14, 42]


def test_expression_json_round_trip():
    expr = FreeAdd((Square(FreeAdd((Semicircle(1.5), EvenSqrt(Scale(0.5, Dirac(0.0)))))),
                    MarchenkoPastur(0.3, 2.0),
                    EmpiricalMoments((1.0, 0.1, 0.2, 0.1, 0.3, 0.1, 0.5))))
    back = expr_from_json(expr_to_json(expr))
    assert back == expr
    assert np.allclose(evaluate(back, 6).values, evaluate(expr, 6).values)
    with pytest.raises(ConfigError):
        expr_from_json({"node": "Semicircle", "radius": 1.0, "colour": "red"})
    with pytest.raises(ConfigError):
        expr_from_json({"node": "Wachter"})


@pytest.mark.parametrize("regime", list(ALL_CONSTANTS))
def test_prediction_matches_recursion(regime):
    mu = mp_moments(0.8, 0.6, 8) if regime.is_mp else semicircle_moments(0.9, 8)
    for t in (0.0, 0.25, 0.5, 1.0, 2.0):
        pred = predict_limit(regime, t, mu, ALL_CONSTANTS[regime], 8).values
        rec = limit_recursion(RegimeLimitSpec(regime, t, mu, ALL_CONSTANTS[regime])).values
        scale = np.maximum(1.0, np.abs(rec))
        assert np.max(np.abs(pred - rec) / scale) < 1e-8


def test_wigner_stationary_anchors():
    mu = semicircle_moments(0.6, 8)
    C = 1.5
    assert np.allclose(predict_limit(Regime.WignerStationary, 0.0, mu, {"C": C}, 8).values,
                       mu.values, atol=1e-15)
    far = predict_limit(Regime.WignerStationary, 40.0, mu, {"C": C}, 8).values
    assert np.allclose(far, semicircle_moments(4 * (1 + C) ** -1.5, 8).values, atol=1e-10)


def test_mp_stationary_from_dirac():
    ph, t = 2.2, 0.7
    pred = predict_limit(Regime.MPStationary, t, dirac_moments(0.0, 8), {"p_hat": ph}, 8)
    assert np.allclose(pred.values, mp_moments(ph, 2 * (1 - math.exp(-t)), 8).values, rtol=1e-12)


def test_mp_local_partial_fractions():
    # the decomposition holds for p_hat = 1; other p_hat add MP(p_hat - 1, 2t)
    r, s, t = 0.6, 0.8, 0.35
    pred = predict_limit(Regime.MPLocal, t, mp_moments(r, s, 8), {"p_hat": 1.0}, 8).values
    want = free_add(mp_moments(r, 2 * t + s, 8), mp_moments(1 - r, 2 * t, 8)).values
    assert np.allclose(pred, want, rtol=1e-10)
    ph = 2.5
    pred = predict_limit(Regime.MPLocal, t, mp_moments(r, s, 8), {"p_hat": ph}, 8).values
    assert np.allclose(pred, free_add(MomentVector(want), mp_moments(ph - 1, 2 * t, 8)).values,
                       rtol=1e-10)


def test_mp_regime_needs_nonnegative_start():
    with pytest.raises(DomainError):
        predict_limit(Regime.MPLocal, 0.5, semicircle_moments(1.0, 6), {"p_hat": 2.0}, 6)
