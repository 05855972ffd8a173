from math import factorial

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, interpolate, stats

from bmapbulk.errors import (DegenerateApproximant, InvalidModelError,
                             InvalidSubGenerator, PoleEvaluation)
from bmapbulk.service import (ServicePolicy, lst_eval, make_deterministic,
                              make_exponential, make_phase_type,
                              pade_exp_coefficients, uniformization_weights)

BETA = np.array([0.2, 0.8])
T0 = np.array([[-1.0, 1.0], [0.0, -1.0]])


def _ph_lst(beta, T, theta):
    t = -T.sum(axis=1)
    return beta @ np.linalg.solve(theta * np.eye(len(beta)) - T, t)


@pytest.mark.parametrize("theta", [0.0, 0.3, 2.0, 1.5 + 0.7j])
def test_phase_type_transform(theta):
    law = make_phase_type(BETA, T0, scale=0.245)
    assert lst_eval(law, theta) == pytest.approx(_ph_lst(BETA, 0.245 * T0, theta), abs=1e-14)


def test_phase_type_mean():
    mu = 0.035 * 7
    law = make_phase_type(BETA, T0, scale=mu)
    assert law.mean == pytest.approx(1.2 / mu, rel=1e-14)
    h = 1e-6
    fd = -(lst_eval(law, h) - lst_eval(law, -h)) / (2 * h)
    assert fd == pytest.approx(law.mean, rel=1e-8)


def test_exponential():
    law = make_exponential(2.0)
    assert law.mean == pytest.approx(0.5)
    assert lst_eval(law, 1.0) == pytest.approx(2.0 / 3.0)
    assert_allclose(law.poles, [-2.0])


def test_phase_type_with_atom():
    law = make_phase_type([0.5], [[-1.0]])
    assert lst_eval(law, 0.0) == pytest.approx(1.0)
    assert lst_eval(law, 1.0) == pytest.approx(0.5 + 0.25)


@pytest.mark.parametrize("beta,T", [
    ([1.0], [[1.0]]),
    ([1.0], [[-1.0, 0.0], [0.0, -1.0]]),
    ([0.5, 0.6], [[-1.0, 0.0], [0.0, -1.0]]),
    ([1.0, 0.0], [[-1.0, -0.5], [0.0, -1.0]]),
    ([1.0, 0.0], [[-1.0, 1.0], [1.0, -1.0]]),
])
def test_invalid_subgenerators(beta, T):
    with pytest.raises(InvalidSubGenerator):
        make_phase_type(beta, T)


def test_pade_coefficients_against_scipy():
    k, ell = 4, 5
    taylor = [(-1) ** j / factorial(j) for j in range(k + ell + 1)]
    p, q = interpolate.pade(taylor, ell, k)
    num, den = pade_exp_coefficients(k, ell)
    x = np.linspace(0.0, 3.0, 13)
    assert_allclose(np.polyval(num[::-1], x) / np.polyval(den[::-1], x), p(x) / q(x), rtol=1e-12)


@pytest.mark.parametrize("order", [(4, 5), (6, 7)])
def test_deterministic_close_to_exponential(order):
    tau = 4.0 / 7.0
    law = make_deterministic(tau, order)
    k, ell = order
    # Taylor coefficients of P/Q agree with exp(-x) through order k + l
    num, den = law.lst_num, law.lst_den
    series = np.zeros(k + ell + 2)
    for j in range(len(series)):
        acc = num[j] if j < len(num) else 0.0
        acc -= sum(den[i] * series[j - i] for i in range(1, min(j, len(den) - 1) + 1))
        series[j] = acc / den[0]
    exact = np.array([(-tau) ** j / factorial(j) for j in range(len(series))])
    assert_allclose(series[:-1], exact[:-1], rtol=1e-10, atol=1e-15)
    assert abs(series[-1] - exact[-1]) > 1e-6 * abs(exact[-1])
    theta = np.linspace(0.0, 10.0, 41)
    assert np.max(np.abs(lst_eval(law, theta) - np.exp(-theta * tau))) < 1e-3
    assert lst_eval(law, 0.3) == pytest.approx(np.exp(-0.3 * tau), abs=1e-9)
    assert law.mean == pytest.approx(tau, abs=1e-10)


def test_deterministic_lst_bounded():
    law = make_deterministic(1.0)
    theta = np.linspace(0.0, 50.0, 501)
    assert np.all(np.abs(lst_eval(law, theta)) <= 1.0 + 1e-12)


def test_deterministic_invalid():
    with pytest.raises(InvalidModelError):
        make_deterministic(0.0)
    with pytest.raises(InvalidModelError):
        make_deterministic(1.0, (5, 5))


def test_pole_evaluation():
    law = make_exponential(1.0)
    with pytest.raises(PoleEvaluation):
        lst_eval(law, -1.0)


def test_uniformization_weights_deterministic_is_poisson():
    law = make_deterministic(2.0)
    g = uniformization_weights(law, 1.5)
    assert_allclose(g[:20], stats.poisson.pmf(np.arange(20), 3.0), atol=1e-15)
    assert 1.0 - g.sum() < 1e-13


def test_uniformization_weights_ph_by_quadrature():
    law = make_phase_type(BETA, T0, scale=0.5)
    q = 1.3
    g = uniformization_weights(law, q)
    density = lambda t: BETA @ _expm(law.T * t) @ (-law.T.sum(axis=1))
    for k in range(4):
        val, _ = integrate.quad(lambda t: np.exp(-q * t) * (q * t) ** k / factorial(k) * density(t),
                                0, np.inf)
        assert g[k] == pytest.approx(val, abs=1e-10)
    assert np.arange(len(g)) @ g == pytest.approx(q * law.mean, rel=1e-10)


def _expm(A):
    from scipy.linalg import expm
    return expm(A)


def test_policy_validation():
    law = make_exponential(1.0)
    with pytest.raises(InvalidModelError):
        ServicePolicy(3, 2, {2: law, 3: law})
    with pytest.raises(InvalidModelError):
        ServicePolicy(1, 3, {1: law, 3: law})
    p = ServicePolicy(2, 3, {2: law, 3: make_exponential(2.0)})
    assert list(p.sizes) == [2, 3]
    assert p.mean(3) == pytest.approx(0.5)
