import numpy as np
import pytest

from bmapbulk.analysis import solve
from bmapbulk.errors import UnstableSystemError
from bmapbulk.measures import stability_check, traffic_intensity
from bmapbulk.service import ServicePolicy, make_exponential

from conftest import erlang2, poisson_bulk, two_phase_bmap
from ctmc_oracle import solve_ctmc


def test_mm1_measures(sol_mm1):
    r = sol_mm1.report
    assert r.P_idle == pytest.approx(0.5, abs=1e-12)
    assert r.L == pytest.approx(1.0, abs=1e-12)
    assert r.L_q == pytest.approx(0.5, abs=1e-12)
    assert r.W == pytest.approx(2.0, abs=1e-12)
    assert r.W_q == pytest.approx(1.0, abs=1e-12)
    assert r.L_s == pytest.approx(1.0, abs=1e-12)


def test_traffic_intensity_of_examples(sol1, sol2):
    assert sol1.report.rho == pytest.approx(0.077971, abs=1e-6)
    assert sol2.report.rho == pytest.approx(0.1, abs=1e-4)


@pytest.mark.parametrize("mu_scale", [1.0, 1.5])
def test_unstable_when_full_batches_cannot_keep_up(mu_scale):
    lam, b = 2.0, 4
    # rho = lam * s_b / b, so s_b = b / lam puts rho exactly at 1
    mu = lam / b / mu_scale
    model, policy = poisson_bulk(lam, 2, b, mu)
    assert traffic_intensity(model, policy) == pytest.approx(mu_scale)
    with pytest.raises(UnstableSystemError):
        stability_check(model, policy)
    with pytest.raises(UnstableSystemError):
        solve(model, policy)


def test_server_content_between_thresholds(sol1, sol2):
    for sol in (sol1, sol2):
        assert sol.policy.a <= sol.report.L_s <= sol.policy.b
        assert sol.report.P_idle + sol.report.P_busy == pytest.approx(1.0, abs=1e-10)


def test_measures_against_chain():
    model = two_phase_bmap()
    policy = ServicePolicy(2, 4, {r: erlang2(0.4 * r) for r in range(2, 5)})
    sol = solve(model, policy)
    laws = {r: (policy.law(r).beta, policy.law(r).T) for r in policy.sizes}
    idle, busy, _ = solve_ctmc(model.D, 2, 4, laws, 300)
    col = busy.sum(axis=2)
    n = np.arange(col.shape[0])
    L_q = np.arange(2) @ idle.sum(axis=1) + n @ col.sum(axis=1)
    L = L_q + col.sum(axis=0) @ np.arange(2, 5)
    assert sol.report.L == pytest.approx(L, rel=1e-10)
    assert sol.report.L_q == pytest.approx(L_q, rel=1e-10)
    assert sol.report.P_idle == pytest.approx(idle.sum(), abs=1e-12)


def test_as_dict_round_trip(sol1):
    d = sol1.report.as_dict()
    assert set(d) >= {"L", "L_q", "L_s", "P_idle", "W", "W_q", "rho"}
    assert d["L"] == sol1.report.L
