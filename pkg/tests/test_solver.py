import numpy as np
import pytest
from numpy.testing import assert_allclose

from bmapbulk.analysis import solve
from bmapbulk.bmap import validate_bmap
from bmapbulk.checks import identity_checks
from bmapbulk.kernel import char_poly, mp_eval
from bmapbulk.service import ServicePolicy, make_exponential, make_phase_type
from bmapbulk.solver import (SolverContext, exterior_poles, numerator_operator,
                             size_b_coefficients_fft, solve_departure)

from conftest import erlang2, poisson_bulk, two_phase_bmap
from ctmc_oracle import solve_ctmc


def _ctmc(sol, N):
    laws = {r: (sol.policy.law(r).beta, sol.policy.law(r).T) for r in sol.policy.sizes}
    return solve_ctmc(sol.model.D, sol.policy.a, sol.policy.b, laws, N)


def overshoot_model():
    """Batches up to 3 with non-commuting D_k, so an idle period can jump
    straight past b."""
    D0 = np.array([[-1.6, 0.3], [0.2, -0.9]])
    D1 = np.array([[0.5, 0.1], [0.1, 0.2]])
    D2 = np.array([[0.0, 0.3], [0.1, 0.0]])
    D3 = np.array([[0.2, 0.2], [0.0, 0.3]])
    model = validate_bmap([D0, D1, D2, D3])
    policy = ServicePolicy(2, 3, {2: erlang2(0.8), 3: make_phase_type([0.6, 0.4], [[-3.0, 1.0], [0.5, -2.0]])})
    return model, policy


@pytest.mark.parametrize("build", [
    lambda: (two_phase_bmap(), ServicePolicy(2, 4, {r: erlang2(0.4 * r) for r in range(2, 5)})),
    overshoot_model,
    lambda: poisson_bulk(1.0, 2, 4, 0.6),
])
def test_against_truncated_chain(build):
    model, policy = build()
    sol = solve(model, policy)
    idle, busy, dep = _ctmc(sol, 200)
    n = min(80, sol.arbitrary.nmax + 1)
    assert_allclose(sol.arbitrary.idle, idle, atol=1e-11)
    assert_allclose(sol.arbitrary.busy[:n], busy[:n], atol=1e-11)
    assert_allclose(sol.departure.pi_plus[:n], dep[:n], atol=1e-11)


def test_example1_against_truncated_chain(sol1):
    idle, busy, dep = _ctmc(sol1, 160)
    assert_allclose(sol1.arbitrary.idle, idle, atol=1e-11)
    assert_allclose(sol1.arbitrary.busy[:100], busy[:100], atol=1e-11)
    assert_allclose(sol1.departure.pi_plus[:100], dep[:100], atol=1e-11)


def test_mm1_departure_geometric(sol_mm1):
    rho = 0.5
    psi = sol_mm1.departure.psi_plus[:40].sum(axis=1)
    assert_allclose(psi, (1 - rho) * rho ** np.arange(40), atol=1e-14)


def test_boundary_conditions_hold_at_inside_roots(spec1):
    ctx = SolverContext.build(spec1.model, spec1.policy)
    cp = char_poly(ctx.family)
    dep = solve_departure(ctx, cp)
    psi = dep.boundary.psi_plus
    for z in cp.inside_roots:
        _, _, vh = np.linalg.svd(mp_eval(cp.matrix_poly, z))
        u = vh[-1].conj()
        B = numerator_operator(ctx, z)
        v = np.einsum("nk,nkl,l->", psi, B, u)
        assert abs(v) < 1e-12


@pytest.mark.parametrize("which", ["sol1", "sol2"])
def test_partial_fractions_match_fft_inversion(which, request):
    sol = request.getfixturevalue(which)
    ctx = SolverContext.build(sol.model, sol.policy)
    poles = exterior_poles(ctx, sol.charpoly)
    fft = size_b_coefficients_fft(ctx, sol.departure.boundary.psi_plus, sol.charpoly, poles, 120)
    assert_allclose(sol.departure.pi_plus[:len(fft), -1], fft, atol=1e-13)


def test_tail_model_closed_forms(sol1):
    tail = sol1.departure.tail
    n = np.arange(600)
    coef = tail.coefficients(n)
    assert_allclose(coef.sum(axis=0), tail.total(), atol=1e-14)
    assert_allclose(n @ coef, tail.first_moment(), atol=1e-12)
    assert tail.decay_ratio() < 1.0


def test_example1_has_repeated_poles(sol1):
    # every phase-type pole is double, so some exterior poles are too
    assert any(d > 1 for _, d, _ in sol1.departure.tail.groups)


def test_geometric_decay_at_dominant_pole():
    model, policy = poisson_bulk(1.0, 1, 3, 0.5)
    sol = solve(model, policy)
    psi = sol.departure.psi_plus.sum(axis=1)
    ratios = psi[11:40] / psi[10:39]
    dominant = min(abs(g[0]) for g in sol.departure.tail.groups)
    assert_allclose(ratios, 1.0 / dominant, rtol=1e-10)


def test_symmetric_sources_give_semisimple_repeated_roots():
    # identical phases make the characteristic matrix degenerate in two directions
    D0 = np.full((3, 3), 1.0) - 6.0 * np.eye(3)
    D1 = np.ones((3, 3))
    model = validate_bmap([D0, D1])
    policy = ServicePolicy(2, 4, {r: erlang2(0.2 * r) for r in range(2, 5)})
    sol = solve(model, policy)
    roots = np.asarray(sol.charpoly.inside_roots)
    gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots))
    assert gaps.min() < 1e-6
    laws = {r: (policy.law(r).beta, policy.law(r).T) for r in policy.sizes}
    idle, busy, dep = solve_ctmc(model.D, 2, 4, laws, 200)
    n = min(80, sol.arbitrary.nmax + 1)
    assert_allclose(sol.arbitrary.idle, idle, atol=1e-11)
    assert_allclose(sol.arbitrary.busy[:n], busy[:n], atol=1e-11)
    assert_allclose(sol.departure.pi_plus[:n], dep[:n], atol=1e-11)


def test_near_singular_top_batch_matrix():
    from test_kernel import near_singular_case
    model, policy = near_singular_case()
    sol = solve(model, policy)
    assert all(c.ok for c in identity_checks(sol)), [c.line() for c in identity_checks(sol)]
    ctx = SolverContext.build(model, policy)
    poles = exterior_poles(ctx, sol.charpoly)
    fft = size_b_coefficients_fft(ctx, sol.departure.boundary.psi_plus, sol.charpoly, poles, 120)
    assert_allclose(sol.departure.pi_plus[:len(fft), -1], fft, atol=1e-12)
