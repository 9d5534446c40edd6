import numpy as np
import pytest
from oracles import ivp_banded, ivp_smooth, logistic_closed_form

from misspec.functions import CrowdingGrid, crowding_function, from_closed_form, logistic_crowding
from misspec.gp_priors import Gp1Spec, gp1_sample_nodes
from misspec.ode import (
    OdeParams,
    ParameterError,
    band_crossing_times,
    observe,
    solve_logistic,
    solve_numeric,
    solve_piecewise_analytic,
    solve_richards,
)

K = 5e-3
TIMES = np.linspace(0, 10, 11)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 3.7])
@pytest.mark.parametrize("frac", [0.05, 0.5, 0.9])
def test_richards_matches_numerical_integration(beta, frac):
    p = OdeParams(1.0, K, frac * K)
    u = solve_richards(p, beta, TIMES)
    ref = ivp_smooth(p, lambda v: 1 - v**beta, TIMES)
    np.testing.assert_allclose(u, ref, rtol=1e-9)


def test_logistic_is_richards_with_beta_one():
    p = OdeParams(0.7, K, K / 7)
    np.testing.assert_allclose(solve_logistic(p, TIMES), logistic_closed_form(TIMES, 0.7, K, K / 7), rtol=1e-14)


@pytest.mark.parametrize("frac", [0.01, 0.05, 0.1, 0.25, 0.5, 0.95])
@pytest.mark.parametrize("m", [1, 4, 10])
def test_analytic_matches_logistic_closed_form_for_linear_f(frac, m):
    p = OdeParams(1.3, K, frac * K)
    t = np.linspace(0, 20, 41)
    u = solve_piecewise_analytic(p, logistic_crowding(m), t)
    np.testing.assert_allclose(u, logistic_closed_form(t, 1.3, K, frac * K), rtol=1e-12)


def test_analytic_matches_numeric_over_gp1_draws():
    spec = Gp1Spec()
    nodes = gp1_sample_nodes(spec, 100, seed=123)
    rng = np.random.default_rng(7)
    t = np.linspace(0, 15, 31)
    worst = 0.0
    for v in nodes:
        f = crowding_function(v)
        p = OdeParams(rng.uniform(0.3, 2.0), K, rng.uniform(0.02, 0.9) * K)
        ref = ivp_banded(p, f, t)
        worst = max(worst, np.max(np.abs(solve_piecewise_analytic(p, f, t) / ref - 1)))
    assert worst < 1e-6


def test_analytic_matches_fine_discretisation_of_richards():
    grid = CrowdingGrid(10)
    f = from_closed_form(lambda u: 1 - u**2, grid)
    p = OdeParams(1.0, K, K / 10)
    np.testing.assert_allclose(solve_piecewise_analytic(p, f, TIMES), ivp_banded(p, f, TIMES), rtol=1e-9)


def test_package_numeric_solver_agrees():
    f = crowding_function(np.linspace(0.95, 0.1, 10))
    p = OdeParams(1.0, K, K / 20)
    np.testing.assert_allclose(solve_numeric(p, f, TIMES, rtol=1e-11), solve_piecewise_analytic(p, f, TIMES),
                               rtol=1e-8)


def test_trajectory_is_monotone_below_K():
    f = crowding_function(gp1_sample_nodes(Gp1Spec(), 1, seed=2)[0])
    p = OdeParams(1.0, K, K / 20)
    u = solve_piecewise_analytic(p, f, np.linspace(0, 30, 301))
    assert np.all(np.diff(u) >= 0)
    assert np.all(u < K)
    assert u[-1] > 0.99 * K


def test_trajectory_continuous_at_band_crossings():
    f = crowding_function(gp1_sample_nodes(Gp1Spec(), 1, seed=3)[0])
    p = OdeParams(1.0, K, K / 30)
    crossings = band_crossing_times(p, f)
    assert crossings.size > 5
    assert np.all(np.diff(crossings) > 0)
    # at each crossing the density equals the node value
    u = solve_piecewise_analytic(p, f, crossings)
    nodes = f.node_positions[f.node_positions > 1 / 30][: crossings.size] * K
    np.testing.assert_allclose(u, nodes, rtol=1e-10)
    eps = 1e-9
    left = solve_piecewise_analytic(p, f, crossings - eps)
    right = solve_piecewise_analytic(p, f, crossings + eps)
    np.testing.assert_allclose(left, right, rtol=1e-7)


def test_initial_value_and_zero_growth():
    f = logistic_crowding()
    assert solve_piecewise_analytic(OdeParams(1.0, K, 1e-3), f, [0.0])[0] == pytest.approx(1e-3, rel=1e-15)
    np.testing.assert_array_equal(solve_piecewise_analytic(OdeParams(0.0, K, 1e-3), f, TIMES), 1e-3)


@pytest.mark.parametrize("u0", [0.0, K, 2 * K, -1e-4])
def test_rejects_initial_density_outside_band(u0):
    with pytest.raises(ParameterError):
        solve_piecewise_analytic(OdeParams(1.0, K, u0), logistic_crowding(), TIMES)


def test_rejects_nonpositive_crowding_and_bad_K():
    with pytest.raises(ParameterError):
        solve_piecewise_analytic(OdeParams(1.0, K, K / 2), crowding_function([0.5, 0.0, 0.2]), TIMES)
    with pytest.raises(ParameterError):
        OdeParams(1.0, 0.0, 1e-3)
    with pytest.raises(ValueError):
        solve_richards(OdeParams(1.0, K, 1e-3), 1.0, [1.0, 0.5])


def test_observe_noise_moments():
    u = np.full(11, 2e-3)
    ds = observe(TIMES, u, 1e-4, replicates=2000, seed=0)
    assert len(ds) == 11 * 2000
    resid = (ds.value - 2e-3) / 1e-4
    assert abs(resid.mean()) < 5 / np.sqrt(resid.size)
    assert abs(resid.std() - 1) < 0.02
    again = observe(TIMES, u, 1e-4, replicates=2000, seed=0)
    np.testing.assert_array_equal(ds.value, again.value)
