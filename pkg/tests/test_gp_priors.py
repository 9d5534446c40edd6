import math

import numpy as np
import pytest
from oracles import gp2_brute_force_log_density
from scipy import stats

from misspec.gp_priors import (
    JITTER,
    Gp1Spec,
    Gp2Spec,
    gp1_covariance,
    gp1_kernel,
    gp1_log_prior,
    gp1_sample,
    gp1_sample_nodes,
    gp2_latent_conditional,
    gp2_log_prior,
    gp2_project,
    gp2_sample,
    gp2_sample_latent,
    latent_to_g,
    prior_spec_from_record,
)


# -- GP1 ---------------------------------------------------------------------

def test_kernel_value_at_half_is_eta_squared():
    assert gp1_kernel(0.5, 0.5, 0.2, 0.5) == 0.2**2
    assert gp1_kernel(0.5, 0.5, 0.37, 1.3) == 0.37**2


def test_kernel_off_diagonal_value():
    # 16 eta^2 exp(-(du)^2 / (2 rho^2)) u (1-u) u' (1-u') evaluated by hand
    ui, uj = 1 / 11, 2 / 11
    expected = 16 * 0.04 * math.exp(-(1 / 11) ** 2 / 0.5) * ui * (1 - ui) * uj * (1 - uj)
    assert gp1_kernel(ui, uj, 0.2, 0.5) == pytest.approx(expected, rel=1e-14)


def test_kernel_vanishes_at_boundaries():
    assert gp1_kernel(0.0, 0.3, 0.2, 0.5) == 0.0
    assert gp1_kernel(1.0, 1.0, 0.2, 0.5) == 0.0


def test_covariance_is_symmetric_psd():
    c = gp1_covariance(Gp1Spec())
    np.testing.assert_allclose(c, c.T, rtol=1e-15, atol=0)
    assert np.linalg.eigvalsh(c).min() > -1e-15


def test_gp1_log_prior_matches_bivariate_normal():
    spec = Gp1Spec(m=2)
    cov = gp1_covariance(spec)
    cov_j = cov + JITTER * cov.diagonal().max() * np.eye(2)
    f = np.array([0.55, 0.4])
    expected = stats.multivariate_normal(1 - spec.grid.interior, cov_j).logpdf(f)
    assert gp1_log_prior(f, spec) == pytest.approx(expected, rel=1e-12)


def test_gp1_log_prior_support_and_shape():
    spec = Gp1Spec(m=3)
    assert gp1_log_prior(np.array([0.5, 0.0, 0.1]), spec) == -np.inf
    assert gp1_log_prior(np.array([0.5, -0.2, 0.1]), spec) == -np.inf
    with pytest.raises(ValueError):
        gp1_log_prior(np.ones(4), spec)


def test_gp1_samples_match_filtered_untruncated_draws():
    spec = Gp1Spec()
    ours = gp1_sample_nodes(spec, 20_000, seed=1)
    assert np.all(ours > 0)
    # independent oracle: unrestricted multivariate normal draws, keep the positive ones
    cov = gp1_covariance(spec)
    cov += JITTER * cov.diagonal().max() * np.eye(spec.m)
    raw = stats.multivariate_normal(spec.mean, cov, allow_singular=True).rvs(60_000, random_state=2)
    ref = raw[np.all(raw > 0, axis=1)][:20_000]
    se = np.sqrt(ours.var(0) / len(ours) + ref.var(0) / len(ref))
    assert np.all(np.abs(ours.mean(0) - ref.mean(0)) < 5 * se)


def test_gp1_sample_has_fixed_boundaries_and_is_seeded():
    a, b = gp1_sample(Gp1Spec(), seed=4), gp1_sample(Gp1Spec(), seed=4)
    assert a(0.0) == 1.0 and a(1.0) == 0.0
    np.testing.assert_array_equal(a.node_values, b.node_values)


# -- GP2 ---------------------------------------------------------------------

@pytest.mark.parametrize("g", [[0.2, 0.45, 0.6], [0.05, 0.3, 0.52], [0.7, 0.6, 0.55]])
def test_gp2_log_density_matches_brute_force_m2(g):
    spec = Gp2Spec(rho=2.0, m=2, t_max=10.0)
    g = np.array(g)
    assert gp2_log_prior(g, spec) == pytest.approx(gp2_brute_force_log_density(g, spec), abs=1e-6)


def test_gp2_bivariate_conditioning_m1():
    spec = Gp2Spec(rho=2.0, m=1, t_max=10.0)
    mean, cov = gp2_latent_conditional(spec)
    t = spec.grid.positions
    full = np.exp(-((t[:, None] - t[None, :]) ** 2) / (2 * spec.rho**2))
    # conditional covariance is the inverse of the free block of the precision matrix
    prec = np.linalg.inv(full)
    np.testing.assert_allclose(cov, np.linalg.inv(prec[:2, :2]), rtol=1e-10)
    np.testing.assert_allclose(mean, 0.0, atol=1e-15)


def test_gp2_support():
    spec = Gp2Spec(m=2)
    assert gp2_log_prior(np.array([0.0, 0.5, 0.5]), spec) == -np.inf
    assert gp2_log_prior(np.array([0.5, 1.0, 0.5]), spec) == -np.inf


def test_gp2_unconditioned_marginals_are_uniform():
    spec = Gp2Spec()
    n_nodes = spec.m + 2
    # an independent batch per node keeps the tests independent; Bonferroni
    # then holds the family-wise level at exactly 0.01
    level = 0.01 / n_nodes
    for k in range(n_nodes):
        g = latent_to_g(gp2_sample_latent(spec, 10_000, seed=1000 + k, conditioned=False))
        assert stats.kstest(g[:, k], "uniform").pvalue > level, f"node {k}"


def test_gp2_conditioned_samples_end_at_one():
    for seed in range(20):
        d = gp2_sample(Gp2Spec(), seed=seed)
        assert d(10.0) == 1.0
        assert np.all((d.node_values > 0) & (d.node_values < 2))


def test_gp2_conditioned_covariance_within_mc_error():
    spec = Gp2Spec(rho=2.0, m=2)
    n = 40_000
    h = gp2_sample_latent(spec, n, seed=5)
    t = spec.grid.positions
    full = np.exp(-((t[:, None] - t[None, :]) ** 2) / (2 * spec.rho**2))
    target = np.linalg.inv(np.linalg.inv(full)[:3, :3])
    sample = np.cov(h.T)
    # standard error of a Gaussian sample covariance: sqrt((s_ij^2 + s_ii s_jj) / n)
    se = np.sqrt((target**2 + np.outer(target.diagonal(), target.diagonal())) / n)
    assert np.all(np.abs(sample - target) < 5 * se)
    assert np.all(np.abs(h.mean(0)) < 5 * np.sqrt(target.diagonal() / n))


def test_gp2_project_reaches_typical_prior_density():
    spec = Gp2Spec()
    t = spec.grid.free
    rough = 0.5 * (t**3 / (t**3 + 3) + 0.1) / (1000 / 1003 + 0.1)
    smooth = gp2_project(rough, spec)
    typical = np.median([gp2_log_prior(latent_to_g(h), spec)
                         for h in gp2_sample_latent(spec, 500, seed=0)])
    assert gp2_log_prior(rough, spec) < typical - 100
    assert gp2_log_prior(smooth, spec) > typical - 30
    assert np.max(np.abs(smooth - rough)) < 0.05


def test_prior_records_round_trip():
    for spec in (Gp1Spec(0.3, 0.4, 5), Gp2Spec(1.5, 9, 8.0)):
        assert prior_spec_from_record(spec.to_record()) == spec
