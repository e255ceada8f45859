import math

import numpy as np
import pytest

from sml import heat_pca, kernels, manifolds
from sml.errors import GapTooSmall


def test_feature_matrix_first_column_constant(circle):
    cloud = circle.sample_uniform(50, 1)
    f = heat_pca.feature_matrix(cloud, 0.05)
    assert np.allclose(f.matrix[:, 0], 1.0)
    assert f.tail_mass <= 1e-10
    # column second moments match exp(-mu_j t) population values (loosely)
    assert f.mu[0] == 0.0


def test_feature_matrix_two_circles_indicator_columns(two_circles):
    cloud = two_circles.sample_uniform(60, 2)
    f = heat_pca.feature_matrix(cloud, 0.05)
    ind0 = cloud.component_labels == 0
    assert np.allclose(f.matrix[ind0, 0], math.sqrt(2.0))
    assert np.allclose(f.matrix[~ind0, 0], 0.0)
    assert np.allclose(f.matrix[~ind0, 1], math.sqrt(2.0))
    assert np.allclose(f.matrix[ind0, 1], 0.0)


def test_gram_reconstructs_heat_matrix(circle, torus2):
    # the truncated feature Gram matrix reproduces the Mercer heat kernel
    for model, seed, t in ((circle, 3, 0.02), (torus2, 4, 0.06)):
        cloud = model.sample_uniform(80, seed)
        f = heat_pca.feature_matrix(cloud, t, eps=1e-12)
        gram = heat_pca.gram_matrix(f)
        kt = kernels.heat_matrix(cloud, kernels.KernelSpec("heat", t, model.d),
                                 eps=1e-12)
        assert np.abs(gram - kt.entries).max() <= 1e-10


def test_empirical_covariance_lln(circle):
    n = 20000
    cloud = circle.sample_uniform(n, 5)
    f = heat_pca.feature_matrix(cloud, 0.05)
    cov = heat_pca.empirical_covariance(f)
    pop = np.diag(np.exp(-f.mu * f.t))
    assert np.abs(cov - pop).max() <= 3.0 / math.sqrt(n)


def test_empirical_covariance_rank_one(circle):
    cloud = circle.sample_uniform(1, 6)
    f = heat_pca.feature_matrix(cloud, 0.05)
    cov = heat_pca.empirical_covariance(f)
    assert np.linalg.matrix_rank(cov, tol=1e-12) <= 1


def test_trace_identity(circle):
    cloud = circle.sample_uniform(200, 7)
    f = heat_pca.feature_matrix(cloud, 0.03)
    cov = heat_pca.empirical_covariance(f)
    row_norms_sq = (f.matrix ** 2).sum(axis=1)
    assert np.trace(cov) == pytest.approx(row_norms_sq.mean(), rel=1e-12)


def test_feature_row_norm_diagonal_bound(circle):
    # ||F row i||^2 = truncated k_t(X_i, X_i) <= C t^(-1/2) uniformly
    for t in (0.1, 0.05, 0.02):
        cloud = circle.sample_uniform(100, 8)
        f = heat_pca.feature_matrix(cloud, t)
        row_norms_sq = (f.matrix ** 2).sum(axis=1)
        diag = circle.heat_kernel(t, 0.0, 0.0)
        assert row_norms_sq.max() <= diag + 1e-8
        assert row_norms_sq.max() * math.sqrt(t) <= 0.35


def test_kernel_trick_passes(circle, two_circles):
    for model, seed, t, n in ((circle, 9, 0.02, 150), (two_circles, 10, 0.05, 120)):
        cloud = model.sample_uniform(n, seed)
        f = heat_pca.feature_matrix(cloud, t)
        rep = heat_pca.kernel_trick_check(f)
        assert rep.passed
        assert rep.context["eigenvalue_mismatch"] <= 1e-9
        assert rep.context["pc_identity_error"] <= 1e-8


def test_kernel_trick_rank_deficient(circle):
    # n < N: the Gram matrix has fewer eigenvalues; trailing zeros line up
    cloud = circle.sample_uniform(8, 11)
    f = heat_pca.feature_matrix(cloud, 0.004)
    assert f.rank > f.n
    rep = heat_pca.kernel_trick_check(f)
    assert rep.passed


def test_empirical_vs_population_records(circle):
    cloud = circle.sample_uniform(500, 12)
    t = 0.02
    f = heat_pca.feature_matrix(cloud, t)
    recs = heat_pca.empirical_vs_population(f, 5)
    assert [rec["j"] for rec in recs] == [1, 2, 3, 4, 5]
    # j = 1: mu_1 = 0, so (1 - lambda_hat)/t must be small for large n
    assert recs[0]["mu_j"] == 0.0
    assert recs[0]["eig_gap"] <= 0.5
    # boundaries of the population multiplicity blocks on the circle: 1, 3, 5
    assert recs[0]["proj_dist"] is not None
    assert recs[1]["proj_dist"] is None
    assert recs[2]["proj_dist"] is not None
    assert recs[3]["proj_dist"] is None
    with pytest.raises(ValueError):
        heat_pca.empirical_vs_population(f, 0)


def test_population_projector_interior_gap_error(circle):
    cloud = circle.sample_uniform(100, 13)
    f = heat_pca.feature_matrix(cloud, 0.05)
    with pytest.raises(GapTooSmall):
        heat_pca.population_projector_distance(f, 2)
    assert heat_pca.population_projector_distance(f, 1) <= 1.0


def test_semigroup_bias_inequalities():
    # -x^2/2 <= 1 - e^{-x} - x <= 0 for x >= 0, the exact bias envelope
    xs = np.linspace(0.0, 5.0, 2001)
    vals = 1.0 - np.exp(-xs) - xs
    assert (vals <= 1e-15).all()
    assert (vals >= -(xs ** 2) / 2.0 - 1e-15).all()


def test_two_circles_projector_distance_envelope(two_circles):
    # frozen after a 20-seed pilot at n=2000, t=0.02 (pilot max 0.035)
    dists = []
    for r in range(20):
        cloud = two_circles.sample_uniform(2000, 7100 + r)
        f = heat_pca.feature_matrix(cloud, 0.02)
        recs = heat_pca.empirical_vs_population(f, 2)
        dists.append(recs[1]["proj_dist"])
    assert max(dists) <= 0.05


def test_delta_nullspace_zero_for_exact_population(circle):
    # synthetic feature matrix whose empirical covariance equals the population
    t = 0.05
    n_terms, _ = circle.mercer_rank(t)
    mu = circle.eigenvalues(n_terms)
    lam = np.exp(-mu * t)
    f_mat = np.diag(np.sqrt(n_terms * lam))
    cloud = circle.sample_uniform(n_terms, 14)
    f = heat_pca.FeatureMatrix(f_mat, cloud, t, mu, 0.0)
    assert heat_pca.delta_nullspace(f, 1) <= 1e-12


def test_delta_nullspace_median_rate(circle):
    med = []
    ns = (250, 500, 1000, 2000)
    for n in ns:
        vals = []
        for r in range(30):
            cloud = circle.sample_uniform(n, 7150 + r)
            f = heat_pca.feature_matrix(cloud, 0.05)
            vals.append(heat_pca.delta_nullspace(f))
        med.append(np.median(vals))
    slope = np.polyfit(np.log(ns), np.log(med), 1)[0]
    assert -0.75 <= slope <= -0.30


def test_covariance_deviation_median_rate(circle):
    import scipy.linalg
    med = []
    ns = (250, 500, 1000, 2000)
    for n in ns:
        vals = []
        for r in range(30):
            cloud = circle.sample_uniform(n, 7160 + r)
            f = heat_pca.feature_matrix(cloud, 0.05)
            e = heat_pca.empirical_covariance(f) - np.diag(np.exp(-f.mu * f.t))
            w = scipy.linalg.eigvalsh(e, check_finite=False)
            vals.append(max(abs(w[0]), abs(w[-1])))
        med.append(np.median(vals))
    slope = np.polyfit(np.log(ns), np.log(med), 1)[0]
    assert -0.75 <= slope <= -0.30


def test_delta_nullspace_two_circles_gap(two_circles):
    mu3 = two_circles.eigenvalue(3)
    cloud = two_circles.sample_uniform(300, 15)
    t = 1.0 / mu3
    f = heat_pca.feature_matrix(cloud, t)
    val = heat_pca.delta_nullspace(f, 2)
    assert np.isfinite(val) and val >= 0.0
    with pytest.raises(ValueError):
        heat_pca.delta_nullspace(f, 0)


def test_population_spectrum_block_boundaries(circle, two_circles):
    f_mu = circle.eigenvalues(8)
    pop = heat_pca.PopulationSpectrum(0.05, f_mu)
    assert pop.block_boundaries(7) == [1, 3, 5, 7]
    mu2 = two_circles.eigenvalues(8)
    pop2 = heat_pca.PopulationSpectrum(0.05, mu2)
    assert pop2.block_boundaries(7) == [2, 6]
    assert (pop2.eigenvalues[:2] == 1.0).all()
    assert pop2.eigenvalues[2] < 1.0
