import math

import numpy as np
import pytest

from sml import kernels, manifolds, spectral

from conftest import make_cloud_from_intrinsic


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        kernels.KernelSpec("box", 0.1, 1)
    with pytest.raises(ValueError):
        kernels.KernelSpec("gaussian", 0.0, 1)
    with pytest.raises(ValueError):
        kernels.KernelSpec("gaussian", 1.5, 1)
    with pytest.raises(ValueError):
        kernels.KernelSpec("gaussian", 0.1, 0)


def test_gaussian_diagonal_prefactor(torus2):
    # with d = 2 and t = 1/(4 pi) the prefactor is exactly 1
    t = 1.0 / (4.0 * math.pi)
    cloud = make_cloud_from_intrinsic(torus2, np.array([[0.2, 0.7]]))
    mat = kernels.gaussian_matrix(cloud, kernels.KernelSpec("gaussian", t, 2))
    assert mat.entries[0, 0] == 1.0


def test_gaussian_identical_points(circle):
    cloud = make_cloud_from_intrinsic(circle, np.array([[0.3], [0.3]]))
    spec = kernels.KernelSpec("gaussian", 0.05, 1)
    mat = kernels.gaussian_matrix(cloud, spec)
    w0 = spec.prefactor
    assert np.allclose(mat.entries, w0 / 2.0)
    assert mat.entries[0, 0] == mat.entries[0, 1] == mat.entries[1, 0] == mat.entries[1, 1]


def test_gaussian_matrix_bitwise_symmetric(circle):
    cloud = circle.sample_uniform(300, 17)
    mat = kernels.gaussian_matrix(cloud, kernels.KernelSpec("gaussian", 0.03, 1))
    assert (mat.entries == mat.entries.T).all()
    assert (mat.entries >= 0).all()


def test_geodesic_cross_component_zero(two_circles):
    cloud = two_circles.sample_uniform(80, 3)
    mat = kernels.geodesic_matrix(cloud, kernels.KernelSpec("geodesic", 0.05, 1))
    cross = cloud.component_labels[:, None] != cloud.component_labels[None, :]
    assert (mat.entries[cross] == 0.0).all()
    assert (mat.entries[~cross] > 0.0).all()


def test_gaussian_dominates_geodesic(circle, two_circles):
    # chordal distance <= intrinsic distance, so w_t >= g_t entrywise
    for model, seed in ((circle, 5), (two_circles, 6)):
        cloud = model.sample_uniform(150, seed)
        t = 0.04
        w = kernels.gaussian_matrix(cloud, kernels.KernelSpec("gaussian", t, 1))
        g = kernels.geodesic_matrix(cloud, kernels.KernelSpec("geodesic", t, 1))
        assert (w.entries >= g.entries - 1e-18).all()
        same_point = np.eye(cloud.n, dtype=bool)
        assert np.allclose(w.entries[same_point], g.entries[same_point])


def test_geodesic_antipodal_value(circle):
    # scalar oracle at the antipodal pair
    cloud = make_cloud_from_intrinsic(circle, np.array([[0.0], [0.5]]))
    t = 0.1
    mat = kernels.geodesic_matrix(cloud, kernels.KernelSpec("geodesic", t, 1))
    expect = (4 * math.pi * t) ** -0.5 * math.exp(-0.25 / (4 * t)) / 2.0
    assert mat.entries[0, 1] == pytest.approx(expect, rel=1e-14)


def test_heat_matrix_row_sums(circle):
    # mean row sum of the raw kernel concentrates at the exact integral 1
    n = 2000
    t = 0.05
    cloud = circle.sample_uniform(n, 23)
    mat = kernels.heat_matrix(cloud, kernels.KernelSpec("heat", t, 1))
    row_sums = mat.entries.sum(axis=1)
    assert abs(row_sums.mean() - 1.0) <= 5.0 / math.sqrt(n * math.sqrt(t))


def test_heat_matrix_block_diagonal_and_psd(two_circles):
    cloud = two_circles.sample_uniform(200, 8)
    mat = kernels.heat_matrix(cloud, kernels.KernelSpec("heat", 0.03, 1))
    cross = cloud.component_labels[:, None] != cloud.component_labels[None, :]
    assert (mat.entries[cross] == 0.0).all()
    dec = spectral.eigh(mat.entries)
    assert dec.eigenvalues[0] >= -1e-10


def test_heat_matrix_deterministic(circle):
    cloud = circle.sample_uniform(64, 9)
    spec = kernels.KernelSpec("heat", 0.02, 1)
    a = kernels.heat_matrix(cloud, spec)
    b = kernels.heat_matrix(cloud, spec)
    assert (a.entries == b.entries).all()


def test_residual_scan_diagonal_small(circle):
    # at x = y the heat kernel is close to the flat prefactor for small t
    cloud = make_cloud_from_intrinsic(circle, np.array([[0.25]]))
    t = 0.01
    k = kernels.heat_kernel_values(cloud, kernels.KernelSpec("heat", t, 1))
    w = kernels.gaussian_kernel_values(cloud, kernels.KernelSpec("gaussian", t, 1))
    resid = abs(k[0, 0] - w[0, 0])
    assert resid <= 1e-9  # wrap images at distance >= 1 are ~exp(-25)


def test_residual_scan_two_circles_cross(two_circles):
    # cross-component residual is pure w_t and falls below t^4 for this gap
    assert two_circles.separation == 2.0
    cloud = two_circles.sample_uniform(300, 31)
    for t in (0.05, 0.025, 0.0125):
        rep = kernels.kernel_residual_scan(cloud, t, power=4)
        assert rep.passed
        assert rep.context["C_add"] <= 1.0


def test_residual_scan_constant_stable_on_frozen_grid(circle):
    # fitted multiplicative constant across t-halvings; grid frozen after a
    # pilot scan (values 0.40, 0.33, 0.26, 0.06): below t ~ 0.05 the circle's
    # antipodal chordal shortcut leaves the multiplicative regime and the
    # fitted constant explodes (2.2 at t=0.025, 24 at t=0.0125)
    cloud = circle.sample_uniform(500, 11)
    constants = []
    for t in (0.4, 0.2, 0.1, 0.05):
        rep = kernels.kernel_residual_scan(cloud, t, power=4)
        constants.append(rep.context["C_mult"])
    for prev, curr in zip(constants, constants[1:]):
        assert curr <= 1.5 * prev


def test_heat_geodesic_residual_bounded(circle):
    # |k_t - g_t| <= k_t t log(e/t) + t^K holds with constant 1 on the frozen
    # small-t grid with K = 1 (wrap mass at the antipode is below the floor)
    cloud = circle.sample_uniform(400, 13)
    for t in (0.008, 0.004, 0.002, 0.001):
        k = kernels.heat_kernel_values(cloud, kernels.KernelSpec("heat", t, 1))
        g = kernels.geodesic_kernel_values(cloud, kernels.KernelSpec("geodesic", t, 1))
        ratio = np.abs(k - g) / (k * t * math.log(math.e / t) + t)
        assert ratio.max() <= 1.0


def test_scan_rejects_bad_power(circle, circle_cloud):
    with pytest.raises(ValueError):
        kernels.kernel_residual_scan(circle_cloud, 0.05, power=0)


def test_build_kernel_matrix_dispatch(circle_cloud):
    for kind in kernels.KERNEL_KINDS:
        mat = kernels.build_kernel_matrix(circle_cloud,
                                          kernels.KernelSpec(kind, 0.05, 1))
        assert mat.spec.kind == kind
        assert mat.entries.shape == (400, 400)
    with pytest.raises(ValueError):
        kernels.gaussian_matrix(circle_cloud, kernels.KernelSpec("heat", 0.05, 1))
