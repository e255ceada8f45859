import math

import numpy as np
import pytest

from sml import graph_laplacian as gl
from sml import kernels, spectral

from conftest import make_cloud_from_intrinsic


def _gaussian_laplacian(cloud, t):
    spec = kernels.KernelSpec("gaussian", t, cloud.manifold.d)
    return gl.build_laplacian(kernels.gaussian_matrix(cloud, spec))


def test_two_identical_points_hand_oracle(circle):
    # L = (w0 / 2t) [[1, -1], [-1, 1]], eigenvalues {0, w0/t}
    cloud = make_cloud_from_intrinsic(circle, np.array([[0.2], [0.2]]))
    t = 0.05
    spec = kernels.KernelSpec("gaussian", t, 1)
    lap = gl.build_laplacian(kernels.gaussian_matrix(cloud, spec))
    w0 = spec.prefactor
    expect = (w0 / (2 * t)) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert np.abs(lap.matrix - expect).max() <= 1e-12 * w0 / t
    dec = spectral.eigh(lap.matrix)
    assert dec.eigenvalues[0] == pytest.approx(0.0, abs=1e-12 * w0 / t)
    assert dec.eigenvalues[1] == pytest.approx(w0 / t, rel=1e-12)


def test_laplacian_annihilates_constants(circle):
    cloud = circle.sample_uniform(150, 3)
    lap = _gaussian_laplacian(cloud, 0.04)
    norm = np.abs(spectral.eigh(lap.matrix).eigenvalues).max()
    assert np.abs(lap.matrix @ np.ones(150)).max() <= 1e-10 * norm
    assert np.abs(lap.matrix - lap.matrix.T).max() == 0.0


def test_laplacian_psd_and_connected_gap(circle):
    cloud = circle.sample_uniform(120, 4)
    lap = _gaussian_laplacian(cloud, 0.04)
    dec = spectral.eigh(lap.matrix)
    norm = np.abs(dec.eigenvalues).max()
    assert dec.eigenvalues[0] >= -1e-10 * norm
    assert dec.eigenvalues[1] > 0.0  # strictly positive kernel => connected


def test_two_circles_heat_laplacian_nullspace(two_circles):
    cloud = two_circles.sample_uniform(150, 5)
    spec = kernels.KernelSpec("heat", 0.02, 1)
    lap = gl.build_laplacian(kernels.heat_matrix(cloud, spec))
    dec = spectral.eigh(lap.matrix)
    norm = np.abs(dec.eigenvalues).max()
    # disconnected support graph: zero eigenvalue of multiplicity two
    assert abs(dec.eigenvalues[0]) <= 1e-10 * norm
    assert abs(dec.eigenvalues[1]) <= 1e-10 * norm
    assert dec.eigenvalues[2] > 1e-6 * norm
    # nullspace equals the indicator span: compare projectors directly
    coords = gl.diffusion_coordinates(lap, 2)
    ind = np.zeros((150, 2))
    ind[cloud.component_labels == 0, 0] = 1.0
    ind[cloud.component_labels == 1, 1] = 1.0
    ind /= np.linalg.norm(ind, axis=0)
    p_diff = spectral.projector(coords) - spectral.projector(ind)
    assert np.linalg.norm(p_diff) <= 1e-8


def test_dirichlet_form_examples(circle):
    cloud = make_cloud_from_intrinsic(circle, np.array([[0.2], [0.2]]))
    t = 0.05
    spec = kernels.KernelSpec("gaussian", t, 1)
    w = kernels.gaussian_matrix(cloud, spec)
    lap = gl.build_laplacian(w)
    w0 = spec.prefactor
    assert gl.dirichlet_form(lap, np.ones(2)) == pytest.approx(0.0, abs=1e-15)
    assert gl.dirichlet_form(lap, np.array([1.0, -1.0])) == pytest.approx(
        2 * w0 / t, rel=1e-12)
    with pytest.raises(ValueError):
        gl.dirichlet_form(lap, np.ones(3))


def test_dirichlet_identity_random(circle):
    rng = np.random.default_rng(12)
    cloud = circle.sample_uniform(130, 6)
    spec = kernels.KernelSpec("gaussian", 0.03, 1)
    w = kernels.gaussian_matrix(cloud, spec)
    lap = gl.build_laplacian(w)
    for _ in range(5):
        u = rng.standard_normal(130)
        quad = gl.dirichlet_form(lap, u)
        pairwise = gl.dirichlet_form_pairwise(w, u)
        assert abs(quad - pairwise) <= 1e-10 * abs(quad)


def test_diffusion_coordinates_constant_first(circle):
    cloud = circle.sample_uniform(100, 7)
    lap = _gaussian_laplacian(cloud, 0.05)
    coords = gl.diffusion_coordinates(lap, 1)
    assert np.abs(coords[:, 0] - 1.0 / math.sqrt(100)).max() <= 1e-8
    with pytest.raises(ValueError):
        gl.diffusion_coordinates(lap, 0)


def test_diffusion_coordinates_sign_convention(circle):
    cloud = circle.sample_uniform(90, 8)
    lap = _gaussian_laplacian(cloud, 0.05)
    coords = gl.diffusion_coordinates(lap, 4)
    for col in range(4):
        assert coords[np.argmax(np.abs(coords[:, col])), col] > 0


def test_diffusion_coordinates_eigenvalue_weighting(circle):
    cloud = circle.sample_uniform(90, 8)
    lap = _gaussian_laplacian(cloud, 0.05)
    plain = gl.diffusion_coordinates(lap, 3)
    weighted = gl.diffusion_coordinates(lap, 3, eigenvalue_power=1.0)
    dec = spectral.eigh(lap.matrix)
    lam = np.maximum(dec.eigenvalues[:3], 0.0)
    assert np.allclose(weighted, plain * lam[None, :])


def test_eigenvalues_permutation_invariant(circle):
    import sml.manifolds as manifolds
    cloud = circle.sample_uniform(80, 9)
    perm = np.random.default_rng(0).permutation(80)
    cloud_p = manifolds.PointCloud(circle, 80, cloud.ambient[perm],
                                   cloud.intrinsic[perm],
                                   cloud.component_labels[perm], cloud.seed)
    w1 = spectral.eigh(_gaussian_laplacian(cloud, 0.04).matrix).eigenvalues
    w2 = spectral.eigh(_gaussian_laplacian(cloud_p, 0.04).matrix).eigenvalues
    assert np.abs(w1 - w2).max() <= 1e-9 * np.abs(w1).max()


def test_kernel_scaling_scales_eigenvalues(circle):
    cloud = circle.sample_uniform(80, 10)
    spec = kernels.KernelSpec("gaussian", 0.04, 1)
    w = kernels.gaussian_matrix(cloud, spec)
    alpha = 3.7
    scaled = kernels.KernelMatrix(alpha * w.entries, spec)
    dec1 = spectral.eigh(gl.build_laplacian(w).matrix)
    dec2 = spectral.eigh(gl.build_laplacian(scaled).matrix)
    assert np.abs(dec2.eigenvalues - alpha * dec1.eigenvalues).max() <= \
        1e-9 * alpha * np.abs(dec1.eigenvalues).max()
    # eigenvector span of the leading block is unchanged
    u1 = dec1.eigenvectors[:, :3]
    u2 = dec2.eigenvectors[:, :3]
    assert spectral.projector_hs_distance(u1, u2) <= 1e-7


def test_random_walk_laplacian_convenience(circle):
    cloud = circle.sample_uniform(60, 11)
    w = kernels.gaussian_matrix(cloud, kernels.KernelSpec("gaussian", 0.05, 1))
    rw = gl.random_walk_laplacian(w)
    assert np.abs(rw @ np.ones(60)).max() <= 1e-12
