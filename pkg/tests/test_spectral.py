import math

import numpy as np
import pytest

from sml import spectral
from sml.errors import EigensolverFailure


def test_eigh_identity():
    dec = spectral.eigh(np.eye(5))
    assert np.allclose(dec.eigenvalues, 1.0)
    assert dec.residual <= 1e-12


def test_eigh_diagonal_sorted():
    dec = spectral.eigh(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(dec.eigenvalues, [1.0, 2.0, 3.0])


def test_eigh_reconstruction():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((50, 50))
    a = a + a.T
    dec = spectral.eigh(a)
    recon = dec.eigenvectors @ np.diag(dec.eigenvalues) @ dec.eigenvectors.T
    assert np.linalg.norm(a - recon) <= 1e-9 * np.linalg.norm(a)
    ortho = dec.eigenvectors.T @ dec.eigenvectors
    assert np.abs(ortho - np.eye(50)).max() <= 1e-10
    assert dec.residual <= 1e-8 * np.abs(dec.eigenvalues).max()


def test_eigh_rejects_asymmetric():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(EigensolverFailure):
        spectral.eigh(a)
    with pytest.raises(EigensolverFailure):
        spectral.eigh(np.zeros((2, 3)))


def test_eigh_conjugation_invariance():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((30, 30))
    a = a + a.T
    q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    w1 = spectral.eigh(a).eigenvalues
    w2 = spectral.eigh(q @ a @ q.T).eigenvalues
    assert np.abs(w1 - w2).max() <= 1e-9 * np.abs(w1).max()


def test_projector_examples():
    assert np.array_equal(spectral.projector(np.zeros((4, 0))), np.zeros((4, 4)))
    v = np.eye(5)[:, :2]
    p = spectral.projector(v)
    assert np.array_equal(np.diag(p), [1, 1, 0, 0, 0])
    rng = np.random.default_rng(2)
    v = np.linalg.qr(rng.standard_normal((12, 4)))[0]
    p = spectral.projector(v)
    assert np.linalg.norm(p @ p - p) <= 1e-10
    assert np.trace(p) == pytest.approx(4.0, abs=1e-10)


def test_projector_hs_distance_examples():
    rng = np.random.default_rng(3)
    u = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    assert spectral.projector_hs_distance(u, u) == 0.0
    # orthogonal complements in R^{2j}
    j = 3
    u = np.eye(2 * j)[:, :j]
    v = np.eye(2 * j)[:, j:]
    assert spectral.projector_hs_distance(u, v) == pytest.approx(math.sqrt(2 * j))
    # j = 1 closed form against the direct Frobenius computation
    a = np.linalg.qr(rng.standard_normal((8, 1)))[0]
    b = np.linalg.qr(rng.standard_normal((8, 1)))[0]
    direct = np.linalg.norm(spectral.projector(a) - spectral.projector(b))
    closed = math.sqrt(max(2.0 - 2.0 * float(a.T @ b) ** 2, 0.0))
    got = spectral.projector_hs_distance(a, b)
    assert got == pytest.approx(direct, abs=1e-10)
    assert got == pytest.approx(closed, abs=1e-10)


def test_projector_hs_distance_symmetric_and_bounded():
    rng = np.random.default_rng(4)
    for _ in range(20):
        j = int(rng.integers(1, 6))
        n = int(rng.integers(j, 20))
        u = np.linalg.qr(rng.standard_normal((n, j)))[0]
        v = np.linalg.qr(rng.standard_normal((n, j)))[0]
        d1 = spectral.projector_hs_distance(u, v)
        d2 = spectral.projector_hs_distance(v, u)
        assert d1 == pytest.approx(d2, abs=1e-12)
        assert d1 <= math.sqrt(2 * j) + 1e-12


def test_subspace_pair_validation():
    rng = np.random.default_rng(6)
    u = np.linalg.qr(rng.standard_normal((9, 2)))[0]
    pair = spectral.SubspacePair(u, u)
    assert spectral.subspace_distance(pair) == 0.0
    with pytest.raises(ValueError):
        spectral.SubspacePair(u, 2.0 * u)


def test_procrustes_examples():
    rng = np.random.default_rng(7)
    a = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    dist, o = spectral.procrustes_distance(a, a)
    assert dist <= 1e-12
    assert np.abs(o - np.eye(3)).max() <= 1e-10
    # invariance under an orthogonal mix of the target frame
    q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    dist, o = spectral.procrustes_distance(a, a @ q)
    assert dist <= 1e-12
    assert np.abs(o - q.T).max() <= 1e-9


def test_procrustes_j1_brute_force():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((7, 1))
    b = rng.standard_normal((7, 1))
    dist, o = spectral.procrustes_distance(a, b)
    brute = min(np.linalg.norm(a - b), np.linalg.norm(a + b))
    assert dist == pytest.approx(brute, abs=1e-12)
    assert o.shape == (1, 1) and abs(abs(o[0, 0]) - 1.0) <= 1e-12


def test_procrustes_minimizer_formula():
    # closed formula dist^2 = ||A||^2 + ||B||^2 - 2 sum sigma_i(B^T A)
    rng = np.random.default_rng(9)
    a = rng.standard_normal((15, 4))
    b = rng.standard_normal((15, 4))
    dist, o = spectral.procrustes_distance(a, b)
    sing = np.linalg.svd(b.T @ a, compute_uv=False)
    formula = math.sqrt(max((a ** 2).sum() + (b ** 2).sum() - 2 * sing.sum(), 0.0))
    assert dist == pytest.approx(formula, rel=1e-10)
    # no orthogonal matrix does better than the returned minimizer
    for _ in range(40):
        q = np.linalg.qr(rng.standard_normal((4, 4)))[0]
        assert np.linalg.norm(a - b @ q) >= dist - 1e-10


def test_procrustes_bounded_by_projector_distance():
    rng = np.random.default_rng(10)
    for trial in range(1000):
        j = int(rng.integers(1, 9))
        n = int(rng.integers(j, 65))
        u = np.linalg.qr(rng.standard_normal((n, j)))[0]
        v = np.linalg.qr(rng.standard_normal((n, j)))[0]
        dist, _ = spectral.procrustes_distance(u, v)
        hs = spectral.projector_hs_distance(u, v)
        assert dist <= hs + 1e-9, (trial, j, n)
