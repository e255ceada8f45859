"""Dense symmetric eigendecomposition with a residual certificate, plus
subspace geometry: projectors, Hilbert-Schmidt distances, Procrustes alignment.

All subspace distances use the Frobenius / Hilbert-Schmidt norm; operator-norm
variants are provided for diagnostics but are not part of any acceptance check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EigensolverFailure

#: relative symmetry tolerance accepted by :func:`eigh`
SYMMETRY_RTOL = 1e-12
#: relative residual the decomposition must satisfy
RESIDUAL_RTOL = 1e-8
ORTHONORMALITY_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    ``eigenvalues`` are nondecreasing, ``eigenvectors`` has orthonormal
    columns (column j pairs with eigenvalue j), and ``residual`` certifies
    max_j ||A v_j - lambda_j v_j||_2.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def descending(self):
        """Eigenvalues and eigenvectors in nonincreasing eigenvalue order."""
        return self.eigenvalues[::-1], self.eigenvectors[:, ::-1]


@dataclass(frozen=True)
class SubspacePair:
    """Two n-by-j frames with orthonormal columns, validated on construction."""

    u: np.ndarray
    u_hat: np.ndarray

    def __post_init__(self):
        for name, mat in (("u", self.u), ("u_hat", self.u_hat)):
            gram = mat.T @ mat
            err = np.abs(gram - np.eye(mat.shape[1])).max()
            if err > ORTHONORMALITY_TOL:
                raise ValueError(f"{name} columns not orthonormal (deviation {err:.3e})")
        if self.u.shape != self.u_hat.shape:
            raise ValueError("frames must have equal shapes")


def eigh(a: np.ndarray) -> SpectralDecomposition:
    """Eigendecompose a symmetric matrix and certify the residual.

    Raises
    ------
    EigensolverFailure
        If the input is not symmetric to relative tolerance 1e-12, LAPACK
        fails, or the residual exceeds 1e-8 * ||A||.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise EigensolverFailure(f"expected a square matrix, got shape {a.shape}")
    scale = np.abs(a).max() if a.size else 0.0
    asym = np.abs(a - a.T).max()
    if asym > SYMMETRY_RTOL * max(scale, 1e-300):
        raise EigensolverFailure(
            f"matrix not symmetric: max |A - A^T| = {asym:.3e} vs scale {scale:.3e}"
        )
    try:
        w, v = scipy.linalg.eigh((a + a.T) / 2.0, driver="evd", check_finite=False)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigensolverFailure(str(exc)) from exc
    resid_mat = a @ v - v * w[None, :]
    residual = float(np.sqrt((resid_mat ** 2).sum(axis=0)).max())
    norm_a = float(max(np.abs(w[0]), np.abs(w[-1])))
    if residual > RESIDUAL_RTOL * max(norm_a, 1e-300):
        raise EigensolverFailure(
            f"residual {residual:.3e} exceeds {RESIDUAL_RTOL:.0e} * ||A|| = "
            f"{RESIDUAL_RTOL * norm_a:.3e}"
        )
    return SpectralDecomposition(w, v, residual)


def projector(v: np.ndarray) -> np.ndarray:
    """Orthogonal projector V V^T onto the span of orthonormal columns."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        v = v.reshape(-1, 1)
    if v.shape[1] == 0:
        return np.zeros((v.shape[0], v.shape[0]))
    return v @ v.T


def projector_hs_distance(u: np.ndarray, u_hat: np.ndarray) -> float:
    """Hilbert-Schmidt distance || U_hat U_hat^T - U U^T ||_F.

    Computed stably as sqrt(2 j - 2 ||U_hat^T U||_F^2), clamped at zero so
    identical subspaces return exactly 0.
    """
    u = np.asarray(u, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    if u.shape != u_hat.shape:
        raise ValueError("subspace frames must have equal shapes")
    if np.array_equal(u, u_hat):
        return 0.0
    j = u.shape[1]
    overlap = np.linalg.norm(u_hat.T @ u) ** 2
    return float(np.sqrt(max(2.0 * j - 2.0 * overlap, 0.0)))


def projector_operator_distance(u: np.ndarray, u_hat: np.ndarray) -> float:
    """Operator-norm distance between the two projectors (diagnostic only)."""
    diff = projector(u_hat) - projector(u)
    return float(np.linalg.norm(diff, 2))


def subspace_distance(pair: SubspacePair) -> float:
    """Hilbert-Schmidt projector distance of a validated frame pair."""
    return projector_hs_distance(pair.u, pair.u_hat)


def procrustes_distance(a: np.ndarray, b: np.ndarray):
    """Minimize ||A - B O||_F over orthogonal O.

    Returns (distance, O). The minimizer is O = U V^T for B^T A = U S V^T,
    which realizes distance^2 = ||A||_F^2 + ||B||_F^2 - 2 sum_i sigma_i(B^T A);
    the distance is evaluated directly on the residual A - B O, which avoids
    the cancellation the closed formula suffers for nearly aligned frames.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    u, s, vt = scipy.linalg.svd(b.T @ a)
    o = u @ vt
    return float(np.linalg.norm(a - b @ o)), o
