"""Unnormalized graph Laplacian L = (D - W)/t, Dirichlet forms, and the
spectral embedding coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .kernels import KernelMatrix, KernelSpec


@dataclass(frozen=True)
class GraphLaplacian:
    """Symmetric PSD matrix (D - W)/t with its kernel spec and degree diagonal."""

    matrix: np.ndarray
    spec: KernelSpec
    degree_diag: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def build_laplacian(w: KernelMatrix) -> GraphLaplacian:
    """L = (D - W)/t where D_ii is the i-th row sum of the (1/n-scaled) kernel
    matrix. Row sums of D - W vanish, so L annihilates constants."""
    degrees = w.entries.sum(axis=1)
    lap = -w.entries / w.spec.t
    idx = np.arange(w.n)
    lap[idx, idx] += degrees / w.spec.t
    lap = (lap + lap.T) / 2.0
    return GraphLaplacian(lap, w.spec, degrees)


def random_walk_laplacian(w: KernelMatrix) -> np.ndarray:
    """Convenience constructor I - D^{-1} W (not symmetric, not used in any
    acceptance check)."""
    degrees = w.entries.sum(axis=1)
    return np.eye(w.n) - w.entries / degrees[:, None]


def dirichlet_form(lap: GraphLaplacian, u: np.ndarray) -> float:
    """Quadratic form u^T L u."""
    u = np.asarray(u, dtype=float)
    if u.shape != (lap.n,):
        raise ValueError(f"expected a length-{lap.n} vector, got shape {u.shape}")
    return float(u @ lap.matrix @ u)


def dirichlet_form_pairwise(w: KernelMatrix, u: np.ndarray) -> float:
    """Independent evaluation of the same form as the weighted sum
    (1/(2 n t)) sum_ij kernel(X_i, X_j) (u_i - u_j)^2."""
    u = np.asarray(u, dtype=float)
    diff_sq = (u[:, None] - u[None, :]) ** 2
    return float((w.entries * diff_sq).sum() / (2.0 * w.spec.t))


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Deterministic per-column sign: the entry of largest magnitude is made
    positive (first such entry on ties)."""
    out = vectors.copy()
    for col in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, col])))
        if out[idx, col] < 0:
            out[:, col] = -out[:, col]
    return out


def diffusion_coordinates(lap: GraphLaplacian, j: int,
                          eigenvalue_power: float = 0.0) -> np.ndarray:
    """First j eigenvectors of L (ascending eigenvalues) as an n-by-j matrix.

    Signs follow the largest-magnitude-entry convention; rotation freedom
    inside degenerate blocks is left to downstream Procrustes alignment.
    ``eigenvalue_power`` optionally scales column k by lambda_k^power
    (exploratory weighting, excluded from acceptance checks).
    """
    if not 1 <= j <= lap.n:
        raise ValueError(f"need 1 <= j <= n, got j={j}")
    dec = spectral.eigh(lap.matrix)
    coords = _fix_signs(dec.eigenvectors[:, :j])
    if eigenvalue_power != 0.0:
        lam = np.maximum(dec.eigenvalues[:j], 0.0)
        coords = coords * (lam ** eigenvalue_power)[None, :]
    return coords
