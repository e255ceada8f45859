"""Heat-kernel principal component analysis.

The truncated feature map sends X_i to the coordinate row
F[i, j] = exp(-mu_j t / 2) phi_j(X_i), so that the empirical covariance
operator in the canonical RKHS basis is F^T F / n, the kernel Gram matrix is
F F^T / n, and the population covariance is exactly diag(exp(-mu_j t)).
Population objects being diagonal in these coordinates, empirical-versus-
population comparisons are basis-aligned by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import perturbation, spectral
from .errors import GapTooSmall
from .manifolds import DEFAULT_TERM_CAP, DEFAULT_TRUNCATION_EPS, PointCloud
from .perturbation import BoundReport, make_report

#: eigenvalue agreement budget for the kernel trick (relative to top eigenvalue)
KERNEL_TRICK_EIG_RTOL = 1e-9
#: absolute budget for the principal-component identity
PC_IDENTITY_TOL = 1e-8
#: eigenvalues below this are exempt from the principal-component identity
PC_EIGENVALUE_FLOOR = 1e-6


@dataclass(frozen=True)
class PopulationSpectrum:
    """Exact covariance spectrum exp(-mu_j t), nonincreasing, with block info."""

    t: float
    mu: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(-self.mu * self.t)

    def is_block_boundary(self, j: int) -> bool:
        """True when mu_{j+1} > mu_j strictly, so the top-j projector is defined."""
        if not 1 <= j < self.mu.shape[0]:
            return False
        return self.mu[j] > self.mu[j - 1]

    def block_boundaries(self, j_max: int):
        return [j for j in range(1, min(j_max, self.mu.shape[0] - 1) + 1)
                if self.is_block_boundary(j)]


@dataclass(frozen=True)
class FeatureMatrix:
    """Truncated RKHS feature coordinates of a point cloud.

    ``matrix`` is (n, N) with rows k_t(X_i, .) expressed in the canonical
    orthonormal basis; ``tail_mass`` is the discarded heat-trace tail.
    """

    matrix: np.ndarray
    cloud: PointCloud
    t: float
    mu: np.ndarray
    tail_mass: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return self.matrix.shape[1]

    def population(self) -> PopulationSpectrum:
        return PopulationSpectrum(self.t, self.mu)


def feature_matrix(cloud: PointCloud, t: float,
                   eps: float = DEFAULT_TRUNCATION_EPS,
                   cap: int = DEFAULT_TERM_CAP) -> FeatureMatrix:
    """Minimal-rank truncated feature map with heat-trace tail <= eps."""
    model = cloud.manifold
    n_terms, tail = model.mercer_rank(t, eps=eps, cap=cap)
    mu = model.eigenvalues(n_terms)
    phi = model.eigenfunction_matrix(cloud.intrinsic, cloud.component_labels, n_terms)
    f = phi * np.exp(-mu * t / 2.0)[None, :]
    return FeatureMatrix(f, cloud, t, mu, tail)


def empirical_covariance(f: FeatureMatrix) -> np.ndarray:
    """F^T F / n, the empirical covariance operator in truncated coordinates."""
    return f.matrix.T @ f.matrix / f.n


def gram_matrix(f: FeatureMatrix) -> np.ndarray:
    """F F^T / n, the kernel Gram matrix of the truncated feature map."""
    return f.matrix @ f.matrix.T / f.n


def kernel_trick_check(f: FeatureMatrix) -> BoundReport:
    """Verify the kernel trick on one feature matrix.

    Checks (a) the leading min(n, N) eigenvalues of F^T F / n and F F^T / n
    agree to 1e-9 relative to the top eigenvalue, and (b) the
    principal-component identity S_n u_hat_j = lambda_hat_j^(1/2) v_hat_j to
    1e-8 for eigenvalues >= 1e-6. Observed is the worst violation normalized
    by its tolerance, so the report passes iff observed <= 1.
    """
    cov = empirical_covariance(f)
    gram = gram_matrix(f)
    w_cov = np.sort(scipy.linalg.eigvalsh(cov, check_finite=False))[::-1]
    dec_gram = spectral.eigh(gram)
    w_gram, v_gram = dec_gram.descending()
    r = min(f.n, f.rank)
    top = max(w_cov[0], w_gram[0], 1e-300)
    eig_err = float(np.abs(w_cov[:r] - w_gram[:r]).max() / top)

    dec_cov = spectral.eigh(cov)
    w_c, a_c = dec_cov.descending()
    pc_err = 0.0
    for j in range(r):
        if w_c[j] < PC_EIGENVALUE_FLOOR:
            break
        s = f.matrix @ a_c[:, j] / math.sqrt(f.n)
        v = v_gram[:, j]
        if s @ v < 0:
            v = -v
        pc_err = max(pc_err, float(np.linalg.norm(s - math.sqrt(w_c[j]) * v)))

    observed = max(eig_err / KERNEL_TRICK_EIG_RTOL, pc_err / PC_IDENTITY_TOL)
    context = {
        "eigenvalue_mismatch": eig_err,
        "eigenvalue_rtol": KERNEL_TRICK_EIG_RTOL,
        "pc_identity_error": pc_err,
        "pc_identity_tol": PC_IDENTITY_TOL,
        "n": f.n,
        "rank": f.rank,
        "t": f.t,
    }
    return make_report("kernel_trick", observed, 1.0, context)


def empirical_vs_population(f: FeatureMatrix, j_max: int):
    """Per-index comparison of the empirical covariance spectrum with the
    population one.

    Returns a list of dicts with keys (j, mu_j, lambda_hat, eig_gap,
    proj_dist, n, t, seed); ``eig_gap`` is |(1 - lambda_hat_j)/t - mu_j| and
    ``proj_dist`` is the HS distance between the empirical top-j eigenspace
    and the coordinate top-j population eigenspace, or None when j is interior
    to a population multiplicity block.
    """
    if not 1 <= j_max <= min(f.n, f.rank):
        raise ValueError(f"need 1 <= j_max <= min(n, N) = {min(f.n, f.rank)}")
    cov = empirical_covariance(f)
    dec = spectral.eigh(cov)
    w, v = dec.descending()
    pop = f.population()
    records = []
    for j in range(1, j_max + 1):
        lam_hat = float(w[j - 1])
        rec = {
            "j": j,
            "mu_j": float(f.mu[j - 1]),
            "lambda_hat": lam_hat,
            "eig_gap": abs((1.0 - lam_hat) / f.t - float(f.mu[j - 1])),
            "proj_dist": None,
            "n": f.n,
            "t": f.t,
            "seed": f.cloud.seed,
        }
        if pop.is_block_boundary(j):
            target = np.eye(f.rank)[:, :j]
            rec["proj_dist"] = spectral.projector_hs_distance(target, v[:, :j])
        records.append(rec)
    return records


def population_projector_distance(f: FeatureMatrix, j: int) -> float:
    """HS distance between empirical and population top-j eigenspaces.

    Raises GapTooSmall when j is interior to a population multiplicity block,
    where the population projector is not defined.
    """
    pop = f.population()
    if not pop.is_block_boundary(j):
        raise GapTooSmall(f"j={j} is interior to a population multiplicity block")
    cov = empirical_covariance(f)
    dec = spectral.eigh(cov)
    _, v = dec.descending()
    target = np.eye(f.rank)[:, :j]
    return spectral.projector_hs_distance(target, v[:, :j])


def delta_nullspace(f: FeatureMatrix, m: int | None = None) -> float:
    """Gap-weighted relative perturbation size of the empirical covariance
    around the population nullspace block.

    Uses the exact population weights 1/(1 - exp(-mu_{m+1} t)) on the leading
    block and 1/(1 - exp(-mu_k t)) beyond it.
    """
    if m is None:
        m = f.cloud.manifold.m
    if not 1 <= m < f.rank:
        raise ValueError(f"need 1 <= m < rank, got m={m}, rank={f.rank}")
    lam = np.exp(-f.mu * f.t)
    gap = 1.0 - lam[m]
    if gap <= perturbation.GAP_RTOL:
        raise GapTooSmall(f"population gap 1 - exp(-mu_{m + 1} t) = {gap:.3e}")
    weights = np.empty(f.rank)
    weights[:m] = 1.0 / gap
    weights[m:] = 1.0 / (1.0 - lam[m:])
    e = empirical_covariance(f) - np.diag(lam)
    return perturbation.weighted_delta_norm(e, weights)
