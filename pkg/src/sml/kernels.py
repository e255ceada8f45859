"""The three point-cloud kernel matrices (Gaussian, geodesic, heat) and the
pairwise kernel-approximation scans.

All matrices are dense n-by-n and carry the 1/n normalization inside their
entries: entry (i, j) = kernel(X_i, X_j) / n. Raw (unnormalized) builders are
exposed for the residual scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .manifolds import DEFAULT_TERM_CAP, DEFAULT_TRUNCATION_EPS, PointCloud
from .perturbation import BoundReport, make_report

KERNEL_KINDS = ("gaussian", "geodesic", "heat")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth/time t and the intrinsic dimension d used
    in the (4 pi t)^(-d/2) prefactor."""

    kind: str
    t: float
    d: int

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kind must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if not 0.0 < self.t <= 1.0:
            raise ValueError(f"t must lie in (0, 1], got {self.t}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")

    @property
    def prefactor(self) -> float:
        return (4.0 * math.pi * self.t) ** (-self.d / 2.0)


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric nonnegative n-by-n matrix with the 1/n factor included."""

    entries: np.ndarray
    spec: KernelSpec

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def raw(self) -> np.ndarray:
        """Kernel values without the 1/n normalization."""
        return self.entries * self.n


def _pairwise_sq_euclidean(ambient: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, exactly symmetric and zero on the diagonal."""
    gram = ambient @ ambient.T
    gram = (gram + gram.T) / 2.0
    sq = np.diag(gram)
    d2 = sq[:, None] + sq[None, :] - 2.0 * gram
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def gaussian_kernel_values(cloud: PointCloud, spec: KernelSpec) -> np.ndarray:
    """Raw w_t(X_i, X_j) = (4 pi t)^(-d/2) exp(-||x_i - x_j||^2 / (4 t))."""
    d2 = _pairwise_sq_euclidean(cloud.ambient)
    return spec.prefactor * np.exp(-d2 / (4.0 * spec.t))


def geodesic_kernel_values(cloud: PointCloud, spec: KernelSpec) -> np.ndarray:
    """Raw g_t with the intrinsic distance; zero across components (d = +inf)."""
    dist = cloud.manifold.geodesic_distance_matrix(cloud)
    with np.errstate(invalid="ignore"):
        vals = spec.prefactor * np.exp(-(dist ** 2) / (4.0 * spec.t))
    return np.where(np.isinf(dist), 0.0, vals)


def heat_kernel_values(cloud: PointCloud, spec: KernelSpec,
                       eps: float = DEFAULT_TRUNCATION_EPS,
                       cap: int = DEFAULT_TERM_CAP) -> np.ndarray:
    """Raw truncated-Mercer heat kernel values k_t(X_i, X_j)."""
    return cloud.manifold.heat_kernel_matrix(cloud, spec.t, eps=eps, cap=cap)


def gaussian_matrix(cloud: PointCloud, spec: KernelSpec) -> KernelMatrix:
    if spec.kind != "gaussian":
        raise ValueError(f"spec.kind must be 'gaussian', got {spec.kind!r}")
    return KernelMatrix(gaussian_kernel_values(cloud, spec) / cloud.n, spec)


def geodesic_matrix(cloud: PointCloud, spec: KernelSpec) -> KernelMatrix:
    if spec.kind != "geodesic":
        raise ValueError(f"spec.kind must be 'geodesic', got {spec.kind!r}")
    return KernelMatrix(geodesic_kernel_values(cloud, spec) / cloud.n, spec)


def heat_matrix(cloud: PointCloud, spec: KernelSpec,
                eps: float = DEFAULT_TRUNCATION_EPS,
                cap: int = DEFAULT_TERM_CAP) -> KernelMatrix:
    if spec.kind != "heat":
        raise ValueError(f"spec.kind must be 'heat', got {spec.kind!r}")
    return KernelMatrix(heat_kernel_values(cloud, spec, eps=eps, cap=cap) / cloud.n, spec)


def build_kernel_matrix(cloud: PointCloud, spec: KernelSpec,
                        eps: float = DEFAULT_TRUNCATION_EPS) -> KernelMatrix:
    """Dispatch on spec.kind."""
    if spec.kind == "gaussian":
        return gaussian_matrix(cloud, spec)
    if spec.kind == "geodesic":
        return geodesic_matrix(cloud, spec)
    return heat_matrix(cloud, spec, eps=eps)


def _residual_scan(heat_vals, other_vals, t, power, log_exponent, name):
    """Fit the multiplicative constant of |k_t - other| against
    k_t * t * log^q(e/t) over pairs where the heat kernel clears the additive
    floor t^power, then charge what is left to the additive term.

    The report passes when the leftover additive constant is <= 1.
    """
    resid = np.abs(heat_vals - other_vals)
    log_term = math.log(math.e / t) ** log_exponent
    denom = heat_vals * (t * log_term)
    floor = t ** power
    above = heat_vals >= floor
    if above.any():
        c_mult = float((resid[above] / denom[above]).max())
    else:
        c_mult = 0.0
    leftover = resid - c_mult * denom
    np.maximum(leftover, 0.0, out=leftover)
    c_add = float(leftover.max() / floor)
    n_pairs = heat_vals.shape[0] * heat_vals.shape[1]
    context = {
        "t": t,
        "K": power,
        "C_mult": c_mult,
        "C_add": c_add,
        "pairs": n_pairs,
        "pairs_above_floor": int(above.sum()),
    }
    return make_report(name, c_add, 1.0, context)


def _scan_pair(cloud, t, eps):
    d = cloud.manifold.d
    w = gaussian_kernel_values(cloud, KernelSpec("gaussian", t, d))
    k = heat_kernel_values(cloud, KernelSpec("heat", t, d), eps=eps)
    return k, w


def kernel_residual_scan(cloud: PointCloud, t: float, power: int = 4,
                         eps: float = DEFAULT_TRUNCATION_EPS) -> BoundReport:
    """Scan |k_t - w_t| over all pairs against C k_t t log^2(e/t) + C t^K.

    The fitted multiplicative constant (over pairs with k_t >= t^K) is
    reported in context["C_mult"]; observed is the additive leftover constant
    max (residual - C_mult k_t t log^2(e/t))_+ / t^K, to be compared to 1.
    """
    if power < 1:
        raise ValueError("power K must be >= 1")
    k, w = _scan_pair(cloud, t, eps)
    return _residual_scan(k, w, t, power, 2, "kernel_residual_scan")


def heat_geodesic_residual_scan(cloud: PointCloud, t: float, power: int = 4,
                                eps: float = DEFAULT_TRUNCATION_EPS) -> BoundReport:
    """Same scan for |k_t - g_t| against C k_t t log(e/t) + C t^K."""
    if power < 1:
        raise ValueError("power K must be >= 1")
    d = cloud.manifold.d
    g = geodesic_kernel_values(cloud, KernelSpec("geodesic", t, d))
    k = heat_kernel_values(cloud, KernelSpec("heat", t, d), eps=eps)
    return _residual_scan(k, g, t, power, 1, "heat_geodesic_residual_scan")
