"""Desk-scale reproductions: eigenvalue/eigenspace convergence sweeps, the
spectral reduction chain, degree concentration, concentration-inequality
Monte Carlo, and eigenvalue-sum scaling checks.

Every sweep is deterministic given its config: replicate r uses seed
``cfg.seed + r``, tasks are enumerated in a fixed order, and parallel
execution (thread pool over replicates) preserves that order in the output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import graph_laplacian as gl
from . import heat_pca, kernels, spectral
from .errors import ConfigError, DegenerateFit, GapTooSmall, TruncationBudgetExceeded
from .manifolds import ManifoldModel, make_manifold

DEFAULT_U_GRID = (0.01, 0.015, 0.02, 0.025, 0.03, 0.05, 0.08, 0.12, 0.2, 0.5, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Grids, replicate count, seeds and kernel choice for one experiment."""

    manifold: ManifoldModel
    n_grid: tuple = (250, 500, 1000, 2000)
    t_grid: tuple = (0.02,)
    replicates: int = 20
    seed: int = 42
    j_values: tuple = (1, 2)
    kernel: str = "gaussian"
    truncation_eps: float = 1e-10
    regularizer_power: int = 4
    parallel: int = 1
    # concentration Monte-Carlo extras
    dimension: int = 10
    trials: int = 10_000
    u_grid: tuple = DEFAULT_U_GRID
    decay: float = 0.9
    y_values: tuple = (1.0, 2.0)

    def __post_init__(self):
        if list(self.n_grid) != sorted(self.n_grid):
            raise ConfigError("n_grid must be sorted ascending")
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("n_grid entries must be positive")
        if any(not 0.0 < t <= 1.0 for t in self.t_grid):
            raise ConfigError("t_grid entries must lie in (0, 1]")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.kernel not in kernels.KERNEL_KINDS:
            raise ConfigError(f"kernel must be one of {kernels.KERNEL_KINDS}")


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log(error) against log(x)."""

    slope: float
    intercept: float
    r_squared: float
    residuals: tuple

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "residuals": list(self.residuals),
        }


@dataclass
class SweepResult:
    records: list
    fits: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def fit_rate(points) -> RateFit:
    """Ordinary least squares on (log x, log error).

    Needs at least 3 points with positive errors; raises DegenerateFit when
    all abscissae coincide.
    """
    pts = [(float(x), float(e)) for x, e in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    if any(e <= 0 for _, e in pts):
        raise ValueError("errors must be positive for a log-log fit")
    xs = np.array([x for x, _ in pts])
    es = np.array([e for _, e in pts])
    if np.all(xs == xs[0]):
        raise DegenerateFit("all abscissae equal")
    lx, le = np.log(xs), np.log(es)
    slope, intercept = np.polyfit(lx, le, 1)
    pred = slope * lx + intercept
    resid = le - pred
    ss_res = float((resid ** 2).sum())
    ss_tot = float(((le - le.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(float(slope), float(intercept), r2, tuple(resid))


def _map_ordered(fn, args, parallel):
    if parallel and parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as ex:
            return list(ex.map(fn, args))
    return [fn(a) for a in args]


def _build_laplacian(cloud, kind, t, d, eps):
    spec = kernels.KernelSpec(kind, t, d)
    w = kernels.build_kernel_matrix(cloud, spec, eps=eps)
    return gl.build_laplacian(w)


# ---------------------------------------------------------------------------
# Eigenvalue convergence (graph Laplacian vs Laplace-Beltrami)
# ---------------------------------------------------------------------------


def corollary1_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Record |lambda_j(L) - mu_j| over the (n, t, replicate) grid and fit the
    n-rate of the median error at fixed t (plus the t-dependence at max n)."""
    model = cfg.manifold
    j_max = max(cfg.j_values)
    mus = model.eigenvalues(j_max)

    def one(task):
        t, n, r = task
        cloud = model.sample_uniform(n, cfg.seed + r)
        lap = _build_laplacian(cloud, cfg.kernel, t, model.d, cfg.truncation_eps)
        dec = spectral.eigh(lap.matrix)
        rows = []
        for j in cfg.j_values:
            lam = float(dec.eigenvalues[j - 1])
            rows.append({
                "n": n, "t": t, "seed": cfg.seed + r, "j": j,
                "lambda": lam, "mu": float(mus[j - 1]),
                "abs_err": abs(lam - float(mus[j - 1])),
            })
        return rows

    tasks = [(t, n, r) for t in cfg.t_grid for n in cfg.n_grid
             for r in range(cfg.replicates)]
    records = [row for rows in _map_ordered(one, tasks, cfg.parallel) for row in rows]

    fits = {}
    medians = {}
    for t in cfg.t_grid:
        for j in cfg.j_values:
            pts = []
            for n in cfg.n_grid:
                errs = [rec["abs_err"] for rec in records
                        if rec["t"] == t and rec["n"] == n and rec["j"] == j]
                med = float(np.median(errs))
                medians[f"t={t!r}|n={n}|j={j}"] = med
                if med > 0:
                    pts.append((n, med))
            if len(pts) >= 3:
                fits[f"n_rate|t={t!r}|j={j}"] = fit_rate(pts)
    if len(cfg.t_grid) >= 3:
        n_big = cfg.n_grid[-1]
        for j in cfg.j_values:
            pts = [(t, medians[f"t={t!r}|n={n_big}|j={j}"]) for t in cfg.t_grid
                   if medians[f"t={t!r}|n={n_big}|j={j}"] > 0]
            if len(pts) >= 3:
                fits[f"t_rate|n={n_big}|j={j}"] = fit_rate(pts)
    return SweepResult(records, fits, {"median_abs_err": medians})


def corollary2_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Procrustes distance between sampled eigenfunctions (columns
    phi_k(X_i)/sqrt(n)) and the first-j Laplacian eigenvectors."""
    model = cfg.manifold
    results = SweepResult([])
    for j in cfg.j_values:
        mu = model.eigenvalues(j + 1)
        if not mu[j] > mu[j - 1]:
            raise GapTooSmall(
                f"j={j} is interior to a multiplicity block (mu_j = mu_j+1 = {mu[j]})"
            )

    def one(task):
        t, n, r, j = task
        cloud = model.sample_uniform(n, cfg.seed + r)
        lap = _build_laplacian(cloud, cfg.kernel, t, model.d, cfg.truncation_eps)
        coords = gl.diffusion_coordinates(lap, j)
        phi = model.eigenfunction_matrix(cloud.intrinsic, cloud.component_labels, j)
        dist, _ = spectral.procrustes_distance(phi / math.sqrt(n), coords)
        return {"n": n, "t": t, "seed": cfg.seed + r, "j": j, "procrustes_dist": dist}

    tasks = [(t, n, r, j) for t in cfg.t_grid for n in cfg.n_grid
             for r in range(cfg.replicates) for j in cfg.j_values]
    results.records = _map_ordered(one, tasks, cfg.parallel)

    medians = {}
    for t in cfg.t_grid:
        for j in cfg.j_values:
            pts = []
            for n in cfg.n_grid:
                ds = [rec["procrustes_dist"] for rec in results.records
                      if rec["t"] == t and rec["n"] == n and rec["j"] == j]
                med = float(np.median(ds))
                medians[f"t={t!r}|n={n}|j={j}"] = med
                if med > 0:
                    pts.append((n, med))
            if len(pts) >= 3:
                results.fits[f"n_rate|t={t!r}|j={j}"] = fit_rate(pts)
    results.summary["median_procrustes"] = medians
    return results


# ---------------------------------------------------------------------------
# Degree concentration and the reduction chain
# ---------------------------------------------------------------------------


def degree_concentration(cfg: ExperimentConfig) -> SweepResult:
    """max_i |(1/n) sum_j k_t(X_i, X_j) - 1| across replicates, with the
    n-rate of the median."""
    model = cfg.manifold

    def one(task):
        t, n, r = task
        cloud = model.sample_uniform(n, cfg.seed + r)
        vals = kernels.heat_kernel_values(
            cloud, kernels.KernelSpec("heat", t, model.d), eps=cfg.truncation_eps)
        deg = vals.mean(axis=1)
        return {"n": n, "t": t, "seed": cfg.seed + r,
                "max_degree_dev": float(np.abs(deg - 1.0).max())}

    tasks = [(t, n, r) for t in cfg.t_grid for n in cfg.n_grid
             for r in range(cfg.replicates)]
    records = _map_ordered(one, tasks, cfg.parallel)
    fits = {}
    medians = {}
    for t in cfg.t_grid:
        pts = []
        for n in cfg.n_grid:
            devs = [rec["max_degree_dev"] for rec in records
                    if rec["t"] == t and rec["n"] == n]
            med = float(np.median(devs))
            medians[f"t={t!r}|n={n}"] = med
            if med > 0:
                pts.append((n, med))
        if len(pts) >= 3:
            fits[f"n_rate|t={t!r}"] = fit_rate(pts)
    return SweepResult(records, fits, {"median_max_dev": medians})


def reduction_chain(cfg: ExperimentConfig) -> SweepResult:
    """Per-replicate eigenvalue discrepancies along the chain
    (I - K_t)/t  ->  L_{k_t}  ->  L_{w_t}.

    Step 1 compares the spectrum of (I - K_t)/t with (1 - lambda_hat_j)/t from
    the covariance side of the kernel trick (same nonzero spectrum, so the
    discrepancy is pure floating point). Step 2 is bounded by
    ||I - D_{k_t}||_inf / t by Weyl. Step 3 records the fitted constant of the
    gap-regularized relative norm against t log^2(e/t).
    """
    model = cfg.manifold
    j_max = max(cfg.j_values)
    n = cfg.n_grid[-1]
    power = cfg.regularizer_power

    def one(task):
        t, r = task
        cloud = model.sample_uniform(n, cfg.seed + r)
        f = heat_pca.feature_matrix(cloud, t, eps=cfg.truncation_eps)
        gram = heat_pca.gram_matrix(f)
        a_eigs = scipy.linalg.eigvalsh((np.eye(n) - gram) / t, check_finite=False)
        cov = heat_pca.empirical_covariance(f)
        lam_hat = np.sort(scipy.linalg.eigvalsh(cov, check_finite=False))[::-1]

        k_mat = kernels.KernelMatrix(gram, kernels.KernelSpec("heat", t, model.d))
        lap_k = gl.build_laplacian(k_mat)
        dec_k = spectral.eigh(lap_k.matrix)
        b_eigs = dec_k.eigenvalues
        deg_dev = float(np.abs(1.0 - lap_k.degree_diag).max())

        lap_w = _build_laplacian(cloud, "gaussian", t, model.d, cfg.truncation_eps)
        c_eigs = scipy.linalg.eigvalsh(lap_w.matrix, check_finite=False)

        shifted = np.maximum(dec_k.eigenvalues, 0.0) + t ** power
        inv_sqrt = dec_k.eigenvectors / np.sqrt(shifted)[None, :]
        mid = inv_sqrt.T @ (lap_w.matrix - lap_k.matrix) @ inv_sqrt
        rel_norm = float(np.abs(scipy.linalg.eigvalsh(mid, check_finite=False)).max())
        c3 = rel_norm / (t * math.log(math.e / t) ** 2)

        rows = []
        for j in cfg.j_values:
            step1 = abs(a_eigs[j - 1] - (1.0 - lam_hat[j - 1]) / t)
            step2 = abs(a_eigs[j - 1] - b_eigs[j - 1])
            step3 = abs(b_eigs[j - 1] - c_eigs[j - 1])
            rows.append({
                "t": t, "n": n, "seed": cfg.seed + r, "j": j,
                "step1_gap": float(step1),
                "step2_gap": float(step2),
                "step2_bound": deg_dev / t,
                "step3_gap": float(step3),
                "c3_constant": c3,
            })
        return rows

    tasks = [(t, r) for t in cfg.t_grid for r in range(cfg.replicates)]
    records = [row for rows in _map_ordered(one, tasks, cfg.parallel) for row in rows]
    summary = {
        "max_step1_gap": max(rec["step1_gap"] for rec in records),
        "step2_violations": sum(
            rec["step2_gap"] > rec["step2_bound"] * (1 + 1e-9) + 1e-12
            for rec in records),
        "median_c3_by_t": {
            repr(t): float(np.median([rec["c3_constant"] for rec in records
                                      if rec["t"] == t]))
            for t in cfg.t_grid
        },
    }
    return SweepResult(records, {}, summary)


# ---------------------------------------------------------------------------
# Concentration-inequality Monte Carlo
# ---------------------------------------------------------------------------


def operator_bernstein_mc(cfg: ExperimentConfig) -> SweepResult:
    """Empirical tails of ||(1/n) sum_i (Z_i Z_i^T - E)||_op for Z_i uniform on
    the unit sphere in R^D, against the closed-form Bernstein tail
    4 D exp(-n u^2 / (2V + (2/3) u R)) with exact ensemble constants
    R = 1 - 1/D, V = (1/D)(1 - 1/D), trace factor D."""
    dim = cfg.dimension
    n = cfg.n_grid[-1]
    trials = cfg.trials
    r_const = 1.0 - 1.0 / dim
    v_const = (1.0 / dim) * (1.0 - 1.0 / dim)
    d_const = float(dim)
    rng = np.random.default_rng(cfg.seed)
    norms = np.empty(trials)
    eye_over_d = np.eye(dim) / dim
    for i in range(trials):
        z = rng.standard_normal((n, dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        s = z.T @ z / n - eye_over_d
        w = np.linalg.eigvalsh(s)
        norms[i] = max(abs(w[0]), abs(w[-1]))
    records = []
    for u in cfg.u_grid:
        bound = 4.0 * d_const * math.exp(-n * u * u / (2.0 * v_const + (2.0 / 3.0) * u * r_const))
        freq = float((norms >= u).mean())
        vacuous = bound >= 1.0
        records.append({
            "u": u, "empirical_tail": freq, "bound": bound,
            "vacuous": vacuous,
            "violation": bool((not vacuous) and freq > bound),
            "n": n, "dimension": dim, "trials": trials,
        })
    summary = {
        "violations": sum(rec["violation"] for rec in records),
        "vacuous": sum(rec["vacuous"] for rec in records),
        "norm_median": float(np.median(norms)),
        "norm_max": float(norms.max()),
    }
    return SweepResult(records, {}, summary)


def hilbert_norm_mc(cfg: ExperimentConfig) -> SweepResult:
    """Quantiles of sum_k a_k ((1/n) sum_i Z_ik)^2 for geometric weights
    a_k = q^k and Rademacher Z, against the scale
    ||a||_1 y/n + ||k a_k||_1 y^2/n^2 at confidence level 1 - e^{-y}.

    The fitted constant C should be stable (ratio <= 2) across n doublings.
    """
    q = cfg.decay
    if not 0.0 < q < 1.0:
        raise ConfigError("decay must lie in (0, 1)")
    k_max = max(8, int(math.ceil(math.log(1e-17) / math.log(q))))
    ks = np.arange(1, k_max + 1)
    a = q ** ks
    norm_a = float(a.sum())
    norm_ka = float((ks * a).sum())
    records = []
    for n in cfg.n_grid:
        rng = np.random.default_rng(cfg.seed + n)
        counts = rng.binomial(n, 0.5, size=(cfg.trials, k_max))
        means = (2.0 * counts - n) / n
        t_stat = (a[None, :] * means ** 2).sum(axis=1)
        for y in cfg.y_values:
            level = 1.0 - math.exp(-y)
            quant = float(np.quantile(t_stat, level))
            scale = norm_a * y / n + norm_ka * y * y / (n * n)
            records.append({
                "n": n, "y": y, "quantile": quant, "bound_scale": scale,
                "c_fitted": quant / scale, "trials": cfg.trials,
            })
    summary = {"c_ratio_by_y": {}}
    for y in cfg.y_values:
        cs = [rec["c_fitted"] for rec in records if rec["y"] == y]
        ratios = [cs[i + 1] / cs[i] for i in range(len(cs) - 1)]
        summary["c_ratio_by_y"][repr(y)] = ratios
    return SweepResult(records, {}, summary)


# ---------------------------------------------------------------------------
# Eigenvalue-sum scalings
# ---------------------------------------------------------------------------


def eigenvalue_sum_check(model: ManifoldModel, t_grid, cap: int = 10**7) -> SweepResult:
    """Analytic-spectrum sums S1 = sum_{j>m} x_j/(1-x_j),
    S2 = sum_{j>m} x_j/(1-x_j)^2, S3 = sum_{j>m} j x_j/(1-x_j)^2 with
    x_j = exp(-mu_j t), recorded together with the scalings t^{d/2} S1,
    t^{d/2} S2 and t^d S3.

    S1 and S2 need model dimension d >= 3; S3 needs d >= 5.
    """
    if model.d < 3:
        raise ValueError("eigenvalue sums need intrinsic dimension >= 3")
    include_s3 = model.d >= 5
    records = []
    for t in t_grid:
        if not 0.0 < t <= 1.0:
            raise ConfigError("t must lie in (0, 1]")
        mu_max = max(60.0 / t, 100.0)
        mus, mults = model.eigenvalue_shells(mu_max)
        if mults.sum() > cap:
            raise TruncationBudgetExceeded(
                f"eigenvalue sums need {int(mults.sum())} terms, cap {cap}")
        s1 = s2 = s3 = 0.0
        idx = 1 + int(mults[0])
        for mu, mult in zip(mus[1:], mults[1:]):
            x = math.exp(-mu * t)
            mult = int(mult)
            s1 += mult * x / (1.0 - x)
            s2 += mult * x / (1.0 - x) ** 2
            if include_s3:
                s3 += mult * (idx + (mult - 1) / 2.0) * x / (1.0 - x) ** 2
            idx += mult
        rec = {
            "t": t, "s1": s1, "s2": s2, "s3": s3 if include_s3 else None,
            "scaled_s1": t ** (model.d / 2.0) * s1,
            "scaled_s2": t ** (model.d / 2.0) * s2,
            "scaled_s3": t ** model.d * s3 if include_s3 else None,
        }
        records.append(rec)
    summary = {}
    for key in ("scaled_s1", "scaled_s2", "scaled_s3"):
        vals = [rec[key] for rec in records if rec[key] is not None and rec[key] > 0]
        if vals:
            summary[f"{key}_max_over_min"] = max(vals) / min(vals)
    return SweepResult(records, {}, summary)


# ---------------------------------------------------------------------------
# Config parsing (shared with the CLI)
# ---------------------------------------------------------------------------


#: keys consumed by config_from_dict; extra op-specific keys must be declared
_CONFIG_KEYS = frozenset({
    "manifold", "n_grid", "t_grid", "replicates", "seed", "j_values", "kernel",
    "truncation_eps", "regularizer_power", "parallel", "dimension", "trials",
    "u_grid", "decay", "y_values",
})


def config_from_dict(raw: dict, extra_keys=()) -> ExperimentConfig:
    """Build an ExperimentConfig from a plain JSON-style dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS - set(extra_keys)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    man = raw.get("manifold", {})
    if not isinstance(man, dict) or "family" not in man:
        raise ConfigError("config needs manifold.family")
    try:
        model = make_manifold(man["family"], dim=man.get("dim"),
                              separation=man.get("separation", 2.0))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    kwargs = {}
    for key in ("replicates", "seed", "kernel", "truncation_eps",
                "regularizer_power", "parallel", "dimension", "trials", "decay"):
        if key in raw:
            kwargs[key] = raw[key]
    for key, cast in (("n_grid", int), ("t_grid", float), ("j_values", int),
                      ("u_grid", float), ("y_values", float)):
        if key in raw:
            kwargs[key] = tuple(cast(v) for v in raw[key])
    try:
        return ExperimentConfig(manifold=model, **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def with_overrides(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return replace(cfg, **kwargs)
