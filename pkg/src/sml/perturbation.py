"""Executable spectral perturbation bounds.

Each ``check_*`` operation evaluates one classical inequality on a concrete
matrix pair and wraps the outcome in a :class:`BoundReport`:

* absolute Weyl: |lambda_j(B) - lambda_j(A)| <= ||B - A||_op,
* absolute Davis-Kahan: projector HS distance <= sqrt(32 j) ||B - A||_op / gap,
* relative Davis-Kahan: projector HS distance <= sqrt(32 j) delta_{<=j}(B - A),
* a refined two-term relative bound valid when delta <= 1/4,
* relative Weyl for positive definite A,
* a relative Weyl bound for a top eigenvalue of multiplicity m.

The gap-weighted quantity delta_{<=j} is available for both eigenvalue
orderings through a single ``order`` flag: "ascending" treats the leading
block as the j smallest eigenvalues (graph Laplacians), "descending" as the
j largest (covariance operators).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import spectral
from .errors import GapTooSmall, NotPositiveDefinite

GAP_RTOL = 1e-12
SLACK_RTOL = 1e-9
REFINED_DK_CONSTANT = 20.0 * math.sqrt(2.0)
REFINED_WEYL_CONSTANT = 40.0


@dataclass
class BoundReport:
    """Observed quantity versus bound value for one perturbation check."""

    name: str
    observed: float
    bound_value: float
    slack: float
    passed: bool
    context: dict = field(default_factory=dict)
    skipped: bool = False

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "observed": self.observed,
            "bound_value": self.bound_value,
            "slack": self.slack,
            "pass": self.passed,
            "skipped": self.skipped,
            "context": self.context,
        }
        return json.dumps(payload, sort_keys=True)


def make_report(name, observed, bound_value, context=None, skipped=False) -> BoundReport:
    observed = float(observed)
    bound_value = float(bound_value)
    slack = bound_value - observed
    scale = max(abs(observed), abs(bound_value), 1.0)
    passed = bool(skipped or slack >= -SLACK_RTOL * scale)
    return BoundReport(name, observed, bound_value, slack, passed,
                       dict(context or {}), skipped)


def _as_symmetric(a):
    a = np.asarray(a, dtype=float)
    return (a + a.T) / 2.0


def operator_norm(a) -> float:
    """Spectral norm of a symmetric matrix via its extreme eigenvalues."""
    w = scipy.linalg.eigvalsh(_as_symmetric(a), check_finite=False)
    return float(max(abs(w[0]), abs(w[-1]))) if w.size else 0.0


def _ordered_eigh(a, order):
    dec = spectral.eigh(a)
    if order == "ascending":
        return dec.eigenvalues, dec.eigenvectors
    if order == "descending":
        return dec.descending()
    raise ValueError(f"order must be 'ascending' or 'descending', got {order!r}")


def _gap_weights(vals, j, order):
    """delta weights in the eigenbasis: 1/gap on the leading block, reciprocal
    distance to the block-boundary eigenvalue beyond it."""
    n = vals.shape[0]
    if not 1 <= j < n:
        raise ValueError(f"need 1 <= j < n, got j={j}, n={n}")
    boundary = vals[j - 1]
    if order == "descending":
        gap = boundary - vals[j]
        rest = boundary - vals[j:]
    else:
        gap = vals[j] - boundary
        rest = vals[j:] - boundary
    scale = max(abs(vals[0]), abs(vals[-1]), 1e-300)
    if gap <= GAP_RTOL * scale:
        raise GapTooSmall(f"spectral gap {gap:.3e} at j={j} below {GAP_RTOL:.0e} * scale")
    w = np.empty(n)
    w[:j] = 1.0 / gap
    w[j:] = 1.0 / rest
    return w, gap


def weighted_delta_norm(e_mat, weights) -> float:
    """||W^{1/2} E W^{1/2}||_op for a diagonal weight vector."""
    sq = np.sqrt(weights)
    return operator_norm(sq[:, None] * _as_symmetric(e_mat) * sq[None, :])


def delta_leq_j(a, e, j, order="descending") -> float:
    """Gap-weighted relative size of a perturbation across the j-block boundary.

    Computed in A's eigenbasis as ||W^{1/2} (V^T E V) W^{1/2}||_op with
    weights 1/gap on the leading block and 1/|lambda_k - lambda_j| beyond it.
    Scale-invariant: delta(alpha A, alpha E) = delta(A, E).
    """
    vals, vecs = _ordered_eigh(a, order)
    w, _ = _gap_weights(vals, j, order)
    e_tilde = vecs.T @ _as_symmetric(e) @ vecs
    return weighted_delta_norm(e_tilde, w)


def check_absolute_weyl(a, b, context=None):
    """One report per index j for |lambda_j(B) - lambda_j(A)| <= ||B - A||_op."""
    va = scipy.linalg.eigvalsh(_as_symmetric(a), check_finite=False)
    vb = scipy.linalg.eigvalsh(_as_symmetric(b), check_finite=False)
    bound = operator_norm(np.asarray(b, dtype=float) - np.asarray(a, dtype=float))
    reports = []
    for j, (x, y) in enumerate(zip(va, vb), start=1):
        ctx = dict(context or {})
        ctx["j"] = j
        reports.append(make_report("absolute_weyl", abs(y - x), bound, ctx))
    return reports


def check_absolute_dk(a, b, j, order="descending", context=None) -> BoundReport:
    """Davis-Kahan: HS projector distance <= sqrt(32 j) ||B - A||_op / gap(A)."""
    vals_a, vecs_a = _ordered_eigh(a, order)
    n = vals_a.shape[0]
    if not 1 <= j < n:
        raise ValueError(f"need 1 <= j < n, got j={j}")
    _, gap = _gap_weights(vals_a, j, order)
    _, vecs_b = _ordered_eigh(b, order)
    observed = spectral.projector_hs_distance(vecs_a[:, :j], vecs_b[:, :j])
    enorm = operator_norm(np.asarray(b, dtype=float) - np.asarray(a, dtype=float))
    bound = math.sqrt(32.0 * j) * enorm / gap
    ctx = dict(context or {})
    ctx.update({"j": j, "gap": gap, "perturbation_norm": enorm, "order": order})
    return make_report("absolute_davis_kahan", observed, bound, ctx)


def check_relative_dk(a, e, j, order="descending", context=None) -> BoundReport:
    """Relative Davis-Kahan: HS projector distance <= sqrt(32 j) delta_{<=j}."""
    a = _as_symmetric(a)
    e = _as_symmetric(e)
    delta = delta_leq_j(a, e, j, order)
    vals_a, vecs_a = _ordered_eigh(a, order)
    _, vecs_b = _ordered_eigh(a + e, order)
    observed = spectral.projector_hs_distance(vecs_a[:, :j], vecs_b[:, :j])
    bound = math.sqrt(32.0 * j) * delta
    ctx = dict(context or {})
    ctx.update({"j": j, "delta": delta, "order": order})
    return make_report("relative_davis_kahan", observed, bound, ctx)


def check_relative_dk_refined(a, e, j, order="descending",
                              quadratic_constant=REFINED_DK_CONSTANT,
                              context=None) -> BoundReport:
    """Two-term relative bound sqrt(2) ||P E R||_F + c j delta^2, valid for
    delta <= 1/4 and a leading block of equal eigenvalues; skipped otherwise."""
    a = _as_symmetric(a)
    e = _as_symmetric(e)
    vals_a, vecs_a = _ordered_eigh(a, order)
    w, gap = _gap_weights(vals_a, j, order)
    e_tilde = vecs_a.T @ e @ vecs_a
    delta = weighted_delta_norm(e_tilde, w)
    ctx = dict(context or {})
    ctx.update({"j": j, "delta": delta, "order": order})
    if delta > 0.25:
        return make_report("relative_davis_kahan_refined", 0.0, 0.0, ctx, skipped=True)
    _, vecs_b = _ordered_eigh(a + e, order)
    observed = spectral.projector_hs_distance(vecs_a[:, :j], vecs_b[:, :j])
    # cross block weighted by the reduced resolvent 1/|lambda_k - lambda_j|
    cross = e_tilde[:j, j:] * w[None, j:]
    linear = math.sqrt(2.0) * float(np.linalg.norm(cross))
    bound = linear + quadratic_constant * j * delta ** 2
    ctx["linear_term"] = linear
    return make_report("relative_davis_kahan_refined", observed, bound, ctx)


def check_relative_weyl_pd(a, b, j, context=None) -> BoundReport:
    """|lambda_j(B) - lambda_j(A)| <= lambda_j(A) ||A^{-1/2}(B-A)A^{-1/2}||_op
    for positive definite A (ascending index convention).

    The bound is a theorem only while the relative norm stays below 1 (the
    congruence argument needs I + A^{-1/2}(B-A)A^{-1/2} >= 0; for larger
    perturbations A = diag(eps, 1), B - A = diag(0, -3/2) gives
    |lambda_1(B) - lambda_1(A)| = 1/2 + eps against a bound of 3 eps/2).
    Out-of-domain inputs yield a skipped report.
    """
    a = _as_symmetric(a)
    b = _as_symmetric(b)
    dec = spectral.eigh(a)
    scale = max(abs(dec.eigenvalues[0]), abs(dec.eigenvalues[-1]), 1e-300)
    if dec.eigenvalues[0] <= GAP_RTOL * scale:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {dec.eigenvalues[0]:.3e} not positive"
        )
    n = dec.n
    if not 1 <= j <= n:
        raise ValueError(f"need 1 <= j <= n, got j={j}")
    inv_sqrt = dec.eigenvectors * (1.0 / np.sqrt(dec.eigenvalues))[None, :]
    mid = inv_sqrt.T @ (b - a) @ inv_sqrt
    rel_norm = operator_norm(mid)
    ctx = dict(context or {})
    ctx.update({"j": j, "relative_norm": rel_norm})
    if rel_norm >= 1.0:
        return make_report("relative_weyl_pd", 0.0, 0.0, ctx, skipped=True)
    vb = scipy.linalg.eigvalsh(b, check_finite=False)
    lam_j = dec.eigenvalues[j - 1]
    observed = abs(vb[j - 1] - lam_j)
    bound = lam_j * rel_norm
    return make_report("relative_weyl_pd", observed, bound, ctx)


def check_nullspace_relative_weyl(sigma, sigma_hat, m, context=None) -> BoundReport:
    """For a top eigenvalue of multiplicity m (descending order):
    max_{j<=m} |lambda_hat_j - lambda_1| <= (lambda_1 - lambda_{m+1}) * delta,
    valid when delta_{<=m} <= 1/4; reported as skipped otherwise."""
    sigma = _as_symmetric(sigma)
    sigma_hat = _as_symmetric(sigma_hat)
    vals, _ = _ordered_eigh(sigma, "descending")
    delta = delta_leq_j(sigma, sigma_hat - sigma, m, "descending")
    ctx = dict(context or {})
    ctx.update({"m": m, "delta": delta})
    if delta > 0.25:
        return make_report("nullspace_relative_weyl", 0.0, 0.0, ctx, skipped=True)
    vb = np.sort(scipy.linalg.eigvalsh(sigma_hat, check_finite=False))[::-1]
    observed = float(np.abs(vb[:m] - vals[0]).max())
    bound = (vals[0] - vals[m]) * delta
    return make_report("nullspace_relative_weyl", observed, bound, ctx)


def check_nullspace_relative_weyl_refined(sigma, sigma_hat, m,
                                          quadratic_constant=REFINED_WEYL_CONSTANT,
                                          context=None) -> BoundReport:
    """Second-order variant: max_{j<=m} |lambda_hat_j - lambda_1| <=
    ||P_{<=m} E P_{<=m}||_F + C (lambda_1 - lambda_{m+1}) m delta^2.

    The absolute constant is not pinned by theory; the smallest constant that
    would pass is recorded in the report context.
    """
    sigma = _as_symmetric(sigma)
    sigma_hat = _as_symmetric(sigma_hat)
    e = sigma_hat - sigma
    vals, vecs = _ordered_eigh(sigma, "descending")
    w, _ = _gap_weights(vals, m, "descending")
    e_tilde = vecs.T @ e @ vecs
    delta = weighted_delta_norm(e_tilde, w)
    ctx = dict(context or {})
    ctx.update({"m": m, "delta": delta})
    if delta > 0.25:
        return make_report("nullspace_relative_weyl_refined", 0.0, 0.0, ctx,
                           skipped=True)
    vb = np.sort(scipy.linalg.eigvalsh(sigma_hat, check_finite=False))[::-1]
    observed = float(np.abs(vb[:m] - vals[0]).max())
    frob_block = float(np.linalg.norm(e_tilde[:m, :m]))
    quad_scale = (vals[0] - vals[m]) * m * delta ** 2
    bound = frob_block + quadratic_constant * quad_scale
    if quad_scale > 0:
        ctx["smallest_passing_constant"] = max(0.0, (observed - frob_block) / quad_scale)
    ctx["frobenius_block"] = frob_block
    return make_report("nullspace_relative_weyl_refined", observed, bound, ctx)


def check_delta_upper_bounds(a, e, j, order="ascending", context=None):
    """The two elementary upper bounds on delta_{<=j}:

    delta <= ||E||_op / gap always, and for positive definite A (ascending
    order) also delta <= (lambda_{j+1}/gap) ||A^{-1/2} E A^{-1/2}||_op.
    Returns one or two reports.
    """
    a = _as_symmetric(a)
    e = _as_symmetric(e)
    vals, vecs = _ordered_eigh(a, order)
    w, gap = _gap_weights(vals, j, order)
    e_tilde = vecs.T @ e @ vecs
    delta = weighted_delta_norm(e_tilde, w)
    enorm = operator_norm(e)
    ctx = dict(context or {})
    ctx.update({"j": j, "gap": gap, "order": order})
    reports = [make_report("delta_vs_absolute_ratio", delta, enorm / gap, ctx)]
    if order == "ascending" and vals[0] > GAP_RTOL * max(abs(vals[-1]), 1e-300):
        inv_sqrt = vecs * (1.0 / np.sqrt(vals))[None, :]
        rel_norm = operator_norm(inv_sqrt.T @ e @ inv_sqrt)
        lam_boundary = vals[j]
        bound = lam_boundary / gap * rel_norm
        reports.append(make_report("delta_vs_pd_relative_norm", delta, bound, ctx))
    return reports


def check_procrustes_vs_projector(u, u_hat, context=None) -> BoundReport:
    """Orthogonal-alignment distance is dominated by the projector HS distance."""
    dist, _ = spectral.procrustes_distance(u, u_hat)
    bound = spectral.projector_hs_distance(u, u_hat)
    ctx = dict(context or {})
    ctx["j"] = u.shape[1]
    return make_report("procrustes_vs_projector_hs", dist, bound, ctx)


# ---------------------------------------------------------------------------
# Random instance generation and the property suites
# ---------------------------------------------------------------------------


def _random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))[None, :]


def _goe(rng, n, scale=1.0):
    g = rng.standard_normal((n, n))
    return scale * (g + g.T) / (2.0 * math.sqrt(n))


def _engineered_spectrum(rng, n):
    """Eigenvalues with deliberate ties and clusters, conjugated later."""
    n_blocks = int(rng.integers(1, max(2, n // 2) + 1))
    sizes = rng.multinomial(n - n_blocks, np.ones(n_blocks) / n_blocks) + 1
    values = np.sort(rng.uniform(-1.0, 1.0, size=n_blocks))[::-1]
    vals = np.repeat(values, sizes)
    return vals


def _random_pair(rng, degenerate=False):
    n = int(rng.integers(2, 41))
    scale_e = 10.0 ** rng.uniform(-6.0, 0.0)
    if degenerate:
        vals = _engineered_spectrum(rng, n)
        q = _random_orthogonal(rng, n)
        a = (q * vals[None, :]) @ q.T
    else:
        a = _goe(rng, n)
    e = _goe(rng, n, scale=scale_e)
    return a, e, n


def _pick_gap_index(vals_sorted, rng, scale):
    """Random block boundary with a healthy gap; index is 1-based and relative
    to the ordering of ``vals_sorted`` (works for either convention)."""
    gaps = np.abs(vals_sorted[1:] - vals_sorted[:-1])
    good = np.nonzero(gaps > 1e-6 * max(scale, 1e-300))[0]
    if good.size == 0:
        return None
    return int(good[rng.integers(good.size)]) + 1


@dataclass
class SuiteResult:
    name: str
    instances: int
    violations: int
    skipped: int
    worst_slack: float
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _tally(name, reports_iter, instances, extras=None):
    violations = 0
    skipped = 0
    worst = math.inf
    for rep in reports_iter:
        if rep.skipped:
            skipped += 1
            continue
        scale = max(abs(rep.observed), abs(rep.bound_value), 1.0)
        worst = min(worst, rep.slack / scale)
        if not rep.passed:
            violations += 1
    if worst is math.inf:
        worst = 0.0
    return SuiteResult(name, instances, violations, skipped, worst, extras or {})


def run_property_suites(n_instances=10_000, seed=20240901, suites=None):
    """Run the inequality oracles on random matrix ensembles.

    For every bound, draws ``n_instances`` random (A, E) pairs -- Gaussian
    orthogonal ensembles mixed with engineered tied spectra conjugated by
    random orthogonal matrices, perturbation scales logarithmic in
    [1e-6, 1] -- and verifies the inequality with slack tolerance
    -1e-9 * scale. Returns a dict of SuiteResult keyed by suite name.
    """
    all_suites = {
        "absolute_weyl": _suite_absolute_weyl,
        "absolute_davis_kahan": _suite_absolute_dk,
        "relative_davis_kahan": _suite_relative_dk,
        "delta_upper_bounds": _suite_delta_bounds,
        "relative_weyl_pd": _suite_relative_weyl_pd,
        "nullspace_relative_weyl": _suite_nullspace,
        "procrustes_vs_projector": _suite_procrustes,
    }
    chosen = suites or list(all_suites)
    results = {}
    for i, name in enumerate(chosen):
        rng = np.random.default_rng(seed + 7919 * i)
        results[name] = all_suites[name](rng, n_instances)
    return results


def _suite_absolute_weyl(rng, n_instances):
    def gen():
        for i in range(n_instances):
            a, e, _ = _random_pair(rng, degenerate=(i % 3 == 0))
            reports = check_absolute_weyl(a, a + e, context={"instance": i})
            worst = min(reports, key=lambda r: r.slack)
            yield worst
    return _tally("absolute_weyl", gen(), n_instances)


def _suite_absolute_dk(rng, n_instances):
    def gen():
        for i in range(n_instances):
            a, e, n = _random_pair(rng, degenerate=(i % 3 == 0))
            vals = np.sort(scipy.linalg.eigvalsh(a))[::-1]
            j = _pick_gap_index(vals, rng, np.abs(vals).max())
            if j is None:
                yield make_report("absolute_davis_kahan", 0.0, 0.0, {}, skipped=True)
                continue
            yield check_absolute_dk(a, a + e, j, "descending", context={"instance": i})
    return _tally("absolute_davis_kahan", gen(), n_instances)


def _suite_relative_dk(rng, n_instances):
    def gen():
        for i in range(n_instances):
            a, e, n = _random_pair(rng, degenerate=(i % 2 == 0))
            vals = np.sort(scipy.linalg.eigvalsh(a))[::-1]
            j = _pick_gap_index(vals, rng, np.abs(vals).max())
            if j is None:
                yield make_report("relative_davis_kahan", 0.0, 0.0, {}, skipped=True)
                continue
            yield check_relative_dk(a, e, j, "descending", context={"instance": i})
    return _tally("relative_davis_kahan", gen(), n_instances)


def _suite_delta_bounds(rng, n_instances):
    def gen():
        for i in range(n_instances):
            n = int(rng.integers(2, 41))
            # positive spectrum so the PD-relative bound applies (ascending)
            vals = np.sort(10.0 ** rng.uniform(-2.0, 0.0, size=n))
            q = _random_orthogonal(rng, n)
            a = (q * vals[None, :]) @ q.T
            e = _goe(rng, n, scale=10.0 ** rng.uniform(-6.0, 0.0))
            j = _pick_gap_index(vals, rng, vals[-1])
            if j is None:
                yield make_report("delta_vs_absolute_ratio", 0.0, 0.0, {}, skipped=True)
                continue
            for rep in check_delta_upper_bounds(a, e, j, "ascending",
                                                context={"instance": i}):
                yield rep
    return _tally("delta_upper_bounds", gen(), n_instances)


def _suite_relative_weyl_pd(rng, n_instances):
    def gen():
        for i in range(n_instances):
            n = int(rng.integers(2, 41))
            vals = np.sort(10.0 ** rng.uniform(-3.0, 0.0, size=n))
            q = _random_orthogonal(rng, n)
            a = (q * vals[None, :]) @ q.T
            # scale the perturbation to a chosen relative norm < 1 so the
            # instance stays inside the bound's validity domain
            e0 = _goe(rng, n)
            inv_sqrt = q * (1.0 / np.sqrt(vals))[None, :]
            raw = operator_norm(inv_sqrt.T @ e0 @ inv_sqrt)
            target = 10.0 ** rng.uniform(-6.0, math.log10(0.99))
            e = e0 * (target / raw)
            j = int(rng.integers(1, n + 1))
            yield check_relative_weyl_pd(a, a + e, j, context={"instance": i})
    return _tally("relative_weyl_pd", gen(), n_instances)


def _suite_nullspace(rng, n_instances):
    smallest_constants = []

    def gen():
        for i in range(n_instances):
            n = int(rng.integers(3, 41))
            m = int(rng.integers(1, max(2, n // 2)))
            top = 1.0
            rest = np.sort(rng.uniform(0.0, 0.8, size=n - m))[::-1]
            vals = np.concatenate([np.full(m, top), rest])
            q = _random_orthogonal(rng, n)
            a = (q * vals[None, :]) @ q.T
            e = _goe(rng, n, scale=10.0 ** rng.uniform(-6.0, -1.0))
            yield check_nullspace_relative_weyl(a, a + e, m, context={"instance": i})
            refined = check_nullspace_relative_weyl_refined(a, a + e, m,
                                                            context={"instance": i})
            if not refined.skipped:
                smallest_constants.append(
                    refined.context.get("smallest_passing_constant", 0.0))
            yield refined
            yield check_relative_dk_refined(a, e, m, "descending",
                                            context={"instance": i})

    res = _tally("nullspace_relative_weyl", gen(), n_instances)
    if smallest_constants:
        res.extras["max_smallest_passing_constant"] = float(max(smallest_constants))
    return res


def _suite_procrustes(rng, n_instances):
    def gen():
        for i in range(n_instances):
            j = int(rng.integers(1, 9))
            n = int(rng.integers(j, 65))
            u = np.linalg.qr(rng.standard_normal((n, j)))[0]
            u_hat = np.linalg.qr(rng.standard_normal((n, j)))[0]
            yield check_procrustes_vs_projector(u, u_hat, context={"instance": i})
    return _tally("procrustes_vs_projector", gen(), n_instances)
