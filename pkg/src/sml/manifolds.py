"""Analytic closed manifolds of unit volume with exact Laplace-Beltrami spectra.

Three families are provided:

* ``Circle`` -- one circle of circumference 1 (radius 1/(2*pi)) in R^2.
* ``TorusD(d)`` -- flat d-torus, product of d circumference-1 circles, in R^{2d}.
* ``TwoCircles`` -- two circles of circumference 1/2 in R^2, separated by a
  Euclidean gap ``separation`` (disconnected, two components).

All models have total volume 1, exact nondecreasing eigenvalue sequences with
multiplicities, an orthonormal eigenfunction basis with a fixed tie-break
inside multiplicity blocks (cosine before sine, frequency vectors in
lexicographic order, components in index order), intrinsic geodesic distances
(+inf across components), uniform samplers, and truncated Mercer heat kernels
whose truncation error is controlled through the exact heat trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TruncationBudgetExceeded

TWO_PI = 2.0 * math.pi
#: hard cap on the number of Mercer terms in any truncated series
DEFAULT_TERM_CAP = 10**6
#: default truncation tolerance for the heat-trace tail
DEFAULT_TRUNCATION_EPS = 1e-10


@dataclass(frozen=True)
class PointCloud:
    """n points sampled from a manifold, in ambient and intrinsic coordinates.

    ``ambient`` is (n, p), ``intrinsic`` is (n, d) with arc-length/angular
    coordinates, ``component_labels`` is (n,) with zeros on connected models.
    """

    manifold: "ManifoldModel"
    n: int
    ambient: np.ndarray
    intrinsic: np.ndarray
    component_labels: np.ndarray
    seed: int


def _theta_kmax(t: float, circumference: float, tail: float, cap: int) -> int:
    """Smallest K with sum_{k>K} 2*exp(-(2*pi*k/L)^2 t) <= tail."""
    rate = (TWO_PI / circumference) ** 2 * t
    terms = []
    k = 1
    while True:
        a = 2.0 * math.exp(-rate * k * k)
        if a < tail * 1e-9 or a < 1e-320:
            break
        terms.append(a)
        if k > cap:
            raise TruncationBudgetExceeded(
                f"theta-series cutoff exceeds cap {cap} at t={t}"
            )
        k += 1
    total = math.fsum(terms)
    running = total
    kmax = 0
    for a in terms:
        if running <= tail:
            break
        running -= a
        kmax += 1
    return kmax


def _theta_series(delta: np.ndarray, t: float, circumference: float, kmax: int) -> np.ndarray:
    """Truncated heat kernel on a circumference-L circle w.r.t. arc measure.

    Evaluates (1/L) * (1 + 2 sum_{k<=K} exp(-(2 pi k/L)^2 t) cos(2 pi k delta/L))
    using a Chebyshev-style cosine recurrence (one transcendental call).
    """
    L = circumference
    rate = (TWO_PI / L) ** 2 * t
    out = np.ones_like(delta)
    if kmax >= 1:
        c1 = np.cos((TWO_PI / L) * delta)
        c_prev = np.ones_like(delta)
        c_cur = c1
        out = out + (2.0 * math.exp(-rate)) * c1
        for k in range(2, kmax + 1):
            c_next = 2.0 * c1 * c_cur - c_prev
            out = out + (2.0 * math.exp(-rate * k * k)) * c_next
            c_prev, c_cur = c_cur, c_next
    return out / L


def _circle_trace(t: float, circumference: float) -> float:
    """Exact heat trace of a circumference-L circle: sum_k exp(-(2 pi k/L)^2 t)."""
    rate = (TWO_PI / circumference) ** 2 * t
    total = 1.0
    k = 1
    while True:
        a = 2.0 * math.exp(-rate * k * k)
        total += a
        if a < 1e-300:
            break
        k += 1
        if k > 10**7:  # unreachable for t in (0, 1]
            break
    return total


class ManifoldModel:
    """Shared interface; concrete families fill in the geometry and spectrum."""

    family: str
    d: int
    p: int
    m: int
    component_lengths: tuple
    separation: float | None = None

    # -- spectrum -------------------------------------------------------

    def eigenvalue_shells(self, mu_max: float):
        """Distinct eigenvalues <= mu_max with multiplicities, ascending.

        Returns (mu, mult) arrays. Always includes the zero shell.
        """
        raise NotImplementedError

    def eigenvalues(self, count: int) -> np.ndarray:
        """First ``count`` eigenvalues in nondecreasing order, multiplicities counted."""
        mu_max = 1.0
        while True:
            mus, mults = self.eigenvalue_shells(mu_max)
            if mults.sum() >= count:
                break
            mu_max *= 4.0
        out = np.repeat(mus, mults)[:count]
        return out

    def eigenvalue(self, j: int) -> float:
        """j-th Laplace-Beltrami eigenvalue (1-based, nondecreasing)."""
        if j < 1:
            raise ValueError("eigenvalue index is 1-based")
        return float(self.eigenvalues(j)[j - 1])

    def heat_trace(self, t: float) -> float:
        """Exact value of sum_j exp(-mu_j t)."""
        raise NotImplementedError

    def mercer_rank(self, t: float, eps: float = DEFAULT_TRUNCATION_EPS,
                    cap: int = DEFAULT_TERM_CAP):
        """Minimal N with heat-trace tail sum_{j>N} exp(-mu_j t) <= eps.

        Returns (N, tail_mass). Raises TruncationBudgetExceeded past ``cap``.
        """
        trace = self.heat_trace(t)
        count = min(64, cap)
        while True:
            mus = self.eigenvalues(count)
            partial = np.cumsum(np.exp(-mus * t))
            tails = trace - partial
            hit = np.nonzero(tails <= eps)[0]
            if hit.size:
                n_terms = int(hit[0]) + 1
                if n_terms > cap:
                    raise TruncationBudgetExceeded(
                        f"Mercer rank {n_terms} for t={t}, eps={eps} exceeds cap {cap}"
                    )
                return n_terms, float(max(tails[hit[0]], 0.0))
            if count >= cap:
                raise TruncationBudgetExceeded(
                    f"Mercer rank for t={t}, eps={eps} exceeds cap {cap}"
                )
            count = min(2 * count, cap)

    # -- eigenfunctions ---------------------------------------------------

    def eigenfunction_matrix(self, intrinsic: np.ndarray, labels: np.ndarray,
                             count: int) -> np.ndarray:
        """Matrix (n, count) of the first ``count`` eigenfunctions at given points."""
        raise NotImplementedError

    def eigenfunction(self, j: int, x, component: int = 0) -> float:
        """Value of the j-th orthonormal eigenfunction at one intrinsic point."""
        xi = np.atleast_2d(np.asarray(x, dtype=float))
        lab = np.full(xi.shape[0], component, dtype=np.int64)
        return float(self.eigenfunction_matrix(xi, lab, j)[0, j - 1])

    # -- geometry ---------------------------------------------------------

    def embed(self, intrinsic: np.ndarray, labels: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def geodesic_distance_matrix(self, cloud: PointCloud) -> np.ndarray:
        raise NotImplementedError

    def geodesic_distance(self, x, y, component_x: int = 0, component_y: int = 0) -> float:
        """Intrinsic distance between two points; +inf across components."""
        raise NotImplementedError

    # -- heat kernel --------------------------------------------------------

    def heat_kernel_matrix(self, cloud: PointCloud, t: float,
                           eps: float = DEFAULT_TRUNCATION_EPS,
                           cap: int = DEFAULT_TERM_CAP) -> np.ndarray:
        """Pairwise truncated Mercer heat kernel values k_t(X_i, X_j) (no 1/n)."""
        raise NotImplementedError

    def heat_kernel(self, t: float, x, y, component_x: int = 0, component_y: int = 0,
                    eps: float = DEFAULT_TRUNCATION_EPS, cap: int = DEFAULT_TERM_CAP) -> float:
        """Truncated Mercer heat kernel at a single pair of intrinsic points."""
        raise NotImplementedError

    # -- sampling -------------------------------------------------------------

    def sample_uniform(self, n: int, seed: int) -> PointCloud:
        """n i.i.d. points uniform w.r.t. the volume measure; deterministic in seed."""
        if n < 1:
            raise ValueError("need n >= 1")
        rng = np.random.default_rng(seed)
        intrinsic, labels = self._sample_intrinsic(rng, n)
        ambient = self.embed(intrinsic, labels)
        return PointCloud(self, n, ambient, intrinsic, labels, seed)

    def _sample_intrinsic(self, rng, n):
        raise NotImplementedError


def _wrap_distance(delta_abs: np.ndarray, circumference: float) -> np.ndarray:
    frac = np.mod(delta_abs, circumference)
    return np.minimum(frac, circumference - frac)


class Circle(ManifoldModel):
    """Circumference-1 circle, radius 1/(2*pi), embedded in R^2.

    Intrinsic coordinate: arc length x in [0, 1). Eigenvalues: 0, then
    (2 pi k)^2 twice for k = 1, 2, ...; eigenfunctions 1, sqrt(2) cos(2 pi k x),
    sqrt(2) sin(2 pi k x) (cosine before sine).
    """

    family = "circle"
    d = 1
    p = 2
    m = 1
    component_lengths = (1.0,)
    RADIUS = 1.0 / TWO_PI

    def eigenvalue_shells(self, mu_max):
        kmax = int(math.floor(math.sqrt(max(mu_max, 0.0)) / TWO_PI))
        ks = np.arange(1, kmax + 1)
        mus = np.concatenate(([0.0], (TWO_PI * ks) ** 2))
        mults = np.concatenate(([1], np.full(kmax, 2, dtype=np.int64)))
        return mus, mults

    def eigenvalues(self, count):
        j = np.arange(1, count + 1)
        k = j // 2
        return (TWO_PI * k) ** 2

    def heat_trace(self, t):
        return _circle_trace(t, 1.0)

    def eigenfunction_matrix(self, intrinsic, labels, count):
        x = np.asarray(intrinsic, dtype=float).reshape(-1)
        n = x.shape[0]
        out = np.empty((n, count))
        out[:, 0] = 1.0
        kmax = count // 2
        if kmax >= 1:
            angles = TWO_PI * np.outer(x, np.arange(1, kmax + 1))
            cos = math.sqrt(2.0) * np.cos(angles)
            sin = math.sqrt(2.0) * np.sin(angles)
            for k in range(1, kmax + 1):
                if 2 * k - 1 < count:
                    out[:, 2 * k - 1] = cos[:, k - 1]
                if 2 * k < count:
                    out[:, 2 * k] = sin[:, k - 1]
        return out

    def embed(self, intrinsic, labels):
        x = np.asarray(intrinsic, dtype=float).reshape(-1)
        ang = TWO_PI * x
        return self.RADIUS * np.column_stack([np.cos(ang), np.sin(ang)])

    def geodesic_distance(self, x, y, component_x=0, component_y=0):
        return float(_wrap_distance(np.abs(np.float64(x) - np.float64(y)), 1.0))

    def geodesic_distance_matrix(self, cloud):
        x = cloud.intrinsic[:, 0]
        return _wrap_distance(np.abs(x[:, None] - x[None, :]), 1.0)

    def _heat_kmax(self, t, eps, cap):
        kmax = _theta_kmax(t, 1.0, eps, cap)
        if 1 + 2 * kmax > cap:
            raise TruncationBudgetExceeded(
                f"heat kernel needs {1 + 2 * kmax} Mercer terms, cap {cap}"
            )
        return kmax

    def heat_kernel_matrix(self, cloud, t, eps=DEFAULT_TRUNCATION_EPS, cap=DEFAULT_TERM_CAP):
        kmax = self._heat_kmax(t, eps, cap)
        x = cloud.intrinsic[:, 0]
        delta = np.abs(x[:, None] - x[None, :])
        return _theta_series(delta, t, 1.0, kmax)

    def heat_kernel(self, t, x, y, component_x=0, component_y=0,
                    eps=DEFAULT_TRUNCATION_EPS, cap=DEFAULT_TERM_CAP):
        kmax = self._heat_kmax(t, eps, cap)
        delta = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return float(_theta_series(delta, t, 1.0, kmax))

    def _sample_intrinsic(self, rng, n):
        x = rng.random(n)
        return x[:, None], np.zeros(n, dtype=np.int64)


class TorusD(ManifoldModel):
    """Flat d-torus: product of d circumference-1 circles, embedded in R^{2d}.

    Eigenvalues are 4 pi^2 |k|^2 over frequency vectors k in Z^d. The real
    eigenbasis takes one representative per {k, -k} pair (first nonzero entry
    positive), ordered by (|k|^2, lexicographic representative), cosine before
    sine; the zero vector contributes the constant function.
    """

    family = "torus"
    RADIUS = 1.0 / TWO_PI

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("torus dimension must be >= 1")
        self.d = int(d)
        self.p = 2 * self.d
        self.m = 1
        self.component_lengths = (1.0,)
        self._basis_cache = None

    def __repr__(self):
        return f"TorusD({self.d})"

    def eigenvalue_shells(self, mu_max):
        smax = int(math.floor(max(mu_max, 0.0) / (TWO_PI ** 2)))
        # counts of |k|^2 = s in Z^d via d-fold convolution of the 1-d histogram
        h1 = np.zeros(smax + 1, dtype=np.int64)
        h1[0] = 1
        k = 1
        while k * k <= smax:
            h1[k * k] = 2
            k += 1
        h = h1.copy()
        for _ in range(self.d - 1):
            h = np.convolve(h, h1)[: smax + 1]
        ss = np.nonzero(h)[0]
        return (TWO_PI ** 2) * ss.astype(float), h[ss]

    def heat_trace(self, t):
        return _circle_trace(t, 1.0) ** self.d

    def _basis(self, count):
        """First ``count`` basis records as (mu, kvec, trig) with trig in
        {'const', 'cos', 'sin'}."""
        if self._basis_cache is not None and len(self._basis_cache) >= count:
            return self._basis_cache[:count]
        # enough representatives: each non-zero rep yields 2 functions
        smax = 4
        while True:
            rng_1d = np.arange(-int(math.isqrt(smax)), int(math.isqrt(smax)) + 1)
            grids = np.meshgrid(*([rng_1d] * self.d), indexing="ij")
            K = np.stack([g.ravel() for g in grids], axis=1)
            norms = (K ** 2).sum(axis=1)
            K = K[norms <= smax]
            norms = (K ** 2).sum(axis=1)
            # one representative per +-pair: first nonzero entry positive
            keep = np.zeros(len(K), dtype=bool)
            for i, kv in enumerate(K):
                nz = np.nonzero(kv)[0]
                keep[i] = nz.size > 0 and kv[nz[0]] > 0
            reps = K[keep]
            rep_norms = norms[keep]
            if 1 + 2 * len(reps) >= count:
                # box radius floor(sqrt(smax)) covers every |k|^2 <= smax, so
                # sorting the kept representatives gives the true global order
                order = sorted(range(len(reps)),
                               key=lambda i: (int(rep_norms[i]), tuple(int(v) for v in reps[i])))
                records = [(0.0, np.zeros(self.d, dtype=np.int64), "const")]
                for i in order:
                    mu = (TWO_PI ** 2) * float(rep_norms[i])
                    records.append((mu, reps[i].astype(np.int64), "cos"))
                    records.append((mu, reps[i].astype(np.int64), "sin"))
                    if len(records) >= count:
                        break
                if len(records) >= count:
                    self._basis_cache = records
                    return records[:count]
            smax *= 2

    def eigenvalues(self, count):
        return np.array([rec[0] for rec in self._basis(count)])

    def eigenfunction_matrix(self, intrinsic, labels, count):
        X = np.asarray(intrinsic, dtype=float)
        records = self._basis(count)
        reps = []
        rep_index = {}
        for mu, kv, trig in records:
            if trig == "const":
                continue
            key = tuple(int(v) for v in kv)
            if key not in rep_index:
                rep_index[key] = len(reps)
                reps.append(kv)
        out = np.empty((X.shape[0], count))
        if reps:
            angles = TWO_PI * (X @ np.stack(reps, axis=0).T)
            cos = math.sqrt(2.0) * np.cos(angles)
            sin = math.sqrt(2.0) * np.sin(angles)
        for col, (mu, kv, trig) in enumerate(records):
            if trig == "const":
                out[:, col] = 1.0
            else:
                i = rep_index[tuple(int(v) for v in kv)]
                out[:, col] = cos[:, i] if trig == "cos" else sin[:, i]
        return out

    def embed(self, intrinsic, labels):
        X = np.asarray(intrinsic, dtype=float)
        ang = TWO_PI * X
        cols = []
        for a in range(self.d):
            cols.append(self.RADIUS * np.cos(ang[:, a]))
            cols.append(self.RADIUS * np.sin(ang[:, a]))
        return np.column_stack(cols)

    def geodesic_distance(self, x, y, component_x=0, component_y=0):
        dx = _wrap_distance(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)), 1.0)
        return float(np.sqrt((dx ** 2).sum()))

    def geodesic_distance_matrix(self, cloud):
        X = cloud.intrinsic
        total = np.zeros((cloud.n, cloud.n))
        for a in range(self.d):
            da = _wrap_distance(np.abs(X[:, a][:, None] - X[:, a][None, :]), 1.0)
            total += da ** 2
        return np.sqrt(total)

    def _heat_kmax(self, t, eps, cap):
        # per-axis cutoff so the d-dimensional trace tail stays below eps
        z1 = _circle_trace(t, 1.0)
        per_axis = eps / (self.d * z1 ** (self.d - 1))
        kmax = _theta_kmax(t, 1.0, per_axis, cap)
        if (1 + 2 * kmax) ** self.d > cap:
            raise TruncationBudgetExceeded(
                f"heat kernel needs {(1 + 2 * kmax) ** self.d} Mercer terms, cap {cap}"
            )
        return kmax

    def heat_kernel_matrix(self, cloud, t, eps=DEFAULT_TRUNCATION_EPS, cap=DEFAULT_TERM_CAP):
        kmax = self._heat_kmax(t, eps, cap)
        X = cloud.intrinsic
        out = np.ones((cloud.n, cloud.n))
        for a in range(self.d):
            delta = np.abs(X[:, a][:, None] - X[:, a][None, :])
            out *= _theta_series(delta, t, 1.0, kmax)
        return out

    def heat_kernel(self, t, x, y, component_x=0, component_y=0,
                    eps=DEFAULT_TRUNCATION_EPS, cap=DEFAULT_TERM_CAP):
        kmax = self._heat_kmax(t, eps, cap)
        xv = np.asarray(x, dtype=float).reshape(-1)
        yv = np.asarray(y, dtype=float).reshape(-1)
        val = 1.0
        for a in range(self.d):
            val *= float(_theta_series(np.abs(xv[a] - yv[a]), t, 1.0, kmax))
        return val

    def _sample_intrinsic(self, rng, n):
        return rng.random((n, self.d)), np.zeros(n, dtype=np.int64)


class TwoCircles(ManifoldModel):
    """Two disjoint circles of circumference 1/2 each (total volume 1) in R^2.

    Component circles have radius 1/(4*pi) and centers on the x-axis placed so
    the Euclidean gap between them equals ``separation``. Intrinsic coordinate:
    arc length in [0, 1/2) within the labelled component. Eigenvalues: 0 twice,
    then (4 pi k)^2 with multiplicity 4; within a frequency block the order is
    (component 0, cos), (component 0, sin), (component 1, cos), (component 1, sin).
    The first two eigenfunctions are sqrt(2) times the component indicators.
    """

    family = "two_circles"
    d = 1
    p = 2
    m = 2
    L = 0.5
    RADIUS = 1.0 / (4.0 * math.pi)

    def __init__(self, separation: float = 2.0):
        if separation <= 0:
            raise ValueError("separation must be positive")
        self.separation = float(separation)
        self.component_lengths = (0.5, 0.5)
        gap = self.separation + 2.0 * self.RADIUS
        self.centers = np.array([[0.0, 0.0], [gap, 0.0]])

    def __repr__(self):
        return f"TwoCircles(separation={self.separation})"

    def eigenvalue_shells(self, mu_max):
        kmax = int(math.floor(math.sqrt(max(mu_max, 0.0)) / (2.0 * TWO_PI)))
        ks = np.arange(1, kmax + 1)
        mus = np.concatenate(([0.0], (2.0 * TWO_PI * ks) ** 2))
        mults = np.concatenate(([2], np.full(kmax, 4, dtype=np.int64)))
        return mus, mults

    def eigenvalues(self, count):
        j = np.arange(1, count + 1)
        k = np.where(j <= 2, 0, (j - 3) // 4 + 1)
        return (2.0 * TWO_PI * k) ** 2

    def heat_trace(self, t):
        return 2.0 * _circle_trace(t, self.L)

    def eigenfunction_matrix(self, intrinsic, labels, count):
        x = np.asarray(intrinsic, dtype=float).reshape(-1)
        lab = np.asarray(labels).reshape(-1)
        n = x.shape[0]
        out = np.zeros((n, count))
        ind0 = lab == 0
        ind1 = lab == 1
        if count >= 1:
            out[ind0, 0] = math.sqrt(2.0)
        if count >= 2:
            out[ind1, 1] = math.sqrt(2.0)
        kmax = (count - 2 + 3) // 4  # ceil((count-2)/4)
        if count > 2 and kmax >= 1:
            angles = (TWO_PI / self.L) * np.outer(x, np.arange(1, kmax + 1))
            cos = 2.0 * np.cos(angles)
            sin = 2.0 * np.sin(angles)
            for k in range(1, kmax + 1):
                base = 2 + 4 * (k - 1)
                cols = [(base, ind0, cos), (base + 1, ind0, sin),
                        (base + 2, ind1, cos), (base + 3, ind1, sin)]
                for col, mask, vals in cols:
                    if col < count:
                        out[mask, col] = vals[mask, k - 1]
        return out

    def embed(self, intrinsic, labels):
        x = np.asarray(intrinsic, dtype=float).reshape(-1)
        lab = np.asarray(labels).reshape(-1)
        ang = (TWO_PI / self.L) * x
        pts = self.RADIUS * np.column_stack([np.cos(ang), np.sin(ang)])
        return pts + self.centers[lab]

    def geodesic_distance(self, x, y, component_x=0, component_y=0):
        if component_x != component_y:
            return float("inf")
        return float(_wrap_distance(np.abs(np.float64(x) - np.float64(y)), self.L))

    def geodesic_distance_matrix(self, cloud):
        x = cloud.intrinsic[:, 0]
        lab = cloud.component_labels
        dist = _wrap_distance(np.abs(x[:, None] - x[None, :]), self.L)
        cross = lab[:, None] != lab[None, :]
        dist = np.where(cross, np.inf, dist)
        return dist

    def _heat_kmax(self, t, eps, cap):
        kmax = _theta_kmax(t, self.L, eps / 2.0, cap)
        if 2 * (1 + 2 * kmax) > cap:
            raise TruncationBudgetExceeded(
                f"heat kernel needs {2 * (1 + 2 * kmax)} Mercer terms, cap {cap}"
            )
        return kmax

    def heat_kernel_matrix(self, cloud, t, eps=DEFAULT_TRUNCATION_EPS, cap=DEFAULT_TERM_CAP):
        kmax = self._heat_kmax(t, eps, cap)
        x = cloud.intrinsic[:, 0]
        lab = cloud.component_labels
        delta = np.abs(x[:, None] - x[None, :])
        vals = _theta_series(delta, t, self.L, kmax)
        same = lab[:, None] == lab[None, :]
        return np.where(same, vals, 0.0)

    def heat_kernel(self, t, x, y, component_x=0, component_y=0,
                    eps=DEFAULT_TRUNCATION_EPS, cap=DEFAULT_TERM_CAP):
        if component_x != component_y:
            return 0.0
        kmax = self._heat_kmax(t, eps, cap)
        delta = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return float(_theta_series(delta, t, self.L, kmax))

    def _sample_intrinsic(self, rng, n):
        labels = (rng.random(n) >= 0.5).astype(np.int64)
        x = rng.random(n) * self.L
        return x[:, None], labels


def make_manifold(family: str, dim: int | None = None,
                  separation: float = 2.0) -> ManifoldModel:
    """Construct a manifold model from a config-style description."""
    fam = family.lower()
    if fam == "circle":
        return Circle()
    if fam == "torus":
        if dim is None:
            raise ValueError("torus requires a dimension")
        return TorusD(dim)
    if fam == "two_circles":
        return TwoCircles(separation=separation)
    raise ValueError(f"unknown manifold family: {family!r}")
