"""Stationary Gaussian fields on H^d with exactly compact correlation.

The covariance profile is built as the autocorrelation of a C^2 radial bump
supported in radius R0/2, which makes it positive semidefinite on every site
set, exactly zero beyond distance R0, twice differentiable with C'(0) = 0,
and then rescaled so C(0) = sigma2.  Sampling is exact multivariate Gaussian
via Cholesky; lazy evaluation along trajectories goes through conditional
(kriging) extension that exploits the compact support by conditioning only on
nearby sites.
"""

import math
from dataclasses import dataclass, field as dfield

import numpy as np
from scipy.interpolate import CubicSpline

from .config import (BudgetExceeded, COND_RADIUS_FACTOR, ConstraintViolation,
                     FactorizationError, JITTER_LADDER, LATTICE_SPACING_FACTOR,
                     MAX_FIELD_SITES, MAX_ONESHOT_SITES, stream)
from . import geometry as geo

_BUMPS = {
    "poly3": lambda u: (1.0 - u ** 2) ** 3,
    "poly4": lambda u: (1.0 - u ** 2) ** 4,
    "cosine": lambda u: np.cos(0.5 * np.pi * u) ** 3,
}


@dataclass(frozen=True)
class CovarianceSpec:
    """Variance, correlation length and tabulated covariance profile."""
    sigma2: float
    R0: float
    bump_shape: str
    d: int
    rho_grid: np.ndarray
    values: np.ndarray
    _spline: CubicSpline

    def cov(self, rho):
        """C(rho); exactly zero beyond R0, even around zero."""
        rho = np.abs(np.asarray(rho, dtype=float))
        out = np.where(rho < self.R0, self._spline(np.minimum(rho, self.R0)), 0.0)
        return out if out.ndim else float(out)

    def cov_matrix(self, sites):
        sites = np.asarray(sites, dtype=float)
        dist = np.arccosh(np.maximum(
            1.0, geo.cosh_distance(sites[:, None, :], sites[None, :, :])))
        return self.cov(dist)


def make_spec(sigma2, R0, bump_shape="poly3", d=2, n_grid=801, n_quad=96):
    """Covariance profile as the H^d autocorrelation of a compact bump.

    ``C(rho) = int k(d(x,z)) k(d(y,z)) vol(dz)`` for d(x,y) = rho, evaluated
    by Gauss-Legendre quadrature in geodesic polar coordinates around x and
    tabulated on a fine rho-grid with a clamped cubic spline (zero slope at
    both ends).  Scaled so C(0) = sigma2.
    """
    if sigma2 <= 0 or R0 <= 0:
        raise ConstraintViolation("sigma2 and R0 must be positive")
    if bump_shape not in _BUMPS:
        raise ConstraintViolation(
            f"invalid bump {bump_shape!r}: need one of {sorted(_BUMPS)} "
            "(twice differentiable, compactly supported)")
    bump = _BUMPS[bump_shape]
    s = R0 / 2.0
    r_nodes, r_w = np.polynomial.legendre.leggauss(n_quad)
    r = 0.5 * s * (r_nodes + 1.0)
    rw = 0.5 * s * r_w
    th_nodes, th_w = np.polynomial.legendre.leggauss(n_quad)
    th = 0.5 * np.pi * (th_nodes + 1.0)
    tw = 0.5 * np.pi * th_w

    k_r = bump(r / s) * np.sinh(r) ** (d - 1) * rw          # radial factor
    sin_pow = np.sin(th) ** (d - 2) * tw

    rho_grid = np.linspace(0.0, R0, n_grid)
    vals = np.empty(n_grid)
    cosh_r = np.cosh(r)[:, None]
    sinh_r = np.sinh(r)[:, None]
    cos_th = np.cos(th)[None, :]
    for i, rho in enumerate(rho_grid):
        arg = np.cosh(rho) * cosh_r - np.sinh(rho) * sinh_r * cos_th
        dist_yz = np.arccosh(np.maximum(1.0, arg))
        kernel_yz = np.where(dist_yz < s, bump(np.minimum(dist_yz, s) / s), 0.0)
        vals[i] = float(k_r @ (kernel_yz * sin_pow[None, :]).sum(axis=1))
    vals *= geo.sphere_area(d - 1) if d > 2 else 2.0
    vals *= sigma2 / vals[0]
    vals[-1] = 0.0
    spline = CubicSpline(rho_grid, vals, bc_type=((1, 0.0), (1, 0.0)))
    return CovarianceSpec(float(sigma2), float(R0), bump_shape, d,
                          rho_grid, vals, spline)


def _cholesky_with_jitter(mat, sigma2):
    last = None
    for j in JITTER_LADDER:
        try:
            return np.linalg.cholesky(mat + j * sigma2 * np.eye(len(mat))), j
        except np.linalg.LinAlgError as exc:
            last = exc
    raise FactorizationError(
        f"covariance factorisation failed within jitter cap: {last}")


@dataclass
class FieldRealization:
    """Sampled field values on a site set, extendable by conditioning."""
    spec: CovarianceSpec
    sites: np.ndarray          # (n, d+1) hyperboloid coordinates
    values: np.ndarray         # (n,)
    d: int
    h: float | None = None     # lattice spacing when sites come from a packing
    meta: dict = dfield(default_factory=dict)

    @property
    def n_sites(self):
        return len(self.sites)

    def nearest_site(self, points):
        """Indices and distances of the closest site per query point."""
        pts = np.asarray(points, dtype=float)
        prod = geo.cosh_distance(pts[..., None, :], self.sites[None, :, :])
        idx = np.argmin(prod, axis=-1)           # cosh(distance) is increasing
        best = np.take_along_axis(prod, idx[..., None], axis=-1)[..., 0]
        return idx, np.arccosh(np.maximum(1.0, best))


def sample_field(spec, sites, seed):
    """Exact joint Gaussian draw with covariance C(d(x_i, x_j))."""
    sites = np.asarray(sites, dtype=float)
    if sites.ndim != 2:
        raise ConstraintViolation("sites must be a (n, d+1) array")
    d = sites.shape[1] - 1
    if len(sites) > MAX_ONESHOT_SITES:
        raise BudgetExceeded(f"site count {len(sites)} above cap {MAX_ONESHOT_SITES}")
    prod = geo.cosh_distance(sites[:, None, :], sites[None, :, :])
    np.fill_diagonal(prod, 1.0)
    if len(sites) > 1:
        off = prod[~np.eye(len(sites), dtype=bool)]
        if np.any(off <= 1.0 + 1e-14):
            raise ConstraintViolation("sites must be pairwise distinct")
    cov = spec.cov(np.arccosh(np.maximum(1.0, prod)))
    L, jit = _cholesky_with_jitter(cov, spec.sigma2)
    rng = stream(seed, "field")
    values = L @ rng.standard_normal(len(sites))
    return FieldRealization(spec, sites, values, d, meta={"jitter": jit, "seed": seed})


def tilted_sample(spec, sites, h, seed):
    """Draw with mean (h/sigma2) * C(d(x, o)) and unchanged covariance."""
    if h < 0:
        raise ConstraintViolation("tilt height must be nonnegative")
    base = sample_field(spec, sites, seed)
    d = base.d
    dist_o = geo.distance(np.asarray(sites, dtype=float), geo.origin(d), validate=False)
    mean = (h / spec.sigma2) * spec.cov(dist_o)
    return FieldRealization(spec, base.sites, base.values + mean, d,
                            meta={**base.meta, "tilt": h})


def extend_field(fieldr, new_sites, seed, cond_radius=None, k_cap=None,
                 min_separation=1e-9):
    """Conditional (kriging) extension of a realization to new sites.

    Conditions on existing sites within ``cond_radius`` of the new block
    (default 1.5 * R0; compact support makes farther sites nearly
    irrelevant), optionally capped to the ``k_cap`` nearest.  Returns a new
    realization over the union; the original is untouched.
    """
    spec = fieldr.spec
    new_sites = np.asarray(new_sites, dtype=float)
    if new_sites.ndim == 1:
        new_sites = new_sites[None, :]
    if fieldr.n_sites + len(new_sites) > MAX_FIELD_SITES:
        raise BudgetExceeded("conditioning site budget exceeded")
    if cond_radius is None:
        cond_radius = COND_RADIUS_FACTOR * spec.R0

    dist_on = np.arccosh(np.maximum(
        1.0, geo.cosh_distance(fieldr.sites[:, None, :], new_sites[None, :, :])))
    if fieldr.n_sites and np.min(dist_on) < min_separation:
        raise ConstraintViolation("new sites must be disjoint from existing sites")

    near = np.flatnonzero(np.min(dist_on, axis=1) <= cond_radius)
    if k_cap is not None and near.size > k_cap:
        order = np.argsort(np.min(dist_on[near], axis=1))
        near = near[order[:k_cap]]

    rng = stream(seed, "extend", fieldr.meta.get("extensions", 0))
    cov_nn = spec.cov_matrix(new_sites)
    if near.size == 0:
        mean = np.zeros(len(new_sites))
        cond = cov_nn
    else:
        cov_oo = spec.cov_matrix(fieldr.sites[near])
        cov_on = spec.cov(dist_on[near])
        L, _ = _cholesky_with_jitter(cov_oo, spec.sigma2)
        w = np.linalg.solve(L.T, np.linalg.solve(L, cov_on))
        mean = w.T @ fieldr.values[near]
        cond = cov_nn - cov_on.T @ w
        cond = 0.5 * (cond + cond.T)
    Lc, jit = _cholesky_with_jitter(cond, spec.sigma2)
    new_values = mean + Lc @ rng.standard_normal(len(new_sites))
    out = FieldRealization(
        spec,
        np.vstack([fieldr.sites, new_sites]),
        np.concatenate([fieldr.values, new_values]),
        fieldr.d, h=fieldr.h,
        meta={**fieldr.meta, "extensions": fieldr.meta.get("extensions", 0) + 1,
              "jitter": jit})
    return out


# --- extremal statistics -------------------------------------------------------

@dataclass
class MaxScanRow:
    R: float
    n_sites: int
    maximal: bool
    mean_max: float
    max_max: float
    maxima: np.ndarray          # per-rep max |xi|
    exceedance: dict            # eps -> fraction of reps with max > mu(eps)*sqrt(R)


def max_scan(spec, d, R_list, spacing, n_reps, seed, eps_list=(0.5,),
             site_cap=2048):
    """Maximum statistics of |xi| over balls of growing radius.

    Sites form a greedy (spacing/2)-packing of Q_R: pairwise gaps exceed the
    spacing and, when the packing is maximal, every location of the ball is
    within one spacing of a site.  Site counts are capped at ``site_cap``
    (recorded per row; the ball volume grows exponentially, so large radii
    are necessarily subsampled at desk scale).  One factorisation per radius
    serves all replicates.
    """
    if spacing > spec.R0 / 2.0:
        raise ConstraintViolation("spacing must be at most R0/2")
    rows = []
    for k, R in enumerate(R_list):
        packing = geo.greedy_packing(geo.BallRegion(float(R)), spacing / 2.0, d,
                                     seed=stream(seed, "scan", k).integers(2 ** 31),
                                     max_centers=site_cap)
        sites = packing.centers
        cov = spec.cov_matrix(sites)
        L, _ = _cholesky_with_jitter(cov, spec.sigma2)
        rng = stream(seed, "scan-draws", k)
        z = rng.standard_normal((n_reps, len(sites)))
        vals = z @ L.T
        maxima = np.max(np.abs(vals), axis=1)
        exceed = {}
        for eps in eps_list:
            thr = math.sqrt(2.0 * spec.sigma2 * (d - 1) * (1.0 + eps) * R)
            exceed[eps] = float(np.mean(maxima > thr))
        rows.append(MaxScanRow(float(R), len(sites), packing.maximal,
                               float(np.mean(maxima)), float(np.max(maxima)),
                               maxima, exceed))
    return rows


def borell_bound_check(maxima, sigma2):
    """Empirical exceedance vs the Gaussian concentration bound.

    For every tested level above the empirical mean maximum, checks
    P_hat(max > lam) <= 4 exp(-(lam - E_hat)^2 / (2 sigma2)).  Returns the
    list of (lam, p_hat, bound) triples and whether all pass.
    """
    maxima = np.asarray(maxima, dtype=float)
    e_hat = float(np.mean(maxima))
    lams = np.linspace(e_hat + 1e-6, float(np.max(maxima)) + 2.0, 25)
    rows = []
    ok = True
    for lam in lams:
        p_hat = float(np.mean(maxima > lam))
        bound = 4.0 * math.exp(-0.5 * (lam - e_hat) ** 2 / sigma2)
        rows.append((lam, p_hat, bound))
        ok = ok and (p_hat <= bound + 1e-12)
    return rows, ok


def estimate_tail_constant(spec, d, n_reps=4000, seed=0, spacing=None):
    """Empirical decay constant of P(sup over Q_{R0} of xi > lam).

    Draws the field on a (spacing/2)-packing of the correlation ball, records
    the supremum per replicate, and fits log P(sup > lam) against lam^2 at
    levels where the empirical tail is resolved.  Returns (C_hat, fit).
    """
    from .stats import linear_fit
    if spacing is None:
        spacing = spec.R0 * LATTICE_SPACING_FACTOR
    packing = geo.greedy_packing(geo.BallRegion(spec.R0), spacing / 2.0, d,
                                 seed=seed)
    cov = spec.cov_matrix(packing.centers)
    L, _ = _cholesky_with_jitter(cov, spec.sigma2)
    rng = stream(seed, "tail")
    sups = np.max(rng.standard_normal((n_reps, len(packing.centers))) @ L.T, axis=1)
    lams = np.quantile(sups, np.linspace(0.5, 0.995, 24))
    xs, ys = [], []
    for lam in lams:
        if lam <= 0:
            continue
        p = float(np.mean(sups > lam))
        if 0 < p < 1:
            xs.append(lam ** 2)
            ys.append(math.log(p))
    fit = linear_fit(xs, ys)
    return max(1e-12, -fit.slope), fit


def gradient_growth_scan(spec, d, R_list, seed, n_sites=256, fd_h=None):
    """Finite-difference gradient maxima over growing balls.

    For each R, evaluates the field jointly at ``n_sites`` ball points and at
    d offset companions per point, forms |grad| estimates, and returns
    (R, max |grad|) pairs together with the log-log slope fit.
    """
    from .stats import linear_fit
    if fd_h is None:
        fd_h = spec.R0 / 20.0
    rows = []
    for k, R in enumerate(R_list):
        rng = stream(seed, "grad", k)
        base = geo.sample_region(geo.BallRegion(float(R)), d, rng, n_sites)
        all_pts = [base]
        for i in range(d):
            coeffs = np.zeros((n_sites, d))
            coeffs[:, i] = fd_h
            all_pts.append(geo.frame_step(base, coeffs))
        pts = np.concatenate(all_pts, axis=0)
        f = sample_field(spec, pts, seed=rng.integers(2 ** 31))
        v = f.values.reshape(d + 1, n_sites)
        grad2 = np.sum(((v[1:] - v[0]) / fd_h) ** 2, axis=0)
        rows.append((float(R), float(np.sqrt(np.max(grad2)))))
    fit = linear_fit(np.log([r for r, _ in rows]), np.log([g for _, g in rows]))
    return rows, fit


# --- islands and clusters -------------------------------------------------------

class UnionFind:
    """Union-find with path compression and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]

    def groups(self):
        out = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return sorted(out.values(), key=lambda g: g[0])


@dataclass
class IslandSet:
    """Super-level connected components on the site lattice."""
    islands: list               # list of sorted site-index lists
    site_indices: np.ndarray    # all super-threshold site indices
    threshold: float
    h: float
    t: float
    delta: float
    field: FieldRealization
    connectivity: str = "2h-neighbor graph (discrete proxy for components)"

    def __len__(self):
        return len(self.islands)


def detect_islands(fieldr, delta, t, h=None):
    """Connected components of {xi > delta * t^(2/3)} on the site lattice.

    Two super-threshold sites are adjacent when within 2h; h defaults to the
    realization's recorded lattice spacing.
    """
    if delta <= 0 or t <= 0:
        raise ConstraintViolation("need delta > 0 and t > 0")
    h = h if h is not None else fieldr.h
    if h is None:
        raise ConstraintViolation("island detection needs the lattice spacing h")
    thr = delta * t ** (2.0 / 3.0)
    super_idx = np.flatnonzero(fieldr.values > thr)
    if super_idx.size == 0:
        return IslandSet([], super_idx, thr, h, t, delta, fieldr)
    pts = fieldr.sites[super_idx]
    dist = np.arccosh(np.maximum(
        1.0, geo.cosh_distance(pts[:, None, :], pts[None, :, :])))
    uf = UnionFind(super_idx.size)
    ii, jj = np.nonzero(np.triu(dist <= 2.0 * h, k=1))
    for a, b in zip(ii, jj):
        uf.union(int(a), int(b))
    islands = [sorted(super_idx[g].tolist()) for g in uf.groups()]
    islands.sort(key=lambda g: g[0])
    return IslandSet(islands, super_idx, thr, h, t, delta, fieldr)


@dataclass
class Cluster:
    label: int
    site_indices: list
    island_ids: list
    center_index: int
    diameter: float


@dataclass
class ClusterSet:
    clusters: list
    eta: float
    t: float
    link_distance: float
    field: FieldRealization
    h: float

    def __len__(self):
        return len(self.clusters)

    def report(self):
        """JSON-ready cluster summary."""
        out = []
        for c in self.clusters:
            out.append({
                "id": c.label,
                "center": [float(v) for v in self.field.sites[c.center_index]],
                "diameter": c.diameter,
                "n_islands": len(c.island_ids),
                "n_sites": len(c.site_indices),
            })
        return {"clusters": out}


def build_clusters(islands, eta, t):
    """Merge islands whose set distance is at most eta * t^(4/3)."""
    if eta <= 0:
        raise ConstraintViolation("eta must be positive")
    link = eta * t ** (4.0 / 3.0)
    fieldr = islands.field
    n = len(islands.islands)
    uf = UnionFind(n)
    sets = [fieldr.sites[np.asarray(g)] for g in islands.islands]
    for i in range(n):
        for j in range(i + 1, n):
            dmin = np.arccosh(max(1.0, float(np.min(
                geo.cosh_distance(sets[i][:, None, :], sets[j][None, :, :])))))
            if dmin <= link:
                uf.union(i, j)
    clusters = []
    for label, grp in enumerate(uf.groups()):
        site_idx = sorted(idx for g in grp for idx in islands.islands[g])
        pts = fieldr.sites[np.asarray(site_idx)]
        dist = np.arccosh(np.maximum(
            1.0, geo.cosh_distance(pts[:, None, :], pts[None, :, :])))
        diameter = float(np.max(dist)) if len(site_idx) > 1 else 0.0
        center_local = int(np.argmin(np.max(dist, axis=1)))
        clusters.append(Cluster(label, site_idx, sorted(grp),
                                site_idx[center_local], diameter))
    return ClusterSet(clusters, eta, t, link, fieldr, islands.h)


def cluster_constants(delta, d, K0, C_R0_hat):
    """Cluster richness cap and admissible linking threshold.

    L_delta = 1.01 * 2 (d-1) K0 / (C_hat * delta^2);
    eta_delta = 0.99 * min(1 / (4 L_delta^2), C_hat^2 delta^4 / (36 (d-1)^2)).
    """
    if min(delta, K0, C_R0_hat) <= 0 or d < 2:
        raise ConstraintViolation("all cluster-constant arguments must be positive, d >= 2")
    L_delta = 1.01 * 2.0 * (d - 1) * K0 / (C_R0_hat * delta ** 2)
    eta_delta = 0.99 * min(1.0 / (4.0 * L_delta ** 2),
                           C_R0_hat ** 2 * delta ** 4 / (36.0 * (d - 1) ** 2))
    return L_delta, eta_delta


def rich_ball_event(fieldr, threshold, ball_radius, min_points, separation):
    """Does some site-centered ball hold >= min_points super-threshold sites
    pairwise >= separation apart?  Greedy separated-subset check per center."""
    super_idx = np.flatnonzero(fieldr.values > threshold)
    if super_idx.size < min_points:
        return False
    pts = fieldr.sites[super_idx]
    dist_pp = np.arccosh(np.maximum(
        1.0, geo.cosh_distance(pts[:, None, :], pts[None, :, :])))
    dist_cp = np.arccosh(np.maximum(
        1.0, geo.cosh_distance(fieldr.sites[:, None, :], pts[None, :, :])))
    need = int(math.ceil(min_points))
    for c in range(len(fieldr.sites)):
        inside = np.flatnonzero(dist_cp[c] <= ball_radius)
        if inside.size < need:
            continue
        chosen = []
        for i in inside:
            if all(dist_pp[i, j] >= separation for j in chosen):
                chosen.append(i)
                if len(chosen) >= need:
                    return True
    return False


def cluster_property_trend(spec, d, t_grid, delta, K0, C_R0_hat, seed,
                           n_reps=24, region_radius=6.0, site_cap=1200,
                           separation_factor=9.0):
    """Frequency of the rich-ball event on a fixed desk-scale window.

    For each t the field is drawn on a capped lattice of Q_region and the
    event of :func:`rich_ball_event` is evaluated with threshold
    delta * t^(2/3), ball radius sqrt(eta_delta) * t^(4/3) and separation
    9 * R0.  Reported frequencies are desk-scale trend data, not limits.
    """
    L_delta, eta_delta = cluster_constants(delta, d, K0, C_R0_hat)
    spacing = spec.R0 * LATTICE_SPACING_FACTOR
    packing = geo.greedy_packing(geo.BallRegion(region_radius), spacing / 2.0, d,
                                 seed=seed, max_centers=site_cap)
    sites = packing.centers
    cov = spec.cov_matrix(sites)
    L, _ = _cholesky_with_jitter(cov, spec.sigma2)
    freqs = []
    for k, t in enumerate(t_grid):
        rng = stream(seed, "cluster-trend", k)
        thr = delta * t ** (2.0 / 3.0)
        ball = math.sqrt(eta_delta) * t ** (4.0 / 3.0)
        hits = 0
        for _ in range(n_reps):
            vals = L @ rng.standard_normal(len(sites))
            f = FieldRealization(spec, sites, vals, d, h=spacing)
            if rich_ball_event(f, thr, ball, L_delta, separation_factor * spec.R0):
                hits += 1
        freqs.append(hits / n_reps)
    return list(zip([float(t) for t in t_grid], freqs))
