"""Hyperbolic geometry in the hyperboloid model, curvature -1.

A point of H^d is a (d+1)-vector x with Minkowski self-product
``<x,x> = -x0^2 + x1^2 + ... + xd^2 = -1`` and ``x0 >= 1``.  All functions
take arrays whose last axis has length d+1 and broadcast over leading axes.
The Poincare ball appears only as an independent cross-check of distances.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .config import (HYPERBOLOID_ATOL, MAX_PACKING_CENTERS, stream)


class InvalidPoint(ValueError):
    """Coordinates do not satisfy the hyperboloid constraints."""


def minkowski_dot(x, y):
    """Pairing -x0*y0 + sum_i xi*yi, broadcast over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.sum(x[..., 1:] * y[..., 1:], axis=-1)
    return s - x[..., 0] * y[..., 0]


def check_points(x, atol=HYPERBOLOID_ATOL):
    """Validate hyperboloid membership; raises :class:`InvalidPoint`.

    The Minkowski form of a far point is a difference of e^(2r)-sized terms,
    so its float evaluation carries absolute roundoff of that size; the
    tolerance therefore scales with x0^2 (equal to the plain 1e-10 check for
    points at moderate radius).
    """
    x = np.asarray(x, dtype=float)
    norm_err = np.abs(minkowski_dot(x, x) + 1.0)
    scale = np.maximum(1.0, x[..., 0] ** 2)
    if np.any(norm_err > atol * scale):
        raise InvalidPoint(
            f"Minkowski norm off the hyperboloid by {np.max(norm_err / scale):.3e} (relative)")
    if np.any(x[..., 0] < 1.0 - atol):
        raise InvalidPoint("time coordinate below 1")
    return x


def project(x):
    """Restore the hyperboloid constraint by rebuilding the time coordinate.

    Setting x0 = sqrt(1 + |spatial|^2) is cancellation-free at every radius,
    unlike rescaling by the Minkowski norm.
    """
    x = np.array(x, dtype=float)
    x[..., 0] = np.sqrt(1.0 + np.sum(x[..., 1:] ** 2, axis=-1))
    return x


def origin(d):
    o = np.zeros(d + 1)
    o[0] = 1.0
    return o


def cosh_distance(x, y):
    """cosh of the distance, computed in a cancellation-free polar form.

    Writing points as (cosh r, sinh r * n) with unit direction n, one has
    cosh d = cosh(r1 - r2) + sinh r1 sinh r2 * |n1 - n2|^2 / 2.  Both terms
    are nonnegative, so unlike -<x,y> (a difference of e^(2r)-sized numbers)
    this loses no precision at large radius.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx = np.linalg.norm(x[..., 1:], axis=-1)
    sy = np.linalg.norm(y[..., 1:], axis=-1)
    r1 = np.arccosh(np.maximum(1.0, x[..., 0]))
    r2 = np.arccosh(np.maximum(1.0, y[..., 0]))
    nx = x[..., 1:] / np.maximum(sx, 1e-300)[..., None]
    ny = y[..., 1:] / np.maximum(sy, 1e-300)[..., None]
    cross = np.sum((nx - ny) ** 2, axis=-1)
    return np.cosh(r1 - r2) + 0.5 * sx * sy * cross


def distance(x, y, validate=True):
    """Hyperbolic distance arccosh(cosh d), clamped to the valid domain."""
    if validate:
        check_points(x)
        check_points(y)
    return np.arccosh(np.maximum(1.0, cosh_distance(x, y)))


def geodesic_point(x, y, s, validate=True):
    """Point at fraction ``s`` along the constant-speed geodesic x -> y.

    ``s`` may be an array; ``s=0`` gives x and ``s=1`` gives y.  Coincident
    endpoints are treated as the degenerate geodesic sitting at x.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if validate:
        check_points(x)
        check_points(y)
    rho = distance(x, y, validate=False)
    s = np.asarray(s, dtype=float)
    if np.isscalar(rho) or rho.ndim == 0:
        if rho < 1e-14:
            return np.broadcast_to(x, s.shape + x.shape).copy() if s.ndim else x.copy()
        u = (y - np.cosh(rho) * x) / np.sinh(rho)
        sr = s[..., None] * rho if s.ndim else s * rho
        return np.cosh(sr) * x + np.sinh(sr) * u
    # batched endpoints
    rho_ = rho[..., None]
    denom = np.sinh(np.maximum(rho_, 1e-14))
    u = np.where(rho_ > 1e-14, (y - np.cosh(rho_) * x) / denom, 0.0)
    sr = np.asarray(s)[..., None] * rho_
    return np.cosh(sr) * x + np.sinh(sr) * u


def point_at(d, radius, direction=None, rng=None):
    """Point at given distance from the base point o.

    ``direction`` is a unit d-vector of spatial direction; a random one is
    drawn from ``rng`` when omitted.
    """
    if direction is None:
        direction = random_direction(d, rng)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction, axis=-1, keepdims=True)
    radius = np.asarray(radius, dtype=float)
    out = np.empty(np.broadcast(radius[..., None], direction).shape[:-1] + (d + 1,))
    out[..., 0] = np.cosh(radius)
    out[..., 1:] = np.sinh(radius)[..., None] * direction
    return out


def random_direction(d, rng):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def side_length(rho, r, theta):
    """Hyperbolic law of cosines: the side opposite angle ``theta``.

    Triangle with side lengths ``rho`` and ``r`` meeting at angle ``theta``.
    """
    c = np.cosh(rho) * np.cosh(r) - np.sinh(rho) * np.sinh(r) * np.cos(theta)
    return np.arccosh(np.maximum(1.0, c))


# --- tangent-space machinery (used by the Brownian simulators) -------------

def tangent_step(x, coeffs):
    """Map frame coefficients to an ambient tangent vector at ``x``.

    The frame ``u_i = e_i + x_i (x + e_0) / (1 + x_0)`` (i = 1..d) is
    Minkowski-orthonormal at every x, so a coefficient vector with iid
    N(0, s^2) entries is an isotropic tangent Gaussian of scale s and its
    Euclidean norm equals the tangent norm.
    """
    x = np.asarray(x, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    dot = np.sum(coeffs * x[..., 1:], axis=-1, keepdims=True)
    v = np.concatenate([dot, coeffs + dot / (1.0 + x[..., :1]) * x[..., 1:]],
                       axis=-1)
    return v


def exp_map(x, v, norm=None):
    """Exponential map at x applied to tangent vector v (ambient coords).

    ``norm`` may supply the tangent norm when the caller knows it exactly
    (for frame-coefficient steps it is the Euclidean coefficient norm);
    recomputing it through the Minkowski form loses all precision at large
    radius.
    """
    if norm is None:
        norm = np.sqrt(np.maximum(minkowski_dot(v, v), 0.0))
    norm = np.asarray(norm, dtype=float)
    safe = np.maximum(norm, 1e-300)[..., None]
    out = np.cosh(norm)[..., None] * x + np.sinh(norm)[..., None] * (v / safe)
    return project(out)


def frame_step(x, coeffs):
    """Geodesic step from x with orthonormal-frame coefficients ``coeffs``.

    Equivalent to ``exp_map(x, tangent_step(x, coeffs))`` but numerically
    stable at every radius: the tangent norm is the coefficient norm.
    """
    return exp_map(x, tangent_step(x, coeffs),
                   norm=np.linalg.norm(coeffs, axis=-1))


@dataclass(frozen=True)
class GeodesicSegment:
    """Constant-speed geodesic between two validated points.

    ``length`` always equals the endpoint distance; ``point_at(s)`` is the
    unit-speed parametrization evaluated at arc length s in [0, length].
    """
    start: np.ndarray
    end: np.ndarray
    length: float

    @classmethod
    def connect(cls, x, y):
        check_points(x)
        check_points(y)
        return cls(np.asarray(x, float), np.asarray(y, float),
                   float(distance(x, y, validate=False)))

    def point_at(self, s):
        if self.length == 0.0:
            return np.array(self.start)
        return geodesic_point(self.start, self.end,
                              np.asarray(s, dtype=float) / self.length,
                              validate=False)

    def fraction(self, u):
        return geodesic_point(self.start, self.end, u, validate=False)


# --- volumes ----------------------------------------------------------------

def sphere_area(d):
    """Surface area of the unit sphere S^(d-1)."""
    return 2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0)


def ball_volume(R, d):
    """Volume of a geodesic ball: area(S^{d-1}) * int_0^R sinh^{d-1}.

    Closed forms are used for d = 2, 3; other dimensions go through adaptive
    quadrature at relative tolerance 1e-10.
    """
    if R < 0:
        raise ValueError("radius must be nonnegative")
    if R == 0:
        return 0.0
    if d == 2:
        return 2.0 * np.pi * (np.cosh(R) - 1.0)
    if d == 3:
        return np.pi * (np.sinh(2.0 * R) - 2.0 * R)
    val, _ = integrate.quad(lambda r: np.sinh(r) ** (d - 1), 0.0, R,
                            epsabs=0.0, epsrel=1e-10, limit=200)
    return sphere_area(d) * val


def annulus_volume(a, b, d):
    return ball_volume(b, d) - ball_volume(a, d)


def euclidean_ball_volume(R, d):
    return np.pi ** (d / 2.0) / special.gamma(d / 2.0 + 1.0) * R ** d


# --- regions and packings ----------------------------------------------------

@dataclass(frozen=True)
class BallRegion:
    """Geodesic ball of given radius centered at the base point."""
    radius: float


@dataclass(frozen=True)
class AnnulusRegion:
    """Closed annulus {a <= d(x, o) <= b} around the base point."""
    inner: float
    outer: float


@dataclass
class Packing:
    """Greedy maximal r-packing of a region.

    ``centers`` are pairwise more than ``2 * radius`` apart and lie in the
    r-shrunken region, so the corresponding r-balls sit inside the region and
    the 2r-balls cover the shrunken region when ``maximal`` is True.
    """
    centers: np.ndarray
    radius: float
    region: object
    maximal: bool

    def __len__(self):
        return len(self.centers)


class RegionTooSmall(ValueError):
    pass


def _radial_sampler(lo, hi, d, n_grid=2048):
    """Inverse-CDF sampler for the radial density sinh^{d-1} on [lo, hi]."""
    if hi <= lo:
        return lambda rng, n: np.full(n, lo)
    grid = np.linspace(lo, hi, n_grid)
    dens = np.sinh(grid) ** (d - 1)
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(grid))])
    if cdf[-1] <= 0:  # degenerate near zero radius
        return lambda rng, n: rng.uniform(lo, hi, n)
    cdf /= cdf[-1]
    return lambda rng, n: np.interp(rng.random(n), cdf, grid)


def sample_region(region, d, rng, n):
    """Uniform (volume-measure) samples from a region around o."""
    if isinstance(region, BallRegion):
        lo, hi = 0.0, region.radius
    elif isinstance(region, AnnulusRegion):
        lo, hi = region.inner, region.outer
    else:
        raise TypeError(f"unsupported region {region!r}")
    radii = _radial_sampler(lo, hi, d)(rng, n)
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = np.empty((n, d + 1))
    pts[:, 0] = np.cosh(radii)
    pts[:, 1:] = np.sinh(radii)[:, None] * dirs
    return pts


def _shrunk(region, r):
    if isinstance(region, BallRegion):
        if region.radius < r:
            raise RegionTooSmall(
                f"ball radius {region.radius} cannot hold a packing ball of radius {r}")
        return BallRegion(region.radius - r)
    if isinstance(region, AnnulusRegion):
        if region.outer - region.inner < 2.0 * r:
            return None   # no center fits; an empty packing is the answer
        return AnnulusRegion(region.inner + r, region.outer - r)
    raise TypeError(f"unsupported region {region!r}")


def greedy_packing(region, r, d, seed=0, max_centers=MAX_PACKING_CENTERS,
                   batch=512, patience=8):
    """Randomized greedy maximal r-packing of ``region``.

    Candidates are drawn volume-uniformly from the r-shrunken region and kept
    when more than 2r from every accepted center.  Sampling stops after
    ``patience`` consecutive fruitless batches (declared maximal) or at
    ``max_centers`` (recorded as non-maximal).  Deterministic given ``seed``.
    """
    if r <= 0:
        raise ValueError("packing radius must be positive")
    inner = _shrunk(region, r)
    if inner is None:
        return Packing(np.empty((0, d + 1)), r, region, maximal=True)
    rng = stream(seed, "packing")
    if isinstance(inner, BallRegion) and inner.radius == 0.0:
        return Packing(origin(d)[None, :], r, region, maximal=True)
    buf = np.empty((max_centers, d + 1))
    n = 0
    idle = 0
    cosh2r = np.cosh(2.0 * r)
    while idle < patience and n < max_centers:
        cands = sample_region(inner, d, rng, batch)
        gained = False
        for c in cands:
            if n >= max_centers:
                break
            # accept iff strictly farther than 2r from every kept center
            if n == 0 or np.min(cosh_distance(buf[:n], c)) > cosh2r:
                buf[n] = c
                n += 1
                gained = True
        idle = 0 if gained else idle + 1
    return Packing(buf[:n].copy(), r, region, maximal=n < max_centers)


def region_contains(region, pts):
    r = np.arccosh(np.maximum(1.0, pts[..., 0]))
    if isinstance(region, BallRegion):
        return r <= region.radius + 1e-12
    return (region.inner - 1e-12 <= r) & (r <= region.outer + 1e-12)


def covering_probe(packing, d, n_probes=10000, seed=1):
    """Fraction of random shrunken-region probes within 2r of some center."""
    inner = _shrunk(packing.region, packing.radius)
    if inner is None or len(packing) == 0:
        return 1.0
    rng = stream(seed, "probe")
    probes = sample_region(inner, d, rng, n_probes)
    cosh2r = np.cosh(2.0 * packing.radius)
    prod = cosh_distance(probes[:, None, :], packing.centers[None, :, :])
    return float(np.mean(np.min(prod, axis=1) <= cosh2r + 1e-12))


# --- Poincare-ball cross check ----------------------------------------------

def to_poincare(x):
    """Map hyperboloid coordinates to the Poincare unit ball."""
    x = np.asarray(x, dtype=float)
    return x[..., 1:] / (1.0 + x[..., :1])


def poincare_distance(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du2 = np.sum((u - v) ** 2, axis=-1)
    arg = 1.0 + 2.0 * du2 / ((1.0 - np.sum(u * u, axis=-1)) * (1.0 - np.sum(v * v, axis=-1)))
    return np.arccosh(np.maximum(1.0, arg))
