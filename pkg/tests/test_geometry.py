import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypam import geometry as geo
from hypam.config import stream


def test_distance_identity():
    o = geo.origin(2)
    assert geo.distance(o, o) == 0.0


def test_distance_unit_construction():
    o = geo.origin(2)
    x = np.array([np.cosh(1.0), np.sinh(1.0), 0.0])
    assert abs(geo.distance(o, x) - 1.0) < 1e-12


def test_distance_additive_on_geodesic():
    rng = stream(0, "geo")
    for _ in range(50):
        a = geo.point_at(3, rng.uniform(0.1, 3.0), geo.random_direction(3, rng))
        b = geo.point_at(3, rng.uniform(0.1, 3.0), geo.random_direction(3, rng))
        m = geo.geodesic_point(a, b, rng.uniform(0.1, 0.9))
        assert abs(geo.distance(a, b) - geo.distance(a, m) - geo.distance(m, b)) < 1e-9


def test_invalid_point_rejected():
    with pytest.raises(geo.InvalidPoint):
        geo.distance(np.array([1.0, 0.5, 0.0]), geo.origin(2))


def test_triangle_and_symmetry_fuzz():
    rng = stream(1, "tri")
    n = 100000
    pts = geo.sample_region(geo.BallRegion(5.0), 2, rng, 3 * n).reshape(3, n, 3)
    a, b, c = pts
    dab = geo.distance(a, b, validate=False)
    dba = geo.distance(b, a, validate=False)
    dac = geo.distance(a, c, validate=False)
    dbc = geo.distance(b, c, validate=False)
    assert np.max(np.abs(dab - dba)) < 1e-9
    assert np.min(dab + dbc - dac) > -1e-9


def test_geodesic_endpoints_and_midpoint():
    rng = stream(2, "mid")
    x = geo.point_at(2, 1.3, geo.random_direction(2, rng))
    y = geo.point_at(2, 2.1, geo.random_direction(2, rng))
    assert np.allclose(geo.geodesic_point(x, y, 0.0), x, atol=1e-12)
    assert np.allclose(geo.geodesic_point(x, y, 1.0), y, atol=1e-10)
    m = geo.geodesic_point(x, y, 0.5)
    half = geo.distance(x, y) / 2.0
    assert abs(geo.distance(x, m) - half) < 1e-9
    assert abs(geo.distance(m, y) - half) < 1e-9


def test_geodesic_segment_invariants():
    rng = stream(9, "seg")
    x = geo.point_at(3, 1.1, geo.random_direction(3, rng))
    y = geo.point_at(3, 2.4, geo.random_direction(3, rng))
    seg = geo.GeodesicSegment.connect(x, y)
    assert abs(seg.length - geo.distance(x, y)) < 1e-10
    s = np.sort(rng.uniform(0.0, seg.length, 12))
    pts = seg.point_at(s)
    gaps = geo.distance(pts[:-1], pts[1:], validate=False)
    assert np.max(np.abs(gaps - np.diff(s))) < 1e-8
    assert np.allclose(seg.point_at(0.0), x, atol=1e-10)


def test_geodesic_unit_speed():
    rng = stream(3, "speed")
    x = geo.point_at(2, 0.7, geo.random_direction(2, rng))
    y = geo.point_at(2, 2.9, geo.random_direction(2, rng))
    rho = geo.distance(x, y)
    s = np.sort(rng.random(20))
    pts = geo.geodesic_point(x, y, s)
    seg = geo.distance(pts[:-1], pts[1:], validate=False)
    assert np.max(np.abs(seg - np.diff(s) * rho)) < 1e-8


def test_geodesic_convexity():
    # d(alpha_s, beta_s) <= max of the endpoint distances, many random pairs
    rng = stream(4, "conv")
    n = 10000
    ends = geo.sample_region(geo.BallRegion(3.0), 2, rng, 4 * n).reshape(4, n, 3)
    a0, a1, b0, b1 = ends
    s = rng.random(n)
    pa = geo.geodesic_point(a0, a1, s, validate=False)
    pb = geo.geodesic_point(b0, b1, s, validate=False)
    lhs = geo.distance(pa, pb, validate=False)
    cap = np.maximum(geo.distance(a0, b0, validate=False),
                     geo.distance(a1, b1, validate=False))
    assert np.max(lhs - cap) < 1e-9


def test_cross_model_distance():
    rng = stream(5, "poincare")
    n = 10000
    x = geo.sample_region(geo.BallRegion(4.0), 3, rng, n)
    y = geo.sample_region(geo.BallRegion(4.0), 3, rng, n)
    d_hyp = geo.distance(x, y, validate=False)
    d_ball = geo.poincare_distance(geo.to_poincare(x), geo.to_poincare(y))
    assert np.max(np.abs(d_hyp - d_ball)) < 1e-8


def test_ball_volume_closed_forms():
    assert abs(geo.ball_volume(1.0, 2) - 2 * np.pi * (np.cosh(1.0) - 1)) < 1e-10
    assert abs(geo.ball_volume(1.0, 3) - np.pi * (np.sinh(2.0) - 2.0)) < 1e-10
    # generic-d quadrature agrees with the d=3 closed form
    val = geo.ball_volume(2.5, 3)
    assert abs(val - np.pi * (np.sinh(5.0) - 5.0)) < 1e-8 * val


def test_ball_volume_euclidean_limit():
    for d in (2, 3, 4):
        r = 1e-3
        ratio = geo.ball_volume(r, d) / geo.euclidean_ball_volume(r, d)
        assert abs(ratio - 1.0) < 1e-4


@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.floats(0.0, np.pi))
@settings(max_examples=200, deadline=None)
def test_side_length_triangle(r1, r2, theta):
    # law-of-cosines side obeys the triangle inequality against its legs
    s = geo.side_length(r1, r2, theta)
    assert s <= r1 + r2 + 1e-9
    assert s >= abs(r1 - r2) - 1e-9


class TestPacking:
    def test_tight_ball_single_center(self):
        p = geo.greedy_packing(geo.BallRegion(0.5), 0.5, 2, seed=0)
        assert len(p) == 1
        assert np.allclose(p.centers[0], geo.origin(2))

    def test_degenerate_annulus_empty(self):
        p = geo.greedy_packing(geo.AnnulusRegion(2.0, 2.0), 0.3, 2, seed=0)
        assert len(p) == 0 and p.maximal

    def test_region_too_small(self):
        with pytest.raises(geo.RegionTooSmall):
            geo.greedy_packing(geo.BallRegion(0.2), 0.5, 2, seed=0)

    def test_count_sandwich_Q5(self):
        # volume sandwich for a maximal 0.5-packing of the radius-5 ball in H^2
        p = geo.greedy_packing(geo.BallRegion(5.0), 0.5, 2, seed=7)
        assert p.maximal
        lo = geo.ball_volume(5.0, 2) / geo.ball_volume(1.0, 2)
        hi = geo.ball_volume(5.5, 2) / geo.ball_volume(0.5, 2)
        assert lo <= len(p) <= hi

    def test_separation_and_covering(self):
        p = geo.greedy_packing(geo.AnnulusRegion(1.0, 3.0), 0.25, 2, seed=3)
        prod = -geo.minkowski_dot(p.centers[:, None, :], p.centers[None, :, :])
        dist = np.arccosh(np.maximum(1.0, prod))
        off = dist[~np.eye(len(p), dtype=bool)]
        assert np.min(off) > 2 * 0.25
        assert geo.covering_probe(p, 2, n_probes=10000, seed=1) == 1.0

    def test_packing_deterministic(self):
        p1 = geo.greedy_packing(geo.BallRegion(2.0), 0.3, 2, seed=11)
        p2 = geo.greedy_packing(geo.BallRegion(2.0), 0.3, 2, seed=11)
        assert np.array_equal(p1.centers, p2.centers)
