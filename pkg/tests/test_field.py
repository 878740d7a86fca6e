import math

import numpy as np
import pytest

from hypam import field as fd, geometry as geo
from hypam.config import BudgetExceeded, ConstraintViolation, stream


class TestCovarianceSpec:
    def test_normalization_and_support(self, spec_unit):
        assert abs(spec_unit.cov(0.0) - 1.0) < 1e-6
        assert spec_unit.cov(1.5) == 0.0
        assert spec_unit.cov(1.0) == 0.0

    def test_flat_at_zero(self, spec_unit):
        h = 1e-4
        deriv = (spec_unit.cov(h) - spec_unit.cov(-h)) / (2 * h)
        assert abs(deriv) <= 1e-4 * 1.0 / 1.0   # 1e-4 * sigma2 / R0

    def test_twice_differentiable(self, spec_unit):
        # second differences stabilize: C'' exists across the table
        h = 1e-3
        rho = np.linspace(0.05, 0.95, 19)
        d2 = (spec_unit.cov(rho + h) - 2 * spec_unit.cov(rho)
              + spec_unit.cov(rho - h)) / h ** 2
        d2_fine = (spec_unit.cov(rho + h / 2) - 2 * spec_unit.cov(rho)
                   + spec_unit.cov(rho - h / 2)) / (h / 2) ** 2
        assert np.max(np.abs(d2 - d2_fine)) < 0.05

    def test_psd_on_random_sites(self, spec_unit):
        rng = stream(0, "psd")
        sites = geo.sample_region(geo.BallRegion(2.0), 2, rng, 30)
        w = np.linalg.eigvalsh(spec_unit.cov_matrix(sites))
        assert w.min() >= -1e-8

    def test_invalid_bump(self):
        with pytest.raises(ConstraintViolation):
            fd.make_spec(1.0, 1.0, "triangle")

    def test_other_shapes_normalize(self):
        for shape in ("poly4", "cosine"):
            s = fd.make_spec(2.0, 0.5, shape, d=3)
            assert abs(s.cov(0.0) - 2.0) < 1e-6
            assert s.cov(0.75) == 0.0


class TestSampling:
    def test_single_site_variance(self, spec_unit):
        o = geo.origin(2)[None, :]
        vals = np.array([fd.sample_field(spec_unit, o, seed=i).values[0]
                         for i in range(20000)])
        se = math.sqrt(2.0 / 20000)   # SE of the sample variance of N(0,1)
        assert abs(np.var(vals) - 1.0) <= 4 * se

    def test_duplicate_sites_rejected(self, spec_unit):
        o = geo.origin(2)
        with pytest.raises(ConstraintViolation):
            fd.sample_field(spec_unit, np.vstack([o, o]), seed=0)

    def test_oneshot_budget(self, spec_unit):
        sites = np.zeros((5000, 3))
        with pytest.raises(BudgetExceeded):
            fd.sample_field(spec_unit, sites, seed=0)

    def test_determinism(self, spec_unit):
        sites = geo.sample_region(geo.BallRegion(1.0), 2, stream(1, "s"), 10)
        a = fd.sample_field(spec_unit, sites, seed=7)
        b = fd.sample_field(spec_unit, sites, seed=7)
        assert np.array_equal(a.values, b.values)

    def test_decorrelation_beyond_support(self, spec_unit):
        x = geo.origin(2)
        y = geo.point_at(2, 1.4, np.array([1.0, 0.0]))
        sites = np.vstack([x, y])
        n = 10000
        draws = np.array([fd.sample_field(spec_unit, sites, seed=i).values
                          for i in range(n)])
        corr = np.corrcoef(draws.T)[0, 1]
        assert abs(corr) <= 4.0 / math.sqrt(n)

    def test_covariance_inside_support(self, spec_unit):
        rho = 0.45
        x = geo.origin(2)
        y = geo.point_at(2, rho, np.array([1.0, 0.0]))
        n = 10000
        draws = np.array([fd.sample_field(spec_unit, np.vstack([x, y]), seed=i).values
                          for i in range(n)])
        emp = np.mean(draws[:, 0] * draws[:, 1])
        target = spec_unit.cov(rho)
        se = np.std(draws[:, 0] * draws[:, 1]) / math.sqrt(n)
        assert abs(emp - target) <= 4 * se

    def test_stationarity_binned(self, spec_unit):
        # same-distance pairs in different placements agree on covariance
        rho = 0.5
        rng = stream(3, "stat")
        x1 = geo.origin(2)
        y1 = geo.point_at(2, rho, np.array([1.0, 0.0]))
        x2 = geo.point_at(2, 1.7, np.array([0.0, 1.0]))
        u = geo.tangent_step(x2, rho * np.array([0.6, -0.8]))
        y2 = geo.exp_map(x2, u)
        sites = np.vstack([x1, y1, x2, y2])
        n = 10000
        draws = np.array([fd.sample_field(spec_unit, sites, seed=i).values
                          for i in range(n)])
        c1 = np.mean(draws[:, 0] * draws[:, 1])
        c2 = np.mean(draws[:, 2] * draws[:, 3])
        se = math.hypot(np.std(draws[:, 0] * draws[:, 1]),
                        np.std(draws[:, 2] * draws[:, 3])) / math.sqrt(n)
        assert abs(c1 - c2) <= 4 * se


class TestExtension:
    def test_far_site_unconditional(self, spec_unit):
        o = geo.origin(2)[None, :]
        far = geo.point_at(2, 3.0, np.array([1.0, 0.0]))[None, :]
        vals = []
        for i in range(8000):
            base = fd.sample_field(spec_unit, o, seed=i)
            ext = fd.extend_field(base, far, seed=10 ** 6 + i)
            vals.append(ext.values[-1])
        vals = np.asarray(vals)
        assert abs(np.var(vals) - 1.0) <= 4 * math.sqrt(2.0 / 8000)
        assert abs(np.mean(vals)) <= 4 / math.sqrt(8000)

    def test_redraw_same_seed_identical(self, spec_unit):
        rng = stream(4, "ext")
        base = fd.sample_field(spec_unit, geo.sample_region(geo.BallRegion(1.0), 2, rng, 6), seed=3)
        new = geo.sample_region(geo.BallRegion(1.0), 2, rng, 4)
        a = fd.extend_field(base, new, seed=11)
        b = fd.extend_field(base, new, seed=11)
        assert np.array_equal(a.values, b.values)

    def test_overlap_rejected(self, spec_unit):
        rng = stream(5, "dup")
        sites = geo.sample_region(geo.BallRegion(1.0), 2, rng, 6)
        base = fd.sample_field(spec_unit, sites, seed=3)
        with pytest.raises(ConstraintViolation):
            fd.extend_field(base, sites[2:3], seed=0)

    def test_two_stage_matches_one_shot(self, spec_unit):
        rng = stream(6, "equiv")
        sA = geo.sample_region(geo.BallRegion(1.5), 2, rng, 8)
        sB = geo.sample_region(geo.BallRegion(1.5), 2, rng, 5)
        n = 10000
        two = np.empty((n, 13))
        for i in range(n):
            fA = fd.sample_field(spec_unit, sA, seed=1000 + i)
            two[i] = fd.extend_field(fA, sB, seed=500000 + i).values
        joint = spec_unit.cov_matrix(np.vstack([sA, sB]))
        emp = (two.T @ two) / n
        prods = two[:, :, None] * two[:, None, :]
        se = np.std(prods, axis=0) / math.sqrt(n)
        assert np.all(np.abs(emp - joint) <= 4 * se + 1e-12)


class TestTilted:
    def test_mean_at_origin(self, spec_unit):
        sites = np.vstack([geo.origin(2)[None, :],
                           geo.sample_region(geo.BallRegion(1.2), 2, stream(7, "t"), 5)])
        n = 10000
        vals = np.array([fd.tilted_sample(spec_unit, sites, 2.0, seed=i).values[0]
                         for i in range(n)])
        assert abs(np.mean(vals) - 2.0) <= 4 / math.sqrt(n)

    def test_mean_beyond_support(self, spec_unit):
        sites = np.vstack([geo.origin(2)[None, :],
                           geo.point_at(2, 2.0, np.array([1.0, 0.0]))[None, :]])
        n = 10000
        vals = np.array([fd.tilted_sample(spec_unit, sites, 3.0, seed=i).values[1]
                         for i in range(n)])
        assert abs(np.mean(vals)) <= 4 / math.sqrt(n)

    def test_zero_tilt_matches_plain(self, spec_unit):
        from scipy import stats as sps
        sites = geo.sample_region(geo.BallRegion(1.0), 2, stream(8, "z"), 4)
        a = np.array([fd.tilted_sample(spec_unit, sites, 0.0, seed=i).values[0]
                      for i in range(4000)])
        b = np.array([fd.sample_field(spec_unit, sites, seed=10 ** 6 + i).values[0]
                      for i in range(4000)])
        assert sps.ks_2samp(a, b).pvalue > 0.01


class TestMaxScan:
    def test_single_site_half_normal(self, spec_unit):
        rows = fd.max_scan(spec_unit, 2, [0.2], spacing=0.25, n_reps=4000,
                           seed=10, site_cap=4)
        assert rows[0].n_sites == 1
        target = math.sqrt(2.0 / math.pi)
        se = math.sqrt(1.0 - 2.0 / math.pi) / math.sqrt(4000)
        assert abs(rows[0].mean_max - target) <= 4 * se

    def test_spacing_precondition(self, spec_unit):
        with pytest.raises(ConstraintViolation):
            fd.max_scan(spec_unit, 2, [1.0], spacing=0.7, n_reps=2, seed=0)

    def test_exceedance_trend_and_borell(self, spec_unit):
        rows = fd.max_scan(spec_unit, 2, [5.0, 10.0, 20.0], spacing=0.25,
                           n_reps=48, seed=9, site_cap=1024)
        exc = [r.exceedance[0.5] for r in rows]
        assert exc[0] > 0
        assert all(exc[i] >= exc[i + 1] for i in range(len(exc) - 1))
        for r in rows:
            _, ok = fd.borell_bound_check(r.maxima, 1.0)
            assert ok


def test_tail_constant_estimation(spec_unit):
    c_hat, fit = fd.estimate_tail_constant(spec_unit, 2, n_reps=4000, seed=2)
    assert c_hat > 0
    assert fit.r2 > 0.8


def test_gradient_growth_subscaling(spec_unit):
    rows, fit = fd.gradient_growth_scan(spec_unit, 2, [5.0, 10.0, 20.0], seed=3,
                                        n_sites=192)
    assert fit.slope <= 0.75


class TestIslandsClusters:
    def _field(self, spec, values, radius=3.0, n=None, seed=0):
        rng = stream(seed, "icl")
        sites = geo.sample_region(geo.BallRegion(radius), 2, rng, len(values))
        return fd.FieldRealization(spec, sites, np.asarray(values, float), 2, h=0.25)

    def test_empty(self, spec_unit):
        f = self._field(spec_unit, [-1.0, -2.0, 0.1], seed=1)
        isl = fd.detect_islands(f, delta=1.0, t=1.0)
        assert len(isl) == 0

    def test_singleton(self, spec_unit):
        f = self._field(spec_unit, [-1.0, 5.0, 0.1], seed=2)
        isl = fd.detect_islands(f, delta=1.0, t=1.0)
        assert len(isl) == 1 and isl.islands[0] == [1]

    def test_requires_spacing(self, spec_unit):
        f = fd.FieldRealization(spec_unit, geo.origin(2)[None, :],
                                np.array([3.0]), 2, h=None)
        with pytest.raises(ConstraintViolation):
            fd.detect_islands(f, 1.0, 1.0)

    def test_two_islands_far_apart_two_clusters(self, spec_unit):
        ex = np.array([1.0, 0.0])
        t = 1.0
        eta = 0.3
        sites = np.vstack([geo.point_at(2, 0.5, ex), geo.point_at(2, 2.5, ex)])
        f = fd.FieldRealization(spec_unit, sites, np.array([5.0, 5.0]), 2, h=0.25)
        isl = fd.detect_islands(f, 1.0, t)
        assert len(isl) == 2
        cl = fd.build_clusters(isl, eta, t)   # separation 2.0 > 2 * 0.3
        assert len(cl) == 2

    def test_chain_merges_into_one_cluster(self, spec_unit):
        ex = np.array([1.0, 0.0])
        radii = [0.5, 0.64, 0.78, 0.92]      # spaced at eta * t^(4/3) / 2 = 0.15
        sites = np.vstack([geo.point_at(2, r, ex) for r in radii])
        f = fd.FieldRealization(spec_unit, sites, np.full(4, 5.0), 2, h=0.05)
        isl = fd.detect_islands(f, 1.0, 1.0)
        assert len(isl) == 4
        cl = fd.build_clusters(isl, eta=0.3, t=1.0)
        assert len(cl) == 1

    def test_cluster_invariants(self, spec_unit):
        rng = stream(11, "ci")
        sites = geo.sample_region(geo.BallRegion(3.0), 2, rng, 200)
        f = fd.FieldRealization(spec_unit, sites, rng.normal(0, 1, 200), 2, h=0.25)
        isl = fd.detect_islands(f, 0.3, 1.0)
        thr = 0.3
        for g in isl.islands:
            assert np.all(f.values[np.asarray(g)] > thr)
        if len(isl) > 1:
            cl = fd.build_clusters(isl, eta=0.2, t=1.0)
            # inter-cluster distance exceeds the link distance
            for i in range(len(cl)):
                for j in range(i + 1, len(cl)):
                    a = f.sites[np.asarray(cl.clusters[i].site_indices)]
                    b = f.sites[np.asarray(cl.clusters[j].site_indices)]
                    dmin = np.min(geo.distance(a[:, None, :], b[None, :, :],
                                               validate=False))
                    assert dmin > cl.link_distance

    def test_report_schema(self, spec_unit):
        f = self._field(spec_unit, [5.0, -1.0, 4.0], seed=3)
        isl = fd.detect_islands(f, 1.0, 1.0)
        cl = fd.build_clusters(isl, 0.2, 1.0)
        rep = cl.report()
        assert set(rep) == {"clusters"}
        for c in rep["clusters"]:
            assert set(c) == {"id", "center", "diameter", "n_islands", "n_sites"}


def test_factorization_failure_on_invalid_profile():
    # an oscillating "covariance" is indefinite on enough sites, and the
    # jitter ladder must refuse to paper over it
    from scipy.interpolate import CubicSpline
    grid = np.linspace(0.0, 10.0, 801)
    vals = np.cos(6.0 * grid)
    fake = fd.CovarianceSpec(1.0, 10.0, "poly3", 2, grid, vals,
                             CubicSpline(grid, vals))
    sites = geo.sample_region(geo.BallRegion(4.0), 2, stream(13, "bad"), 40)
    with pytest.raises(fd.FactorizationError):
        fd.sample_field(fake, sites, seed=0)


def test_cluster_constants_worked_example():
    L, eta = fd.cluster_constants(1.0, 2, 1.0, 1.0)
    assert abs(L - 2.02) < 1e-12
    assert abs(eta - 0.0275) < 5e-5
    L_half, _ = fd.cluster_constants(0.5, 2, 1.0, 1.0)
    assert abs(L_half - 4.0 * L) < 1e-9


def test_cluster_property_trend():
    # parameters chosen so the rich-ball event is geometrically possible
    # (ball radius sqrt(eta_delta) * t^(4/3) well above the 9 R0 separation)
    # and common at the smallest t of the grid
    spec = fd.make_spec(1.0, 0.25, "poly3", d=2)
    freqs = fd.cluster_property_trend(spec, 2, [8.0, 16.0, 24.0], delta=0.5,
                                      K0=1.0, C_R0_hat=5.39, seed=4,
                                      n_reps=24, region_radius=4.0, site_cap=700)
    vals = [f for _, f in freqs]
    assert vals[0] >= vals[1] >= vals[2]
    assert vals[0] > 0 and vals[2] < vals[0]
