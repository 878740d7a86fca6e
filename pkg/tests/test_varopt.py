import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypam import varopt
from hypam.config import ConstraintViolation
from hypam.varopt import ModelParams


def test_f_eval_examples(params2):
    assert abs(varopt.f_eval(0.2, 0.371327, params2) - 0.517064) < 1e-5
    # K -> 0+: both terms vanish
    assert abs(varopt.f_eval(0.3, 1e-12, params2)) < 1e-5
    # dominated cost goes negative
    assert varopt.f_eval(0.1, 10.0, params2) < 0


def test_f_eval_domain(params2):
    with pytest.raises(ConstraintViolation):
        varopt.f_eval(0.0, 1.0, params2)
    with pytest.raises(ConstraintViolation):
        varopt.f_eval(0.5, -1.0, params2)


def test_optimize_closed_forms(params2):
    sol = varopt.optimize_f(params2)
    assert sol.eps_star == 0.2
    a = params2.a
    assert abs(sol.K_star - 2 ** (5 / 3) / 5 ** (4 / 3) * a ** (1 / 3)) < 1e-12
    assert abs(sol.L_star - 3 * 2 ** (4 / 3) / 5 ** (5 / 3) * a ** (2 / 3)) < 1e-12
    assert sol.gradient_norm <= 1e-6
    assert sol.grid_gap <= 1e-6


def test_optimize_scaling_law():
    base = varopt.optimize_f(ModelParams(2, 1.0), cross_validate=False)
    for c in (0.37, 2.0, 9.0):
        scaled = varopt.optimize_f(ModelParams(2, c), cross_validate=False)
        assert scaled.eps_star == base.eps_star == 0.2
        assert abs(scaled.L_star - c ** (2 / 3) * base.L_star) < 1e-9


def test_l_star_relaxed_reduction(params2):
    sol = varopt.optimize_f(params2, cross_validate=False)
    val = varopt.l_star_relaxed(1.0, params2.mu0, params2)
    assert abs(val - sol.L_star) < 1e-6


def test_l_star_relaxed_monotone(params2):
    alphas = np.linspace(0.2, 1.0, 5)
    mus = params2.mu0 * np.linspace(1.0, 2.0, 5)
    grid = np.array([[varopt.l_star_relaxed(a, m, params2, cross_validate=False)
                      for m in mus] for a in alphas])
    assert np.all(np.diff(grid, axis=0) < 1e-12)    # decreasing in alpha
    assert np.all(np.diff(grid, axis=1) > -1e-12)   # increasing in mu


def test_l_star_relaxed_continuity(params2):
    sol = varopt.optimize_f(params2, cross_validate=False)
    near = varopt.l_star_relaxed(0.99, 1.01 * params2.mu0, params2)
    assert abs(near - sol.L_star) <= 0.05 * sol.L_star
    tight = varopt.l_star_relaxed(1.0 - 1e-4, params2.mu0 * (1.0 + 1e-4), params2,
                                  cross_validate=False)
    assert abs(tight - sol.L_star) <= 1e-3


def test_euclid_growth(params2):
    sol = varopt.optimize_f(params2, cross_validate=False)
    ratios = [varopt.euclid_growth(t, params2) / (sol.L_star * t ** (5 / 3))
              for t in (1e2, 1e4, 1e6)]
    assert ratios[0] > ratios[1] > ratios[2]
    with pytest.raises(ConstraintViolation):
        varopt.euclid_growth(2.0, params2)
    # proportional to sigma at fixed t
    v1 = varopt.euclid_growth(100.0, ModelParams(2, 1.0))
    v2 = varopt.euclid_growth(100.0, ModelParams(2, 4.0))
    assert abs(v2 / v1 - 2.0) < 1e-12


def test_legendre_triple():
    H, L, rho = varopt.legendre_triple(2.0, 1.0)
    assert abs(L - 2.0) < 1e-9 and abs(rho - 2.0) < 1e-9
    assert abs(L - (rho * 2.0 - H)) < 1e-9
    H2, L2, rho2 = varopt.legendre_triple(1e-8, 2.0)
    assert max(H2, L2, rho2) < 1e-7


def test_peak_height_and_delta_scale():
    p = ModelParams(2, 1.0)
    for R in (0.5, 2.0, 7.0):
        h = varopt.peak_height(R, p)
        assert abs(h * h / R - 2 * p.a) < 1e-12
    with pytest.raises(ConstraintViolation):
        varopt.delta_scale(100.0, p, beta=0.2)
    # decay exponent ~ -2 beta / 3 once the sqrt correction is small
    strong = ModelParams(2, 25.0)
    ts = np.array([1e2, 1e3, 1e4])
    ds = np.array([varopt.delta_scale(t, strong) for t in ts])
    slope = np.polyfit(np.log(ts), np.log(ds), 1)[0]
    assert abs(slope - (-2.0 / 9.0)) < 0.01


class TestInequalities:
    def test_chain_examples(self):
        lhs, rhs, ok = varopt.chain_bound([2.0, 4.0], [1.0, 2.0])
        assert ok and abs(lhs - 12.0) < 1e-12 and abs(rhs - 12.0) < 1e-12
        lhs, rhs, ok = varopt.chain_bound([3.0, 4.0], [1.0, 1.0])
        assert ok and abs(lhs - 25.0) < 1e-12 and abs(rhs - 24.5) < 1e-12
        lhs, rhs, ok = varopt.chain_bound([5.0], [0.7])
        assert ok and abs(lhs - rhs) < 1e-12

    def test_chain_length_mismatch(self):
        with pytest.raises(ConstraintViolation):
            varopt.chain_bound([1.0, 2.0], [1.0])

    @given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=10),
           st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=10))
    @settings(max_examples=200, deadline=None)
    def test_chain_property(self, D, u):
        k = min(len(D), len(u))
        _, _, ok = varopt.chain_bound(D[:k], u[:k])
        assert ok

    def test_hop_example(self, params2):
        lhs, rhs, ok = varopt.hop_inequality(0.1, 0.1, 0.4, 0.4, 0.2, 0.4, params2)
        assert ok and lhs <= rhs

    def test_hop_reduction_to_split_cost(self, params2):
        # equal distance scales: sides differ only through the jump costs
        e1, e2 = 0.15, 0.25
        h2 = 1.0 - e1 - e2 - 1e-9
        K = 0.7
        lhs, rhs, ok = varopt.hop_inequality(e1, e2, 1e-9, h2, K - 1e-12, K, params2)
        assert ok
        gap = rhs - lhs
        expected = K ** 2 / (4 * e1 ** 2) - K ** 2 / (4 * (e1 + e2))
        assert abs(gap - expected) < 1e-4

    def test_ha_example(self):
        harm, arit, ok = varopt.ha_mean_bound([1.0, 4.0])
        assert ok and abs(harm - 1.6) < 1e-12 and abs(arit - 2.5) < 1e-12
        harm, arit, ok = varopt.ha_mean_bound([3.0, 3.0, 3.0])
        assert ok and abs(harm - arit) < 1e-12

    @given(st.lists(st.floats(1e-4, 1e4), min_size=1, max_size=12))
    @settings(max_examples=200, deadline=None)
    def test_ha_property(self, v):
        _, _, ok = varopt.ha_mean_bound(v)
        assert ok


class TestRouteConstants:
    def test_worked_example(self, params2):
        consts, _ = varopt.route_constants(1e-3, 1e-4, 1.0, 1.0, params2, 1.0)
        assert abs(consts.L_delta - 2.02) < 1e-12
        assert abs(consts.eta_delta - 0.0275) < 5e-5

    def test_eta_halving_doubles_cap(self, params2):
        c1, _ = varopt.route_constants(1e-3, 1e-4, 1.0, 1.0, params2, 1.0)
        c2, _ = varopt.route_constants(5e-4, 1e-4, 1.0, 1.0, params2, 1.0)
        assert abs(c2.N_eta - 2.0 * c1.N_eta) < 1e-9

    def test_delta_scaling(self, params2):
        c1, _ = varopt.route_constants(1e-4, 1e-5, 1.0, 1.0, params2, 1.0)
        c2, _ = varopt.route_constants(1e-4, 1e-5, 0.5, 1.0, params2, 1.0)
        assert abs(c2.L_delta - 4.0 * c1.L_delta) < 1e-9

    def test_error_term_limit(self, params2):
        consts, err_fn = varopt.route_constants(1e-3, 1e-4, 1.0, 1.0, params2, 1.0)
        bracket = (consts.N_eta * consts.L_delta * (6 * consts.L_delta + 0.5)
                   + 2 * consts.L_delta)
        limit = 1e-4 * bracket
        vals = [err_fn(t) for t in (1e3, 1e6, 1e9, 1e18)]
        assert vals[0] > vals[1] > vals[2] > vals[3] > limit
        # the transient decays like t^(-1/3), so the limit is approached slowly
        assert abs(vals[-1] - limit) < 1e-2 * limit

    def test_feasibility_solver(self):
        # a feasible (lam, eta) pair exists at the quoted configuration
        from hypam.field import cluster_constants
        p = ModelParams(2, 1.0)
        mu = 1.1 * p.mu0
        _, eta_delta = cluster_constants(0.5, 2, 2.0, 1.0)
        eta = 0.9 * eta_delta
        lam = varopt.find_feasible_lambda(eta, 0.5, 2.0, p, 1.0, alpha=0.9, mu=mu)
        assert lam is not None and 0 < lam < eta
        varopt.route_constants(eta, lam, 0.5, 2.0, p, 1.0,
                               check_constraint=True, alpha=0.9, mu=mu)

    def test_constraint_violation_raised(self, params2):
        with pytest.raises(ConstraintViolation):
            varopt.route_constants(1e-3, 0.5e-3, 0.5, 2.0, params2, 1.0,
                                   check_constraint=True, alpha=0.9,
                                   mu=1.1 * params2.mu0)
