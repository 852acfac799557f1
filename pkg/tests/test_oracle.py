"""Lattice reference boundaries and Monte Carlo valuation."""

import math

import numpy as np
import pytest

from stopbound import fredholm, oracle
from stopbound.constants import solve_B
from stopbound.problem import builtin


@pytest.fixture(scope="module")
def linear():
    return builtin("linear")


@pytest.fixture(scope="module")
def small_grid(linear):
    # moderate resolution shared by the cheap lattice tests
    return oracle.backward_induction(linear, -2.0, t_steps=4000, x_steps=2000)


class TestBackwardInduction:
    def test_precondition_errors(self, linear):
        with pytest.raises(ValueError):
            oracle.backward_induction(linear, 1.0)
        with pytest.raises(oracle.ResolutionError):
            oracle.backward_induction(linear, -1.0, t_steps=8)
        with pytest.raises(ValueError):
            oracle.backward_induction(linear, -1.0, x_bounds=(-0.5, 0.5))
        base = builtin("linear")
        p_no_h = type(base)(
            label="nohx",
            r=1.0,
            h_tilde=base.h_tilde,
            laplace_h_tilde=base.laplace_h_tilde,
            b_inf=base.b_inf,
        )
        with pytest.raises(ValueError):
            oracle.backward_induction(p_no_h, -1.0)

    def test_terminal_slice_is_payoff(self, small_grid, linear):
        hx = np.array([linear.h(x) for x in small_grid.x_values])
        assert np.allclose(small_grid.value[-1], hx)

    def test_value_dominates_payoff(self, small_grid, linear):
        hx = np.array([linear.h(x) for x in small_grid.x_values])
        disc = math.exp(-linear.r * small_grid.t_values[0])
        assert np.all(small_grid.value[0] >= disc * hx - 1e-12)

    def test_boundary_monotone_in_time(self, small_grid):
        assert np.all(np.diff(small_grid.boundary) <= 1e-12)


class TestRefinedBoundary:
    def test_long_horizon_limit(self, linear_oracle, linear):
        # far from expiry the boundary flattens at the perpetual level
        assert linear_oracle.ref.at(-10.0) == pytest.approx(linear.b_inf, abs=0.02)

    def test_stadje_boundary_level(self):
        # square-root-of-time problem: b(t) = alpha * sqrt(-t)
        from stopbound.constants import stadje_alpha

        ref = oracle.refined_boundary(builtin("stadje"), -1.0, 500, 1000)
        assert ref.at(-1.0) == pytest.approx(stadje_alpha(), abs=0.02)

    def test_self_convergence_within_one_cell(self, linear):
        # doubling both resolutions moves the extrapolated boundary by less
        # than one spatial cell of the coarser run
        r1 = oracle.refined_boundary(linear, -2.0, 250, 500)
        r2 = oracle.refined_boundary(linear, -2.0, 500, 1000)
        ts = np.linspace(-1.9, -0.1, 10)
        diff = max(abs(r2.at(t) - r1.at(t)) for t in ts)
        assert diff <= r1.dx


class TestExtractD:
    def test_origin_and_monotonicity(self, small_grid, linear):
        nodes = np.linspace(0.0, linear.b_inf, 30)
        g, truncated = oracle.extract_d(small_grid, nodes)
        assert g.values[0] == 0.0
        assert np.all(np.diff(g.values) <= 0.0)
        assert truncated[-1]  # the perpetual level is past the horizon

    def test_small_node_scale(self, small_grid):
        # near the origin d(y) ~ -B y^2; the lattice estimate at y = 0.1
        # must land within 50% of that scale
        g, _ = oracle.extract_d(small_grid, np.array([0.0, 0.1]))
        target = -solve_B(1.0).B * 0.01
        assert abs(g.values[1] - target) <= 0.5 * abs(target)

    def test_out_of_range(self, small_grid):
        with pytest.raises(oracle.OutOfRangeError):
            oracle.extract_d(small_grid, np.array([0.0, 1e9]))

    def test_interval_ordering(self, linear_oracle, linear):
        nodes = np.linspace(0.0, linear.b_inf, 20)
        d_lo, d_hi, truncated = oracle.d_intervals(linear_oracle.ref, nodes)
        assert np.all(d_lo <= d_hi + 1e-12)
        assert d_hi[0] == 0.0
        assert truncated[-1]


class TestMonteCarlo:
    def _boundary(self, linear, n=200):
        nodes = np.linspace(0.0, linear.b_inf, n)
        return fredholm.BoundaryGrid(nodes, -solve_B(1.0).B * nodes**2)

    def test_immediate_stop_is_exact(self, linear):
        b = self._boundary(linear)
        est, se = oracle.mc_value(linear, -1.0, 0.9, b, 1000, 7)
        assert est == pytest.approx(math.exp(1.0) * linear.h(0.9), abs=1e-12)
        assert se <= 1e-12

    def test_seed_determinism(self, linear):
        b = self._boundary(linear)
        a = oracle.mc_value(linear, -1.0, 0.0, b, 2000, 42)
        c = oracle.mc_value(linear, -1.0, 0.0, b, 2000, 42)
        d = oracle.mc_value(linear, -1.0, 0.0, b, 2000, 43)
        assert a == c
        assert a != d

    def test_agrees_with_lattice_value(self, linear):
        # near-optimal rule: MC estimate within 3 standard errors of the
        # dynamic-programming value, and never materially above it
        grid = oracle.backward_induction(linear, -1.0, t_steps=4000, x_steps=4000)
        dp_val = float(np.interp(0.0, grid.x_values, grid.value[0]))
        b = self._boundary(linear)
        est, se = oracle.mc_value(linear, -1.0, 0.0, b, 20000, 1234)
        assert abs(est - dp_val) <= 3.0 * se
        assert est <= dp_val + 2.0 * se

    def test_preconditions(self, linear):
        b = self._boundary(linear)
        with pytest.raises(ValueError):
            oracle.mc_value(linear, -1.0, 0.0, b, 10, 0)
        with pytest.raises(ValueError):
            oracle.mc_value(linear, 1.0, 0.0, b, 2000, 0)
