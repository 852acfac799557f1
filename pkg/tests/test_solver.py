"""Seeding, the two-phase minimizer and the small-node asymptotic fit."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from stopbound import bounds as bounds_mod
from stopbound import fredholm, solver
from stopbound.constants import solve_B
from stopbound.fredholm import BoundaryGrid, CGrid
from stopbound.problem import builtin


@pytest.fixture(scope="module")
def linear():
    return builtin("linear")


def _wide_envelope(linear, n_nodes=20, depth=-40.0):
    nodes = BoundaryGrid.uniform(linear, n_nodes).nodes
    lower = BoundaryGrid(nodes, np.concatenate([[0.0], np.full(n_nodes - 1, depth)]))
    upper = BoundaryGrid(nodes, np.zeros(n_nodes))
    return bounds_mod.BoundaryEnvelope(
        lower, upper, 0, np.zeros(n_nodes, dtype=bool)
    )


class TestSolverConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            solver.SolverConfig(max_iterations=0)
        with pytest.raises(ValueError):
            solver.SolverConfig(value_tolerance=0.0)
        with pytest.raises(ValueError):
            solver.SolverConfig(seed_mode="mystery")
        with pytest.raises(ValueError):
            solver.SolverConfig(seed_mode="custom")


class TestSeed:
    def test_asymptotic_mode_tracks_quadratic(self, linear):
        env = _wide_envelope(linear)
        g = solver.seed(linear, env)
        B = solve_B(1.0).B
        assert g.values[0] == 0.0
        k = np.argmin(np.abs(g.nodes - 0.1))
        assert g.values[k] == pytest.approx(-B * g.nodes[k] ** 2, rel=1e-12)

    def test_midpoint_mode(self, linear):
        env = _wide_envelope(linear, depth=-2.0)
        g = solver.seed(linear, env, solver.SolverConfig(seed_mode="envelope_midpoint"))
        assert np.all(g.values[1:] == -1.0)

    def test_custom_mode_clamps(self, linear):
        env = _wide_envelope(linear, depth=-2.0)
        custom = np.linspace(1.0, -50.0, len(env.lower))
        g = solver.seed(
            linear,
            env,
            solver.SolverConfig(seed_mode="custom", custom_seed=custom),
        )
        assert np.all(g.values <= 0.0)
        assert np.all(g.values >= env.lower.values)
        assert np.all(np.diff(g.values) <= 0.0)


class TestSolveSingleFreeNode:
    def test_matches_scalar_minimizer(self, linear):
        # three nodes leave exactly one free value; the descent phase must
        # agree with a direct bounded scalar minimization of the objective
        nodes = BoundaryGrid.uniform(linear, 3).nodes
        cgrid = CGrid.for_problem(linear, 5)
        env = bounds_mod.initial_envelope(linear, nodes, cgrid)
        cfg = solver.SolverConfig(polish=False, coordinate_tolerance=1e-10)
        report = solver.solve(linear, cgrid, env, cfg)

        lo = env.lower.values[1]
        hi = min(env.upper.values[1], 0.0)

        def scalar(t):
            vals = np.array([0.0, t, env.lower.values[-1]])
            return fredholm.objective(linear, env.lower.with_values(vals), cgrid).objective

        ref = minimize_scalar(scalar, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        assert report.grid.values[1] == pytest.approx(ref.x, abs=1e-6)
        assert report.objective <= ref.fun + 1e-9


class TestFullSolve:
    def test_linear_solution_invariants(self, linear_solution):
        rep = linear_solution.report
        env = linear_solution.envelope
        assert rep.converged
        trace = rep.objective_trace
        assert all(a >= b - 1e-12 for a, b in zip(trace, trace[1:]))
        vals = rep.grid.values
        assert vals[0] == 0.0
        assert np.all(np.diff(vals) <= 1e-12)
        assert np.all(vals >= env.lower.values - 1e-9)
        assert np.all(vals <= env.upper.values + 1e-9)
        # terminal node is pinned to the certified lower bound
        assert vals[-1] == env.lower.values[-1]

    def test_objective_near_ideal(self, linear_solution):
        ideal = float(len(linear_solution.cgrid))
        assert linear_solution.report.objective == pytest.approx(ideal, rel=1e-4)

    def test_scale_invariance(self, linear):
        # scaling the payoff scales the residuals but not their zero set,
        # so the solved boundary must be (nearly) unchanged
        def reduced(p):
            nodes = BoundaryGrid.uniform(p, 30).nodes
            cgrid = CGrid.for_problem(p, 20)
            env = bounds_mod.iterate(p, nodes, cgrid, 3)
            return solver.solve(p, cgrid, env, solver.SolverConfig())

        a = reduced(linear)
        b = reduced(linear.scaled(7.0))
        assert a.converged and b.converged
        assert np.max(np.abs(a.grid.values - b.grid.values)) <= 1e-6


class TestAsymptoticCheck:
    def _report(self, linear, values, converged=True):
        g = BoundaryGrid.uniform(linear, 12)
        g = g.with_values(values(g.nodes))
        rv = fredholm.objective(linear, g, CGrid.for_problem(linear, 4))
        return solver.SolveReport(g, [rv.objective], rv, 1, converged)

    def test_exact_quadratic(self, linear):
        rep = self._report(linear, lambda y: -2.0 * y * y)
        assert solver.asymptotic_check(rep, linear, k=8) == pytest.approx(
            2.0, abs=1e-10
        )

    def test_universal_constant_quadratic(self, linear):
        B = solve_B(1.0).B
        rep = self._report(linear, lambda y: -B * y * y)
        assert solver.asymptotic_check(rep, linear, k=5) == pytest.approx(B, abs=1e-10)

    def test_requires_convergence(self, linear):
        rep = self._report(linear, lambda y: -y * y, converged=False)
        with pytest.raises(solver.NotConvergedError):
            solver.asymptotic_check(rep, linear)

    def test_requires_enough_nodes(self, linear):
        rep = self._report(linear, lambda y: -y * y)
        with pytest.raises(solver.InsufficientDataError):
            solver.asymptotic_check(rep, linear, k=2)
