"""Certified envelope construction and its tightening behavior."""

import numpy as np
import pytest

from stopbound.bounds import (
    BoundaryEnvelope,
    extended_cvalues,
    initial_envelope,
    iterate,
    lower_step,
    upper_step,
)
from stopbound.constants import solve_B
from stopbound.fredholm import BoundaryGrid, CGrid
from stopbound.problem import builtin


N_NODES = 24
N_C = 16


@pytest.fixture(scope="module")
def linear():
    return builtin("linear")


@pytest.fixture(scope="module")
def cgrid(linear):
    return CGrid.for_problem(linear, N_C)


@pytest.fixture(scope="module")
def nodes(linear):
    return BoundaryGrid.uniform(linear, N_NODES).nodes


@pytest.fixture(scope="module")
def env0(linear, cgrid, nodes):
    return initial_envelope(linear, nodes, cgrid)


@pytest.fixture(scope="module")
def env3(linear, cgrid, nodes):
    history = []
    env = iterate(linear, nodes, cgrid, 3, collect=history)
    return env, history


class TestInitialEnvelope:
    def test_upper_is_zero(self, env0):
        assert np.all(env0.upper.values == 0.0)
        assert env0.iteration == 0

    def test_lower_strictly_negative_interior(self, env0):
        assert env0.lower.values[0] == 0.0
        assert np.all(env0.lower.values[1:] <= -1e-6)

    def test_lower_monotone(self, env0):
        assert np.all(np.diff(env0.lower.values) <= 1e-15)

    def test_mid_node_sandwich(self, env0):
        # the true boundary behaves like -B x^2 near the origin; the first
        # certified envelope must not exclude that scale at a mid node
        B = solve_B(1.0).B
        k = N_NODES // 2
        x = env0.lower.nodes[k]
        assert env0.lower.values[k] <= -B * x * x / 4.0
        assert env0.lower.values[k] >= -4.0 * B * x * x - 1.0

    def test_truncation_flags_near_terminal_node(self, env0):
        # at the last node only arbitrarily deep levels pass the certificate
        assert env0.lower_truncated[-1]
        assert not env0.lower_truncated[1]


class TestSteps:
    def test_upper_step_interior_negative(self, linear, cgrid, env0):
        up = upper_step(linear, env0.lower, cgrid)
        assert up.values[0] == 0.0
        assert np.all(up.values[2:] < 0.0)
        assert np.all(up.values >= env0.lower.values)

    def test_lower_step_respects_cap(self, linear, cgrid, env0):
        up = upper_step(linear, env0.lower, cgrid)
        low, _ = lower_step(linear, up, cgrid)
        assert np.all(low.values <= up.values + 1e-12)

    def test_extended_cvalues(self, linear, cgrid):
        ext = extended_cvalues(linear, cgrid)
        assert ext.shape == (N_C + 8,)
        assert np.all(np.diff(ext) > 0.0)
        assert ext[-1] == pytest.approx(4.0 * cgrid.values[-1])


class TestIterate:
    def test_first_iteration_matches_manual_steps(self, linear, cgrid, nodes, env0):
        env1 = iterate(linear, nodes, cgrid, 1)
        manual = upper_step(linear, env0.lower, cgrid)
        assert np.array_equal(env1.lower.values, env0.lower.values)
        assert np.allclose(
            env1.upper.values, np.minimum(manual.values, 0.0), atol=1e-15
        )

    def test_history_structure(self, env3):
        env, history = env3
        assert len(history) == 4
        assert [e.iteration for e in history] == [0, 1, 2, 3]
        assert env is history[-1]

    def test_sandwich_preserved(self, env3):
        env, _ = env3
        assert np.all(env.lower.values <= env.upper.values + 1e-12)
        assert np.all(np.diff(env.lower.values) <= 1e-15)
        assert np.all(np.diff(env.upper.values) <= 1e-15)

    def test_widths_never_loosen(self, env3):
        _, history = env3
        for prev, nxt in zip(history, history[1:]):
            assert np.all(nxt.widths <= prev.widths + 1e-12)

    def test_invalid_iteration_count(self, linear, cgrid, nodes):
        with pytest.raises(ValueError):
            iterate(linear, nodes, cgrid, 0)


class TestEnvelopeValidation:
    def test_crossing_bounds_rejected(self, nodes):
        lower = BoundaryGrid(nodes, np.zeros(nodes.shape[0]))
        vals = np.linspace(0.0, -1.0, nodes.shape[0])
        upper = BoundaryGrid(nodes, vals)
        with pytest.raises(ValueError):
            BoundaryEnvelope(lower, upper, 0, np.zeros(nodes.shape[0], dtype=bool))

    def test_mismatched_nodes_rejected(self, linear, nodes):
        other = BoundaryGrid.uniform(linear, N_NODES + 1)
        lower = BoundaryGrid(nodes, np.zeros(nodes.shape[0]))
        with pytest.raises(ValueError):
            BoundaryEnvelope(lower, other, 0, np.zeros(nodes.shape[0], dtype=bool))
