"""Independent reference solutions by backward induction and Monte Carlo.

These paths share no code with the integral-identity machinery: the value
function is computed directly from its definition on a space-time lattice
(a Bermudan approximation of the continuous problem), the boundary is read
off the lattice, and Monte Carlo spot-checks the value attained by a given
stopping rule.  Everything here exists to validate the solver, so it must
stay structurally independent of it.

Conventions: time runs over ``[T_min, 0]`` and values are discounted to
the common epoch 0, i.e. stopping at time ``t`` pays ``exp(-r*t) * h(x)``
(``t <= 0``); this matches the identity machinery so boundaries compare
directly.  The lattice boundary carries a first-order bias in
``sqrt(dt)`` from the discrete exercise dates; :func:`refined_boundary`
removes the leading term by Richardson extrapolation against a finer run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels
from .fredholm import BoundaryGrid
from .problem import Problem

__all__ = [
    "DPGrid",
    "RefinedBoundary",
    "ResolutionError",
    "OutOfRangeError",
    "default_x_bounds",
    "backward_induction",
    "extract_d",
    "refined_boundary",
    "d_intervals",
    "mc_value",
]


class ResolutionError(ValueError):
    """Grid resolution too coarse for a meaningful reference solution."""


class OutOfRangeError(ValueError):
    """A query point lies outside the computed lattice."""


@dataclass
class DPGrid:
    """Solved space-time lattice with the extracted exercise boundary."""

    t_values: np.ndarray
    x_values: np.ndarray
    value: np.ndarray
    boundary: np.ndarray
    r: float

    @property
    def dt(self) -> float:
        return float(self.t_values[1] - self.t_values[0])

    @property
    def dx(self) -> float:
        return float(self.x_values[1] - self.x_values[0])


@dataclass
class RefinedBoundary:
    """Extrapolated boundary on the coarse time lattice."""

    t_values: np.ndarray
    boundary: np.ndarray
    dt: float
    dx: float

    def at(self, t: float) -> float:
        return float(np.interp(t, self.t_values, self.boundary))


def default_x_bounds(p: Problem, t_min: float) -> Tuple[float, float]:
    """Spatial truncation wide enough for the diffusion over ``[t_min, 0]``."""
    span = math.sqrt(-t_min)
    if p.b_inf_unbounded or not math.isfinite(p.b_inf):
        return (-6.0 * span, 6.0 * span)
    return (-4.0 * span, p.b_inf + 4.0 * span)


def _gauss_hermite() -> Tuple[np.ndarray, np.ndarray]:
    # Probabilists' abscissae: exact for Gaussian moments up to order 9,
    # smooth in the state variable (a binomial stencil kinks the value and
    # pollutes the extracted boundary).
    x, w = np.polynomial.hermite_e.hermegauss(5)
    return x, w / w.sum()


def _extract_boundary(disc, hx, V, xs):
    n_t, n_x = V.shape
    dx = xs[1] - xs[0]
    b = np.empty(n_t)
    for k in range(n_t):
        diff = V[k] - disc[k] * hx
        pos = diff > 0.0
        if not pos.any():
            b[k] = xs[0]
            continue
        # The continuation region is the connected component on the low side;
        # take the first positive-to-zero transition.  (Reflecting truncation
        # can fabricate a thin positive band at the far spatial edge for
        # payoffs decreasing in x, which a last-positive rule would grab.)
        trans = np.where(pos[:-1] & ~pos[1:])[0]
        if trans.size == 0:
            b[k] = xs[-1]
            continue
        i = int(trans[0])
        if i >= n_x - 1:
            b[k] = xs[-1]
            continue
        # The value-payoff gap vanishes smoothly at the boundary; locating
        # the zero of its square root is far less biased than the last
        # strictly-positive cell.
        w1 = math.sqrt(diff[i])
        w0 = math.sqrt(diff[i - 1]) if i > 0 else w1
        if w0 > w1:
            b[k] = xs[i] + w1 / ((w0 - w1) / dx)
        else:
            b[k] = xs[i] + 0.5 * dx
    for k in range(1, n_t):
        if b[k] > b[k - 1]:
            b[k] = b[k - 1]
    return b


def backward_induction(
    p: Problem,
    t_min: float,
    x_bounds: Optional[Tuple[float, float]] = None,
    t_steps: int = 2000,
    x_steps: int = 2000,
) -> DPGrid:
    """Value function of the stopping problem on a regular lattice.

    Terminal condition ``V(0, x) = h(x)``; each backward step takes the
    maximum of the discounted payoff and the Gaussian one-step expectation
    (5-point quadrature, reflecting spatial truncation).
    """
    if p.h is None:
        raise ValueError(f"problem {p.label!r} carries no payoff for the lattice path")
    if not t_min < 0.0:
        raise ValueError("t_min must be negative")
    if t_steps < 16 or x_steps < 16:
        raise ResolutionError("lattice resolutions must be at least 16")
    lo_req, hi_req = default_x_bounds(p, t_min)
    if x_bounds is None:
        x_bounds = (lo_req, hi_req)
    elif x_bounds[0] > lo_req or x_bounds[1] < hi_req:
        raise ValueError(
            f"x_bounds {x_bounds} do not cover the required range "
            f"[{lo_req:.4g}, {hi_req:.4g}]"
        )
    ts = np.linspace(t_min, 0.0, t_steps + 1)
    xs = np.linspace(x_bounds[0], x_bounds[1], x_steps)
    dt = ts[1] - ts[0]
    disc = np.exp(-p.r * ts)
    hx = np.array([p.h(x) for x in xs])
    gh_x, gh_w = _gauss_hermite()
    V = np.empty((t_steps + 1, x_steps))
    _kernels.dp_backward(disc, hx, V, dt, xs[0], xs[1] - xs[0], gh_x, gh_w)
    b = _extract_boundary(disc, hx, V, xs)
    return DPGrid(t_values=ts, x_values=xs, value=V, boundary=b, r=p.r)


def extract_d(grid: DPGrid, nodes: np.ndarray) -> Tuple[BoundaryGrid, np.ndarray]:
    """Boundary in time-over-space form ``d(y)`` at the given nodes.

    ``d(y)`` is the largest lattice time at which ``y`` is still in the
    continuation region, interpolated linearly between slices and clamped
    to ``<= 0``.  Returns the grid and a flag array marking nodes whose
    value hit the lattice horizon (within three time steps of ``T_min``),
    where ``d`` is truncated rather than resolved.
    """
    nodes = np.asarray(nodes, dtype=float)
    if np.any(nodes < grid.x_values[0]) or np.any(nodes > grid.x_values[-1]):
        raise OutOfRangeError("query node outside the lattice's spatial range")
    t_min = grid.t_values[0]
    # boundary is non-increasing in t, so reversed arrays are interp-ready
    b_rev = grid.boundary[::-1]
    t_rev = grid.t_values[::-1]
    d = np.interp(nodes, b_rev, t_rev, left=0.0, right=t_min)
    d = np.minimum(d, 0.0)
    d[nodes <= 0.0] = 0.0
    d = np.minimum.accumulate(d)
    truncated = d <= t_min + 3.0 * grid.dt
    d[truncated] = np.minimum(d[truncated], t_min)
    return BoundaryGrid(nodes=nodes, values=d), truncated


def refined_boundary(
    p: Problem,
    t_min: float,
    t_steps: int = 2000,
    x_steps: int = 2000,
    x_bounds: Optional[Tuple[float, float]] = None,
) -> RefinedBoundary:
    """Richardson-extrapolated boundary, bias removed to first order.

    The Bermudan boundary sits below the continuous one by approximately a
    constant times ``sqrt(dt)``; running the lattice again at quadruple time
    (double space) resolution and forming ``2*b_fine - b_coarse`` cancels
    that term.
    """
    coarse = backward_induction(p, t_min, x_bounds, t_steps, x_steps)
    fine = backward_induction(p, t_min, x_bounds, 4 * t_steps, 2 * x_steps)
    b_fine = np.interp(coarse.t_values, fine.t_values, fine.boundary)
    b = 2.0 * b_fine - coarse.boundary
    for k in range(1, b.shape[0]):
        if b[k] > b[k - 1]:
            b[k] = b[k - 1]
    # dt/dx record the oracle's nominal resolution (the coarse lattice); the
    # finer companion run exists only to cancel the leading bias term.
    return RefinedBoundary(
        t_values=coarse.t_values, boundary=b, dt=coarse.dt, dx=coarse.dx
    )


def d_intervals(
    ref: RefinedBoundary, nodes: np.ndarray, slack_cells: float = 1.0
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-segment admissible ``d`` ranges implied by the reference boundary.

    A piecewise-constant boundary value on segment ``[y_n, y_{n+1})``
    represents every crossing time the continuous boundary takes inside the
    segment, so the faithful comparison is against the interval
    ``[d(y_{n+1}), d(y_n)]`` widened by ``slack_cells`` spatial cells of the
    reference lattice.  Returns ``(d_lo, d_hi, truncated)`` arrays over the
    segments (one entry per node except the last).
    """
    nodes = np.asarray(nodes, dtype=float)
    t_min = ref.t_values[0]
    b_rev = ref.boundary[::-1]
    t_rev = ref.t_values[::-1]

    def d_of(y: np.ndarray) -> np.ndarray:
        v = np.interp(y, b_rev, t_rev, left=0.0, right=t_min)
        v = np.minimum(v, 0.0)
        v[y <= 0.0] = 0.0
        return v

    pad = slack_cells * ref.dx
    d_lo = d_of(nodes[1:] + pad)
    d_hi = d_of(np.maximum(nodes[:-1] - pad, 0.0))
    truncated = d_lo <= t_min + 3.0 * ref.dt
    return d_lo, d_hi, truncated


def mc_value(
    p: Problem,
    t0: float,
    x0: float,
    boundary: BoundaryGrid,
    paths: int,
    rng_seed: int,
    n_steps: int = 2000,
    continuity_correction: bool = True,
) -> Tuple[float, float]:
    """Monte Carlo value of the stopping rule defined by ``boundary``.

    Euler paths from ``(t0, x0)`` stop at the first crossing of the
    boundary (or at time 0) and collect the discounted payoff.  Checking
    crossings only at discrete dates misses excursions between them; the
    standard continuity correction shifts the barrier toward the paths by
    ``0.5826 * sqrt(dt)`` to cancel the leading bias, and is on by default.
    Bit-for-bit reproducible for a fixed seed.  Returns
    ``(estimate, standard_error)``.
    """
    if p.h is None:
        raise ValueError(f"problem {p.label!r} carries no payoff to simulate")
    if paths < 1000:
        raise ValueError("need at least 1000 paths")
    if not t0 < 0.0:
        raise ValueError("t0 must be negative")
    dt = -t0 / n_steps
    ts = t0 + dt * np.arange(n_steps + 1)
    v_rev = boundary.values[::-1]
    y_rev = boundary.nodes[::-1]
    b_path = np.interp(ts, v_rev, y_rev, left=boundary.nodes[-1], right=0.0)
    if continuity_correction:
        b_path = np.maximum(b_path - 0.5826 * math.sqrt(dt), 0.0)
    b_path = np.ascontiguousarray(b_path)
    rng = np.random.default_rng(rng_seed)
    normals = rng.standard_normal((paths, n_steps))
    stop_step, stop_x = _kernels.mc_first_crossing(float(x0), n_steps, dt, normals, b_path)
    t_stop = t0 + stop_step * dt
    payoff = np.exp(-p.r * t_stop) * np.array([p.h(x) for x in stop_x])
    est = float(payoff.mean())
    if paths > 1:
        se = float(payoff.std(ddof=1) / math.sqrt(paths))
    else:
        se = 0.0
    return est, se
