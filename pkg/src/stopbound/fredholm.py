"""Integral-equation residuals and the penalized discrete objective.

The stopping boundary ``d`` of a normalized problem is characterized by a
one-parameter family of integral identities: for every admissible kernel
parameter ``c > sqrt(2r)``,

    R(c; d) = laplace_h_tilde(c)
              + sum_n exp((c**2/2 - r) * d_n) * w_n(c)  =  0,

where ``w_n(c) = integral_{y_n}^{y_{n+1}} exp(c*y) h_tilde(y) dy`` and the
boundary is piecewise constant on segments, carrying the left-node value.
The discrete problem penalizes the residuals on a finite ``c``-grid through
``F_c(x) = (c**2 x + 1/(1 + c**2 x))**2``, which is ``>= 1`` with equality
exactly at ``x = 0``, so the objective is ``>= M`` with equality exactly
when every residual vanishes.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .numerics import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    integrate_finite,
    integrate_semi_infinite,
    norm_cdf,
    norm_pdf,
)
from .problem import Problem

__all__ = [
    "BoundaryGrid",
    "CGrid",
    "ResidualVector",
    "InadmissibleCError",
    "segment_weights",
    "tabulate",
    "residual",
    "penalty",
    "objective",
    "verify_closed_form",
    "closed_form_residual",
    "clear_weight_cache",
]

# Exponents below this make exp() underflow to exactly 0 in double precision;
# used to clamp before exponentiation, never to change a finite value.
_EXP_FLOOR = -745.0


class InadmissibleCError(ValueError):
    """A kernel parameter at or below the admissibility limit sqrt(2r)."""


@dataclass
class BoundaryGrid:
    """Spatial nodes with the boundary's time values.

    ``nodes`` are strictly increasing and start at 0; ``values`` are the
    non-positive, non-increasing times ``d(y_n)``.  ``values[0] = 0`` is the
    normalization pin (the boundary passes through the origin).
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.nodes.ndim != 1 or self.nodes.shape != self.values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if self.nodes.shape[0] < 2:
            raise ValueError("a boundary grid needs at least two nodes")
        if not np.all(np.diff(self.nodes) > 0.0):
            raise ValueError("nodes must be strictly increasing")
        if self.nodes[0] != 0.0:
            raise ValueError("the first node must be the origin")
        if np.any(self.values > 0.0):
            raise ValueError("boundary values must be non-positive")
        if np.any(np.diff(self.values) > 1e-12):
            raise ValueError("boundary values must be non-increasing")

    @classmethod
    def uniform(cls, p: Problem, n_nodes: int) -> "BoundaryGrid":
        """Zero-valued grid on ``n_nodes`` equispaced nodes over [0, b_inf]."""
        if p.b_inf_unbounded or not math.isfinite(p.b_inf):
            raise ValueError(
                f"problem {p.label!r} has an unbounded terminal continuation set; "
                "a finite grid cannot cover it"
            )
        if n_nodes < 2:
            raise ValueError("need at least two nodes")
        nodes = np.linspace(0.0, p.b_inf, n_nodes)
        return cls(nodes=nodes, values=np.zeros(n_nodes))

    def with_values(self, values: Sequence[float]) -> "BoundaryGrid":
        return BoundaryGrid(nodes=self.nodes.copy(), values=np.asarray(values, float))

    def __len__(self) -> int:
        return int(self.nodes.shape[0])


@dataclass(frozen=True)
class CGrid:
    """Strictly increasing kernel parameters."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.shape[0] < 1:
            raise ValueError("need at least one kernel parameter")
        if not np.all(np.diff(self.values) > 0.0):
            raise ValueError("kernel parameters must be strictly increasing")

    @classmethod
    def for_problem(cls, p: Problem, count: int, step: float = 0.1) -> "CGrid":
        """``count`` parameters ``c_l = sqrt(2r) + l*step``, ``l = 1..count``."""
        if count < 1 or step <= 0.0:
            raise ValueError("count must be >= 1 and step positive")
        return cls(values=p.c_min + step * np.arange(1, count + 1))

    def require_admissible(self, p: Problem) -> None:
        if self.values[0] <= p.c_min:
            raise InadmissibleCError(
                f"kernel parameter {self.values[0]} is not above sqrt(2r) = {p.c_min}"
            )

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ResidualVector:
    """Per-parameter residuals, their penalties and the summed objective."""

    c_values: np.ndarray
    residuals: np.ndarray
    penalties: np.ndarray

    @property
    def objective(self) -> float:
        return float(self.penalties.sum())


_weight_cache: dict = {}
_cache_lock = threading.Lock()


def clear_weight_cache() -> None:
    with _cache_lock:
        _weight_cache.clear()


def segment_weights(
    p: Problem,
    grid: BoundaryGrid,
    c: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> np.ndarray:
    """Kernel integrals ``w_n = integral_{y_n}^{y_{n+1}} exp(c*y) h_tilde(y) dy``.

    Atoms of ``h_tilde`` located inside ``[0, b_inf]`` contribute
    ``weight * exp(c * location)`` to the segment that contains them.
    The weights are plain integrals and are defined for any ``c``;
    admissibility (``c > sqrt(2r)``) is enforced where the integral
    identity itself is evaluated.
    Results are cached per (problem, node set, parameter): the solver mutates
    only values, so the weights are computed once per grid and reused by
    every objective evaluation.
    """
    key = (id(p), grid.nodes.tobytes(), float(c))
    with _cache_lock:
        hit = _weight_cache.get(key)
    if hit is not None:
        return hit
    nodes = grid.nodes
    n_seg = nodes.shape[0] - 1
    w = np.empty(n_seg)
    for n in range(n_seg):
        w[n] = integrate_finite(
            lambda y: math.exp(c * y) * p.h_tilde(y), nodes[n], nodes[n + 1], spec
        )
    last = nodes[-1]
    for loc, weight in p.atoms:
        if nodes[0] <= loc <= last:
            n = min(int(np.searchsorted(nodes, loc, side="right")) - 1, n_seg - 1)
            w[n] += weight * math.exp(c * loc)
    w.setflags(write=False)
    with _cache_lock:
        _weight_cache[key] = w
    return w


def tabulate(
    p: Problem,
    grid: BoundaryGrid,
    cgrid: CGrid,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
):
    """Arrays (lap, W, gam, c2) consumed by the evaluation kernels.

    ``lap[l] = laplace_h_tilde(c_l)``, ``W[l, n]`` the segment weights,
    ``gam[l] = c_l**2/2 - r`` and ``c2[l] = c_l**2``.
    """
    cgrid.require_admissible(p)
    cs = cgrid.values
    lap = np.array([p.laplace_h_tilde(c) for c in cs])
    W = np.vstack([segment_weights(p, grid, c, spec) for c in cs])
    gam = cs * cs / 2.0 - p.r
    return lap, W, gam, cs * cs


def residual(
    p: Problem,
    grid: BoundaryGrid,
    c: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """The identity residual ``R(c; d)`` at a single kernel parameter."""
    if c <= p.c_min:
        raise InadmissibleCError(f"kernel parameter {c} <= sqrt(2r) = {p.c_min}")
    w = segment_weights(p, grid, c, spec)
    gam = c * c / 2.0 - p.r
    acc = p.laplace_h_tilde(c)
    for n in range(w.shape[0]):
        e = gam * grid.values[n]
        if e > _EXP_FLOOR:
            acc += math.exp(e) * w[n]
    return acc


def penalty(c: float, x: float) -> float:
    """``F_c(x) = (c**2 x + 1/(1 + c**2 x))**2``, ``+inf`` past the pole."""
    u = c * c * x
    if 1.0 + u <= 0.0:
        return math.inf
    s = u + 1.0 / (1.0 + u)
    return s * s


def objective(
    p: Problem,
    grid: BoundaryGrid,
    cgrid: CGrid,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> ResidualVector:
    """Residuals and penalties over the whole parameter grid."""
    lap, W, gam, c2 = tabulate(p, grid, cgrid, spec)
    R = _kernels.residuals(lap, W, gam, np.ascontiguousarray(grid.values[:-1]))
    pens = np.array([penalty(c, r) for c, r in zip(cgrid.values, R)])
    return ResidualVector(c_values=cgrid.values.copy(), residuals=R, penalties=pens)


def closed_form_residual(alpha: float, c: float) -> float:
    """Analytic residual of the square-root boundary of the cubic benchmark.

    Integrating ``(-x) * exp(c*x + c**2 s / 2)`` over
    ``{x < alpha*sqrt(-s), s < 0}`` in closed form gives

        (2 / c**4) * ((1 - alpha**2) - alpha**3 * Phi(alpha) / phi(alpha)),

    which vanishes exactly at the root of
    ``alpha**3 Phi(alpha) = (1 - alpha**2) phi(alpha)``.
    """
    if c <= 0.0:
        raise InadmissibleCError("kernel parameter must be positive")
    return (2.0 / c**4) * (
        (1.0 - alpha * alpha) - alpha**3 * norm_cdf(alpha) / norm_pdf(alpha)
    )


def verify_closed_form(
    label: str,
    cvalues: Sequence[float],
    alpha: float | None = None,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """Max residual of the closed-form benchmark boundary over ``cvalues``.

    Supported label: ``stadje``.  Evaluates the continuous double integral
    ``integral_{-inf}^0 integral_{-inf}^{alpha*sqrt(-s)}
    (-x) exp(c*x + c**2 s/2) dx ds`` by iterated quadrature (the inner
    integral by quadrature as well, so this is an independent check of
    :func:`closed_form_residual`, not a re-evaluation of it).
    """
    if label != "stadje":
        raise ValueError(f"closed-form verification is not available for {label!r}")
    if alpha is None:
        from .constants import stadje_alpha

        alpha = stadje_alpha()
    # The outer integrand carries the inner quadrature's noise floor, so the
    # outer pass must not chase tolerances below that floor.
    outer_spec = QuadratureSpec(
        relative_tolerance=max(spec.relative_tolerance, 1e-8),
        absolute_tolerance=max(spec.absolute_tolerance, 1e-9),
        max_subdivisions=spec.max_subdivisions,
    )
    worst = 0.0
    for c in cvalues:
        if c <= 0.0:
            raise InadmissibleCError("kernel parameter must be positive")

        def inner(s: float) -> float:
            u = alpha * math.sqrt(-s)
            return integrate_semi_infinite(
                lambda x: -x * math.exp(c * x), u, -1, max(c / 2.0, 0.25), spec
            )

        val = integrate_semi_infinite(
            lambda s: math.exp(c * c * s / 2.0) * inner(s),
            0.0,
            -1,
            c * c / 4.0,
            outer_spec,
        )
        worst = max(worst, abs(val))
    return worst
