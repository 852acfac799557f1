"""One-dimensional discounted stopping problems in normalized coordinates.

A problem is stored in the frame where the terminal-time continuation set
is the negative half-line: the generator payoff ``h_tilde = r*h - h''/2``
is non-positive left of the origin and non-negative on ``(0, b_inf)``,
``b_inf`` being the boundary of the corresponding infinite-horizon problem.
``shift`` (together with ``flip``) records the affine change of variable
back to the original coordinates.

``h_tilde`` may carry point masses (``atoms``): payoffs that satisfy the
generator relation only weakly, such as the kinked put payoff, contribute
``weight * exp(kernel exponent at the atom location)`` to every kernel
integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

from .numerics import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    RootBracket,
    find_root,
    integrate_semi_infinite,
)

__all__ = [
    "Problem",
    "DriftedProblem",
    "UnsupportedRegimeError",
    "ProblemFileError",
    "builtin",
    "american_put",
    "remove_drift",
    "h_tilde_local",
    "load_problem_file",
    "numeric_laplace",
    "smooth_fit_b_inf",
]


class UnsupportedRegimeError(ValueError):
    """Requested problem parameters fall outside the supported regime."""


class ProblemFileError(ValueError):
    """A problem-definition file is missing or malformed."""


@dataclass(eq=False)
class Problem:
    """A normalized one-sided discounted stopping problem.

    Attributes
    ----------
    label : str
        Identifier used in reports and caches.
    r : float
        Discount rate per unit time (``r = 0`` is permitted only for
        closed-form verification problems).
    h : callable or None
        Payoff in normalized coordinates; required by the dynamic
        programming and Monte Carlo reference paths, not by the kernel
        representation itself.
    h_tilde : callable
        Generator payoff ``r*h - h''/2`` (density part).
    laplace_h_tilde : callable
        ``c -> integral_{-inf}^0 exp(c*y) dh_tilde(y)`` including atoms.
    b_inf : float
        Right endpoint of the infinite-horizon continuation set in the
        normalized frame; ``math.inf`` with ``b_inf_unbounded`` set for
        problems whose boundary is unbounded.
    beta, m_ratio : float
        Local power of ``h_tilde`` at the origin and ratio of its one-sided
        leading coefficients; select the universal boundary constant.
    shift : float
        Normalization translate; with ``flip`` it maps a normalized
        coordinate ``y`` back to the original one.
    flip : bool
        True when normalization mirrored the axis.
    atoms : tuple of (location, weight)
        Point masses of ``h_tilde``.
    h_tilde_growth : float
        Exponential growth rate of ``h_tilde(y)`` as ``y -> -inf`` (0 for
        polynomially bounded payoffs); used to pick quadrature cutoffs.
    """

    label: str
    r: float
    h_tilde: Callable[[float], float]
    laplace_h_tilde: Callable[[float], float]
    b_inf: float
    beta: float = 1.0
    m_ratio: float = 1.0
    shift: float = 0.0
    flip: bool = False
    h: Optional[Callable[[float], float]] = None
    atoms: Tuple[Tuple[float, float], ...] = ()
    h_tilde_growth: float = 0.0
    b_inf_unbounded: bool = False

    def __post_init__(self):
        if self.r < 0.0:
            raise ValueError("discount rate must be non-negative")
        if not self.b_inf_unbounded and not self.b_inf > 0.0:
            raise ValueError("b_inf must be positive")

    @property
    def c_min(self) -> float:
        """Lower admissibility limit for the kernel parameter."""
        return math.sqrt(2.0 * self.r)

    def original_coordinate(self, y: float) -> float:
        """Map a normalized coordinate back to the original frame."""
        return self.shift - y if self.flip else self.shift + y

    def scaled(self, k: float) -> "Problem":
        """Problem with ``h_tilde`` (and its transform) multiplied by ``k > 0``.

        Positive scaling of the payoff leaves the continuation set
        unchanged; this helper exists to test that invariance.
        """
        if k <= 0.0:
            raise ValueError("scale factor must be positive")
        ht, lap, atoms = self.h_tilde, self.laplace_h_tilde, self.atoms
        return replace(
            self,
            label=f"{self.label}*{k:g}",
            h_tilde=lambda y: k * ht(y),
            laplace_h_tilde=lambda c: k * lap(c),
            atoms=tuple((loc, k * w) for loc, w in atoms),
        )


@dataclass(frozen=True)
class DriftedProblem:
    """A stopping problem driven by Brownian motion with constant drift."""

    mu: float
    r: float
    h: Callable[[float], float]


def numeric_laplace(
    h_tilde: Callable[[float], float],
    atoms: Tuple[Tuple[float, float], ...] = (),
    growth: float = 0.0,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> Callable[[float], float]:
    """Build ``c -> integral_{-inf}^0 exp(c*y) dh_tilde(y)`` by quadrature."""

    def lap(c: float) -> float:
        decay = c - growth
        if decay <= 0.0:
            raise ValueError(
                f"kernel parameter {c} does not dominate the payoff growth {growth}"
            )
        val = integrate_semi_infinite(
            lambda y: math.exp(c * y) * h_tilde(y), 0.0, -1, decay, spec
        )
        for loc, w in atoms:
            if loc <= 0.0:
                val += w * math.exp(c * loc)
        return val

    return lap


def smooth_fit_b_inf(
    h: Callable[[float], float],
    r: float,
    bracket: Tuple[float, float] = (1e-6, 20.0),
    tol: float = 1e-12,
) -> float:
    """Infinite-horizon boundary from the smooth-pasting condition.

    For a one-sided perpetual problem stopped on ``[b, inf)`` the value below
    the boundary is ``h(b) * exp(sqrt(2r) (y - b))``; pasting the derivative
    gives ``h'(b) = sqrt(2r) * h(b)``.  ``h'`` is taken by central
    differences, so ``h`` must be smooth near the root.
    """
    s = math.sqrt(2.0 * r)
    eps = 1e-7

    def g(b: float) -> float:
        hp = (h(b + eps) - h(b - eps)) / (2.0 * eps)
        return hp - s * h(b)

    lo, hi = bracket
    return find_root(g, RootBracket(lo, hi, g(lo), g(hi)), tol)


def _linear() -> Problem:
    r = 1.0
    b_hard = 1.0 / math.sqrt(2.0 * r)
    b_check = smooth_fit_b_inf(lambda y: y, r, bracket=(1e-3, 5.0))
    if abs(b_hard - b_check) > 1e-6:
        raise RuntimeError(
            f"smooth-fit cross-check failed for the linear problem: "
            f"{b_hard} vs {b_check}"
        )
    return Problem(
        label="linear",
        r=r,
        h=lambda x: x,
        h_tilde=lambda y: y,
        laplace_h_tilde=lambda c: -1.0 / (c * c),
        b_inf=b_hard,
        beta=1.0,
        m_ratio=1.0,
        shift=0.0,
    )


def _stadje() -> Problem:
    # Undiscounted cubic benchmark with the closed-form boundary
    # b(t) = alpha * sqrt(-t).  In the normalized orientation (continuation
    # left of the boundary, stopping to the right) the payoff is -y^3/3 and
    # the generator payoff is +y; the boundary is unbounded as t -> -inf,
    # so this problem is used by the closed-form verification and reference
    # paths only, never by the grid solver.
    return Problem(
        label="stadje",
        r=0.0,
        h=lambda x: -(x**3) / 3.0,
        h_tilde=lambda y: y,
        laplace_h_tilde=lambda c: -1.0 / (c * c),
        b_inf=math.inf,
        b_inf_unbounded=True,
        beta=1.0,
        m_ratio=1.0,
        shift=0.0,
    )


def american_put(rho: float = 1.0, theta: float = 0.5) -> Problem:
    """Canonical American put with large dividends, normalized.

    Parameters
    ----------
    rho : float
        Interest rate over squared volatility, ``rho > 0``.
    theta : float
        Interest over dividend rate, ``theta < 1`` (the supported
        large-dividend regime).

    Notes
    -----
    The canonical payoff is ``exp(-rho*t) * (1 - exp(x + kappa*t))^+`` with
    ``kappa = rho - rho/theta - 1/2``.  Substituting ``z = x + kappa*t``
    turns it into a drifted problem with payoff ``rho*(1 - exp(z))^+``;
    removing the drift multiplies the payoff by ``exp(kappa*z)`` and raises
    the discount to ``r' = rho + kappa**2/2``.  The terminal continuation
    set is ``(log(theta), inf)`` in ``z``, so the normalized coordinate is
    ``y = log(theta) - z``.  The payoff kink at ``z = 0`` contributes a
    point mass of weight ``-rho/2`` at ``y = log(theta)``.
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    if theta >= 1.0:
        raise UnsupportedRegimeError(
            "theta >= 1 (dividend rate below the interest rate) puts the payoff "
            "kink on the terminal continuation boundary and is not supported"
        )
    kappa = rho - rho / theta - 0.5
    z0 = math.log(theta)
    r_prime = rho + kappa * kappa / 2.0
    a_density = rho * rho * math.exp(kappa * z0)
    a_payoff = rho * math.exp(kappa * z0)

    def h_tilde(y: float) -> float:
        if y <= z0:
            return 0.0
        return a_density * math.exp(-kappa * y) * (1.0 - math.exp(-y))

    def h_pay(y: float) -> float:
        v = a_payoff * math.exp(-kappa * y) * (1.0 - math.exp(z0 - y))
        return v if v > 0.0 else 0.0

    def laplace(c: float) -> float:
        i1 = (1.0 - math.exp((c - kappa) * z0)) / (c - kappa)
        i2 = (1.0 - math.exp((c - kappa - 1.0) * z0)) / (c - kappa - 1.0)
        return a_density * (i1 - i2) - 0.5 * rho * math.exp(c * z0)

    b_inf = smooth_fit_b_inf(h_pay, r_prime, bracket=(1e-6, max(20.0, -4.0 * z0)))
    s = math.sqrt(2.0 * r_prime)
    z_inf = math.log((kappa + s) / (kappa + 1.0 + s))
    if abs(b_inf - (z0 - z_inf)) > 1e-6:
        raise RuntimeError(
            f"smooth-fit cross-check failed for the put: {b_inf} vs {z0 - z_inf}"
        )
    return Problem(
        label="american_put",
        r=r_prime,
        h=h_pay,
        h_tilde=h_tilde,
        laplace_h_tilde=laplace,
        b_inf=b_inf,
        beta=1.0,
        m_ratio=1.0,
        shift=z0,
        flip=True,
        atoms=((z0, -0.5 * rho),),
        h_tilde_growth=0.0,
    )


def builtin(label: str, **params) -> Problem:
    """Construct one of the built-in problems.

    ``linear``: payoff ``x`` at unit discount; ``stadje``: the undiscounted
    cubic closed-form benchmark; ``american_put``: the canonical put,
    accepting ``rho`` and ``theta`` keyword parameters.
    """
    if label == "linear":
        return _linear()
    if label == "stadje":
        return _stadje()
    if label == "american_put":
        return american_put(**params)
    raise ValueError(f"unknown builtin problem {label!r}")


def remove_drift(p: DriftedProblem) -> Problem:
    """Equivalent driftless problem via an exponential change of measure.

    The payoff becomes ``exp(mu*y) * h(y)`` and the discount rate rises to
    ``r + mu**2/2``; values and continuation sets of the two formulations
    agree (cross-validated against backward induction, not assumed).  The
    returned problem carries a finite-difference generator payoff and is
    intended for reference-path validation; the infinite-horizon data
    (``b_inf``, local power) are not derived here.
    """
    r_prime = p.r + p.mu * p.mu / 2.0
    if not r_prime > 0.0:
        raise ValueError("transformed discount rate must be positive")
    mu, h = p.mu, p.h

    def h_prime(y: float) -> float:
        return math.exp(mu * y) * h(y)

    eps = 1e-5

    def h_tilde(y: float) -> float:
        second = (h_prime(y + eps) - 2.0 * h_prime(y) + h_prime(y - eps)) / (eps * eps)
        return r_prime * h_prime(y) - 0.5 * second

    return Problem(
        label="drift_removed",
        r=r_prime,
        h=h_prime,
        h_tilde=h_tilde,
        laplace_h_tilde=numeric_laplace(h_tilde, growth=max(0.0, -mu) + 1e-9),
        b_inf=math.inf,
        b_inf_unbounded=True,
        h_tilde_growth=max(0.0, -mu) + 1e-9,
    )


def h_tilde_local(p: Problem) -> Tuple[float, float]:
    """Declared local power and coefficient ratio of ``h_tilde`` at 0."""
    return p.beta, p.m_ratio


_EXPR_NAMES = {"exp": math.exp, "log": math.log, "pow": pow, "max": max}


def _parse_atoms(text: str) -> Tuple[Tuple[float, float], ...]:
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            loc, w = part.split(":")
            out.append((float(loc), float(w)))
        except ValueError as exc:
            raise ProblemFileError(f"bad atom entry {part!r}") from exc
    return tuple(out)


def load_problem_file(path: str) -> Problem:
    """Read a problem from a flat ``key=value`` definition file.

    Recognised keys: ``label``, ``r``, ``beta``, ``m_ratio``, ``b_inf``,
    ``shift``, ``htilde_expr`` (an arithmetic expression in ``y`` that may
    use ``exp``, ``log``, ``pow`` and ``max``), ``atoms``
    (semicolon-separated ``location:weight`` pairs) and ``growth``.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file {path!r}: {exc}") from exc
    kv = {}
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProblemFileError(f"{path}:{i}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        kv[key.strip()] = val.strip()
    missing = {"r", "b_inf", "htilde_expr"} - kv.keys()
    if missing:
        raise ProblemFileError(f"{path}: missing required keys {sorted(missing)}")
    try:
        code = compile(kv["htilde_expr"], "<htilde_expr>", "eval")
    except SyntaxError as exc:
        raise ProblemFileError(f"{path}: bad htilde_expr: {exc}") from exc

    def h_tilde(y: float) -> float:
        return float(eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "y": y}))

    atoms = _parse_atoms(kv.get("atoms", ""))
    growth = float(kv.get("growth", "0.0"))
    try:
        return Problem(
            label=kv.get("label", "custom"),
            r=float(kv["r"]),
            h_tilde=h_tilde,
            laplace_h_tilde=numeric_laplace(h_tilde, atoms, growth),
            b_inf=float(kv["b_inf"]),
            beta=float(kv.get("beta", "1.0")),
            m_ratio=float(kv.get("m_ratio", "1.0")),
            shift=float(kv.get("shift", "0.0")),
            atoms=atoms,
            h_tilde_growth=growth,
        )
    except ValueError as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
