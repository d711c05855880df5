"""Numerical analysis of the movement model.

Four layers, each feeding the next:

* expected_progress — the exact one-step mean distance change E[delta_phi]
  under the truncated-normal heading law, by adaptive quadrature.
* notable_distances — the radii d1..d5 that partition the arena by how much
  expected progress a step makes: d1 = detection radius, d5 = arena radius,
  d4 = farthest radius with expected progress >= delta, d2 = closest radius
  from which it stays >= delta the whole way out to d4, d3 = their midpoint.
* check_assumptions — the four scale conditions the analytical hitting-time
  bound needs.
* theorem_bound / corollary_bound — the expected-hitting-time bound built
  from the notable distances, split into its three phase terms
  (d5 -> d3 -> d2 -> d1), and the swarm-level tail bound derived from it.

Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .core import EnvironmentParams, delta_phi
from .gradient import GradientField, sigma_squared

__all__ = [
    "QuadratureError",
    "NotableDistances",
    "AssumptionCheck",
    "BoundReport",
    "expected_progress",
    "expected_progress_at_sigma",
    "progress_curve",
    "default_delta",
    "notable_distances",
    "check_assumptions",
    "theorem_bound",
    "corollary_bound",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT1_2 = 1.0 / math.sqrt(2.0)
_SQRT2 = math.sqrt(2.0)

# Standard-normal quantiles beyond this carry ~1e-350 mass; integrating past
# it only gives the quadrature dead range to subdivide.
_GAUSS_RANGE = 40.0

# Adaptive-quadrature subdivision cap.
_QUAD_LIMIT = 10_000

_GRID_POINTS = 2000
_REFINE_REL_TOL = 1e-6


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge or returned a non-finite value."""


def _quad(f: Callable[[float], float], a: float, b: float, epsabs: float) -> float:
    out = integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-10,
                         limit=_QUAD_LIMIT, full_output=1)
    if len(out) > 3:
        raise QuadratureError(
            f"quadrature on [{a}, {b}] did not converge: {out[3]} "
            f"(estimate {out[0]}, abserr {out[1]})"
        )
    val, abserr = out[0], out[1]
    if not math.isfinite(val):
        raise QuadratureError(
            f"quadrature on [{a}, {b}] returned {val} (abserr {abserr})"
        )
    return val


def expected_progress_at_sigma(phi: float, alpha: float, sigma2: float) -> float:
    """E[delta_phi] for one step at distance ``phi`` with heading variance ``sigma2``.

    The heading offset beta follows N(0, sigma2) truncated to [-pi, pi);
    sigma2 = inf means uniform on [-pi, pi) and sigma2 = 0 means beta = 0
    exactly. The integral over beta is evaluated to absolute tolerance
    1e-12 * alpha; for finite sigma it is computed in units of beta/sigma so
    a sharp peak at 0 stays well-resolved.
    """
    if not phi > 0:
        raise ValueError(f"phi must be positive, got {phi}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not sigma2 >= 0:
        raise ValueError(f"sigma2 must be non-negative, got {sigma2}")
    if sigma2 == 0.0:
        return delta_phi(phi, alpha, 0.0)
    if math.isinf(sigma2):
        val = _quad(lambda beta: delta_phi(phi, alpha, beta),
                    0.0, math.pi, epsabs=1e-12 * alpha * math.pi)
        return val / math.pi

    sigma = math.sqrt(sigma2)
    trunc_mass = math.erf(math.pi / sigma * _SQRT1_2)

    def integrand(u: float) -> float:
        return delta_phi(phi, alpha, sigma * u) * _INV_SQRT_2PI * math.exp(-0.5 * u * u)

    upper = min(math.pi / sigma, _GAUSS_RANGE)
    val = _quad(integrand, 0.0, upper, epsabs=0.5e-12 * alpha * trunc_mass)
    return 2.0 * val / trunc_mass


def expected_progress(field: GradientField, phi: float, t: float,
                      params: EnvironmentParams) -> float:
    """E[delta_phi] at distance ``phi`` under ``field`` at time ``t``.

    The heading-noise variance comes from the field's radial derivative at
    (phi, t) and the bias parameter params.b; the step length is params.alpha.
    """
    sigma2 = sigma_squared(field, phi, t, params.b)
    return expected_progress_at_sigma(phi, params.alpha, sigma2)


def progress_curve(field: GradientField, params: EnvironmentParams,
                   t: float, phis: np.ndarray) -> np.ndarray:
    """expected_progress evaluated at each distance in ``phis``."""
    return np.array([expected_progress(field, float(p), t, params) for p in phis])


def _progress_grid(field, params, t, n_grid):
    grid = np.geomspace(params.epsilon, params.phi_max, n_grid)
    return grid, progress_curve(field, params, t, grid)


def default_delta(field: GradientField, params: EnvironmentParams,
                  t: float = 0.0, n_grid: int = _GRID_POINTS) -> float:
    """Half the maximum expected progress over [epsilon, phi_max].

    A serviceable per-step progress demand when no externally meaningful
    delta is at hand: strict enough to exclude the weak-gradient fringe,
    loose enough that the feasible interval is nonempty whenever the field
    produces any usable bias.
    """
    _, vals = _progress_grid(field, params, t, n_grid)
    return 0.5 * float(vals.max())


@dataclass(frozen=True)
class NotableDistances:
    """The five radii that structure the hitting-time analysis, in meters.

    d1 is the detection radius and d5 the arena radius. d4/d2 bracket the
    contiguous band of distances where a step makes expected progress at
    least ``delta``, with d3 their exact midpoint. When no distance achieves
    ``delta`` the band is empty and d2/d3/d4 are None.
    """

    d1: float
    d2: Optional[float]
    d3: Optional[float]
    d4: Optional[float]
    d5: float
    delta: float

    def __post_init__(self):
        if not self.d1 >= 0:
            raise ValueError(f"d1 must be non-negative, got {self.d1}")
        if not self.d5 > 0:
            raise ValueError(f"d5 must be positive, got {self.d5}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        inner = (self.d2, self.d3, self.d4)
        if any(v is None for v in inner) and not all(v is None for v in inner):
            raise ValueError("d2, d3, d4 must be all set or all None")

    @property
    def is_empty(self) -> bool:
        """True when no distance achieves expected progress delta."""
        return self.d2 is None

    def to_dict(self) -> dict:
        return {"d1": self.d1, "d2": self.d2, "d3": self.d3,
                "d4": self.d4, "d5": self.d5, "delta": self.delta}


def _refine_crossing(f, lo, hi, delta, lo_feasible):
    """Bisect the threshold crossing in (lo, hi), returning the feasible side.

    Exactly one endpoint satisfies f >= delta on entry (``lo_feasible`` says
    which); the result always satisfies it.
    """
    while hi - lo > _REFINE_REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if (f(mid) >= delta) == lo_feasible:
            lo = mid
        else:
            hi = mid
    return lo if lo_feasible else hi


def notable_distances(field: GradientField, params: EnvironmentParams,
                      delta: Optional[float] = None, t: float = 0.0,
                      n_grid: int = _GRID_POINTS) -> NotableDistances:
    """Construct the notable distances for ``field`` at time ``t``.

    ``delta`` defaults to half the maximum expected progress (see
    default_delta). The feasible band is located by a log-spaced grid scan
    over [epsilon, phi_max] — no shape assumption beyond continuity — then
    each edge is sharpened by bisection to relative tolerance 1e-6, keeping
    the feasible side. d4 is the outermost feasible crossing; d2 is the inner
    edge of the contiguous feasible run that contains d4.
    """
    if delta is not None and not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    grid, vals = _progress_grid(field, params, t, n_grid)
    if delta is None:
        delta = 0.5 * float(vals.max())
        if not delta > 0:
            raise ValueError(
                "cannot derive a default delta: expected progress is nowhere "
                "positive on [epsilon, phi_max]"
            )
    feasible = vals >= delta
    if not feasible.any():
        return NotableDistances(d1=params.epsilon, d2=None, d3=None, d4=None,
                                d5=params.phi_max, delta=delta)

    def f(phi):
        return expected_progress(field, phi, t, params)

    i4 = int(np.flatnonzero(feasible)[-1])
    if i4 == len(grid) - 1:
        d4 = float(grid[-1])
    else:
        d4 = _refine_crossing(f, float(grid[i4]), float(grid[i4 + 1]),
                              delta, lo_feasible=True)
    i2 = i4
    while i2 > 0 and feasible[i2 - 1]:
        i2 -= 1
    if i2 == 0:
        d2 = float(grid[0])
    else:
        d2 = _refine_crossing(f, float(grid[i2 - 1]), float(grid[i2]),
                              delta, lo_feasible=False)
    return NotableDistances(d1=params.epsilon, d2=d2, d3=0.5 * (d2 + d4),
                            d4=d4, d5=params.phi_max, delta=delta)


@dataclass(frozen=True)
class AssumptionCheck:
    """One scale condition: ``inequality`` with its evaluated sides.

    ``rhs`` may round to inf when the exact right side overflows a float;
    ``holds`` is still exact (compared in log space where needed).
    """

    inequality: str
    lhs: float
    rhs: float
    holds: bool

    def to_dict(self) -> dict:
        return {"inequality": self.inequality, "lhs": self.lhs,
                "rhs": self.rhs, "holds": self.holds}


def check_assumptions(nd: NotableDistances, alpha: float) -> list[AssumptionCheck]:
    """Evaluate the four scale conditions the hitting-time bound requires.

    The 4/delta^5 comparison is done in log space, since SI-scale deltas
    (~1e-5 m) push the right side far past float range.
    """
    if nd.is_empty:
        raise ValueError("assumptions are undefined for an empty feasible band")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    delta, d2, d3, d5 = nd.delta, nd.d2, nd.d3, nd.d5
    gap = d3 - d2

    log_rhs2 = math.log(4.0) - 5.0 * math.log(delta)
    try:
        rhs2 = math.exp(log_rhs2)
    except OverflowError:
        rhs2 = math.inf
    holds2 = gap > 0 and math.log(gap) > log_rhs2

    lhs3 = 0.5 * (d3 * d3 + d3 * d5 * _SQRT2 + d5 * d5)
    return [
        AssumptionCheck("delta <= 1/3", delta, 1.0 / 3.0, delta <= 1.0 / 3.0),
        AssumptionCheck("d3 - d2 > 4/delta^5", gap, rhs2, holds2),
        AssumptionCheck("(d3^2 + d3*d5*sqrt(2) + d5^2)/2 >= 1", lhs3, 1.0, lhs3 >= 1.0),
        AssumptionCheck("(d3 - d2)/alpha >= 1", gap / alpha, 1.0, gap / alpha >= 1.0),
    ]


@dataclass(frozen=True)
class BoundReport:
    """The analytical expected-hitting-time bound and everything behind it.

    The three phase terms cover reaching d3 from anywhere (phase_53), pushing
    from d3 to d2 against failures that reset to phase_53 (phase_32), and the
    final dash from d2 into the detection radius, whose failure-retry count is
    governed by s (phase_21). Their sum equals total_bound up to float
    rounding. The bound is only guaranteed when all assumption checks hold;
    it is reported regardless, flagged by ``assumptions_hold``.

    s and s_prime are computed in log space (ln_s, ln_s_prime are exact even
    when the plain values over/underflow); quantities that lost precision or
    range that way are named in ``log_space_flags``. When s_prime underflows
    to exact zero the retry factor is infinite and total_bound is +inf.

    round_length_L and round_length_L_prime are the diagnostic round lengths
    (in steps) behind phase_53 and s respectively.
    """

    distances: NotableDistances
    assumptions: list[AssumptionCheck]
    assumptions_hold: bool
    s: float
    ln_s: float
    s_prime: float
    ln_s_prime: float
    phase_53: float
    phase_32: float
    phase_21: float
    total_bound: float
    corollary_time: float
    corollary_prob: float
    round_length_L: float
    round_length_L_prime: float
    log_space_flags: tuple[str, ...]
    params: EnvironmentParams

    def to_json_dict(self) -> dict:
        """Full report plus input parameters, in plain JSON types."""
        return {
            "distances": self.distances.to_dict(),
            "assumptions": [a.to_dict() for a in self.assumptions],
            "assumptions_hold": self.assumptions_hold,
            "s": self.s,
            "ln_s": self.ln_s,
            "s_prime": self.s_prime,
            "ln_s_prime": self.ln_s_prime,
            "phase_53": self.phase_53,
            "phase_32": self.phase_32,
            "phase_21": self.phase_21,
            "total_bound": self.total_bound,
            "corollary_time": self.corollary_time,
            "corollary_prob": self.corollary_prob,
            "round_length_L": self.round_length_L,
            "round_length_L_prime": self.round_length_L_prime,
            "log_space_flags": list(self.log_space_flags),
            "params": self.params.to_dict(),
        }


def _total_from_parts(s: float, s_prime: float, core: float, gap: float,
                      delta: float, alpha: float) -> float:
    """Assemble the hitting-time bound from its pieces.

    With s = 0 and s_prime = inf (no failed rounds anywhere) this reduces to
    core + gap/delta, the cost of one clean descent.
    """
    return ((1.0 + (s + 1.0) / s_prime) * core
            + (s + 1.0) * gap / delta
            + s * gap / alpha)


def theorem_bound(nd: NotableDistances, params: EnvironmentParams) -> BoundReport:
    """Evaluate the expected-hitting-time bound for the given notable distances.

    total_bound = (1 + (s+1)/s') * core + (s+1)*(d3-d2)/delta + s*(d3-d2)/alpha

    with core = pi*e*(d3^2 + d3*d5*sqrt(2) + d5^2)^2 / (2*alpha^2*d3^2),
    1/s the per-round success probability of the final d2 -> d1 dash, and
    s' the success probability of a d3 -> d2 push.
    """
    if nd.is_empty:
        raise ValueError("cannot bound hitting time for an empty feasible band")
    alpha = params.alpha
    delta = nd.delta
    d1, d2, d3, d5 = nd.d1, nd.d2, nd.d3, nd.d5
    gap = d3 - d2
    if not gap > 0:
        raise ValueError(f"d3 must exceed d2, got d2 = {d2}, d3 = {d3}")

    assumptions = check_assumptions(nd, alpha)
    flags: list[str] = ["s", "s_prime", "4/delta^5"]

    quad_form = d3 * d3 + d3 * d5 * _SQRT2 + d5 * d5
    core = math.pi * math.e * quad_form * quad_form / (2.0 * alpha * alpha * d3 * d3)

    # 1/s = (2 d1^2 / (pi alpha gap)) * exp(-(d1^2 + d1 d2 sqrt(2) + d2^2) / (alpha gap))
    ln_s = (d1 * d1 + d1 * d2 * _SQRT2 + d2 * d2) / (alpha * gap) - math.log(
        2.0 * d1 * d1 / (math.pi * alpha * gap)
    )
    try:
        s = math.exp(ln_s)
    except OverflowError:
        s = math.inf
    if math.isinf(s):
        flags.append("s_overflow")

    # s' = exp(-1/delta^3) / (1 - exp(-delta^3/4))
    d3cube = delta ** 3
    ln_s_prime = -1.0 / d3cube - math.log(-math.expm1(-d3cube / 4.0))
    s_prime = math.exp(ln_s_prime)

    if s_prime == 0.0:
        flags.append("s_prime_underflow")
        phase_32 = math.inf
        phase_21 = math.inf
        total = math.inf
    else:
        phase_32 = gap / delta + core / s_prime
        phase_21 = s * (gap / alpha + phase_32)
        total = _total_from_parts(s, s_prime, core, gap, delta, alpha)
    phase_53 = core

    corollary_time, corollary_prob = corollary_bound(total, params.n)
    return BoundReport(
        distances=nd,
        assumptions=assumptions,
        assumptions_hold=all(a.holds for a in assumptions),
        s=s,
        ln_s=ln_s,
        s_prime=s_prime,
        ln_s_prime=ln_s_prime,
        phase_53=phase_53,
        phase_32=phase_32,
        phase_21=phase_21,
        total_bound=total,
        corollary_time=corollary_time,
        corollary_prob=corollary_prob,
        round_length_L=quad_form / (alpha * alpha),
        round_length_L_prime=gap / alpha,
        log_space_flags=tuple(flags),
        params=params,
    )


def corollary_bound(t_plus: float, n: int) -> tuple[float, float]:
    """Swarm completion guarantee from a single-agent expected bound.

    With n agents each bounded by t_plus in expectation, at least 75% of them
    deliver by 10*t_plus with probability at least 1 - 2^(-n/4); returns
    (10*t_plus, 1 - 2^(-n/4)).
    """
    if not t_plus >= 0:
        raise ValueError(f"t_plus must be non-negative, got {t_plus}")
    if not n >= 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return 10.0 * t_plus, 1.0 - 2.0 ** (-n / 4.0)
