"""Foundational geometry, seeded random sampling, and the single-step
distance-change kernel shared by the simulation and analysis layers.

All quantities are SI unless noted. Positions are 2-D points in meters;
angles are radians. One simulation timestep corresponds to one second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

TWO_PI = 2.0 * math.pi

__all__ = [
    "Vec2",
    "EnvironmentParams",
    "RngStream",
    "rotate",
    "sample_heading_angle",
    "delta_phi",
]


@dataclass(frozen=True)
class Vec2:
    """A 2-D point/vector in meters. Components must be finite."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class EnvironmentParams:
    """Physical and model constants for one simulated environment.

    Attributes:
        P: released payload mass of the signal chemical, kg.
        D: diffusion coefficient of the signal chemical, m^2/s.
        t_star: age of the static point-source gradient, s (controls its width).
        b: orientation-bias parameter; heading-noise variance is
            1 / (b * |d(concentration)/d(distance)|). b = 0 disables the bias
            (pure random walk); b = inf forces deterministic straight-line motion
            wherever the gradient is nonzero.
        alpha: step length per timestep, m.
        epsilon: detection radius around the target, m.
        phi_max: radius of the circular arena centered on the target, m.
        x_star: target location.
        x0: common starting location of all agents.
        n: number of agents.
    """

    P: float = 1e-19
    D: float = 1e-10
    t_star: float = 1e4
    b: float = 1e11
    alpha: float = 2e-5
    epsilon: float = 2e-5
    phi_max: float = 0.01
    x_star: Vec2 = field(default_factory=lambda: Vec2(0.0, 0.0))
    x0: Vec2 = field(default_factory=lambda: Vec2(0.005, 0.0))
    n: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.phi_max > self.epsilon:
            raise ValueError(
                f"phi_max ({self.phi_max}) must exceed epsilon ({self.epsilon})"
            )
        if not self.b >= 0:
            raise ValueError(f"b must be non-negative, got {self.b}")
        if not self.P >= 0:
            raise ValueError(f"P must be non-negative, got {self.P}")
        if not self.D > 0:
            raise ValueError(f"D must be positive, got {self.D}")
        if not self.t_star > 0:
            raise ValueError(f"t_star must be positive, got {self.t_star}")
        if not self.n >= 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if self.phi0 > self.phi_max:
            raise ValueError(
                f"starting distance {self.phi0} exceeds arena radius {self.phi_max}"
            )

    @property
    def phi0(self) -> float:
        """Initial distance from the starting location to the target."""
        return (self.x0 - self.x_star).norm()

    def to_dict(self) -> dict:
        """Plain-JSON-types view of the parameters (vectors as [x, y])."""
        return {
            "P": self.P,
            "D": self.D,
            "t_star": self.t_star,
            "b": self.b,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "phi_max": self.phi_max,
            "x_star": [self.x_star.x, self.x_star.y],
            "x0": [self.x0.x, self.x0.y],
            "n": self.n,
        }


@dataclass
class RngStream:
    """A deterministic, independently-seeded random stream.

    The triple (master_seed, stream_id, agent_substream) keys a unique PCG64
    generator via numpy's SeedSequence, so equal keys replay identical sample
    sequences and distinct keys give statistically independent streams. The
    engine keys one stream per agent within a run (stream_id 0, substream =
    agent id); experiment drivers give each trial its own run seed.
    """

    master_seed: int
    stream_id: int = 0
    agent_substream: int = 0
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy Generator (created lazily, then stateful)."""
        if self._gen is None:
            seq = np.random.SeedSequence(
                (self.master_seed, self.stream_id, self.agent_substream)
            )
            self._gen = np.random.Generator(np.random.PCG64(seq))
        return self._gen


def rotate(mu: Vec2, beta: float) -> Vec2:
    """Rotate the vector ``mu`` counter-clockwise by angle ``beta`` radians."""
    c = math.cos(beta)
    s = math.sin(beta)
    return Vec2(c * mu.x - s * mu.y, s * mu.x + c * mu.y)


def sample_heading_angle(sigma: float, rng: RngStream) -> float:
    """Draw a heading-noise angle beta in [-pi, pi).

    beta follows a zero-mean normal with standard deviation ``sigma`` truncated
    to [-pi, pi), sampled by inverse-CDF transform so the draw degrades smoothly
    into the uniform distribution as sigma grows. ``sigma = inf`` (flat
    gradient or b = 0) yields an exactly uniform draw on [-pi, pi). For
    sigma > 1e6 the truncated normal is replaced by the uniform distribution,
    whose CDF it matches to within ~5e-13 there (the inverse transform itself
    loses resolution long after that point).

    Raises:
        ValueError: if sigma <= 0 (use movement-level handling for the
            deterministic sigma = 0 limit).
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive or inf, got {sigma}")
    return _kernels.sample_beta(sigma * sigma, rng.generator)


def delta_phi(phi: float, alpha: float, beta: float) -> float:
    """Progress toward the target made by one step of length ``alpha``.

    From distance ``phi``, stepping with heading offset ``beta`` from the
    direct bearing, the law of cosines gives the new distance; the return
    value is old minus new, so positive means progress. Always in
    [-alpha, alpha], even in beta, and non-increasing on beta in [0, pi].
    """
    if phi < 0:
        raise ValueError(f"phi must be non-negative, got {phi}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return phi - math.sqrt(phi * phi - 2.0 * phi * alpha * math.cos(beta) + alpha * alpha)
