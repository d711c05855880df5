"""Signal-chemical concentration fields and their exact radial derivatives.

Four field variants cover every environment the simulator uses:

* :class:`StaticPointSource` — a point release of mass P observed at a fixed
  age ``t_star``: concentration (P / 4 pi D t*) exp(-phi^2 / 4 D t*).
* :class:`DynamicDrops` — a superposition of point releases at recorded drop
  times, each aging as 1/(t - t_drop); maintained by the active-model engine.
* :class:`Linear` — constant radial derivative (validation runs and
  abstract-unit configurations).
* :class:`NullField` — zero everywhere (pure random walk).

Concentrations are treated as kg/m^2 (2-D point-source diffusion); only the
radial derivative enters the dynamics, via the heading-noise variance
sigma^2 = 1 / (b |d(gamma)/d(phi)|).

Evaluation delegates to the compiled kernels in :mod:`nanosim._kernels`, so
the values the analysis layer sees are bit-identical to what the simulation
engine integrates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Union

import numpy as np

from . import _kernels
from .core import Vec2

__all__ = [
    "StaticPointSource",
    "DynamicDrops",
    "Linear",
    "NullField",
    "GradientField",
    "concentration",
    "radial_derivative",
    "sigma_squared",
    "register_drop",
]


@dataclass(frozen=True)
class StaticPointSource:
    """Point release of mass P (kg) aged t_star seconds, centered on x_star."""

    P: float
    D: float
    t_star: float
    x_star: Vec2 = dc_field(default_factory=lambda: Vec2(0.0, 0.0))

    def __post_init__(self):
        if not (self.P >= 0 and self.D > 0 and self.t_star > 0):
            raise ValueError("require P >= 0, D > 0, t_star > 0")

    def _encode(self):
        return _kernels.FIELD_STATIC, self.P, self.D, self.t_star, _kernels.EMPTY_DROPS


@dataclass
class DynamicDrops:
    """Superposed point releases at recorded integer drop times.

    ``drop_times`` stays sorted non-decreasing; a drop at time t_drop
    contributes only at evaluation times strictly greater (from t_drop + 1 on),
    so the within-timestep 1/(t - t_drop) singularity never arises. All terms
    are summed exactly, in drop order; at swarm scale the list never exceeds
    a few dozen entries, so no pruning is applied.
    """

    P: float
    D: float
    x_star: Vec2 = dc_field(default_factory=lambda: Vec2(0.0, 0.0))
    drop_times: list[float] = dc_field(default_factory=list)

    def __post_init__(self):
        if not (self.P >= 0 and self.D > 0):
            raise ValueError("require P >= 0, D > 0")
        times = [float(t) for t in self.drop_times]
        if any(t < 0 for t in times):
            raise ValueError("drop times must be non-negative")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("drop times must be sorted non-decreasing")
        self.drop_times = times

    def register_drop(self, t_drop: float) -> "DynamicDrops":
        """Record a payload drop at timestep ``t_drop`` (>= the last drop)."""
        t_drop = float(t_drop)
        if t_drop < 0:
            raise ValueError(f"drop time must be non-negative, got {t_drop}")
        if self.drop_times and t_drop < self.drop_times[-1]:
            raise ValueError(
                f"drop time {t_drop} precedes last recorded drop {self.drop_times[-1]}"
            )
        self.drop_times.append(t_drop)
        return self

    def _encode(self):
        drops = np.asarray(self.drop_times, dtype=np.float64)
        return _kernels.FIELD_DYNAMIC, self.P, self.D, 0.0, drops


@dataclass(frozen=True)
class Linear:
    """Field with constant radial derivative ``slope``.

    Concentration is reported as max(0, c0 + slope * phi); the derivative is
    the nominal slope everywhere, the clamp existing only so reported
    concentrations stay physical.
    """

    slope: float
    x_star: Vec2 = dc_field(default_factory=lambda: Vec2(0.0, 0.0))
    c0: float = 0.0

    def _encode(self):
        return _kernels.FIELD_LINEAR, self.slope, 0.0, self.c0, _kernels.EMPTY_DROPS


@dataclass(frozen=True)
class NullField:
    """Zero concentration and derivative everywhere."""

    def _encode(self):
        return _kernels.FIELD_NULL, 0.0, 0.0, 0.0, _kernels.EMPTY_DROPS


GradientField = Union[StaticPointSource, DynamicDrops, Linear, NullField]

_VARIANTS = (StaticPointSource, DynamicDrops, Linear, NullField)


def _center(field: GradientField) -> Vec2:
    return getattr(field, "x_star", Vec2(0.0, 0.0))


def concentration(field: GradientField, x: Vec2, t: float = 0.0) -> float:
    """Concentration of the signal chemical at position ``x``, time ``t``."""
    kind, p0, p1, p2, drops = field._encode()
    phi = (x - _center(field)).norm()
    return _kernels.concentration_value(kind, p0, p1, p2, drops, len(drops),
                                        phi, float(t))


def radial_derivative(field: GradientField, phi: float, t: float = 0.0) -> float:
    """d(concentration)/d(distance) at radius ``phi``, signed (<= 0 for sources)."""
    if phi < 0:
        raise ValueError(f"phi must be non-negative, got {phi}")
    kind, p0, p1, p2, drops = field._encode()
    return _kernels.radial_derivative(kind, p0, p1, p2, drops, len(drops),
                                      phi, float(t))


def sigma_squared(field: GradientField, phi: float, t: float, b: float) -> float:
    """Heading-noise variance 1/(b * |radial derivative|) at radius ``phi``.

    Returns inf when b = 0 or the derivative vanishes (flat field: uniform
    headings), and 0.0 when b = inf against a nonzero derivative.
    """
    if b < 0:
        raise ValueError(f"b must be non-negative, got {b}")
    kind, p0, p1, p2, drops = field._encode()
    return _kernels.sigma_squared_from(kind, p0, p1, p2, drops, len(drops),
                                       float(phi), float(t), b)


def register_drop(field: GradientField, t_drop: float) -> DynamicDrops:
    """Record a drop on a :class:`DynamicDrops` field (error on other variants)."""
    if not isinstance(field, DynamicDrops):
        raise TypeError(
            f"register_drop requires a DynamicDrops field, got {type(field).__name__}"
        )
    return field.register_drop(t_drop)
