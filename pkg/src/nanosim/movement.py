"""One timestep of the orientation-biased movement model.

Each step: measure the bearing to the target, draw a heading offset beta from
a zero-mean truncated normal whose variance is inversely proportional to the
local gradient steepness, rotate the bearing by beta, and move a fixed step
length alpha. Candidate positions outside the phi_max arena are rejected and
beta redrawn from the same starting position; all attempts belong to the one
timestep. The unbiased random-walk baseline is the same step with uniform
headings.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import _kernels
from .core import EnvironmentParams, RngStream, Vec2
from .gradient import GradientField, NullField

__all__ = ["StepOutcome", "biased_step", "rw_step", "RESAMPLE_CAP"]

RESAMPLE_CAP = _kernels.RESAMPLE_CAP


@dataclass(frozen=True)
class StepOutcome:
    """Result of one timestep: where the agent landed, with which heading."""

    new_position: Vec2
    beta: float
    resample_count: int


def biased_step(pos: Vec2, field: GradientField, params: EnvironmentParams,
                t: float, rng: RngStream) -> StepOutcome:
    """Advance one agent a single timestep against ``field``.

    Raises RuntimeError if boundary resampling exceeds its cap (only possible
    when alpha is comparable to phi_max).
    """
    kind, p0, p1, p2, drops = field._encode()
    nx, ny, beta, resamples = _kernels.step_agent(
        pos.x, pos.y, params.x_star.x, params.x_star.y,
        params.alpha, params.phi_max, params.b,
        kind, p0, p1, p2, drops, len(drops), float(t), rng.generator)
    return StepOutcome(Vec2(nx, ny), beta, resamples)


def rw_step(pos: Vec2, params: EnvironmentParams, rng: RngStream) -> StepOutcome:
    """One unbiased random-walk step (uniform heading), same boundary rule."""
    nx, ny, beta, resamples = _kernels.step_agent(
        pos.x, pos.y, params.x_star.x, params.x_star.y,
        params.alpha, params.phi_max, 0.0,
        _kernels.FIELD_NULL, 0.0, 0.0, 0.0, _kernels.EMPTY_DROPS, 0, 0.0,
        rng.generator)
    return StepOutcome(Vec2(nx, ny), beta, resamples)
