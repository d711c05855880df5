"""nanosim: Monte Carlo simulation and analysis of chemotactic nano-agent
swarms locating a point target by noisily ascending a chemical gradient.

Layers (each building on the previous):

* core — geometry, parameters, seeded random streams, one-step kernels.
* gradient — the chemical concentration fields agents sense.
* movement — single-agent, single-timestep movement (biased and unbiased).
* engine — full runs: passive hitting times, swarm quota runtimes, and the
  active model where agents amplify the gradient by dropping signal payloads.
* analysis — expected per-step progress, notable distances, and analytical
  hitting-time bounds.
* cli — experiment orchestration, presets, and CSV/JSON export
  (``python -m nanosim.cli`` or the ``nanosim`` script).
"""

__version__ = "0.1.0"

from .analysis import (AssumptionCheck, BoundReport, NotableDistances,
                       QuadratureError, check_assumptions, corollary_bound,
                       default_delta, expected_progress,
                       expected_progress_at_sigma, notable_distances,
                       progress_curve, theorem_bound)
from .core import (EnvironmentParams, RngStream, Vec2, delta_phi, rotate,
                   sample_heading_angle)
from .engine import (AgentState, Event, Model, Payload, RunConfig, TrialResult,
                     run_active, run_passive_single, run_passive_swarm,
                     run_trial, write_event_log)
from .gradient import (DynamicDrops, GradientField, Linear, NullField,
                       StaticPointSource, concentration, radial_derivative,
                       register_drop, sigma_squared)
from .movement import RESAMPLE_CAP, StepOutcome, biased_step, rw_step

__all__ = [
    "__version__",
    # core
    "Vec2", "EnvironmentParams", "RngStream", "rotate",
    "sample_heading_angle", "delta_phi",
    # gradient
    "StaticPointSource", "DynamicDrops", "Linear", "NullField",
    "GradientField", "concentration", "radial_derivative", "sigma_squared",
    "register_drop",
    # movement
    "StepOutcome", "biased_step", "rw_step", "RESAMPLE_CAP",
    # engine
    "Model", "Payload", "AgentState", "RunConfig", "Event", "TrialResult",
    "run_passive_single", "run_passive_swarm", "run_active", "run_trial",
    "write_event_log",
    # analysis
    "QuadratureError", "NotableDistances", "AssumptionCheck", "BoundReport",
    "expected_progress", "expected_progress_at_sigma", "progress_curve",
    "default_delta", "notable_distances", "check_assumptions",
    "theorem_bound", "corollary_bound",
]
