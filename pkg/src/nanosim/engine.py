"""Full simulation runs: passive hitting times, swarm runtimes, and the
active model with agent-released signal drops.

A run is one logical thread of execution with deterministic agent ordering,
fully determined by its :class:`RunConfig` (including the seed). In the
passive model agents never interact, so each agent's walk runs start-to-finish
on its own random substream; the active model couples agents through the
shared drop field and advances them in lockstep, ascending agent id, against
the start-of-step field (drops take effect the following timestep).

Delivery is checked once at t = 0 and after each completed step; an agent
within epsilon of the target delivers its payload and is removed. Runs that
exhaust the step cap report their quota time as None and mark the surviving
agents capped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Optional

import numpy as np

from . import _kernels
from .core import EnvironmentParams, RngStream, Vec2
from .gradient import DynamicDrops, GradientField, StaticPointSource

__all__ = [
    "Model",
    "Payload",
    "AgentState",
    "RunConfig",
    "Event",
    "TrialResult",
    "run_passive_single",
    "run_passive_swarm",
    "run_active",
    "run_trial",
    "write_event_log",
]

_EVENT_NAMES = {
    _kernels.EVENT_DROP_DRUG: "drop_drug",
    _kernels.EVENT_DROP_SIGNAL: "drop_signal",
    _kernels.EVENT_CAPPED: "capped",
}

# Refuse trajectory buffers beyond this many floats (~1.6 GB); raise the
# stride or lower the cap instead.
_MAX_TRAJ_FLOATS = 2e8


class Model(str, Enum):
    PASSIVE = "passive"
    ACTIVE = "active"


class Payload(str, Enum):
    DRUG = "drug"
    SIGNAL = "signal"


@dataclass(frozen=True)
class AgentState:
    """Final state of one agent after a run."""

    id: int
    position: Vec2
    payload: Payload
    status: str  # "delivered", "capped", or "active" (run ended first)
    delivery_time: Optional[int]


@dataclass
class RunConfig:
    """Everything that determines one simulation run, seed included.

    ``field`` overrides the environment the agents sense; when None the
    passive model uses the static point source implied by ``params`` and the
    active model starts from an empty drop field.
    """

    model: Model
    params: EnvironmentParams
    quota_fraction: float = 0.75
    step_cap: int = 10_000_000
    record_trajectories: bool = False
    trajectory_stride: int = 10
    seed: int = 0
    field: Optional[GradientField] = None

    def __post_init__(self):
        self.model = Model(self.model)
        if not 0 < self.quota_fraction <= 1:
            raise ValueError(f"quota_fraction must be in (0, 1], got {self.quota_fraction}")
        if self.step_cap < 1:
            raise ValueError(f"step_cap must be >= 1, got {self.step_cap}")
        if self.trajectory_stride < 1:
            raise ValueError(f"trajectory_stride must be >= 1, got {self.trajectory_stride}")
        center = getattr(self.field, "x_star", None)
        if center is not None and center != self.params.x_star:
            raise ValueError("field.x_star must match params.x_star")


@dataclass(frozen=True)
class Event:
    """One logged occurrence: a payload drop or a capped agent."""

    t: int
    agent: int
    event: str
    pos: tuple[float, float]


@dataclass
class TrialResult:
    """Outcome of one seeded run.

    ``delivery_times[i]`` is agent i's hitting time, or None if it capped out.
    ``runtime_to_quota`` is the first timestep at which the drug-delivery
    quota was met, or None if the run capped first. ``trajectories`` (opt-in)
    is one (rows, 3) array of (t, x, y) per agent for passive runs, or a
    single (rows, n, 2) array for active runs.
    """

    model: Model
    n: int
    delivery_times: list[Optional[int]]
    first_drop_time: Optional[int]
    runtime_to_quota: Optional[int]
    y_final: int
    z_final: int
    capped: bool
    agents: list[AgentState] = dc_field(default_factory=list)
    events: list[Event] = dc_field(default_factory=list)
    trajectories: object = None


def _default_passive_field(params: EnvironmentParams) -> GradientField:
    return StaticPointSource(params.P, params.D, params.t_star, params.x_star)


def _traj_rows(step_cap: int, stride: int) -> int:
    return step_cap // stride + 2


def _check_traj_budget(n_floats: float):
    if n_floats > _MAX_TRAJ_FLOATS:
        raise ValueError(
            "trajectory recording would need too much memory; "
            "increase trajectory_stride or lower step_cap"
        )


def _walk_one_agent(config: RunConfig, field: GradientField, agent_id: int):
    """Run one passive agent to delivery or the cap on its own substream."""
    params = config.params
    kind, p0, p1, p2, drops = field._encode()
    stride = config.trajectory_stride if config.record_trajectories else 0
    if stride > 0:
        rows = _traj_rows(config.step_cap, stride)
        _check_traj_budget(rows * 3.0 * params.n)
        traj = np.empty((rows, 3))
    else:
        traj = np.empty((1, 3))
    gen = RngStream(config.seed, 0, agent_id).generator
    delivered, t, x, y, nrec = _kernels.run_single_walk(
        params.x0.x, params.x0.y, params.x_star.x, params.x_star.y,
        params.alpha, params.epsilon, params.phi_max, params.b,
        kind, p0, p1, p2, drops, len(drops),
        config.step_cap, gen, traj, stride)
    trajectory = traj[:nrec].copy() if stride > 0 else None
    return bool(delivered), int(t), Vec2(x, y), trajectory


def run_passive_swarm(config: RunConfig) -> TrialResult:
    """Run n mutually independent passive agents and report the quota time.

    Every agent walks to delivery or the cap (no early stopping), so per-agent
    marginals are exactly those of a single-agent run and the event log is
    complete.
    """
    if config.model is not Model.PASSIVE:
        raise ValueError("run_passive_swarm requires model = passive")
    params = config.params
    field = config.field if config.field is not None else _default_passive_field(params)
    n = params.n
    quota = math.ceil(config.quota_fraction * n)

    delivery_times: list[Optional[int]] = []
    agents: list[AgentState] = []
    events: list[Event] = []
    trajectories = [] if config.record_trajectories else None
    for i in range(n):
        delivered, t, pos, traj = _walk_one_agent(config, field, i)
        if trajectories is not None:
            trajectories.append(traj)
        if delivered:
            delivery_times.append(t)
            events.append(Event(t, i, "drop_drug", (pos.x, pos.y)))
            agents.append(AgentState(i, pos, Payload.DRUG, "delivered", t))
        else:
            delivery_times.append(None)
            events.append(Event(config.step_cap, i, "capped", (pos.x, pos.y)))
            agents.append(AgentState(i, pos, Payload.DRUG, "capped", None))
    events.sort(key=lambda e: (e.t, e.agent))

    done = sorted(t for t in delivery_times if t is not None)
    runtime = done[quota - 1] if len(done) >= quota else None
    return TrialResult(
        model=Model.PASSIVE,
        n=n,
        delivery_times=delivery_times,
        first_drop_time=None,
        runtime_to_quota=runtime,
        y_final=len(done),
        z_final=0,
        capped=runtime is None,
        agents=agents,
        events=events,
        trajectories=trajectories,
    )


def run_passive_single(config: RunConfig) -> TrialResult:
    """Run a single passive agent (params.n must be 1)."""
    if config.params.n != 1:
        raise ValueError("run_passive_single requires params.n = 1")
    return run_passive_swarm(config)


def run_active(config: RunConfig) -> TrialResult:
    """Run the active model: signal agents grow the drop field drug agents follow.

    The first ceil(n/2) agent ids carry drug, the rest signal. All sense the
    superposed drop field, empty at the start (uniform walk until the first
    signal agent reaches the target and drops). The run ends when
    ceil(quota_fraction * ceil(n/2)) drug payloads are delivered, checked at
    the end of each timestep so every agent completes its step, or at the cap.
    """
    if config.model is not Model.ACTIVE:
        raise ValueError("run_active requires model = active")
    params = config.params
    n = params.n
    if n < 2:
        raise ValueError("active model requires n >= 2")
    if config.field is not None and not isinstance(config.field, DynamicDrops):
        raise ValueError("active model field override must be DynamicDrops")

    n_drug = math.ceil(n / 2)
    n_signal = n - n_drug
    quota = math.ceil(config.quota_fraction * n_drug)
    stride = config.trajectory_stride if config.record_trajectories else 0
    if stride > 0:
        rows = _traj_rows(config.step_cap, stride)
        _check_traj_budget(rows * 2.0 * n)
        traj = np.full((rows, n, 2), np.nan)
    else:
        traj = np.empty((1, 1, 2))

    preset_drops = list(config.field.drop_times) if config.field is not None else []
    drop_times = np.empty(len(preset_drops) + n_signal, dtype=np.float64)
    drop_times[:len(preset_drops)] = preset_drops

    ev_t = np.empty(n, dtype=np.int64)
    ev_agent = np.empty_like(ev_t)
    ev_code = np.empty_like(ev_t)
    ev_x = np.empty(n)
    ev_y = np.empty(n)
    deliver_t = np.full(n, -1, dtype=np.int64)
    xs = np.empty(n)
    ys = np.empty(n)

    gen = RngStream(config.seed, 0, 0).generator
    runtime, t_first, y_final, z_total, n_events, nrec = _kernels.run_active_swarm(
        n, n_drug, params.x0.x, params.x0.y, params.x_star.x, params.x_star.y,
        params.alpha, params.epsilon, params.phi_max, params.b,
        params.P, params.D, quota, config.step_cap, gen,
        ev_t, ev_agent, ev_code, ev_x, ev_y,
        deliver_t, drop_times, len(preset_drops), xs, ys, traj, stride)

    events = [
        Event(int(ev_t[k]), int(ev_agent[k]), _EVENT_NAMES[int(ev_code[k])],
              (float(ev_x[k]), float(ev_y[k])))
        for k in range(n_events)
    ]
    delivery_times: list[Optional[int]] = [
        int(t) if t >= 0 else None for t in deliver_t
    ]
    agents = []
    for i in range(n):
        payload = Payload.DRUG if i < n_drug else Payload.SIGNAL
        t = delivery_times[i]
        if t is not None:
            status = "delivered"
        elif runtime < 0:
            status = "capped"
        else:
            status = "active"  # still walking when the quota ended the run
        agents.append(AgentState(i, Vec2(float(xs[i]), float(ys[i])), payload, status, t))

    return TrialResult(
        model=Model.ACTIVE,
        n=n,
        delivery_times=delivery_times,
        first_drop_time=int(t_first) if t_first >= 0 else None,
        runtime_to_quota=int(runtime) if runtime >= 0 else None,
        y_final=int(y_final),
        z_final=int(z_total) - len(preset_drops),
        capped=runtime < 0,
        agents=agents,
        events=events,
        trajectories=traj[:nrec].copy() if stride > 0 else None,
    )


def run_trial(config: RunConfig) -> TrialResult:
    """Dispatch on the configured model."""
    if config.model is Model.ACTIVE:
        return run_active(config)
    if config.params.n == 1:
        return run_passive_single(config)
    return run_passive_swarm(config)


def write_event_log(events: list[Event], path) -> None:
    """Write events as JSON Lines: {"t", "agent", "event", "pos": [x, y]}."""
    with open(path, "w") as fh:
        for e in events:
            fh.write(json.dumps(
                {"t": e.t, "agent": e.agent, "event": e.event,
                 "pos": [e.pos[0], e.pos[1]]}) + "\n")
