"""Full-run engine tests.

Structural claims (delivery bookkeeping, quota order statistics, event logs,
determinism) run on a fast abstract-unit environment where hitting takes tens
of steps; the straight-line limit and time-zero detection are exact.
"""

import json
import math

import numpy as np
import pytest
import scipy.stats

from nanosim import (DynamicDrops, EnvironmentParams, Event, Linear, Model,
                     Payload, RunConfig, StaticPointSource, Vec2, run_active,
                     run_passive_single, run_passive_swarm, run_trial,
                     write_event_log)


def abstract_cfg(model="passive", n=1, seed=0, phi0=8.0, **kw) -> RunConfig:
    """sigma^2 = 1 everywhere for the passive model (Linear slope -1, b = 1)."""
    params = EnvironmentParams(P=1.0, D=1.0, t_star=1.0, b=1.0, alpha=1.0,
                               epsilon=1.0, phi_max=30.0,
                               x_star=Vec2(0.0, 0.0), x0=Vec2(phi0, 0.0), n=n)
    if model == "passive":
        kw.setdefault("field", Linear(slope=-1.0))
    return RunConfig(model=model, params=params, seed=seed, **kw)


# ---------------------------------------------------------------------------
# passive: exact limits


def test_straight_line_delivery_takes_exactly_249_steps():
    p = EnvironmentParams(b=math.inf, alpha=2e-5, epsilon=2e-5,
                          x0=Vec2(0.005, 0.0))
    res = run_passive_single(RunConfig(model="passive", params=p, seed=1))
    assert res.delivery_times == [249]
    assert res.runtime_to_quota == 249
    assert res.y_final == 1
    assert not res.capped
    assert res.events == [Event(249, 0, "drop_drug", res.events[0].pos)]
    assert math.hypot(*res.events[0].pos) <= p.epsilon


def test_start_within_detection_radius_delivers_at_time_zero():
    p = EnvironmentParams(x0=Vec2(1e-5, 0.0))  # epsilon = 2e-5
    res = run_passive_single(RunConfig(model="passive", params=p, seed=2))
    assert res.delivery_times == [0]
    assert res.runtime_to_quota == 0
    assert res.events[0].t == 0


# ---------------------------------------------------------------------------
# passive: structure and determinism


def test_single_swarm_of_one_and_dispatch_agree():
    results = [
        run_passive_single(abstract_cfg(seed=5)),
        run_passive_swarm(abstract_cfg(seed=5)),
        run_trial(abstract_cfg(seed=5)),
    ]
    base = results[0]
    for other in results[1:]:
        assert other.delivery_times == base.delivery_times
        assert other.events == base.events
        assert other.runtime_to_quota == base.runtime_to_quota


def test_identical_config_replays_bit_identical_runs():
    a = run_passive_swarm(abstract_cfg(n=5, seed=9, record_trajectories=True,
                                       trajectory_stride=1))
    b = run_passive_swarm(abstract_cfg(n=5, seed=9, record_trajectories=True,
                                       trajectory_stride=1))
    assert a.delivery_times == b.delivery_times
    assert a.events == b.events
    assert len(a.trajectories) == len(b.trajectories) == 5
    for ta, tb in zip(a.trajectories, b.trajectories):
        assert np.array_equal(ta, tb)


def test_swarm_quota_runtime_is_order_statistic():
    res = run_passive_swarm(abstract_cfg(n=7, seed=11))
    assert res.y_final == 7  # all deliver within the default cap here
    quota = math.ceil(0.75 * 7)
    assert res.runtime_to_quota == sorted(res.delivery_times)[quota - 1]
    assert not res.capped
    assert all(a.status == "delivered" for a in res.agents)
    assert [e for e in res.events] == sorted(res.events,
                                             key=lambda e: (e.t, e.agent))


def test_full_quota_fraction_waits_for_last_agent():
    res = run_passive_swarm(abstract_cfg(n=4, seed=12, quota_fraction=1.0))
    assert res.runtime_to_quota == max(res.delivery_times)


def test_absorption_detected_exactly_once_at_threshold():
    cfg = abstract_cfg(seed=13, record_trajectories=True, trajectory_stride=1)
    res = run_passive_single(cfg)
    traj = res.trajectories[0]
    t_hit = res.delivery_times[0]
    assert traj[0, 0] == 0.0
    assert np.array_equal(traj[:, 0], np.arange(t_hit + 1, dtype=float))
    dists = np.hypot(traj[:, 1], traj[:, 2])
    assert np.all(dists[:-1] > cfg.params.epsilon)
    assert dists[-1] <= cfg.params.epsilon
    steps = np.hypot(np.diff(traj[:, 1]), np.diff(traj[:, 2]))
    assert np.allclose(steps, cfg.params.alpha, rtol=1e-12)


def test_capped_run_reports_no_runtime_and_capped_events():
    # From distance 8 with unit steps, delivery within 5 steps is impossible.
    res = run_passive_swarm(abstract_cfg(n=3, seed=14, step_cap=5))
    assert res.capped
    assert res.runtime_to_quota is None
    assert res.delivery_times == [None, None, None]
    assert res.y_final == 0
    assert all(a.status == "capped" for a in res.agents)
    assert all(e.event == "capped" and e.t == 5 for e in res.events)


def test_agent_walks_do_not_depend_on_swarm_size():
    small = run_passive_swarm(abstract_cfg(n=3, seed=7))
    large = run_passive_swarm(abstract_cfg(n=5, seed=7))
    assert small.delivery_times == large.delivery_times[:3]
    single = run_passive_single(abstract_cfg(seed=7))
    assert single.delivery_times[0] == large.delivery_times[0]


def test_swarm_marginals_match_single_agent_distribution():
    pooled = []
    for s in range(40):
        pooled.extend(run_passive_swarm(abstract_cfg(n=5, seed=1000 + s))
                      .delivery_times)
    singles = [run_passive_single(abstract_cfg(seed=5000 + s)).delivery_times[0]
               for s in range(200)]
    assert None not in pooled and None not in singles
    res = scipy.stats.ks_2samp(pooled, singles)
    assert res.pvalue > 0.01


def test_passive_trajectory_stride_recording():
    res = run_passive_swarm(abstract_cfg(n=2, seed=15, record_trajectories=True,
                                         trajectory_stride=10))
    assert len(res.trajectories) == 2
    for traj, t_hit in zip(res.trajectories, res.delivery_times):
        assert traj[0, 0] == 0.0
        assert traj[-1, 0] == float(t_hit)
        interior = traj[:-1, 0]
        assert np.all(interior % 10 == 0)
        assert np.all(np.isfinite(traj))


# ---------------------------------------------------------------------------
# configuration validation


def test_run_config_validation():
    p = EnvironmentParams()
    with pytest.raises(ValueError):
        RunConfig(model="passive", params=p, quota_fraction=0.0)
    with pytest.raises(ValueError):
        RunConfig(model="passive", params=p, quota_fraction=1.5)
    with pytest.raises(ValueError):
        RunConfig(model="passive", params=p, step_cap=0)
    with pytest.raises(ValueError):
        RunConfig(model="passive", params=p, trajectory_stride=0)
    with pytest.raises(ValueError):
        RunConfig(model="no_such_model", params=p)
    with pytest.raises(ValueError):
        RunConfig(model="passive", params=p,
                  field=Linear(slope=-1.0, x_star=Vec2(1.0, 0.0)))


def test_model_dispatch_guards():
    with pytest.raises(ValueError):
        run_active(abstract_cfg(model="passive"))
    with pytest.raises(ValueError):
        run_passive_swarm(abstract_cfg(model="active", n=4, field=None))
    with pytest.raises(ValueError):
        run_passive_single(abstract_cfg(n=2))
    with pytest.raises(ValueError):
        run_active(abstract_cfg(model="active", n=1, field=None))
    cfg = RunConfig(model="active", params=abstract_cfg(n=4).params,
                    field=Linear(slope=-1.0))
    with pytest.raises(ValueError):  # active field override must be DynamicDrops
        run_active(cfg)


def test_model_string_coercion():
    cfg = abstract_cfg(seed=0)
    assert cfg.model is Model.PASSIVE
    assert RunConfig(model="active", params=EnvironmentParams(n=2)).model \
        is Model.ACTIVE


# ---------------------------------------------------------------------------
# active model


def test_active_two_agent_runs_across_seeds():
    saw_signal_first = saw_drug_first = False
    for seed in range(25):
        res = run_active(abstract_cfg(model="active", n=2, seed=seed))
        assert res.model is Model.ACTIVE
        assert res.agents[0].payload is Payload.DRUG
        assert res.agents[1].payload is Payload.SIGNAL
        statuses = [a.status for a in res.agents]
        assert statuses.count("delivered") + statuses.count("capped") \
            + statuses.count("active") == 2
        assert res.events == sorted(res.events, key=lambda e: (e.t, e.agent))
        drug_t, signal_t = res.delivery_times
        # quota is one drug delivery, so the runtime is the drug agent's time
        assert res.runtime_to_quota == drug_t
        assert res.y_final == (1 if drug_t is not None else 0)
        if res.first_drop_time is not None:
            assert res.first_drop_time == signal_t
            assert res.z_final == 1
            signal_events = [e for e in res.events if e.event == "drop_signal"]
            assert [e.t for e in signal_events] == [signal_t]
            if drug_t is not None:
                assert drug_t >= res.first_drop_time or drug_t == signal_t
                saw_signal_first = True
        else:
            assert res.z_final == 0
            # the drug agent met the quota before any signal drop
            assert drug_t is not None
            saw_drug_first = True
    assert saw_signal_first and saw_drug_first


def test_active_start_on_target_delivers_everyone_at_zero():
    res = run_active(abstract_cfg(model="active", n=4, phi0=0.5, seed=3))
    assert res.delivery_times == [0, 0, 0, 0]
    assert res.runtime_to_quota == 0
    assert res.first_drop_time == 0
    assert res.y_final == 2 and res.z_final == 2


def test_active_preset_drops_are_sensed_but_not_counted():
    preset = DynamicDrops(P=1.0, D=1.0, drop_times=[0.0])
    cfg = abstract_cfg(model="active", n=2, seed=4, field=preset)
    res = run_active(cfg)
    assert preset.drop_times == [0.0]  # engine must not mutate the override
    signal_deliveries = sum(1 for e in res.events if e.event == "drop_signal")
    assert res.z_final == signal_deliveries
    rerun = run_active(abstract_cfg(model="active", n=2, seed=4, field=preset))
    assert rerun.delivery_times == res.delivery_times
    assert rerun.events == res.events


def test_active_conservation_with_larger_swarm():
    res = run_active(abstract_cfg(model="active", n=6, seed=21))
    n_drug = 3
    assert sum(1 for a in res.agents if a.payload is Payload.DRUG) == n_drug
    delivered_drug = sum(1 for a in res.agents[:n_drug]
                         if a.status == "delivered")
    assert res.y_final == delivered_drug
    if not res.capped:
        assert res.y_final >= math.ceil(0.75 * n_drug)
        drug_times = sorted(t for t in res.delivery_times[:n_drug]
                            if t is not None)
        assert res.runtime_to_quota == drug_times[math.ceil(0.75 * n_drug) - 1]
    assert res.z_final == sum(1 for a in res.agents[n_drug:]
                              if a.status == "delivered")


def test_active_trajectory_snapshots():
    res = run_active(abstract_cfg(model="active", n=4, seed=22,
                                  record_trajectories=True,
                                  trajectory_stride=5))
    traj = res.trajectories
    assert traj.ndim == 3 and traj.shape[1:] == (4, 2)
    assert np.all(traj[0] == np.array([8.0, 0.0]))  # t = 0 snapshot
    # delivered agents turn NaN in later snapshots, never the other way
    gone = np.isnan(traj[:, :, 0])
    assert np.all(gone[:-1] <= gone[1:])


# ---------------------------------------------------------------------------
# event log export


def test_event_log_round_trips_as_json_lines(tmp_path):
    res = run_passive_swarm(abstract_cfg(n=3, seed=23))
    path = tmp_path / "events.jsonl"
    write_event_log(res.events, path)
    lines = path.read_text().splitlines()
    assert len(lines) == len(res.events)
    for line, ev in zip(lines, res.events):
        rec = json.loads(line)
        assert set(rec) == {"t", "agent", "event", "pos"}
        assert rec["t"] == ev.t
        assert rec["agent"] == ev.agent
        assert rec["event"] == ev.event
        assert rec["pos"] == [ev.pos[0], ev.pos[1]]
        assert rec["event"] in {"drop_drug", "drop_signal", "capped"}
