"""Command-line interface: configuration, experiment orchestration, parallel
trial execution, and CSV/JSON export.

Subcommands:

* ``simulate`` — run seeded trials of one configuration; per-trial CSV,
  aggregate CSV, JSON manifest, and per-trial event logs (plus trajectory
  archives when recording is on).
* ``analyze`` — expected-progress curves, notable distances, or the
  analytical hitting-time bound for one configuration, as CSV/JSON.
* ``experiment`` — a named preset from the checked-in manifest reproducing
  the reference experiments, with optional sweep and per-series outputs.

Determinism: trial t runs with seed ``master_seed XOR t``, so any one trial
can be replayed via ``simulate --seed <master XOR t> --trials 1``. Sweep
points and series reuse the same trial seeds (common random numbers), pairing
trials across arms. CSV bodies are byte-identical across reruns with the same
master seed; wall-clock timestamps appear only in the manifest. The worker
count changes wall time, never results: each worker writes its trials to a
private shard file, and shards are merged in trial order.

The config file is a JSON object mirroring EnvironmentParams and RunConfig
field names (snake_case, SI units), e.g.::

    {"model": "passive", "P": 1e-19, "D": 1e-10, "t_star": 1e4, "b": 1e11,
     "alpha": 2e-5, "epsilon": 2e-5, "phi_max": 0.01, "x0": [0.005, 0.0],
     "n": 1, "step_cap": 10000000}

plus optional keys: ``phi0`` (instead of ``x0``), ``quota_fraction``,
``record_trajectories``, ``trajectory_stride``, ``seed``, ``trials``,
``field`` ({"type": "static" | "dynamic" | "linear" | "null", ...}), and for
analysis: ``delta``, ``eval_time``, ``grid_points``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import notable_distances, progress_curve, theorem_bound
from .core import EnvironmentParams, Vec2
from .engine import (Model, RunConfig, TrialResult, run_trial,
                     write_event_log)
from .gradient import (DynamicDrops, GradientField, Linear, NullField,
                       StaticPointSource)

__all__ = [
    "ExperimentSpec",
    "build_params",
    "build_field",
    "build_run_config",
    "load_presets",
    "run_experiment",
    "run_analysis",
    "main",
    "DEFAULT_MASTER_SEED",
    "SEED_ENV_VAR",
]

DEFAULT_MASTER_SEED = 1234567890
SEED_ENV_VAR = "NANOSIM_SEED"

TRIAL_HEADER = ("trial,seed,model,n,phi0,b,P,D,t_star,"
                "hitting_time_or_runtime,capped,first_drop_time")
AGGREGATE_HEADER = "sweep_param,sweep_value,mean,std,n_trials,n_capped"

_SWEEPABLE = {"phi0", "P", "D", "t_star", "b", "alpha", "epsilon", "phi_max", "n"}
# Everything sweepable must be positive except b, where 0 is the RW baseline.
_POSITIVE_SWEEP = _SWEEPABLE - {"b"}


def _fmt(v) -> str:
    """CSV cell formatting: repr for floats (shortest round-trip), '' for None."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def build_params(cfg: dict) -> EnvironmentParams:
    """Environment parameters from a config mapping (missing keys default)."""
    if "phi0" in cfg and "x0" in cfg:
        raise ValueError("config may set x0 or phi0, not both")
    d = EnvironmentParams()
    xs = cfg.get("x_star", [0.0, 0.0])
    x_star = Vec2(float(xs[0]), float(xs[1]))
    if "phi0" in cfg:
        x0 = Vec2(x_star.x + float(cfg["phi0"]), x_star.y)
    else:
        xv = cfg.get("x0", [d.x0.x, d.x0.y])
        x0 = Vec2(float(xv[0]), float(xv[1]))
    return EnvironmentParams(
        P=float(cfg.get("P", d.P)),
        D=float(cfg.get("D", d.D)),
        t_star=float(cfg.get("t_star", d.t_star)),
        b=float(cfg.get("b", d.b)),
        alpha=float(cfg.get("alpha", d.alpha)),
        epsilon=float(cfg.get("epsilon", d.epsilon)),
        phi_max=float(cfg.get("phi_max", d.phi_max)),
        x_star=x_star,
        x0=x0,
        n=int(cfg.get("n", d.n)),
    )


def build_field(cfg: dict, params: EnvironmentParams) -> Optional[GradientField]:
    """Gradient field from the config's ``field`` object; None when absent.

    None lets the engine pick its model default (static point source for
    passive, empty drop field for active).
    """
    spec = cfg.get("field")
    if spec is None:
        return None
    kind = spec.get("type")
    if kind == "static":
        return StaticPointSource(params.P, params.D, params.t_star, params.x_star)
    if kind == "dynamic":
        drops = [float(v) for v in spec.get("drop_times", [])]
        return DynamicDrops(params.P, params.D, params.x_star, drops)
    if kind == "linear":
        return Linear(slope=float(spec["slope"]), x_star=params.x_star,
                      c0=float(spec.get("c0", 0.0)))
    if kind == "null":
        return NullField()
    raise ValueError(f"unknown field type {kind!r}")


def build_run_config(cfg: dict, seed: int) -> RunConfig:
    """One trial's RunConfig from a config mapping and its derived seed."""
    if "model" not in cfg:
        raise ValueError("config must set model: passive or active")
    params = build_params(cfg)
    return RunConfig(
        model=Model(cfg["model"]),
        params=params,
        quota_fraction=float(cfg.get("quota_fraction", 0.75)),
        step_cap=int(cfg.get("step_cap", 10_000_000)),
        record_trajectories=bool(cfg.get("record_trajectories", False)),
        trajectory_stride=int(cfg.get("trajectory_stride", 10)),
        seed=seed,
        field=build_field(cfg, params),
    )


def apply_param(cfg: dict, name: str, value) -> dict:
    """A copy of ``cfg`` with one parameter replaced (sweep/series override)."""
    out = dict(cfg)
    if name == "phi0":
        out.pop("x0", None)
        out["phi0"] = float(value)
    elif name == "n":
        out["n"] = int(value)
    elif name in {"P", "D", "t_star", "b", "alpha", "epsilon", "phi_max",
                  "quota_fraction", "delta", "eval_time"}:
        out[name] = float(value)
    elif name in {"step_cap", "trajectory_stride", "grid_points"}:
        out[name] = int(value)
    elif name in {"model", "field", "record_trajectories", "x0", "x_star"}:
        out[name] = value
        if name == "x0":
            out.pop("phi0", None)
    else:
        raise ValueError(f"unknown parameter {name!r}")
    return out


@dataclass
class ExperimentSpec:
    """A fully resolved experiment: base config, sweep, series, and execution.

    ``series`` is a tuple of (name, overrides) pairs; each series gets its own
    output subdirectory (none when the name is empty). The sweep is applied
    within each series, trials within each sweep point.
    """

    preset: str
    config: dict
    out_dir: Path
    trials: int = 100
    sweep_param: Optional[str] = None
    sweep_values: tuple = ()
    series: tuple = (("", {}),)
    master_seed: int = DEFAULT_MASTER_SEED
    workers: int = 1
    write_artifacts: bool = False

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.sweep_param is not None:
            if self.sweep_param not in _SWEEPABLE:
                raise ValueError(
                    f"invalid sweep parameter {self.sweep_param!r}; "
                    f"one of {sorted(_SWEEPABLE)}"
                )
            if not self.sweep_values:
                raise ValueError("sweep_param given without sweep_values")
            for v in self.sweep_values:
                if not math.isfinite(v):
                    raise ValueError(f"sweep values must be finite, got {v}")
                if self.sweep_param in _POSITIVE_SWEEP and not v > 0:
                    raise ValueError(
                        f"sweep values for {self.sweep_param} must be positive, got {v}"
                    )
                if self.sweep_param == "b" and v < 0:
                    raise ValueError(f"b must be non-negative, got {v}")


def _trial_line(trial: int, rc: RunConfig, res: TrialResult) -> str:
    p = rc.params
    if res.model is Model.PASSIVE and p.n == 1:
        tval = res.delivery_times[0]
    else:
        tval = res.runtime_to_quota
    capped = tval is None
    if capped:
        tval = rc.step_cap
    cells = (trial, rc.seed, res.model.value, p.n, p.phi0, p.b, p.P, p.D,
             p.t_star, tval, capped, res.first_drop_time)
    return ",".join(_fmt(c) for c in cells)


def _write_trial_artifacts(artifacts_dir: Path, trial: int, res: TrialResult):
    ev_dir = artifacts_dir / "events"
    ev_dir.mkdir(parents=True, exist_ok=True)
    write_event_log(res.events, ev_dir / f"trial_{trial:05d}.jsonl")
    if res.trajectories is None:
        return
    tr_dir = artifacts_dir / "trajectories"
    tr_dir.mkdir(parents=True, exist_ok=True)
    path = tr_dir / f"trial_{trial:05d}.npz"
    if res.model is Model.ACTIVE:
        np.savez_compressed(path, swarm=res.trajectories)
    else:
        np.savez_compressed(
            path, **{f"agent_{i:03d}": a for i, a in enumerate(res.trajectories)})


def _run_trial_batch(cfg: dict, trial_indices: list[int], master_seed: int,
                     shard_path: str, progress_label: Optional[str],
                     artifacts_dir: Optional[Path]) -> str:
    """Run a batch of trials sequentially, appending rows to one shard file."""
    total = len(trial_indices)
    with open(shard_path, "w", newline="") as fh:
        for k, t in enumerate(trial_indices):
            rc = build_run_config(cfg, master_seed ^ t)
            res = run_trial(rc)
            fh.write(_trial_line(t, rc, res) + "\n")
            if artifacts_dir is not None:
                _write_trial_artifacts(artifacts_dir, t, res)
            if progress_label is not None:
                print(f"\r{progress_label}: trial {k + 1}/{total}",
                      end="", file=sys.stderr, flush=True)
    if progress_label is not None:
        print(file=sys.stderr)
    return shard_path


def _run_unit(cfg: dict, trials: int, master_seed: int, workers: int,
              shard_dir: Path, label: str,
              artifacts_dir: Optional[Path]) -> list[str]:
    """All trials of one (series, sweep-point) unit, merged in trial order."""
    indices = list(range(trials))
    shard_dir.mkdir(parents=True, exist_ok=True)
    if workers == 1:
        paths = [_run_trial_batch(cfg, indices, master_seed,
                                  str(shard_dir / "shard_00.csv"), label,
                                  artifacts_dir)]
    else:
        chunks = [indices[w::workers] for w in range(workers)]
        chunks = [c for c in chunks if c]
        paths = [str(shard_dir / f"shard_{w:02d}.csv") for w in range(len(chunks))]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [
                pool.submit(_run_trial_batch, cfg, chunk, master_seed,
                            path, None, artifacts_dir)
                for chunk, path in zip(chunks, paths)
            ]
            done = 0
            for fut in as_completed(futures):
                fut.result()
                done += len(chunks[futures.index(fut)])
                print(f"{label}: trial {done}/{trials}", file=sys.stderr)
    lines: list[str] = []
    for p in paths:
        lines.extend(Path(p).read_text().splitlines())
        Path(p).unlink()
    lines.sort(key=lambda s: int(s.split(",", 1)[0]))
    return lines


def _aggregate_line(sweep_param: Optional[str], sweep_value, lines: list[str]) -> str:
    vals = np.array([float(line.split(",")[9]) for line in lines])
    n_capped = sum(int(line.split(",")[10]) for line in lines)
    return ",".join([
        sweep_param or "",
        _fmt(sweep_value),
        repr(float(vals.mean())),
        repr(float(vals.std())),
        str(len(lines)),
        str(n_capped),
    ])


def _write_manifest(out_dir: Path, payload: dict):
    payload = dict(payload)
    payload["package_version"] = __version__
    payload["created_utc"] = datetime.now(timezone.utc).isoformat()
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def run_experiment(spec: ExperimentSpec) -> dict:
    """Execute the experiment, returning {series name: trials.csv path}.

    Layout: <out_dir>/[<series>/]trials.csv + aggregate.csv, and a single
    manifest.json at <out_dir> echoing the full configuration and master seed.
    """
    # Fail on config errors before any trial runs.
    probe = dict(spec.config)
    for sname, overrides in spec.series:
        scfg = probe
        for k, v in overrides.items():
            scfg = apply_param(scfg, k, v)
        build_run_config(scfg, 0)

    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, {
        "command": "experiment" if spec.preset != "custom" else "simulate",
        "preset": spec.preset,
        "config": spec.config,
        "trials": spec.trials,
        "sweep": ({"param": spec.sweep_param, "values": list(spec.sweep_values)}
                  if spec.sweep_param else None),
        "series": [{"name": n, "overrides": o} for n, o in spec.series],
        "master_seed": spec.master_seed,
        "workers": spec.workers,
    })
    shard_dir = out / "_shards"
    results: dict = {}
    try:
        for sname, overrides in spec.series:
            scfg = dict(spec.config)
            for k, v in overrides.items():
                scfg = apply_param(scfg, k, v)
            sdir = out / sname if sname else out
            sdir.mkdir(parents=True, exist_ok=True)
            artifacts = sdir if spec.write_artifacts else None
            if spec.sweep_param is not None:
                units = [(v, apply_param(scfg, spec.sweep_param, v))
                         for v in spec.sweep_values]
            else:
                units = [(None, scfg)]
            all_lines: list[str] = []
            agg_lines: list[str] = []
            for v, ucfg in units:
                label = spec.preset + (f"/{sname}" if sname else "")
                if v is not None:
                    label += f" {spec.sweep_param}={v}"
                lines = _run_unit(ucfg, spec.trials, spec.master_seed,
                                  spec.workers, shard_dir, label, artifacts)
                all_lines.extend(lines)
                agg_lines.append(_aggregate_line(spec.sweep_param, v, lines))
            with open(sdir / "trials.csv", "w", newline="") as fh:
                fh.write(TRIAL_HEADER + "\n")
                fh.write("\n".join(all_lines) + "\n")
            with open(sdir / "aggregate.csv", "w", newline="") as fh:
                fh.write(AGGREGATE_HEADER + "\n")
                fh.write("\n".join(agg_lines) + "\n")
            results[sname or "."] = sdir / "trials.csv"
    finally:
        shutil.rmtree(shard_dir, ignore_errors=True)
    return results


def run_analysis(mode: str, cfg: dict, out_dir: Path,
                 sweep: Optional[dict] = None) -> dict:
    """Write analysis outputs for one configuration; returns {label: path}.

    ``progress`` writes phi vs expected-progress CSV curves (one per sweep
    value when a sweep is given); ``distances`` writes the notable-distance
    construction as JSON; ``bound`` writes the full BoundReport as JSON.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results: dict = {}

    def field_for(c: dict) -> tuple[EnvironmentParams, GradientField]:
        params = build_params(c)
        field = build_field(c, params)
        if field is None:
            field = StaticPointSource(params.P, params.D, params.t_star,
                                      params.x_star)
        return params, field

    if mode == "progress":
        if sweep is not None:
            variants = [(f"progress_{sweep['param']}_{_fmt(v)}.csv",
                         apply_param(cfg, sweep["param"], v))
                        for v in sweep["values"]]
        else:
            variants = [("progress.csv", cfg)]
        for fname, c in variants:
            params, field = field_for(c)
            t = float(c.get("eval_time", 0.0))
            grid = np.geomspace(params.epsilon, params.phi_max,
                                int(c.get("grid_points", 400)))
            vals = progress_curve(field, params, t, grid)
            with open(out_dir / fname, "w", newline="") as fh:
                fh.write("phi,expected_progress\n")
                for phi, ev in zip(grid, vals):
                    fh.write(f"{float(phi)!r},{float(ev)!r}\n")
            results[fname] = out_dir / fname
    elif mode in ("distances", "bound"):
        params, field = field_for(cfg)
        t = float(cfg.get("eval_time", 0.0))
        delta = float(cfg["delta"]) if "delta" in cfg else None
        nd = notable_distances(field, params, delta, t)
        if mode == "distances":
            payload = {"distances": nd.to_dict(), "eval_time": t,
                       "delta_source": "config" if delta is not None else "default",
                       "params": params.to_dict()}
            fname = "distances.json"
        else:
            if nd.is_empty:
                raise ValueError(
                    f"no distance achieves expected progress {nd.delta!r}; "
                    "the feasible band is empty, so the bound is undefined "
                    "(lower delta or strengthen the gradient)"
                )
            payload = theorem_bound(nd, params).to_json_dict()
            payload["eval_time"] = t
            fname = "bound.json"
        with open(out_dir / fname, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        results[fname] = out_dir / fname
    else:
        raise ValueError(f"unknown analysis mode {mode!r}")

    _write_manifest(out_dir, {
        "command": "analyze",
        "mode": mode,
        "config": cfg,
        "sweep": sweep,
    })
    return results


def load_presets() -> dict:
    """The checked-in preset manifest."""
    text = resources.files("nanosim").joinpath("presets.json").read_text()
    return json.loads(text)


def _resolve_master_seed(flag: Optional[int], cfg: dict) -> int:
    if flag is not None:
        return flag
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return DEFAULT_MASTER_SEED


def _load_config(path: Path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"config {path} must be a JSON object")
    return cfg


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nanosim",
        description="Monte Carlo simulation and analysis of chemotactic "
                    "nano-agent swarms seeking a point target.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run seeded trials of one configuration")
    sim.add_argument("--model", choices=["passive", "active"],
                     help="override the config's model")
    sim.add_argument("--config", required=True, type=Path)
    sim.add_argument("--trials", type=int, help="default: config 'trials' or 100")
    sim.add_argument("--seed", type=int,
                     help=f"master seed (default: config, ${SEED_ENV_VAR}, "
                          f"or {DEFAULT_MASTER_SEED})")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", type=Path, default=Path("nanosim_out/simulate"))

    ana = sub.add_parser("analyze", help="numerical analysis of one configuration")
    ana.add_argument("mode", choices=["progress", "distances", "bound"])
    ana.add_argument("--config", required=True, type=Path)
    ana.add_argument("--out", type=Path, default=Path("nanosim_out/analyze"))

    exp = sub.add_parser("experiment", help="run a named preset")
    exp.add_argument("--preset", required=True)
    exp.add_argument("--trials", type=int, help="override the preset trial count")
    exp.add_argument("--seed", type=int)
    exp.add_argument("--workers", type=int, default=1)
    exp.add_argument("--out", type=Path, default=Path("nanosim_out"),
                     help="root output directory (preset name is appended)")

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _load_config(args.config)
            if args.model is not None:
                cfg = apply_param(cfg, "model", args.model)
            trials = args.trials if args.trials is not None else int(cfg.get("trials", 100))
            spec = ExperimentSpec(
                preset="custom", config=cfg, out_dir=args.out, trials=trials,
                master_seed=_resolve_master_seed(args.seed, cfg),
                workers=args.workers, write_artifacts=True)
            run_experiment(spec)
        elif args.command == "analyze":
            cfg = _load_config(args.config)
            run_analysis(args.mode, cfg, args.out)
        else:
            presets = load_presets()
            if args.preset not in presets:
                raise ValueError(
                    f"unknown preset {args.preset!r}; available: "
                    f"{', '.join(sorted(presets))}")
            p = presets[args.preset]
            out_dir = args.out / args.preset
            if p["kind"] == "analyze":
                run_analysis(p["analysis"], p["config"], out_dir,
                             sweep=p.get("sweep"))
            else:
                sweep = p.get("sweep")
                series = tuple((s["name"], s["overrides"])
                               for s in p.get("series", [])) or (("", {}),)
                spec = ExperimentSpec(
                    preset=args.preset,
                    config=p["config"],
                    out_dir=out_dir,
                    trials=args.trials if args.trials is not None else int(p.get("trials", 100)),
                    sweep_param=sweep["param"] if sweep else None,
                    sweep_values=tuple(sweep["values"]) if sweep else (),
                    series=series,
                    master_seed=_resolve_master_seed(args.seed, p["config"]),
                    workers=args.workers,
                    write_artifacts=bool(p["config"].get("record_trajectories", False)),
                )
                run_experiment(spec)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"nanosim: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
