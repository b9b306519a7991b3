"""Batch pipeline: simulate measurements, reconstruct sources, evaluate errors.

Commands::

    movingsource simulate    --config cfg.json --out data_dir
    movingsource reconstruct --config cfg.json --data data_dir --out run_dir [--resume]
    movingsource evaluate    --summaries run_dir --scenario <name|file> --out metrics.json

Configs are JSON documents with a versioned ``format`` header; artifacts are
CSV matrices with one-line headers plus JSON manifests, so external tools
(including the figures front end) can read them without bindings.  A single
master seed determines every artifact byte except manifest timestamps.
Set MOVINGSOURCE_LOG_LEVEL (e.g. INFO, DEBUG) to control verbosity.

Exit codes: 0 success, 1 validation failure, 2 runtime/numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from .exceptions import MovingSourceError, ValidationError
from .estimator import PCNReconstructor
from .inference import posterior_mean
from .sampled import SampledFunction
from .scenarios import (
    CASE_NAMES,
    Scenario,
    build_case,
    intensity_error,
    resolve_case,
    sphere_sensors,
    synthesize_measurements,
    trajectory_error,
    wavefield_error,
)
from .wavefield import MeasurementSet, PhysicalConfig, PointSource, SensorArray, SourceModel

log = logging.getLogger("movingsource")

CONFIG_FORMAT = "movingsource-config/1"
MEASUREMENT_FORMAT = "movingsource-measurements/1"
SUMMARY_FORMAT = "movingsource-summaries/1"
METRICS_FORMAT = "movingsource-metrics/1"

FLOAT_FMT = "%.17g"

# Scenario fields the config may override, both per-case and inline.
_TOP_LEVEL_OVERRIDES = {"noise": "noise_level", "delta": "step", "beta": "precision", "closed_curve": "closed_curve"}

_GEOMETRY_KEYS = ("case", "n_sensors", "n_times", "n_sources", "wave_speed", "final_time", "turnoff_time")


@dataclass
class RunConfig:
    raw: dict
    case: object | None
    overrides: dict
    inline_scenario: dict | None
    seed: int
    chains: int
    samples: int
    burn_in: float
    thin: int
    grid_size: int
    n_jobs: int
    checkpoint_every: int
    export_samples: int

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    _require(isinstance(raw, dict), "config must be a JSON object")
    _require(raw.get("format") == CONFIG_FORMAT, f"config format must be {CONFIG_FORMAT!r}")

    case = raw.get("case")
    inline = raw.get("scenario")
    _require(case is not None or inline is not None, "config needs 'case' or an inline 'scenario'")
    _require(not (case is not None and inline is not None), "'case' and 'scenario' are exclusive")
    if case is not None:
        resolve_case(case)  # fail early on unknown names

    overrides = dict(raw.get("overrides") or {})
    _require(isinstance(overrides, dict), "'overrides' must be an object")
    for key, target in _TOP_LEVEL_OVERRIDES.items():
        if raw.get(key) is not None:
            overrides[target] = raw[key]

    def _int(name, default, minimum):
        value = raw.get(name, default)
        _require(isinstance(value, int) and value >= minimum, f"'{name}' must be an int >= {minimum}")
        return value

    burn_in = float(raw.get("burn_in", 0.5))
    _require(0.0 <= burn_in < 1.0, "'burn_in' must be a fraction in [0, 1)")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int), "'seed' must be an integer")

    return RunConfig(
        raw=raw,
        case=case,
        overrides=overrides,
        inline_scenario=inline,
        seed=seed,
        chains=_int("chains", 2, 1),
        samples=_int("samples", 20000, 1),
        burn_in=burn_in,
        thin=_int("thin", 10, 1),
        grid_size=_int("grid_size", 100, 2),
        n_jobs=raw.get("n_jobs", 1),
        checkpoint_every=_int("checkpoint_every", 0, 0),
        export_samples=_int("export_samples", 100, 0),
    )


def _inline_scenario(spec: dict) -> Scenario:
    known = {
        "wave_speed": 1.0,
        "final_time": 20.0,
        "turnoff_time": 15.0,
        "n_sensors": 424,
        "sensor_region": "hemisphere",
        "sensor_radius": 3.0,
        "n_times": 50,
        "n_sources": 1,
        "trajectory_magnitude": 1.0,
        "trajectory_length_scale": 15.0,
        "intensity_magnitude": 1.0,
        "intensity_length_scale": 15.0,
        "precision": 100.0,
        "step": 0.0025,
        "noise_level": 0.0,
        "closed_curve": False,
        "name": "inline",
    }
    unknown = set(spec) - set(known)
    _require(not unknown, f"unknown inline scenario fields: {sorted(unknown)}")
    known.update(spec)
    cfg = PhysicalConfig(known["wave_speed"], known["final_time"], known["turnoff_time"])
    sensors = sphere_sensors(int(known["n_sensors"]), known["sensor_radius"], known["sensor_region"])
    times = np.linspace(0.0, cfg.final_time, int(known["n_times"]))
    return Scenario(
        name=str(known["name"]),
        cfg=cfg,
        truth=None,
        sensors=sensors,
        measurement_times=times,
        n_sources=int(known["n_sources"]),
        trajectory_magnitude=known["trajectory_magnitude"],
        trajectory_length_scale=known["trajectory_length_scale"],
        intensity_magnitude=known["intensity_magnitude"],
        intensity_length_scale=known["intensity_length_scale"],
        precision=known["precision"],
        step=known["step"],
        noise_level=known["noise_level"],
        closed_curve=bool(known["closed_curve"]),
    )


def build_scenario(config: RunConfig) -> Scenario:
    if config.case is not None:
        return build_case(config.case, **config.overrides)
    spec = dict(config.inline_scenario)
    spec.update(config.overrides)
    return _inline_scenario(spec)


# --------------------------------------------------------------------------
# artifact IO
# --------------------------------------------------------------------------

def _write_csv(path, header: str, matrix) -> None:
    np.savetxt(path, np.atleast_2d(matrix), delimiter=",", header=header, comments="", fmt=FLOAT_FMT)


def _read_csv(path) -> tuple[list[str], np.ndarray]:
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ValidationError(f"cannot read artifact {path}: {exc}") from exc
    return header, data


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc


def _model_to_csv(path, model: SourceModel) -> None:
    grid = model.sources[0].emission_grid
    columns = [grid]
    names = ["tau"]
    for i, src in enumerate(model.sources):
        columns += [src.traj_x.values, src.traj_y.values, src.intensity.values]
        names += [f"src{i}_x", f"src{i}_y", f"src{i}_q"]
    _write_csv(path, ",".join(names), np.column_stack(columns))


def _model_from_csv(path) -> SourceModel:
    header, data = _read_csv(path)
    _require(header and header[0] == "tau", f"{path} is not a source-model artifact")
    n_sources, rem = divmod(len(header) - 1, 3)
    _require(rem == 0 and n_sources >= 1, f"{path} has a malformed column set")
    grid = data[:, 0]
    sources = []
    for i in range(n_sources):
        base = 1 + 3 * i
        sources.append(
            PointSource(
                SampledFunction(grid, data[:, base], "clamp"),
                SampledFunction(grid, data[:, base + 1], "clamp"),
                SampledFunction(grid, data[:, base + 2], "zero"),
            )
        )
    return SourceModel(tuple(sources))


def _field_header(times) -> str:
    return ",".join(FLOAT_FMT % t for t in times)


def _canonical_case(case) -> str | None:
    return None if case is None else CASE_NAMES[resolve_case(case)]


def _scenario_spec(config: RunConfig) -> dict:
    return {
        "case": _canonical_case(config.case),
        "overrides": config.overrides,
        "inline": config.inline_scenario,
    }


def _scenario_from_spec(spec: dict) -> Scenario:
    if spec.get("case") is not None:
        return build_case(spec["case"], **(spec.get("overrides") or {}))
    inline = dict(spec.get("inline") or {})
    inline.update(spec.get("overrides") or {})
    return _inline_scenario(inline)


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_simulate(config: RunConfig, out_dir: str) -> dict:
    """Generate measurement artifacts for a scenario's truth."""
    scenario = build_scenario(config)
    clean, noisy = synthesize_measurements(scenario, seed=config.seed)
    os.makedirs(out_dir, exist_ok=True)

    _write_csv(os.path.join(out_dir, "sensors.csv"), "x,y,z", scenario.sensors.positions)
    _write_csv(os.path.join(out_dir, "times.csv"), "t", scenario.measurement_times[:, None])
    header = _field_header(scenario.measurement_times)
    _write_csv(os.path.join(out_dir, "field_clean.csv"), header, clean.field)
    if noisy is not None:
        _write_csv(os.path.join(out_dir, "field_noisy.csv"), header, noisy.field)
    _model_to_csv(os.path.join(out_dir, "truth.csv"), scenario.truth)
    _write_json(os.path.join(out_dir, "scenario.json"), _scenario_spec(config))

    manifest = {
        "format": MEASUREMENT_FORMAT,
        "config_hash": config.config_hash,
        "case": _canonical_case(config.case),
        "seed": config.seed,
        "noise_level": scenario.noise_level,
        "n_sensors": scenario.sensors.n_sensors,
        "n_times": int(scenario.measurement_times.size),
        "n_sources": scenario.n_sources,
        "wave_speed": scenario.cfg.wave_speed,
        "final_time": scenario.cfg.final_time,
        "turnoff_time": scenario.cfg.turnoff_time,
        "created": _timestamp(),
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    log.info("wrote measurement artifacts to %s", out_dir)
    return manifest


def _check_geometry(manifest: dict, scenario: Scenario, case) -> None:
    actual = {
        "case": case,
        "n_sensors": scenario.sensors.n_sensors,
        "n_times": int(scenario.measurement_times.size),
        "n_sources": scenario.n_sources,
        "wave_speed": scenario.cfg.wave_speed,
        "final_time": scenario.cfg.final_time,
        "turnoff_time": scenario.cfg.turnoff_time,
    }
    for key in _GEOMETRY_KEYS:
        if manifest.get(key) != actual[key]:
            raise ValidationError(
                f"measurement manifest does not match the config's scenario: "
                f"{key} is {manifest.get(key)!r} in the data but {actual[key]!r} in the config"
            )


def _load_measurements(data_dir: str, scenario: Scenario, manifest: dict) -> MeasurementSet:
    _, sensors_xyz = _read_csv(os.path.join(data_dir, "sensors.csv"))
    _, times = _read_csv(os.path.join(data_dir, "times.csv"))
    noise_level = float(manifest.get("noise_level", 0.0))
    field_name = "field_noisy.csv" if noise_level > 0 else "field_clean.csv"
    _, field = _read_csv(os.path.join(data_dir, field_name))
    sensors = SensorArray(
        sensors_xyz, radius=scenario.sensors.radius, region=scenario.sensors.region
    )
    return MeasurementSet(times[:, 0], sensors, field, noise_level=noise_level)


def _export_samples(path, records, priors, export_cap: int) -> None:
    """Realized post-burn-in sample functions for the figures front end.

    Wide numeric CSV: chain, step, source, component (0=x, 1=y, 2=q), then
    one column per emission grid point.
    """
    rows = []
    n_sources = len(priors) // 3
    for c, rec in enumerate(records):
        mask = rec.kept_steps >= rec.burn_in
        kept_steps = rec.kept_steps[mask]
        kept = rec.kept_coeffs[mask]
        if kept.shape[0] == 0 or export_cap == 0:
            continue
        take = np.linspace(0, kept.shape[0] - 1, min(export_cap, kept.shape[0])).astype(int)
        for j in np.unique(take):
            for s in range(n_sources):
                for comp in range(3):
                    prior = priors[3 * s + comp]
                    values = prior.realize_values(kept[j, 3 * s + comp])
                    rows.append(
                        np.concatenate([[c, kept_steps[j], s, comp], values])
                    )
    m = priors[0].size
    header = "chain,step,source,component," + ",".join(f"v{i}" for i in range(m))
    matrix = np.vstack(rows) if rows else np.empty((0, 4 + m))
    _write_csv(path, header, matrix)


def cmd_reconstruct(config: RunConfig, data_dir: str, out_dir: str, resume: bool = False) -> dict:
    """Run pCN chains against a measurement artifact and write summaries."""
    scenario = build_scenario(config)
    manifest = _read_json(os.path.join(data_dir, "manifest.json"))
    _require(
        manifest.get("format") == MEASUREMENT_FORMAT,
        f"{data_dir} is not a measurement artifact (format {manifest.get('format')!r})",
    )
    _check_geometry(manifest, scenario, _canonical_case(config.case))
    measurements = _load_measurements(data_dir, scenario, manifest)
    os.makedirs(out_dir, exist_ok=True)

    estimator = PCNReconstructor.from_scenario(
        scenario,
        grid_size=config.grid_size,
        n_chains=config.chains,
        n_samples=config.samples,
        burn_in=config.burn_in,
        thin=config.thin,
        random_state=config.seed,
        n_jobs=config.n_jobs,
        checkpoint_dir=out_dir,
        checkpoint_every=config.checkpoint_every,
        resume=resume,
    )
    estimator.fit_measurements(measurements)

    _model_to_csv(os.path.join(out_dir, "posterior_mean.csv"), estimator.posterior_mean_)
    _model_to_csv(os.path.join(out_dir, "posterior_mode.csv"), estimator.posterior_mode_)
    _export_samples(
        os.path.join(out_dir, "samples.csv"),
        estimator.chains_,
        estimator.priors_,
        config.export_samples,
    )

    diagnostics = dict(estimator.diagnostics_)
    if scenario.truth is not None:
        per_chain = []
        for rec in estimator.chains_:
            chain_mean = posterior_mean([rec], estimator.priors_)
            per_chain.append(
                {
                    "trajectory_error": trajectory_error(chain_mean, scenario.truth),
                    "intensity_error": intensity_error(chain_mean, scenario.truth),
                }
            )
        diagnostics["per_chain_errors"] = per_chain
    _write_json(os.path.join(out_dir, "diagnostics.json"), diagnostics)

    summary_manifest = {
        "format": SUMMARY_FORMAT,
        "config_hash": config.config_hash,
        "scenario": _scenario_spec(config),
        "data_manifest": manifest,
        "data_dir": os.path.abspath(data_dir),
        "seed": config.seed,
        "chains": config.chains,
        "samples": config.samples,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "grid_size": config.grid_size,
        "created": _timestamp(),
    }
    _write_json(os.path.join(out_dir, "manifest.json"), summary_manifest)
    log.info("wrote reconstruction summaries to %s", out_dir)
    return summary_manifest


def _resolve_scenario_argument(scenario_arg: str, manifest: dict) -> Scenario:
    spec = manifest.get("scenario") or {}
    if os.path.exists(scenario_arg):
        config = load_config(scenario_arg)
        scenario = build_scenario(config)
        stored = _scenario_from_spec(spec)
        if (
            scenario.sensors.n_sensors != stored.sensors.n_sensors
            or scenario.measurement_times.size != stored.measurement_times.size
            or scenario.cfg != stored.cfg
        ):
            raise ValidationError("--scenario file does not match the summaries' scenario")
        return scenario
    requested = resolve_case(scenario_arg)
    stored_case = spec.get("case")
    _require(
        stored_case is not None and resolve_case(stored_case) == requested,
        f"summaries were produced for case {stored_case!r}, not {scenario_arg!r}",
    )
    return _scenario_from_spec(spec)


def cmd_evaluate(summaries_dir: str, scenario_arg: str, out_file: str) -> dict:
    """Error metrics of stored posterior summaries against a scenario."""
    manifest = _read_json(os.path.join(summaries_dir, "manifest.json"))
    _require(
        manifest.get("format") == SUMMARY_FORMAT,
        f"{summaries_dir} is not a reconstruction artifact (format {manifest.get('format')!r})",
    )
    scenario = _resolve_scenario_argument(scenario_arg, manifest)

    estimates = {}
    for kind in ("mean", "mode"):
        path = os.path.join(summaries_dir, f"posterior_{kind}.csv")
        if os.path.exists(path):
            estimates[kind] = _model_from_csv(path)
    _require(estimates, f"no posterior summaries found in {summaries_dir}")

    for model in estimates.values():
        grid = model.sources[0].emission_grid
        if abs(grid[-1] - scenario.cfg.turnoff_time) > 1e-9 or abs(grid[0]) > 1e-9:
            raise ValidationError(
                "summary grid does not span the scenario's emission window; grids mismatch"
            )

    # Prefer the stored measurement artifact (it includes the actual noise
    # draw); fall back to re-simulating from the truth, which is exact for
    # clean data because the pipeline is deterministic.
    data = None
    data_dir = manifest.get("data_dir")
    if data_dir and os.path.exists(os.path.join(data_dir, "manifest.json")):
        data_manifest = _read_json(os.path.join(data_dir, "manifest.json"))
        data = _load_measurements(data_dir, scenario, data_manifest)
    elif scenario.truth is not None:
        clean, noisy = synthesize_measurements(scenario, seed=manifest.get("seed", 0))
        data = noisy if noisy is not None else clean

    metrics: dict = {"format": METRICS_FORMAT, "case": manifest.get("scenario", {}).get("case")}
    table_rows = []
    for kind, model in sorted(estimates.items()):
        entry: dict = {}
        if data is not None:
            entry["wavefield_error"] = wavefield_error(model, data, scenario.cfg)
        if scenario.truth is not None:
            entry["trajectory_error"] = trajectory_error(model, scenario.truth)
            entry["intensity_error"] = intensity_error(model, scenario.truth)
        metrics[kind] = entry
        table_rows.append((kind, entry))

    os.makedirs(os.path.dirname(os.path.abspath(out_file)), exist_ok=True)
    _write_json(out_file, metrics)

    names = ("wavefield_error", "trajectory_error", "intensity_error")
    print(f"{'':<18}" + "".join(f"{kind:>16}" for kind, _ in table_rows))
    for name in names:
        if any(name in entry for _, entry in table_rows):
            cells = "".join(
                f"{entry.get(name, float('nan')):>16.3e}" for _, entry in table_rows
            )
            print(f"{name:<18}" + cells)
    return metrics


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="movingsource",
        description="Simulate and reconstruct moving acoustic point sources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic measurement data")
    sim.add_argument("--config", required=True, help="run configuration (JSON)")
    sim.add_argument("--out", required=True, help="output directory for measurement artifacts")

    rec = sub.add_parser("reconstruct", help="run pCN chains against measurement data")
    rec.add_argument("--config", required=True, help="run configuration (JSON)")
    rec.add_argument("--data", required=True, help="measurement artifact directory")
    rec.add_argument("--out", required=True, help="output directory for summaries")
    rec.add_argument("--resume", action="store_true", help="continue from chain checkpoints")

    ev = sub.add_parser("evaluate", help="compute error metrics for stored summaries")
    ev.add_argument("--summaries", required=True, help="reconstruction artifact directory")
    ev.add_argument("--scenario", required=True, help="case name/id or config file")
    ev.add_argument("--out", required=True, help="metrics output file (JSON)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MOVINGSOURCE_LOG_LEVEL", "WARNING").upper())
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(load_config(args.config), args.out)
        elif args.command == "reconstruct":
            cmd_reconstruct(load_config(args.config), args.data, args.out, resume=args.resume)
        elif args.command == "evaluate":
            cmd_evaluate(args.summaries, args.scenario, args.out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MovingSourceError, np.linalg.LinAlgError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
