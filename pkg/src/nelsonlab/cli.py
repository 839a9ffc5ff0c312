"""Experiment runner: config parsing, seeded execution, tabular output.

Configs are JSON with strict validation: unknown keys are rejected and
every violation is reported at once.  Physics parameters (masses, bath
speed, diffusion scale, mean collision time) must be explicit; only
plumbing has defaults.  Identical (config, seed) pairs produce
byte-identical output files regardless of the worker count.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from .collision import MassPair, collide, nelson_energy_ledger
from .eigenframe import decompose, frame_check, minkowski_statistical_residual
from .heatbath import BathConfig, run_bath, sample_events
from .nelson import DiffusionConfig, energy_mc, evolve_ensemble
from .rng import DEFAULT_SEED
from .waves import CATALOG

SUBCOMMANDS = ("collide", "bath", "nelson", "minkowski", "selftest")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Config rejection carrying the full list of violations."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in problems))


# ---------------------------------------------------------------------------
# schema-driven validation


@dataclass(frozen=True)
class Spec:
    kind: str                     # num | int | str | bool | vec3 | obj | list
    required: bool = False
    default: Any = None
    minimum: float | None = None
    exclusive_minimum: float | None = None
    maximum: float | None = None
    choices: tuple | None = None
    schema: dict | None = None    # for kind == "obj"
    item: "Spec | None" = None    # for kind == "list"
    allow_null: bool = False


def _check_value(value, spec: Spec, path: str, problems: list[str]):
    if value is None and spec.allow_null:
        return None
    if spec.kind == "num":
        if not isinstance(value, (int, float)) or isinstance(value, bool) \
                or not math.isfinite(value):
            problems.append(f"{path}: expected a finite number, got {value!r}")
            return None
        value = float(value)
    elif spec.kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            problems.append(f"{path}: expected an integer, got {value!r}")
            return None
    elif spec.kind == "bool":
        if not isinstance(value, bool):
            problems.append(f"{path}: expected a boolean, got {value!r}")
            return None
    elif spec.kind == "str":
        if not isinstance(value, str):
            problems.append(f"{path}: expected a string, got {value!r}")
            return None
    elif spec.kind == "vec3":
        if (not isinstance(value, list) or len(value) != 3
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       or not math.isfinite(v) for v in value)):
            problems.append(f"{path}: expected a list of 3 finite numbers, got {value!r}")
            return None
        return [float(v) for v in value]
    elif spec.kind == "obj":
        if not isinstance(value, dict):
            problems.append(f"{path}: expected an object, got {value!r}")
            return None
        return _validate_object(value, spec.schema, path, problems)
    elif spec.kind == "list":
        if not isinstance(value, list):
            problems.append(f"{path}: expected a list, got {value!r}")
            return None
        return [_check_value(v, spec.item, f"{path}[{i}]", problems)
                for i, v in enumerate(value)]
    else:  # pragma: no cover - schema authoring error
        raise RuntimeError(f"unknown spec kind {spec.kind}")

    if spec.choices is not None and value not in spec.choices:
        problems.append(f"{path}: must be one of {list(spec.choices)}, got {value!r}")
    if spec.minimum is not None and value < spec.minimum:
        problems.append(f"{path}: must be >= {spec.minimum}, got {value!r}")
    if spec.exclusive_minimum is not None and value <= spec.exclusive_minimum:
        problems.append(f"{path}: must be > {spec.exclusive_minimum}, got {value!r}")
    if spec.maximum is not None and value > spec.maximum:
        problems.append(f"{path}: must be <= {spec.maximum}, got {value!r}")
    return value


def _validate_object(obj: dict, schema: dict, path: str,
                     problems: list[str]) -> dict:
    out = {}
    for key in obj:
        if key not in schema:
            here = f"{path}.{key}" if path else key
            problems.append(f"{here}: unknown key")
    for key, spec in schema.items():
        here = f"{path}.{key}" if path else key
        if key in obj:
            out[key] = _check_value(obj[key], spec, here, problems)
        elif spec.required:
            problems.append(f"{here}: required key is missing")
        else:
            out[key] = spec.default
    return out


_EVENT_SCHEMA = {
    "M": Spec("num", required=True, exclusive_minimum=0.0),
    "m": Spec("num", required=True, exclusive_minimum=0.0),
    "phi": Spec("vec3", required=True),
    "v1": Spec("vec3", required=True),
    "w1": Spec("vec3", required=True),
}

_WAVE_SCHEMA = {
    "kind": Spec("str", required=True, choices=tuple(CATALOG)),
    "mass": Spec("num", required=True, exclusive_minimum=0.0),
    "eta": Spec("num", required=True, exclusive_minimum=0.0),
    "dim": Spec("int", default=1, minimum=1, maximum=3),
    "omega": Spec("num", default=None, exclusive_minimum=0.0, allow_null=True),
    "width": Spec("num", default=None, exclusive_minimum=0.0, allow_null=True),
    "velocity": Spec("num", default=None, allow_null=True),
    "center": Spec("num", default=0.0),
    "length": Spec("num", default=None, exclusive_minimum=0.0, allow_null=True),
}

_POTENTIAL_SCHEMA = {
    "kind": Spec("str", required=True, choices=("zero", "harmonic", "matched")),
    "omega": Spec("num", default=None, exclusive_minimum=0.0, allow_null=True),
}

SCHEMAS: dict[str, dict] = {
    "collide": {
        "seed": Spec("int", minimum=0, maximum=2**64 - 1),
        "events": Spec("list", item=Spec("obj", schema=_EVENT_SCHEMA),
                       default=None, allow_null=True),
        "input": Spec("str", default=None, allow_null=True),
    },
    "bath": {
        "seed": Spec("int", minimum=0, maximum=2**64 - 1),
        "gamma2": Spec("num", required=True, exclusive_minimum=0.0),
        "M": Spec("num", default=1.0, exclusive_minimum=0.0),
        "c_w": Spec("num", required=True, exclusive_minimum=0.0),
        "tau_bar": Spec("num", required=True, exclusive_minimum=0.0),
        "n_collisions": Spec("int", required=True, minimum=0),
        "bath_kind": Spec("str", default="isotropic-fixed-speed",
                          choices=("isotropic-fixed-speed", "maxwellian")),
        "mode": Spec("str", default="physical", choices=("physical", "paper")),
        "v0": Spec("vec3", default=[0.0, 0.0, 0.0]),
        "bath_mean": Spec("vec3", default=[0.0, 0.0, 0.0]),
        "target_correlation": Spec("num", default=None, minimum=-1.0,
                                   maximum=1.0, allow_null=True),
        "burn_in": Spec("num", default=0.1, minimum=0.0, maximum=0.999999),
        "trajectory": Spec("bool", default=False),
    },
    "nelson": {
        "seed": Spec("int", minimum=0, maximum=2**64 - 1),
        "wave": Spec("obj", required=True, schema=_WAVE_SCHEMA),
        "potential": Spec("obj", required=True, schema=_POTENTIAL_SCHEMA),
        "tau_bar": Spec("num", required=True, exclusive_minimum=0.0),
        "n_particles": Spec("int", required=True, minimum=1),
        "t0": Spec("num", required=True),
        "t1": Spec("num", required=True),
        "dt": Spec("num", required=True, exclusive_minimum=0.0),
        "direction": Spec("str", default="forward",
                          choices=("forward", "backward")),
        "n_snapshots": Spec("int", default=11, minimum=2),
        "n_bins": Spec("int", default=200, minimum=8),
        "dump_histogram": Spec("bool", default=False),
    },
    "minkowski": {
        "seed": Spec("int", minimum=0, maximum=2**64 - 1),
        "gamma2": Spec("num", required=True, exclusive_minimum=0.0),
        "M": Spec("num", default=1.0, exclusive_minimum=0.0),
        "c_w": Spec("num", required=True, exclusive_minimum=0.0),
        "n_events": Spec("int", required=True, minimum=2),
        "bath_kind": Spec("str", default="isotropic-fixed-speed",
                          choices=("isotropic-fixed-speed", "maxwellian")),
        "mode": Spec("str", default="physical", choices=("physical", "paper")),
        "main_rms_speed": Spec("num", default=None, exclusive_minimum=0.0,
                               allow_null=True),
        "main_fixed_speed": Spec("num", default=None, exclusive_minimum=0.0,
                                 allow_null=True),
        "target_correlation": Spec("num", default=None, minimum=-1.0,
                                   maximum=1.0, allow_null=True),
    },
    "selftest": {
        "seed": Spec("int", minimum=0, maximum=2**64 - 1),
        "criteria": Spec("list", item=Spec("int", minimum=1, maximum=12),
                         default=None, allow_null=True),
    },
}


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    seed: int
    output: str
    fmt: str = "csv"
    mode: str | None = None
    workers: int = 1
    quiet: bool = False


def parse_config(text: str, subcommand: str) -> dict:
    """Parse and strictly validate a JSON config for ``subcommand``."""
    if subcommand not in SCHEMAS:
        raise ConfigError([f"unknown subcommand {subcommand!r}"])
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])
    problems: list[str] = []
    out = _validate_object(raw, SCHEMAS[subcommand], "", problems)
    _extra_checks(subcommand, out, problems)
    if problems:
        raise ConfigError(problems)
    return out


def _extra_checks(subcommand: str, cfg: dict, problems: list[str]):
    if subcommand == "collide":
        has_events = cfg.get("events") is not None
        has_input = cfg.get("input") is not None
        if has_events == has_input:
            problems.append("collide: exactly one of 'events' or 'input' is required")
    if subcommand == "nelson" and not problems:
        if cfg["t1"] <= cfg["t0"]:
            problems.append("t1: must be greater than t0")
        wave = cfg["wave"]
        kind = wave["kind"]
        needs = {"harmonic_ground_state": ("omega",),
                 "free_gaussian_packet": ("width", "velocity"),
                 "plane_wave": ("velocity", "length")}[kind]
        for key in needs:
            if wave.get(key) is None:
                problems.append(f"wave.{key}: required for kind {kind!r}")
        if cfg["potential"]["kind"] == "harmonic" \
                and cfg["potential"].get("omega") is None:
            problems.append("potential.omega: required for kind 'harmonic'")
    if subcommand == "minkowski" and not problems:
        if cfg.get("main_rms_speed") is not None \
                and cfg.get("main_fixed_speed") is not None:
            problems.append(
                "main_rms_speed: give at most one of main_rms_speed / main_fixed_speed")


# ---------------------------------------------------------------------------
# output


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return str(v)


def emit(rows: list[dict], fmt: str, path: str, metadata: dict) -> None:
    """Write rows with a metadata header; deterministic field order.

    CSV carries the metadata as leading '#' comment lines and prints
    floats with 17 significant digits so doubles round-trip exactly.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    try:
        payload = _render(rows, fmt, metadata)
        with open(path, "w", newline="") as fh:
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write output file {path!r}: {exc}") from exc


def _render(rows: list[dict], fmt: str, metadata: dict) -> str:
    if fmt == "json":
        body = {
            "metadata": metadata,
            "rows": [
                {k: (None if isinstance(v, float) and math.isnan(v)
                     else (float(v) if isinstance(v, (float, np.floating))
                           else (int(v) if isinstance(v, (int, np.integer))
                                 and not isinstance(v, bool) else v)))
                 for k, v in row.items()}
                for row in rows
            ],
        }
        return json.dumps(body, indent=1) + "\n"
    buf = io.StringIO()
    for key, value in metadata.items():
        buf.write(f"# {key}={value}\n")
    if rows:
        columns = list(rows[0].keys())
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if list(row.keys()) != columns:
                raise ValueError("rows must share one column set")
            writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def read_rows(path: str) -> tuple[dict, list[dict]]:
    """Read back an emitted file (either format); numbers become floats."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        body = json.loads(text)
        rows = [
            {k: (float("nan") if v is None else v) for k, v in row.items()}
            for row in body["rows"]
        ]
        return body["metadata"], rows
    metadata = {}
    lines = text.splitlines()
    data_start = 0
    for i, line in enumerate(lines):
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            metadata[key] = value
            data_start = i + 1
        else:
            break
    reader = csv.DictReader(io.StringIO("\n".join(lines[data_start:])))
    rows = []
    for raw in reader:
        row = {}
        for k, v in raw.items():
            if v in ("true", "false"):
                row[k] = v == "true"
                continue
            try:
                row[k] = int(v)
            except ValueError:
                try:
                    row[k] = float(v)
                except ValueError:
                    row[k] = v
        rows.append(row)
    return metadata, rows


def config_hash(params: dict, seed: int, subcommand: str) -> str:
    canon = json.dumps({"subcommand": subcommand, "seed": seed, "params": params},
                       sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _metadata(run: RunConfig) -> dict:
    return {
        "tool": "nelsonlab",
        "version": __version__,
        "subcommand": run.subcommand,
        "seed": run.seed,
        "config_hash": config_hash(run.params, run.seed, run.subcommand),
    }


# ---------------------------------------------------------------------------
# subcommands


def _vec_cols(prefix: str, v) -> dict:
    return {f"{prefix}_{ax}": float(v[i]) for i, ax in enumerate("xyz")}


def _run_collide(run: RunConfig) -> list[dict]:
    events = run.params.get("events")
    if events is None:
        events = _read_event_csv(run.params["input"])
    rows = []
    for e in events:
        masses = MassPair(M=e["M"], m=e["m"])
        event = collide(e["v1"], e["w1"], e["phi"], masses)
        event.check()
        ledger = nelson_energy_ledger(event)
        frame = decompose(event)
        row = {"M": masses.M, "m": masses.m, "gamma2": masses.gamma2}
        row.update(_vec_cols("phi", event.phi))
        row.update(_vec_cols("v1", event.v1))
        row.update(_vec_cols("w1", event.w1))
        row.update(_vec_cols("v2", event.v2))
        row.update(_vec_cols("w2", event.w2))
        row.update(_vec_cols("Phi", event.Phi))
        row.update({
            "sym_main": ledger.sym_main,
            "osm_main": ledger.osm_main,
            "sym_inc": ledger.sym_inc,
            "osm_inc": ledger.osm_inc,
            "ledger_total": ledger.total,
        })
        row.update(_vec_cols("a", frame.a))
        row.update(_vec_cols("g", frame.g))
        row.update(_vec_cols("g_perp", frame.g_perp))
        row["frame_residual"] = frame_check(event).residual
        rows.append(row)
    return rows


def _read_event_csv(path: str) -> list[dict]:
    cols = ("M", "m", "phi_x", "phi_y", "phi_z", "v1_x", "v1_y", "v1_z",
            "w1_x", "w1_y", "w1_z")
    try:
        with open(path) as fh:
            reader = csv.DictReader(
                row for row in fh if not row.startswith("#"))
            missing = [c for c in cols if c not in (reader.fieldnames or ())]
            if missing:
                raise ConfigError([f"input: missing columns {missing}"])
            out = []
            for raw in reader:
                out.append({
                    "M": float(raw["M"]),
                    "m": float(raw["m"]),
                    "phi": [float(raw[f"phi_{a}"]) for a in "xyz"],
                    "v1": [float(raw[f"v1_{a}"]) for a in "xyz"],
                    "w1": [float(raw[f"w1_{a}"]) for a in "xyz"],
                })
            return out
    except OSError as exc:
        raise ConfigError([f"input: cannot read {path!r}: {exc}"]) from exc


def _run_bath(run: RunConfig) -> list[dict]:
    p = run.params
    config = BathConfig(
        masses=MassPair.from_gamma2(p["gamma2"], M=p["M"]),
        c_w=p["c_w"],
        n_collisions=p["n_collisions"],
        seed=run.seed,
        tau_bar=p["tau_bar"],
        bath_kind=p["bath_kind"],
        mode=run.mode or p["mode"],
        v0=tuple(p["v0"]),
        bath_mean=tuple(p["bath_mean"]),
        target_correlation=p["target_correlation"],
        burn_in=p["burn_in"],
        record_trajectory=p["trajectory"],
    )
    summary = run_bath(config)
    if p["trajectory"] and summary.trajectory is not None:
        traj = summary.trajectory
        rows = []
        for k in range(summary.n + 1):
            row = {"k": k, "t": float(traj["time"][k])}
            row.update(_vec_cols("v", traj["v"][k]))
            row["v_sq"] = float(traj["v"][k] @ traj["v"][k])
            rows.append(row)
        return rows
    row = {
        "n": summary.n,
        "mode": summary.mode,
        "e_v2": summary.e_v2,
        "e_v2_se": summary.e_v2_se,
        "e_w2": summary.e_w2,
        "cross_vw": summary.cross_vw,
        "rho": summary.rho,
        "energy_ratio": summary.energy_ratio,
        "tau_mean": summary.tau_mean,
        "n_spot_checked": summary.n_spot_checked,
    }
    row.update(_vec_cols("mean_v", summary.mean_v))
    row.update(_vec_cols("drift", summary.drift_mean))
    row.update(_vec_cols("final_v", summary.final_v))
    return [row]


def _build_wave(wave_cfg: dict):
    kind = wave_cfg["kind"]
    if kind == "harmonic_ground_state":
        return CATALOG[kind](mass=wave_cfg["mass"], eta=wave_cfg["eta"],
                             omega=wave_cfg["omega"], dim=wave_cfg["dim"])
    if kind == "free_gaussian_packet":
        return CATALOG[kind](mass=wave_cfg["mass"], eta=wave_cfg["eta"],
                             width=wave_cfg["width"],
                             velocity=wave_cfg["velocity"],
                             center0=wave_cfg["center"])
    return CATALOG[kind](mass=wave_cfg["mass"], eta=wave_cfg["eta"],
                         velocity=wave_cfg["velocity"],
                         length=wave_cfg["length"])


def _run_nelson(run: RunConfig) -> tuple[list[dict], list[dict] | None]:
    p = run.params
    wave = _build_wave(p["wave"])
    pot_cfg = p["potential"]
    if pot_cfg["kind"] == "zero":
        potential = lambda x: np.zeros(np.atleast_2d(x).shape[0])
    elif pot_cfg["kind"] == "harmonic":
        from .waves import harmonic_potential
        potential = harmonic_potential(wave.mass, pot_cfg["omega"], wave.dim)
    else:
        potential = wave.matched_potential
    config = DiffusionConfig(
        wave=wave,
        potential=potential,
        n_particles=p["n_particles"],
        t0=p["t0"],
        t1=p["t1"],
        dt=p["dt"],
        seed=run.seed,
        tau_bar=p["tau_bar"],
        direction=p["direction"],
        n_snapshots=p["n_snapshots"],
        n_bins=p["n_bins"],
        workers=run.workers,
    )
    snapshots = evolve_ensemble(config)
    energies = energy_mc(snapshots, wave, potential, p["tau_bar"])
    rows = [
        {"snapshot": i, "t": pt.t, "energy": pt.value, "energy_se": pt.se,
         "n_particles": len(snapshots[i].positions)}
        for i, pt in enumerate(energies)
    ]
    hist_rows = None
    if p["dump_histogram"]:
        hist_rows = []
        for i, snap in enumerate(snapshots):
            centers = snap.centers
            dens = snap.density if wave.dim == 1 else snap.density.ravel()
            for j, c in enumerate(centers):
                hist_rows.append({
                    "snapshot": i, "t": snap.t,
                    "bin_center": float(c), "density": float(dens[j]),
                })
    return rows, hist_rows


def _run_minkowski(run: RunConfig) -> list[dict]:
    p = run.params
    masses = MassPair.from_gamma2(p["gamma2"], M=p["M"])
    batch = sample_events(
        p["n_events"], masses, p["c_w"], run.seed,
        bath_kind=p["bath_kind"],
        main_rms_speed=p["main_rms_speed"],
        main_fixed_speed=p["main_fixed_speed"],
        target_correlation=p["target_correlation"],
        mode=run.mode or p["mode"],
        workers=run.workers,
    )
    report = minkowski_statistical_residual(batch)
    return [{
        "n": report.n,
        "gamma2": masses.gamma2,
        "c_w": p["c_w"],
        "mode": run.mode or p["mode"],
        "statistical_residual": report.statistical_residual,
        "statistical_se": report.statistical_se,
        "predicted_residual": report.predicted_residual,
        "identity_gap": report.identity_gap,
        "correlation_rho": report.correlation_rho,
        "delta_e": report.delta_e,
        "frame_residual_max": report.frame_residual,
    }]


def _run_selftest(run: RunConfig) -> tuple[list[dict], bool]:
    from .selftest import run_criteria
    criteria = run.params.get("criteria")
    results = run_criteria(seed=run.seed, workers=run.workers,
                           criteria=criteria)
    rows = []
    all_passed = True
    for r in results:
        all_passed &= r.passed
        rows.append({
            "criterion": r.number,
            "name": r.name,
            "passed": r.passed,
            "observed": r.observed,
            "bound": r.bound,
            "detail": r.detail,
        })
        if not run.quiet:
            status = "PASS" if r.passed else "FAIL"
            print(f"{status}  criterion {r.number:2d}  {r.name}: {r.detail}")
    return rows, all_passed


def run(run_config: RunConfig) -> int:
    """Execute a validated run; returns the process exit status."""
    ok = True
    hist_rows = None
    if run_config.subcommand == "collide":
        rows = _run_collide(run_config)
    elif run_config.subcommand == "bath":
        rows = _run_bath(run_config)
    elif run_config.subcommand == "nelson":
        rows, hist_rows = _run_nelson(run_config)
    elif run_config.subcommand == "minkowski":
        rows = _run_minkowski(run_config)
    elif run_config.subcommand == "selftest":
        rows, ok = _run_selftest(run_config)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown subcommand {run_config.subcommand!r}")

    emit(rows, run_config.fmt, run_config.output, _metadata(run_config))
    if hist_rows is not None:
        stem, dot, ext = run_config.output.rpartition(".")
        hist_path = f"{stem}_hist.{ext}" if dot else f"{run_config.output}_hist"
        emit(hist_rows, run_config.fmt, hist_path, _metadata(run_config))
    if not run_config.quiet:
        print(f"wrote {run_config.output}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nelsonlab",
        description="collision, heat-bath and diffusion experiments with "
                    "verified invariants",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="JSON config file (selftest may omit it)")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"64-bit seed (default {DEFAULT_SEED})")
    parser.add_argument("--output", default="out.csv", help="output file path")
    parser.add_argument("--format", choices=FORMATS, default="csv")
    parser.add_argument("--mode", choices=("paper", "physical"), default=None,
                        help="collision treatment for bath/minkowski")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker threads (never changes results)")
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            with open(args.config) as fh:
                text = fh.read()
        else:
            if args.subcommand != "selftest":
                raise ConfigError(["--config is required for this subcommand"])
            text = "{}"
        params = parse_config(text, args.subcommand)
        seed = args.seed if args.seed is not None else params.get("seed")
        if seed is None:
            seed = DEFAULT_SEED
        if not 0 <= seed < 2**64:
            raise ConfigError([f"seed: must fit in 64 bits, got {seed}"])
        run_config = RunConfig(
            subcommand=args.subcommand,
            params=params,
            seed=int(seed),
            output=args.output,
            fmt=args.format,
            mode=args.mode,
            workers=max(1, args.workers),
            quiet=args.quiet,
        )
        return run(run_config)
    except ConfigError as exc:
        json.dump({"error": {"kind": "config", "problems": exc.problems}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": {"kind": type(exc).__name__, "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
