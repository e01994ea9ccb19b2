"""Experiment runner over the measurement and mirror engines.

Single runs, parameter sweeps with closed-form residual columns, and
deterministic CSV/JSON emission. Configuration comes from a JSON file,
long-name flags, or both (flags override the file).

Exit statuses: 0 success, 2 invalid configuration, 3 engine error
(evolution killed, degenerate polygon), 4 output I/O failure. Errors are
printed to stderr as one JSON object. The environment variable
ZENOBERRY_THREADS (integer >= 1) caps sweep parallelism; results are
byte-identical for any thread count.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import photonso3, zenoengine
from .zenoengine import HamiltonianSpec, MeasurementPlan

TWO_PI = 2.0 * math.pi

MODES = ("spin-free", "spin-hamiltonian", "photon-polygon", "sweep")
SWEEP_PARAMETERS = ("steps", "cos_theta", "mu", "polygon_sides")
FORMATS = ("csv", "json")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ENGINE = 3
EXIT_IO = 4

DEFAULT_THETA0 = math.pi / 4
DEFAULT_POL_ANGLE = 0.0

THREADS_ENV = "ZENOBERRY_THREADS"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# value parsing


def parse_scalar(value) -> float:
    """Parse a float, accepting 'pi' and 'pi*<x>' literals with optional sign."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    sign = 1.0
    if text.startswith(("+", "-")):
        sign = -1.0 if text[0] == "-" else 1.0
        text = text[1:]
    if text == "pi":
        return sign * math.pi
    if text.startswith("pi*"):
        try:
            return sign * math.pi * float(text[3:])
        except ValueError:
            raise ConfigError(f"bad angle literal {value!r}") from None
    try:
        return sign * float(text)
    except ValueError:
        raise ConfigError(f"bad numeric literal {value!r}") from None


def parse_axis(value) -> tuple[float, float, float]:
    """Parse an axis given as 'x,y,z' or a 3-element sequence."""
    if isinstance(value, str):
        parts = value.split(",")
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"bad axis {value!r}")
    if len(parts) != 3:
        raise ConfigError(f"axis needs exactly three components, got {value!r}")
    return tuple(parse_scalar(p) for p in parts)


def parse_int(value, name: str) -> int:
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if isinstance(value, float) and value != out:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return out


# ---------------------------------------------------------------------------
# configuration model


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """Swept parameter with an inclusive additive or multiplicative grid."""

    parameter: str
    start: float
    stop: float
    step: float
    kind: str

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
        if self.kind not in ("additive", "multiplicative"):
            raise ConfigError("sweep kind must be 'additive' or 'multiplicative'")
        for name in ("start", "stop", "step"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigError(f"sweep {name} must be finite")
            object.__setattr__(self, name, v)
        if self.start > self.stop:
            raise ConfigError("sweep start must not exceed stop")
        if self.kind == "additive" and self.step <= 0:
            raise ConfigError("additive sweep step must be > 0")
        if self.kind == "multiplicative" and (self.step <= 1 or self.start <= 0):
            raise ConfigError("multiplicative sweep needs step > 1 and start > 0")

    def values(self) -> list:
        vals = []
        k = 0
        while True:
            if self.kind == "additive":
                v = self.start + k * self.step
            else:
                v = self.start * self.step**k
            if v > self.stop * (1.0 + 1e-12) + 1e-12:
                break
            vals.append(v)
            k += 1
        if not vals:
            raise ConfigError("sweep range is empty")
        if self.parameter in ("steps", "polygon_sides"):
            ints = []
            for v in vals:
                r = round(v)
                if abs(v - r) > 1e-9:
                    raise ConfigError(f"sweep over {self.parameter} hit non-integer value {v!r}")
                ints.append(int(r))
            return ints
        return vals


@dataclasses.dataclass(frozen=True)
class OutputSpec:
    path: str
    format: str = "csv"

    def __post_init__(self):
        if not isinstance(self.path, str) or not self.path:
            raise ConfigError("output path must be a nonempty string")
        if self.format not in FORMATS:
            raise ConfigError(f"output format must be one of {FORMATS}")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """One validated experiment: exactly the fields its mode needs."""

    mode: str
    plan: MeasurementPlan | None = None
    hamiltonian: HamiltonianSpec | None = None
    polygon_sides: int | None = None
    theta0: float = DEFAULT_THETA0
    pol_angle: float = DEFAULT_POL_ANGLE
    sweep: SweepSpec | None = None
    output: OutputSpec | None = None
    dump_trajectory: str | None = None
    timings: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        need = {
            "spin-free": ("plan",),
            "spin-hamiltonian": ("plan", "hamiltonian"),
            "photon-polygon": ("polygon_sides",),
            "sweep": ("sweep",),
        }[self.mode]
        for field in need:
            if getattr(self, field) is None:
                raise ConfigError(f"mode {self.mode} requires {field}")

        photonic = self.mode == "photon-polygon" or (
            self.sweep is not None and self.sweep.parameter == "polygon_sides"
        )
        forbidden = []
        if self.mode != "sweep" and self.sweep is not None:
            forbidden.append("sweep")
        if not photonic:
            if self.polygon_sides is not None and self.mode != "photon-polygon":
                forbidden.append("polygon_sides")
            if self.theta0 != DEFAULT_THETA0:
                forbidden.append("theta0")
            if self.pol_angle != DEFAULT_POL_ANGLE:
                forbidden.append("pol_angle")
        if photonic and (self.plan is not None or self.hamiltonian is not None):
            forbidden.append("plan/hamiltonian")
        if self.mode == "spin-free" and self.hamiltonian is not None:
            forbidden.append("hamiltonian")
        if forbidden:
            raise ConfigError(f"mode {self.mode} does not take: {', '.join(forbidden)}")

        if self.mode == "spin-free" and self.plan.steps < 1:
            raise ConfigError("spin-free runs need at least one measurement step")
        if self.mode == "photon-polygon" and self.polygon_sides < 3:
            raise ConfigError("polygon_sides must be >= 3")
        if self.mode == "sweep":
            if self.dump_trajectory is not None:
                raise ConfigError("trajectory dumps apply to single runs only")
            param = self.sweep.parameter
            if param in ("steps", "cos_theta") and self.plan is None:
                raise ConfigError(f"sweeping {param} requires a measurement plan")
            if param == "mu" and (self.plan is None or self.hamiltonian is None):
                raise ConfigError("sweeping mu requires a plan and a hamiltonian")
            if param == "polygon_sides" and self.polygon_sides is not None:
                raise ConfigError("polygon_sides sweeps take their values from the sweep range")


def point_mode(config: ExperimentConfig) -> str:
    """Mode of the individual runs a sweep configuration expands into."""
    param = config.sweep.parameter
    if param == "polygon_sides":
        return "photon-polygon"
    if param == "mu" or config.hamiltonian is not None:
        return "spin-hamiltonian"
    return "spin-free"


# ---------------------------------------------------------------------------
# configuration (de)serialization

_TOP_KEYS = {
    "mode",
    "plan",
    "hamiltonian",
    "polygon_sides",
    "theta0",
    "pol_angle",
    "sweep",
    "output",
    "dump_trajectory",
    "timings",
}


def _check_keys(d: dict, allowed: set, where: str):
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "configuration")
    if "mode" not in raw:
        raise ConfigError("configuration requires a mode")
    kwargs = {"mode": raw["mode"]}
    try:
        if raw.get("plan") is not None:
            p = raw["plan"]
            _check_keys(p, {"axis", "total_angle", "steps"}, "plan")
            kwargs["plan"] = MeasurementPlan(
                axis=parse_axis(p["axis"]),
                total_angle=parse_scalar(p["total_angle"]),
                steps=parse_int(p["steps"], "steps"),
            )
        if raw.get("hamiltonian") is not None:
            h = raw["hamiltonian"]
            _check_keys(h, {"mu", "axis", "total_time"}, "hamiltonian")
            kwargs["hamiltonian"] = HamiltonianSpec(
                mu=parse_scalar(h["mu"]),
                axis=parse_axis(h["axis"]),
                total_time=parse_scalar(h["total_time"]),
            )
        if raw.get("polygon_sides") is not None:
            kwargs["polygon_sides"] = parse_int(raw["polygon_sides"], "polygon_sides")
        if "theta0" in raw:
            kwargs["theta0"] = parse_scalar(raw["theta0"])
        if "pol_angle" in raw:
            kwargs["pol_angle"] = parse_scalar(raw["pol_angle"])
        if raw.get("sweep") is not None:
            s = raw["sweep"]
            _check_keys(s, {"parameter", "start", "stop", "step", "kind"}, "sweep")
            kwargs["sweep"] = SweepSpec(
                parameter=s.get("parameter"),
                start=parse_scalar(s.get("start")),
                stop=parse_scalar(s.get("stop")),
                step=parse_scalar(s.get("step")),
                kind=s.get("kind"),
            )
        if raw.get("output") is not None:
            o = raw["output"]
            _check_keys(o, {"path", "format"}, "output")
            kwargs["output"] = OutputSpec(path=o.get("path"), format=o.get("format", "csv"))
        if raw.get("dump_trajectory") is not None:
            kwargs["dump_trajectory"] = str(raw["dump_trajectory"])
        if "timings" in raw:
            if not isinstance(raw["timings"], bool):
                raise ConfigError("timings must be true or false")
            kwargs["timings"] = raw["timings"]
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {"mode": config.mode}
    if config.plan is not None:
        out["plan"] = {
            "axis": list(config.plan.axis),
            "total_angle": config.plan.total_angle,
            "steps": config.plan.steps,
        }
    if config.hamiltonian is not None:
        out["hamiltonian"] = {
            "mu": config.hamiltonian.mu,
            "axis": list(config.hamiltonian.axis),
            "total_time": config.hamiltonian.total_time,
        }
    if config.polygon_sides is not None:
        out["polygon_sides"] = config.polygon_sides
    if config.mode == "photon-polygon" or (
        config.sweep is not None and config.sweep.parameter == "polygon_sides"
    ):
        out["theta0"] = config.theta0
        out["pol_angle"] = config.pol_angle
    if config.sweep is not None:
        out["sweep"] = dataclasses.asdict(config.sweep)
    if config.output is not None:
        out["output"] = {"path": config.output.path, "format": config.output.format}
    if config.dump_trajectory is not None:
        out["dump_trajectory"] = config.dump_trajectory
    out["timings"] = config.timings
    return out


# ---------------------------------------------------------------------------
# record schemas

_SPIN_OUTPUTS = (
    "beta",
    "dynamical_phase",
    "geometric_phase",
    "survival_probability",
    "total_phase",
)

_SCHEMAS = {
    "spin-free": (
        ("axis_n_x", "axis_n_y", "axis_n_z", "mode", "steps", "total_angle"),
        _SPIN_OUTPUTS,
        ("residual_beta_closed_form", "residual_continuum_state", "residual_survival_closed_form"),
    ),
    "spin-hamiltonian": (
        (
            "axis_b_x",
            "axis_b_y",
            "axis_b_z",
            "axis_n_x",
            "axis_n_y",
            "axis_n_z",
            "mode",
            "mu",
            "steps",
            "total_angle",
            "total_time",
        ),
        _SPIN_OUTPUTS,
        ("residual_dynamical_closed_form", "residual_geometric_closed_form"),
    ),
    "photon-polygon": (
        ("mode", "pol_angle", "polygon_sides", "theta0"),
        (
            "final_pol_x_im",
            "final_pol_x_re",
            "final_pol_y_im",
            "final_pol_y_re",
            "final_pol_z_im",
            "final_pol_z_re",
            "helicity_parity",
        ),
        ("residual_closed_form",),
    ),
}

_SWEEP_INPUT_EXTRAS = (
    "record_kind",
    "sweep_index",
    "sweep_kind",
    "sweep_parameter",
    "sweep_start",
    "sweep_step",
    "sweep_stop",
)


def schema_columns(mode: str, swept: bool = False) -> list[str]:
    """Column order: inputs, outputs, residuals (each alphabetical), wall time."""
    inputs, outputs, residuals = _SCHEMAS[mode]
    if swept:
        inputs = tuple(sorted(inputs + _SWEEP_INPUT_EXTRAS))
        outputs = tuple(sorted(outputs + ("fit_slope",)))
    return list(inputs) + list(outputs) + list(residuals) + ["wall_time_seconds"]


def _ordered(record: dict, mode: str, swept: bool) -> dict:
    cols = schema_columns(mode, swept)
    missing = [c for c in cols if c not in record]
    if missing:
        raise ValueError(f"record is missing columns: {missing}")
    return {c: record[c] for c in cols}


def _wrap_distance(x: float) -> float:
    """Distance of a phase difference from 0 modulo 2*pi."""
    return abs(math.remainder(x, TWO_PI))


def _spin_record(config: ExperimentConfig, mode: str, result) -> dict:
    plan = config.plan
    rec = {
        "axis_n_x": plan.axis[0],
        "axis_n_y": plan.axis[1],
        "axis_n_z": plan.axis[2],
        "mode": mode,
        "steps": plan.steps,
        "total_angle": plan.total_angle,
    }
    if mode == "spin-hamiltonian":
        h = config.hamiltonian
        rec.update(
            axis_b_x=h.axis[0],
            axis_b_y=h.axis[1],
            axis_b_z=h.axis[2],
            mu=h.mu,
            total_time=h.total_time,
        )
    rec.update(
        beta=(result.dynamical_phase - result.total_phase) % TWO_PI,
        dynamical_phase=result.dynamical_phase,
        geometric_phase=result.geometric_phase,
        survival_probability=result.survival_probability,
        total_phase=result.total_phase,
    )

    n_z = plan.axis[2]
    half_turn = abs(plan.total_angle - math.pi) <= 1e-12
    if mode == "spin-free":
        a_n = plan.total_angle / plan.steps
        survival_cf = (math.cos(a_n) ** 2 + n_z**2 * math.sin(a_n) ** 2) ** plan.steps
        rec["residual_survival_closed_form"] = abs(result.survival_probability - survival_cf)
        rec["residual_continuum_state"] = float(
            np.linalg.norm(result.final_state - zenoengine.continuum_state(plan))
        )
        if half_turn and plan.steps >= 3:
            _, beta_cf = zenoengine.closed_form_finite_n(n_z, plan.steps)
            rec["residual_beta_closed_form"] = _wrap_distance(rec["beta"] - beta_cf)
        else:
            rec["residual_beta_closed_form"] = None
    else:
        if half_turn:
            h = config.hamiltonian
            b_dot_n = sum(h.axis[i] * plan.axis[i] for i in range(3))
            dyn_cf = -h.mu * h.total_time * b_dot_n * n_z
            geo_cf = (-zenoengine.solid_angle_cone(n_z) / 2.0) % TWO_PI
            rec["residual_dynamical_closed_form"] = abs(result.dynamical_phase - dyn_cf)
            rec["residual_geometric_closed_form"] = _wrap_distance(
                result.geometric_phase - geo_cf
            )
        else:
            rec["residual_dynamical_closed_form"] = None
            rec["residual_geometric_closed_form"] = None
    return rec


def _photon_record(config: ExperimentConfig) -> tuple[dict, list]:
    polygon = photonso3.MirrorPolygon.regular(config.polygon_sides)
    initial = photonso3.default_photon(config.theta0, config.pol_angle)
    states = photonso3.trace_polygon(initial, polygon)
    final = states[-1]
    predicted = photonso3.closed_form_final(polygon) @ initial.polarization
    rec = {
        "mode": "photon-polygon",
        "pol_angle": config.pol_angle,
        "polygon_sides": polygon.sides,
        "theta0": config.theta0,
        "final_pol_x_im": float(final.polarization[0].imag),
        "final_pol_x_re": float(final.polarization[0].real),
        "final_pol_y_im": float(final.polarization[1].imag),
        "final_pol_y_re": float(final.polarization[1].real),
        "final_pol_z_im": float(final.polarization[2].imag),
        "final_pol_z_re": float(final.polarization[2].real),
        "helicity_parity": final.helicity_parity,
        "residual_closed_form": float(np.max(np.abs(final.polarization - predicted))),
    }
    return rec, states


# ---------------------------------------------------------------------------
# execution


def _execute(config: ExperimentConfig, mode: str | None = None) -> tuple[dict, list]:
    """Run one non-sweep config; returns (record, trajectory dump rows)."""
    mode = mode or config.mode
    start = time.perf_counter()
    if mode == "spin-free":
        result = zenoengine.run_free(config.plan)
        rec = _spin_record(config, mode, result)
        rows = [
            [k, point.time, point.bloch[0], point.bloch[1], point.bloch[2]]
            for k, point in enumerate(result.trajectory)
        ]
        header = ["k", "time", "bloch_x", "bloch_y", "bloch_z"]
    elif mode == "spin-hamiltonian":
        result = zenoengine.run_hamiltonian(config.plan, config.hamiltonian)
        rec = _spin_record(config, mode, result)
        rows = [
            [k, point.time, point.bloch[0], point.bloch[1], point.bloch[2]]
            for k, point in enumerate(result.trajectory)
        ]
        header = ["k", "time", "bloch_x", "bloch_y", "bloch_z"]
    elif mode == "photon-polygon":
        rec, states = _photon_record(config)
        tips = photonso3.polarization_tip_loop(states)
        rows = [[k, tip[0], tip[1], tip[2]] for k, tip in enumerate(tips)]
        header = ["k", "pol_x", "pol_y", "pol_z"]
    else:
        raise ConfigError("run() executes single-run configurations only")
    elapsed = time.perf_counter() - start
    rec["wall_time_seconds"] = elapsed if config.timings else None
    return _ordered(rec, mode, swept=False), [header] + rows


def run(config: ExperimentConfig) -> dict:
    """Execute a single-run configuration and return its flat record."""
    return _execute(config)[0]


def _point_config(config: ExperimentConfig, value) -> ExperimentConfig:
    param = config.sweep.parameter
    changes = {"mode": point_mode(config), "sweep": None, "output": None}
    try:
        if param == "steps":
            changes["plan"] = dataclasses.replace(config.plan, steps=value)
        elif param == "cos_theta":
            axis = (math.sqrt(max(0.0, 1.0 - value * value)), 0.0, value)
            changes["plan"] = dataclasses.replace(config.plan, axis=axis)
        elif param == "mu":
            changes["hamiltonian"] = dataclasses.replace(config.hamiltonian, mu=value)
        else:
            changes["polygon_sides"] = value
        return dataclasses.replace(config, **changes)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"sweep value {value!r} is invalid: {exc}") from exc


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer >= 1, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be an integer >= 1, got {raw!r}")
    return n


def sweep(config: ExperimentConfig) -> list[dict]:
    """Run every sweep point (in index order regardless of parallelism) and,
    for measurement-count sweeps of the plain measurement mode, append a
    summary record with the fitted log-log error slope."""
    if config.mode != "sweep":
        raise ConfigError("sweep() requires a sweep configuration")
    grid = config.sweep
    values = grid.values()
    mode = point_mode(config)
    points = [_point_config(config, v) for v in values]

    threads = _thread_count()
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            executed = list(pool.map(_execute, points, [mode] * len(points)))
    else:
        executed = [_execute(p, mode) for p in points]

    records = []
    sweep_inputs = {
        "sweep_kind": grid.kind,
        "sweep_parameter": grid.parameter,
        "sweep_start": grid.start,
        "sweep_step": grid.step,
        "sweep_stop": grid.stop,
    }
    for idx, (rec, _) in enumerate(executed):
        rec = dict(rec)
        rec.update(sweep_inputs, record_kind="point", sweep_index=idx, fit_slope=None)
        records.append(_ordered(rec, mode, swept=True))

    if grid.parameter == "steps" and mode == "spin-free":
        errors = [r["residual_continuum_state"] for r in records]
        slope = None
        if all(e is not None and e > 0.0 for e in errors):
            slope = float(
                np.polyfit(np.log(np.asarray(values, float)), np.log(np.asarray(errors)), 1)[0]
            )
        summary = {c: None for c in schema_columns(mode, swept=True)}
        summary.update(sweep_inputs, mode=mode, record_kind="summary", fit_slope=slope)
        records.append(_ordered(summary, mode, swept=True))
    return records


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(x: float) -> str:
    return f"{x:.17g}"


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return _fmt_float(v)
    return str(v)


def _json_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, float):
        return _fmt_float(v)
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


def emit(records: list[dict], fmt: str) -> bytes:
    """Serialize records to CSV or JSON bytes.

    All records must share one schema; floats are written with 17
    significant digits; identical records give identical bytes. An empty
    record list is an error, never an empty file.
    """
    if not records:
        raise ValueError("refusing to serialize an empty record list")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    columns = list(records[0].keys())
    for r in records[1:]:
        if list(r.keys()) != columns:
            raise ValueError("records do not share a single schema")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for r in records:
            writer.writerow([_csv_value(r[c]) for c in columns])
        return buf.getvalue().encode()
    lines = []
    for r in records:
        parts = [f"{json.dumps(c)}: {_json_value(r[c])}" for c in columns]
        lines.append("  {" + ", ".join(parts) + "}")
    return ("[\n" + ",\n".join(lines) + "\n]\n").encode()


def write_bytes(path: str, data: bytes):
    """Write atomically: temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _dump_rows_csv(rows: list) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rows[0])
    for row in rows[1:]:
        writer.writerow([_csv_value(float(v) if not isinstance(v, int) else v) for v in row])
    return buf.getvalue().encode()


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="zenoberry",
        description=(
            "Run measurement-driven spin evolutions and mirror-polygon "
            "polarization transport; write CSV or JSON records with "
            "closed-form residual columns."
        ),
        epilog=(
            "Angles accept 'pi', 'pi*<x>' and plain radians. Sweep syntax: "
            "PARAM:START:STOP:+STEP (additive) or PARAM:START:STOP:xFACTOR "
            "(multiplicative), e.g. --sweep steps:8:1024:x2."
        ),
    )
    p.add_argument("--config", help="JSON configuration file; flags override its fields")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--axis-n", help="measurement axis as 'x,y,z'")
    p.add_argument("--total-angle", help="total turning angle (radians, 'pi*x' allowed)")
    p.add_argument("--steps", help="number of measurements")
    p.add_argument("--mu", help="Hamiltonian coupling strength")
    p.add_argument("--axis-b", help="Hamiltonian axis as 'x,y,z'")
    p.add_argument("--time", help="total Hamiltonian evolution time")
    p.add_argument("--polygon-sides", help="number of mirrors")
    p.add_argument("--theta0", help="photon launch angle from z (photon modes)")
    p.add_argument("--pol-angle", help="initial polarization angle in the transverse plane")
    p.add_argument("--sweep", help="sweep spec PARAM:START:STOP:(+STEP|xFACTOR)")
    p.add_argument("--out", help="output file path")
    p.add_argument("--format", choices=FORMATS, help="output format (default csv)")
    p.add_argument("--dump-trajectory", help="also write a trajectory CSV to this path")
    p.add_argument("--timings", action="store_true", default=None,
                   help="record wall time per run (off by default so outputs are reproducible)")
    return p


def _parse_sweep_flag(text: str) -> dict:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError(f"sweep spec must be PARAM:START:STOP:STEP, got {text!r}")
    param, start, stop, step = parts
    if step.startswith("x"):
        kind, step = "multiplicative", step[1:]
    elif step.startswith("+"):
        kind, step = "additive", step[1:]
    else:
        raise ConfigError("sweep step needs a '+' (additive) or 'x' (multiplicative) prefix")
    return {"parameter": param, "start": start, "stop": stop, "step": step, "kind": kind}


def _merge_flags(raw: dict, args: argparse.Namespace) -> dict:
    def sub(name):
        return raw.setdefault(name, {})

    if args.mode is not None:
        raw["mode"] = args.mode
    if args.axis_n is not None:
        sub("plan")["axis"] = args.axis_n
    if args.total_angle is not None:
        sub("plan")["total_angle"] = args.total_angle
    if args.steps is not None:
        sub("plan")["steps"] = parse_int(args.steps, "steps")
    if args.mu is not None:
        sub("hamiltonian")["mu"] = args.mu
    if args.axis_b is not None:
        sub("hamiltonian")["axis"] = args.axis_b
    if args.time is not None:
        sub("hamiltonian")["total_time"] = args.time
    if args.polygon_sides is not None:
        raw["polygon_sides"] = parse_int(args.polygon_sides, "polygon_sides")
    if args.theta0 is not None:
        raw["theta0"] = args.theta0
    if args.pol_angle is not None:
        raw["pol_angle"] = args.pol_angle
    if args.sweep is not None:
        raw["sweep"] = _parse_sweep_flag(args.sweep)
    if args.out is not None:
        sub("output")["path"] = args.out
    if args.format is not None:
        sub("output")["format"] = args.format
    if args.dump_trajectory is not None:
        raw["dump_trajectory"] = args.dump_trajectory
    if args.timings is not None:
        raw["timings"] = True
    return raw


def _fail(code: int, error: str, message: str, **context) -> int:
    payload = {"error": error, "message": message}
    payload.update(context)
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config is not None:
            try:
                with open(args.config, encoding="utf-8") as f:
                    raw = json.load(f)
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        config = config_from_dict(_merge_flags(raw, args))
        if config.output is None:
            raise ConfigError("an output path is required (--out)")

        if config.mode == "sweep":
            records = sweep(config)
            dump = None
        else:
            record, rows = _execute(config)
            records = [record]
            dump = _dump_rows_csv(rows) if config.dump_trajectory else None
        data = emit(records, config.output.format)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "invalid-config", str(exc))
    except zenoengine.EvolutionKilledError as exc:
        return _fail(EXIT_ENGINE, "evolution-killed", str(exc), step=exc.step)
    except zenoengine.DegeneratePolygonError as exc:
        return _fail(EXIT_ENGINE, "degenerate-polygon", str(exc))
    except zenoengine.UndefinedConnectionError as exc:
        return _fail(EXIT_ENGINE, "undefined-connection", str(exc))

    try:
        write_bytes(config.output.path, data)
        if dump is not None:
            write_bytes(config.dump_trajectory, dump)
    except OSError as exc:
        return _fail(EXIT_IO, "io-failure", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
