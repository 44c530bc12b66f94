"""JSON configuration for the command-line tools.

Schema (all keys optional; omitted keys take the nominal defaults):

    {
      "vehicle": {
        "wagon_mass": 57.0,            // t
        "wagon_inertia": 70.0,         // t*m^2
        "bogie_mass": 9.0,             // t
        "wagon_half_base": 3.725,      // m
        "bogie_half_base": 1.5,        // m
        "primary_stiffness": 3040.0,   // kN/m
        "primary_damping": 30.0,       // kN*s/m
        "secondary_stiffness": 2660.0, // kN/m
        "secondary_damping": 100.0,    // kN*s/m
        "literal_damper_aliases": false
      },
      "track": {
        "amp1": 0.005,        // m
        "amp2": 0.002,        // m
        "wavelength": 25.0,   // m
        "speed": 20.0         // m/s
      },
      "t_span": [0.0, 10.0],  // s
      "step": 0.001,          // s, fixed RK4 step
      "adaptive": {
        "abs_tol": 1e-9, "rel_tol": 1e-6,
        "h_init": 1e-3, "h_min": 1e-10, "h_max": 1.0,   // s
        "safety_factor": 0.9, "shrink_limit": 0.2, "growth_limit": 5.0
      },
      "plan": {
        "name": "body",             // or "interleaved"
        "workers": 4,               // 1, 2, 4 or 8
        "pin_cores": false,         // pin workers to cores 0..n-1 (or "cores")
        "cores": null,              // explicit core ids, one per worker
        "elevate_priority": false
      },
      "output": {
        "sample_stride": 1,
        "csv_path": "railsim_out.csv",
        "plot": null               // "timeseries" | "phase" | null
      }
    }

Unknown keys are rejected with their path; invariant violations report the
offending key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

from .errors import ConfigError
from .integrate import StepControl
from .model import VehicleParams
from .parallel import SUPPORTED_WORKER_COUNTS, WorkerPlan, make_plan
from .track import TrackProfile

PLOT_KINDS = ("timeseries", "phase")


@dataclass(frozen=True)
class PlanConfig:
    name: str = "body"
    workers: int = 4
    pin_cores: bool = False
    cores: tuple[int, ...] | None = None
    elevate_priority: bool = False

    def build(self) -> WorkerPlan:
        cores = self.cores
        if cores is None and self.pin_cores:
            cores = tuple(range(self.workers))
        priority = "elevated" if self.elevate_priority else "normal"
        return make_plan(self.name, self.workers, cores=cores,
                         priority_hint=priority)


@dataclass(frozen=True)
class OutputConfig:
    sample_stride: int = 1
    csv_path: str = "railsim_out.csv"
    plot: str | None = None


@dataclass(frozen=True)
class SimConfig:
    vehicle: VehicleParams
    track: TrackProfile
    t_span: tuple[float, float]
    step: float
    adaptive: StepControl
    plan: PlanConfig
    output: OutputConfig


_BOOL_FIELDS = {"literal_damper_aliases", "pin_cores", "elevate_priority"}
_INT_FIELDS = {"workers", "sample_stride"}
_STR_FIELDS = {"name", "csv_path", "plot"}


def _coerce(section: str, name: str, value):
    if name in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{name}: expected a boolean, got {value!r}")
        return value
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{name}: expected an integer, got {value!r}")
        return value
    if name in _STR_FIELDS:
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{section}.{name}: expected a string, got {value!r}")
        return value
    if name == "cores":
        if value is None:
            return None
        if (not isinstance(value, list)
                or any(isinstance(v, bool) or not isinstance(v, int) for v in value)):
            raise ConfigError(f"{section}.{name}: expected a list of integers, got {value!r}")
        return tuple(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{name}: expected a number, got {value!r}")
    return float(value)


def _build_section(section: str, cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object, got {data!r}")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown key")
    kwargs = {k: _coerce(section, k, v) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def config_from_dict(data: dict) -> SimConfig:
    """Strictly validated configuration; missing keys fall back to defaults."""
    if not isinstance(data, dict):
        raise ConfigError(f"top level: expected an object, got {data!r}")
    known = {"vehicle", "track", "t_span", "step", "adaptive", "plan", "output"}
    for key in data:
        if key not in known:
            raise ConfigError(f"{key}: unknown key")

    vehicle = _build_section("vehicle", VehicleParams, data.get("vehicle", {}))
    track = _build_section("track", TrackProfile, data.get("track", {}))
    adaptive = _build_section("adaptive", StepControl, data.get("adaptive", {}))
    plan = _build_section("plan", PlanConfig, data.get("plan", {}))
    output = _build_section("output", OutputConfig, data.get("output", {}))

    t_span = data.get("t_span", [0.0, 10.0])
    if (not isinstance(t_span, (list, tuple)) or len(t_span) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in t_span)):
        raise ConfigError(f"t_span: expected [t0, t1], got {t_span!r}")
    t_span = (float(t_span[0]), float(t_span[1]))
    if not t_span[1] > t_span[0]:
        raise ConfigError(f"t_span: need t1 > t0, got {t_span}")

    step = data.get("step", 1e-3)
    if isinstance(step, bool) or not isinstance(step, (int, float)) or not step > 0:
        raise ConfigError(f"step: must be a number > 0, got {step!r}")

    if plan.workers not in SUPPORTED_WORKER_COUNTS:
        raise ConfigError(f"plan.workers: must be one of {SUPPORTED_WORKER_COUNTS}, "
                          f"got {plan.workers}")
    try:
        plan.build()
    except Exception as exc:
        raise ConfigError(f"plan: {exc}") from exc

    if output.plot is not None and output.plot not in PLOT_KINDS:
        raise ConfigError(f"output.plot: must be one of {PLOT_KINDS} or null, "
                          f"got {output.plot!r}")
    if output.sample_stride < 1:
        raise ConfigError(f"output.sample_stride: must be >= 1, got {output.sample_stride}")

    return SimConfig(vehicle=vehicle, track=track, t_span=t_span,
                     step=float(step), adaptive=adaptive, plan=plan, output=output)


def parse_config(path) -> SimConfig:
    """Load and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: SimConfig) -> dict:
    """Plain-dict form that reparses to an equal configuration."""
    def section(obj):
        return {f.name: (list(v) if isinstance(v := getattr(obj, f.name), tuple) else v)
                for f in fields(obj)}

    return {
        "vehicle": section(cfg.vehicle),
        "track": section(cfg.track),
        "t_span": list(cfg.t_span),
        "step": cfg.step,
        "adaptive": section(cfg.adaptive),
        "plan": section(cfg.plan),
        "output": section(cfg.output),
    }


def serialize_config(cfg: SimConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"
