"""JSON config schemas and builders for the command-line tools.

Every subcommand takes one JSON file. Relative paths inside a config are
resolved against the directory holding the config. Validation errors carry
the dotted path of the offending field (``launch.fwhm_um``, ``wavelength_um``).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .dispersion import LossModel, Scenario, read_power_csv
from .fibermodes import solve_lp_modes
from .launch import FiberBeam, GaussianBeam, LaunchSpec, mpd_preset, read_mpd_csv
from .linkbudget import DEFAULT_Q, BudgetSpec
from .profile import STEP_INDEX, RadialFiberSpec, load_profile, synth_gi_profile

__all__ = ["ConfigError", "SCHEMAS", "load_config", "build_profile", "build_fiber",
           "build_scenario", "build_offsets", "build_budget"]


class ConfigError(ValueError):
    """Config failed validation; ``path`` is the dotted location of the problem."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path or '<root>'}: {message}")


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

_synthetic = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "core_width_um": _pos,
        "core_height_um": _pos,
        "n_clad": {"type": "number", "minimum": 1, "maximum": 3},
        "delta_n": _nonneg,
        "peak_x_um": _num,
        "peak_y_um": _num,
        "step_um": _pos,
        "margin_um": {"type": "number", "minimum": 10},
        "smoothing_um": _nonneg,
    },
}

_profile = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"file": {"type": "string"}, "synthetic": _synthetic},
    "minProperties": 1,
    "maxProperties": 1,
}

_fiber = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "a_um": _pos,
        "na": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "n_clad": {"type": "number", "minimum": 1, "maximum": 3},
        "alpha": {"oneOf": [_pos, {"const": "step"}]},
    },
}

_launch = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["gaussian", "fiber"]},
        "fwhm_um": _pos,
        "preset": {"enum": ["no_mm", "mm"]},
        "mpd_file": {"type": "string"},
        "fiber": _fiber,
        "offset_x_um": _num,
        "offset_y_um": _num,
    },
}

_loss = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "cutoff_index": {"oneOf": [{"type": "integer", "minimum": 0}, {"type": "null"}]},
        "fit": {"type": "string"},
    },
    "maxProperties": 1,
}

_axis = {
    "oneOf": [
        _num,
        {"type": "array", "prefixItems": [_num, _num, _pos], "minItems": 3, "maxItems": 3},
    ]
}

_scan = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "x_um": _axis,
        "y_um": _axis,
        "points_um": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        },
    },
    "minProperties": 1,
}

_solver = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "max_modes": {"type": "integer", "minimum": 1},
        "dlambda_um": _pos,
        "material_slope_per_um": _num,
        "bin_width_ps": _pos,
        "threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
}

_wavelength = {"type": "number", "exclusiveMinimum": 0}

_scenario_props = {
    "profile": _profile,
    "wavelength_um": _wavelength,
    "length_m": _nonneg,
    "launch": _launch,
    "loss": _loss,
    "scan": _scan,
    "solver": _solver,
    "measured": {"type": "string"},
}


def _scenario(*extra_required):
    return {
        "type": "object",
        "additionalProperties": False,
        "required": ["profile", "wavelength_um", "length_m", "launch", *extra_required],
        "properties": _scenario_props,
    }


_trace_source = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "file": {"type": "string"},
        "synthetic": {
            "type": "object",
            "additionalProperties": False,
            "required": ["shape", "ac_fwhm_ps"],
            "properties": {
                "shape": {"enum": ["sech2", "gaussian", "lorentzian"]},
                "ac_fwhm_ps": _pos,
                "snr_db": _num,
                "samples": {"type": "integer", "minimum": 16},
                "span": _pos,
            },
        },
    },
    "minProperties": 1,
    "maxProperties": 1,
}

SCHEMAS = {
    "modes": {
        "type": "object",
        "additionalProperties": False,
        "required": ["profile", "wavelength_um"],
        "properties": _scenario_props,
    },
    "fiber-modes": {
        "type": "object",
        "additionalProperties": False,
        "required": ["fiber", "wavelength_um"],
        "properties": {"fiber": _fiber, "wavelength_um": _wavelength,
                       "radial_step_um": _pos},
    },
    "scan": _scenario("scan"),
    "simulate": _scenario(),
    "fit-loss": _scenario("measured"),
    "fit-pulse": {
        "type": "object",
        "additionalProperties": False,
        "required": ["trace"],
        "properties": {
            "trace": _trace_source,
            "b2b": _trace_source,
            "shapes": {"type": "array", "minItems": 1, "uniqueItems": True,
                       "items": {"enum": ["sech2", "gaussian", "lorentzian"]}},
            "rmse_flag": _pos,
            "floor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        },
    },
    "budget": {
        "type": "object",
        "additionalProperties": False,
        "required": ["launch_power", "nep", "rx_bandwidth", "wg_loss", "length"],
        "properties": {
            "launch_power": _num,
            "nep": _nonneg,
            "rx_bandwidth": _pos,
            "q_factor": _pos,
            "wg_loss": _num,
            "length": _nonneg,
            "other_losses": _num,
        },
    },
}


def _error_path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required" and isinstance(err.instance, dict):
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
    elif err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = err.schema.get("properties", {})
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            parts.append(extra[0])
    return ".".join(parts)


def validate(command: str, data) -> None:
    """Raise :class:`ConfigError` on the first schema violation (deterministic order)."""
    validator = Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(data), key=lambda e: (_error_path(e), e.message))
    if errors:
        e = errors[0]
        raise ConfigError(_error_path(e), e.message)


class Config(dict):
    """Validated config with the directory used to resolve relative paths."""

    base: Path

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base / p


def load_config(command: str, path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    validate(command, data)
    cfg = Config(data)
    cfg.base = path.parent
    return cfg


def build_profile(cfg: Config):
    src = cfg["profile"]
    if "file" in src:
        return load_profile(cfg.path(src["file"]))
    s = src["synthetic"]
    return synth_gi_profile(
        (s.get("core_width_um", 35.0), s.get("core_height_um", 35.0)),
        s.get("n_clad", 1.51),
        s.get("delta_n", 0.01),
        (s.get("peak_x_um", 0.0), s.get("peak_y_um", 10.0)),
        step=s.get("step_um", 0.25),
        margin=s.get("margin_um", 15.0),
        smoothing=s.get("smoothing_um", 1.0),
    )


def build_fiber(block: dict) -> RadialFiberSpec:
    alpha = block.get("alpha", 2.0)
    return RadialFiberSpec(
        a=block.get("a_um", 25.0),
        na=block.get("na", 0.2),
        n_clad=block.get("n_clad", 1.45),
        alpha=STEP_INDEX if alpha == "step" else float(alpha),
    )


def _offset(block) -> tuple:
    return (float(block.get("offset_x_um", 0.0)), float(block.get("offset_y_um", 0.0)))


def build_launch(cfg: Config) -> LaunchSpec:
    block = cfg["launch"]
    if block["kind"] == "gaussian":
        for key in ("preset", "mpd_file", "fiber"):
            if key in block:
                raise ConfigError(f"launch.{key}", "not allowed for a gaussian launch")
        return LaunchSpec(GaussianBeam(block.get("fwhm_um", 4.0)), _offset(block))
    if "fwhm_um" in block:
        raise ConfigError("launch.fwhm_um", "not allowed for a fiber launch")
    if ("preset" in block) == ("mpd_file" in block):
        raise ConfigError("launch.preset", "a fiber launch needs exactly one of preset, mpd_file")
    fms = solve_lp_modes(build_fiber(block.get("fiber", {})), cfg["wavelength_um"])
    if "preset" in block:
        mpd = mpd_preset(block["preset"], fms)
    else:
        mpd = read_mpd_csv(cfg.path(block["mpd_file"]), fms)
    return LaunchSpec(FiberBeam(fms, mpd), _offset(block))


def _axis_values(spec) -> np.ndarray:
    if isinstance(spec, (int, float)):
        return np.array([float(spec)])
    start, stop, step = map(float, spec)
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count < 1:
        raise ValueError("empty axis")
    return start + step * np.arange(count)


def build_offsets(cfg: Config) -> list:
    """Scan offsets in row-major order (y outer, x inner).

    An axis missing from the scan block stays at the launch offset.
    """
    scan = cfg.get("scan")
    if scan is None:
        raise ConfigError("scan", "a scan grid is required")
    if "points_um" in scan:
        if "x_um" in scan or "y_um" in scan:
            raise ConfigError("scan.points_um", "give either points_um or x_um/y_um, not both")
        return [(float(x), float(y)) for x, y in scan["points_um"]]
    try:
        xs = _axis_values(scan.get("x_um", _offset(cfg["launch"])[0]))
    except ValueError:
        raise ConfigError("scan.x_um", "axis range is empty") from None
    try:
        ys = _axis_values(scan.get("y_um", _offset(cfg["launch"])[1]))
    except ValueError:
        raise ConfigError("scan.y_um", "axis range is empty") from None
    return [(float(x), float(y)) for y in ys for x in xs]


def build_scenario(cfg: Config, loss: LossModel | None = None) -> Scenario:
    solver = cfg.get("solver", {})
    if loss is None:
        loss = LossModel()
        block = cfg.get("loss", {})
        if "cutoff_index" in block:
            loss = LossModel(block["cutoff_index"])
    scan = build_offsets(cfg) if "scan" in cfg else None
    return Scenario(
        build_profile(cfg),
        cfg["wavelength_um"],
        cfg["length_m"],
        build_launch(cfg),
        loss,
        max_modes=solver.get("max_modes", 400),
        dlambda=solver.get("dlambda_um", 1e-3),
        material_slope=solver.get("material_slope_per_um", 0.0),
        bin_width=solver.get("bin_width_ps"),
        threshold=solver.get("threshold", 0.5),
        scan=scan,
    )


def loss_fit_source(cfg: Config):
    """Measured power table named by ``loss.fit``, or None."""
    block = cfg.get("loss", {})
    return read_power_csv(cfg.path(block["fit"])) if "fit" in block else None


def build_budget(cfg: Config) -> BudgetSpec:
    data = dict(cfg)
    data.setdefault("q_factor", DEFAULT_Q)
    data.setdefault("other_losses", 0.0)
    return BudgetSpec(**{k: float(v) for k, v in data.items()})
