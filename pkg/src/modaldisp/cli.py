"""Command-line front end: ``modaldisp <subcommand> CONFIG [-o OUTPUT]``.

Exit status is 0 on success, 1 for invalid input (bad config, unreadable or
malformed data files, unknown subcommand) and 2 when a numerical step fails.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from numpy.linalg import LinAlgError
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence

from . import __version__
from .config import (
    ConfigError,
    build_budget,
    build_fiber,
    build_offsets,
    build_profile,
    build_scenario,
    load_config,
    loss_fit_source,
)
from .dispersion import DispersionError, fit_loss_model, read_power_csv, scan_offsets, write_scan_csv
from .fibermodes import FiberModeError, solve_lp_modes, write_fiber_modes_csv
from .launch import LaunchError
from .linkbudget import BudgetError, budget
from .modesolver import ModeSolverError, group_indices, solve_modes, write_modes_csv
from .profile import ProfileError
from .pulseanalysis import (
    DECONV_FLOOR,
    RMSE_FLAG,
    SHAPES,
    PulseFitError,
    fit_autocorrelation,
    link_bandwidth,
    read_trace_csv,
    synthetic_trace,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

NUMERICAL_ERRORS = (ModeSolverError, DispersionError, FiberModeError, PulseFitError,
                    ArpackError, ArpackNoConvergence, LinAlgError, ArithmeticError)
INVALID_ERRORS = (ConfigError, ProfileError, LaunchError, BudgetError, ValueError, OSError, KeyError)


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors with status 2; here they are input errors (1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _dump_json(obj) -> str:
    return json.dumps(_json_value(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


@contextmanager
def _sink(output):
    if output is None or output == "-":
        yield sys.stdout
    else:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _write_text(output, text: str) -> None:
    with _sink(output) as fh:
        fh.write(text)


def _write_via_path(output, writer) -> None:
    """Run a path-based writer, routing to stdout when no output path is given."""
    if output is None or output == "-":
        with tempfile.TemporaryDirectory() as tmp:
            p = Path(tmp) / "out"
            writer(p)
            sys.stdout.write(p.read_text(encoding="utf-8"))
    else:
        writer(output)


def cmd_modes(args, cfg) -> None:
    profile = build_profile(cfg)
    solver = cfg.get("solver", {})
    wl = cfg["wavelength_um"]
    ms = solve_modes(profile, wl, solver.get("max_modes", 400))
    ms = group_indices(profile, wl, solver.get("dlambda_um", 1e-3), ms,
                       material_slope=solver.get("material_slope_per_um", 0.0))
    _write_via_path(args.output, lambda p: write_modes_csv(ms, p, args.fields))


def cmd_fiber_modes(args, cfg) -> None:
    fms = solve_lp_modes(build_fiber(cfg["fiber"]), cfg["wavelength_um"],
                         radial_step=cfg.get("radial_step_um", 0.05))
    _write_via_path(args.output, lambda p: write_fiber_modes_csv(fms, p))


def _with_fitted_loss(cfg, scenario):
    measured = loss_fit_source(cfg)
    if measured is None:
        return scenario, None
    fit = fit_loss_model(measured, scenario)
    return scenario.with_(loss=fit.loss), fit


def cmd_scan(args, cfg) -> None:
    scenario, _ = _with_fitted_loss(cfg, build_scenario(cfg))
    rows = scan_offsets(scenario, build_offsets(cfg), threads=args.threads)
    with _sink(args.output) as fh:
        write_scan_csv(rows, fh)


def cmd_simulate(args, cfg) -> None:
    scenario, fit = _with_fitted_loss(cfg, build_scenario(cfg))
    resp = scenario.response()
    report = {
        "wavelength_um": cfg["wavelength_um"],
        "length_m": scenario.length,
        "offset_x_um": scenario.launch.offset[0],
        "offset_y_um": scenario.launch.offset[1],
        "mode_count": len(scenario.modeset),
        "loss_cutoff_index": scenario.loss.cutoff_index,
        "coupled_power": resp.coupled_power,
        "surviving_power": resp.surviving_power,
        "f3db_ghz": resp.f3db,
        "blp_ghz_m": resp.blp,
        "exceeds_nyquist": resp.exceeds_nyquist,
        "threshold": resp.threshold,
        "bin_width_ps": resp.bin_width,
        "impulse_response": {"t_ps": resp.t.tolist(), "h": resp.h.tolist()},
    }
    _write_text(args.output, _dump_json(report))


def cmd_fit_loss(args, cfg) -> None:
    scenario = build_scenario(cfg)
    fit = fit_loss_model(read_power_csv(cfg.path(cfg["measured"])), scenario)
    report = {
        "cutoff_index": fit.loss.cutoff_index,
        "rmse_db": fit.rmse,
        "rmse_by_cutoff_db": [float(v) for v in fit.rmse_by_cutoff],
    }
    _write_text(args.output, _dump_json(report))


def _trace(cfg, block, seed):
    if "file" in block:
        return read_trace_csv(cfg.path(block["file"]))
    s = block["synthetic"]
    return synthetic_trace(s["shape"], s["ac_fwhm_ps"], n=s.get("samples", 4001),
                           span=s.get("span", 4.0), snr_db=s.get("snr_db"), seed=seed)


def cmd_fit_pulse(args, cfg) -> None:
    shapes = tuple(cfg.get("shapes", SHAPES))
    flag = cfg.get("rmse_flag", RMSE_FLAG)

    def fit(block, seed):
        f = fit_autocorrelation(_trace(cfg, block, seed), shapes)
        return replace(f, flagged=bool(f.rmse > flag * f.amplitude_scale))

    out = fit(cfg["trace"], args.seed)
    report = out.report()
    report["flagged"] = out.flagged
    if "b2b" in cfg:
        b2b = fit(cfg["b2b"], None if args.seed is None else args.seed + 1)
        report["b2b"] = dict(b2b.report(), flagged=b2b.flagged)
        report["link_f3db_ghz"] = link_bandwidth(b2b, out, floor=cfg.get("floor", DECONV_FLOOR))
    _write_text(args.output, _dump_json(report))


def cmd_budget(args, cfg) -> None:
    _write_text(args.output, _dump_json(budget(build_budget(cfg)).to_dict()))


COMMANDS = {
    "modes": (cmd_modes, "solve waveguide modes and export the mode table"),
    "fiber-modes": (cmd_fiber_modes, "solve LP modes of a circular fiber"),
    "scan": (cmd_scan, "bandwidth and BLP over a grid of launch offsets"),
    "simulate": (cmd_simulate, "single-offset channel response report"),
    "fit-loss": (cmd_fit_loss, "fit the mode-selective loss cutoff to measured power"),
    "fit-pulse": (cmd_fit_pulse, "fit autocorrelation traces and deconvolve link bandwidth"),
    "budget": (cmd_budget, "link power budget and margin"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modaldisp", description="Modal dispersion toolkit for multimode waveguides.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND",
                                parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("config", help="JSON config file")
        p.add_argument("-o", "--output", help="output file (default: stdout)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker threads for offset scans (default: available cores)")
        p.add_argument("--seed", type=int, default=None, help="seed for synthetic trace noise")
        if name == "modes":
            p.add_argument("--fields", metavar="DIR", help="also write each mode field as a grid CSV")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.command, args.config)
        func(args, cfg)
    except NUMERICAL_ERRORS as exc:
        print(f"modaldisp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"modaldisp: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except INVALID_ERRORS as exc:
        print(f"modaldisp: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
