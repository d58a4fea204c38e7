"""Command-line front end: run scenarios and write CSV/JSON artifacts."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (FitError, decay_character, estimate_group_velocity,
                       implied_kernel_factor, kernel_laplace_table, modified_group_velocity)
from .config import KEYS, ConfigError, ScenarioConfig, parse_config
from .model import (BoundaryLeakError, CFLError, InstabilityError, SolverError,
                    gaussian_spin, retrieve_initial_fields)
from .secular import secular_evolve
from .volterra import EvolveOptions, TransientDrive, evolve

__all__ = ["main", "run_scenario", "write_outputs", "summarize", "EXIT_CODES"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CFL = 2
EXIT_LEAK = 3
EXIT_INSTABILITY = 4
EXIT_IO = 5

EXIT_CODES = {
    "ok": EXIT_OK, "config": EXIT_CONFIG, "cfl": EXIT_CFL,
    "leak": EXIT_LEAK, "instability": EXIT_INSTABILITY, "io": EXIT_IO,
}

FIELDS_HEADER = "xi,re_Es,im_Es,re_Ed,im_Ed,abs_Eplus,abs_Eminus"
DIAG_HEADER = "tau,I_window,I_total,peak_plus_xi,peak_minus_xi"
OUTPUT_GLOBS = ("fields_*.csv", "diagnostics.csv", "run.json")


def _fmt(x: float) -> str:
    return "%.17g" % x


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def simulate(config: ScenarioConfig):
    """Run the configured solver; returns ``(Trajectory, DiagnosticsSeries)``."""
    grid = config.grid
    p = config.params
    spin = gaussian_spin(config.L0, config.center, grid)
    if config.transient_drive:
        initial = retrieve_initial_fields(spin, 0.0, grid)
        drive = TransientDrive(spin, config.kappa)
    else:
        initial = retrieve_initial_fields(spin, config.amplitude, grid)
        drive = None
    opts = EvolveOptions(output_every=config.output_every, window=config.window_bounds,
                         truncation_eps=config.truncation_eps, drive=drive)
    if config.solver == "cold":
        return evolve(initial, p, grid, opts)
    mode = "full-pair" if config.solver == "secular-pair" else "adiabatic-diffusion"
    return secular_evolve(initial, p, grid, mode, opts)


def summarize(config: ScenarioConfig, series) -> dict:
    I = series.I_window
    out = {
        "solver": config.solver,
        "a": config.a,
        "tan2theta": config.params.tan2theta,
        "I_window_initial": float(I[0]),
        "I_window_final": float(I[-1]),
        "I_window_ratio": None,
        "half_time": None,
        "loglinear_r2": None,
        "velocity": None,
    }
    if I[0] > 0:
        out["I_window_ratio"] = float(I[-1] / I[0])
        if np.all(I > 0):
            dc = decay_character(series)
            out["half_time"] = dc.half_time
            out["loglinear_r2"] = _finite_or_none(dc.loglinear_r2)
    try:
        fit = estimate_group_velocity(series, config.fit_window)
        vel = {"speed": fit.speed, "r_squared": _finite_or_none(fit.r_squared),
               "fit_window": list(fit.fit_window),
               "modified_group_velocity_f1": modified_group_velocity(config.params)}
        try:
            vel["implied_kernel_factor"] = implied_kernel_factor(fit.speed, config.params)
        except ValueError:
            vel["implied_kernel_factor"] = None
        out["velocity"] = vel
    except FitError as exc:
        out["velocity"] = {"error": str(exc)}
    return out


def summary_line(summary: dict) -> str:
    def num(x, spec=".6g"):
        return "n/a" if x is None else format(x, spec)

    parts = [f"solver={summary['solver']}", f"a={summary['a']:.6g}",
             f"half_time={num(summary['half_time'])}",
             f"I_window(final)/I(0)={num(summary['I_window_ratio'])}"]
    vel = summary["velocity"]
    if vel and "speed" in vel:
        lo, hi = vel["fit_window"]
        parts.append(f"velocity={vel['speed']:.4f} (r2={num(vel['r_squared'], '.4f')}, "
                     f"tau in [{lo:g}, {hi:g}])")
    else:
        parts.append(f"velocity=n/a ({vel['error'] if vel else 'no fit'})")
    return " ".join(parts)


def _fields_name(tau: float, width: int, decimals: int) -> str:
    # Zero padded so that a plain directory listing is in time order.
    return f"fields_{tau:0{width}.{decimals}f}.csv"


def _name_format(config: ScenarioConfig):
    spacing = config.output_every * config.d_tau
    decimals = max(6, int(math.ceil(-math.log10(spacing))) + 3)
    digits = len(str(int(config.tau_max)))
    return digits + 1 + decimals, decimals


def _prepare_dir(out_dir: Path, force: bool):
    if out_dir.exists():
        if not force:
            raise FileExistsError(f"output directory {out_dir} exists (use --force to overwrite)")
        if not out_dir.is_dir():
            raise NotADirectoryError(f"{out_dir} is not a directory")
        for pattern in OUTPUT_GLOBS:
            for old in out_dir.glob(pattern):
                old.unlink()
    else:
        out_dir.mkdir(parents=True)


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_outputs(trajectory, diagnostics, config: ScenarioConfig, out_dir,
                  summary: Optional[dict] = None, force: bool = False) -> list:
    """Write field snapshots, the diagnostics table and ``run.json``.

    Returns the written paths. Raises FileExistsError for an existing
    ``out_dir`` unless ``force`` is set.
    """
    out_dir = Path(out_dir)
    _prepare_dir(out_dir, force)
    grid = config.grid
    xi = grid.xi
    written = []
    width, decimals = _name_format(config)
    for state in trajectory.snapshots:
        Ep, Em = np.abs(state.E_plus), np.abs(state.E_minus)
        cols = (xi, state.Es.real, state.Es.imag, state.Ed.real, state.Ed.imag, Ep, Em)
        lines = [FIELDS_HEADER]
        lines.extend(",".join(_fmt(c[i]) for c in cols) for i in range(grid.n_xi))
        path = out_dir / _fields_name(state.tau, width, decimals)
        _write_text(path, "\n".join(lines) + "\n")
        written.append(path)

    rows = [DIAG_HEADER]
    for i in range(len(diagnostics)):
        rows.append(",".join(_fmt(v[i]) for v in (
            diagnostics.tau, diagnostics.I_window, diagnostics.I_total,
            diagnostics.peak_plus_pos, diagnostics.peak_minus_pos)))
    path = out_dir / "diagnostics.csv"
    _write_text(path, "\n".join(rows) + "\n")
    written.append(path)

    meta = {
        "version": __version__,
        "config": config.as_dict(),
        "config_text": config.to_text(),
        "grid": {"xi_min": grid.xi_min, "xi_max": grid.xi_max, "n_xi": grid.n_xi,
                 "d_xi": grid.d_xi, "d_tau": grid.d_tau, "n_steps": grid.n_steps,
                 "tau_max": grid.tau_max, "output_every": config.output_every,
                 "window": list(config.window_bounds)},
        "summary": summary if summary is not None else summarize(config, diagnostics),
    }
    path = out_dir / "run.json"
    _write_text(path, json.dumps(meta, indent=2, sort_keys=True, allow_nan=False) + "\n")
    written.append(path)
    return written


def run_scenario(config: ScenarioConfig, out_dir, force: bool = False, stream=None) -> int:
    """Run ``config`` and write outputs; returns the process exit status."""
    stream = stream if stream is not None else sys.stdout
    err = sys.stderr
    out_dir = Path(out_dir)
    if out_dir.exists() and not force:
        print(f"error: output directory {out_dir} exists (use --force to overwrite)", file=err)
        return EXIT_IO
    try:
        traj, series = simulate(config)
    except CFLError as exc:
        print(f"error: stability limit violated: {exc}", file=err)
        return EXIT_CFL
    except BoundaryLeakError as exc:
        print(f"error: field reached the domain edge: {exc}", file=err)
        return EXIT_LEAK
    except InstabilityError as exc:
        print(f"error: unstable integration: {exc}", file=err)
        return EXIT_INSTABILITY
    except SolverError as exc:
        print(f"error: solver failure: {exc}", file=err)
        return EXIT_INSTABILITY
    except ValueError as exc:
        print(f"error: invalid scenario: {exc}", file=err)
        return EXIT_CONFIG
    summary = summarize(config, series)
    try:
        write_outputs(traj, series, config, out_dir, summary, force=force)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=err)
        return EXIT_IO
    print(summary_line(summary), file=stream)
    return EXIT_OK


def _float_list(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def _cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_scenario(config, args.out, force=args.force)


def _cmd_verify(args) -> int:
    rows = kernel_laplace_table(args.a, args.s)
    print(f"{'a':>10} {'s':>10} {'plus_closed':>22} {'plus_quad':>22} "
          f"{'minus_closed':>22} {'minus_quad':>22} {'max_rel_err':>10}")
    worst = 0.0
    for a, s, pc, pq, mc, mq in rows:
        err = max(abs(pc - pq) / abs(pc), abs(mc - mq) / abs(mc))
        worst = max(worst, err)
        print(f"{a:10.4g} {s:10.4g} {pc:22.15e} {pq:22.15e} {mc:22.15e} {mq:22.15e} {err:10.2e}")
    print(f"max relative difference: {worst:.2e}")
    return EXIT_OK if worst < 1e-6 else 1


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k:16s} {v}" for k, v in KEYS.items())
    parser = argparse.ArgumentParser(
        prog="stationary-light",
        description="Stationary light pulse solvers for cold and hot atomic media.",
        epilog=f"config keys (key=value per line, # comments):\n{keys}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("config")
    run.add_argument("--out", required=True, help="output directory (must not exist)")
    run.add_argument("--force", action="store_true", help="overwrite an existing output directory")
    run.set_defaults(func=_cmd_run)

    ver = sub.add_parser("verify-kernels", help="closed-form kernel transforms vs quadrature")
    ver.add_argument("--a", type=_float_list, default=[0.02, 0.5, 2.0, 20.0])
    ver.add_argument("--s", type=_float_list, default=[0.01, 0.1, 1.0, 10.0])
    ver.set_defaults(func=_cmd_verify)

    version = sub.add_parser("version", help="print the package version")
    version.set_defaults(func=lambda args: print(__version__) or EXIT_OK)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
