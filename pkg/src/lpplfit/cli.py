"""Command-line interface: ``lpplfit {fit,legacy-fit,profile,xsection,scan,synth}``.

Exit codes:
  0  success (an unqualified fit is still a success)
  2  usage error (unknown flag, invalid value)
  3  input/output error (unreadable file, malformed CSV, bad window dates)
  4  calibration error (no usable fit could be produced)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    WORKERS_ENV,
    CalibrationError,
    FitConfig,
    cross_section,
    default_workers,
    fit,
    grid_local_minima_2d,
    legacy_fit,
    profile_tc,
    rolling_scan,
)
from .core import DomainError, PhaseParams
from .data import CsvParseError, EmptyWindowError, FitWindow, SynthSpec, load_csv, slice_window, synth_generate, to_csv
from .linear import RankDeficiencyError
from .optimize import OptimizerConfig

log = logging.getLogger("lpplfit")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CALIBRATION = 4

SIG_DIGITS = 12


class UsageError(Exception):
    pass


def _num(x):
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return _num(obj)


def dumps_json(payload: dict) -> str:
    return json.dumps(_clean(payload), indent=2) + "\n"


def _csv_cell(v) -> str:
    v = _num(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return str(v)


def dumps_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow(_csv_cell(v) for v in row.values())
    return buf.getvalue()


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return v


def _add_data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--input", required=True, help="CSV file of date,price rows (ISO dates; header optional)")
    g.add_argument("--t1", help="first date of the fit window (default: first date in file)")
    g.add_argument("--t2", help="last date of the fit window (default: last date in file)")
    g.add_argument("--min-window", type=_positive_int, default=30, help="minimum observations in a window (default: 30)")


def _add_fit_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("search")
    g.add_argument("--n-starts", type=_positive_int, default=20, help="random (m, omega) starts per critical time (default: 20)")
    g.add_argument("--seed", type=_seed, default=0, help="random seed for start points (default: 0)")
    g.add_argument("--x-tol", type=_positive_float, default=1e-8, help="simplex size tolerance (default: 1e-8)")
    g.add_argument("--f-tol", type=_positive_float, default=1e-10, help="simplex cost-spread tolerance (default: 1e-10)")
    g.add_argument("--max-iter", type=_positive_int, default=2000, help="simplex iteration cap (default: 2000)")
    g.add_argument("--tc-first", type=_positive_float, default=1.0, help="first critical time, trading days past t2 (default: 1)")
    g.add_argument("--horizon", type=_positive_float, default=90.0, help="last critical time, trading days past t2 (default: 90)")
    g.add_argument("--tc-step", type=_positive_float, default=1.0, help="critical-time grid step in trading days (default: 1)")
    g.add_argument("--minima-factor", type=float, default=10.0, help="a minimum is distinct if its cost is within this factor of the best (default: 10)")
    g.add_argument("--legacy-starts", type=_positive_int, default=20, help="starts of the 4-D legacy search (default: 20)")
    g.add_argument(
        "--workers",
        type=_positive_int,
        default=None,
        help=f"worker processes for profile and scan (default: ${WORKERS_ENV} or 1)",
    )


def _add_output_args(p: argparse.ArgumentParser, formats=("json", "csv")) -> None:
    g = p.add_argument_group("output")
    g.add_argument("--output", "-o", help="output file (default: standard output)")
    g.add_argument("--format", choices=formats, default=formats[0], help=f"output format (default: {formats[0]})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpplfit",
        description="Calibrate the log-periodic power law bubble model with slaved linear parameters.",
        epilog="exit codes: 0 success (unqualified fits included), 2 usage error, "
        "3 input/output error, 4 calibration error",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="diagnostics level on standard error (default: WARNING)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("fit", help="profile the critical time and fit all seven parameters")
    _add_data_args(p), _add_fit_args(p), _add_output_args(p)

    p = sub.add_parser("legacy-fit", help="4-D (t_c, m, omega, phi) search with three slaved parameters")
    _add_data_args(p), _add_fit_args(p), _add_output_args(p)

    p = sub.add_parser("profile", help="F2(t_c) with slaved m and omega on the critical-time grid")
    _add_data_args(p), _add_fit_args(p), _add_output_args(p)

    p = sub.add_parser("xsection", help="cost on a 2-D grid of two nonlinear parameters")
    _add_data_args(p), _add_fit_args(p), _add_output_args(p)
    p.add_argument("--axes", required=True, help="two of tc,m,omega,phi, comma separated (e.g. m,omega)")
    p.add_argument("--fix", action="append", default=[], metavar="NAME=VALUE", help="value of a parameter not on an axis; tc may be an index or an ISO date present in the input (repeatable)")
    p.add_argument("--grid", action="append", default=[], metavar="NAME=LO:HI:N", help="axis grid with N points from LO to HI (default: stylized box or the t_c grid)")
    p.add_argument("--cost", choices=["F1", "S1"], default="F1", help="F1 (four slaved parameters) or legacy S1 (default: F1)")

    p = sub.add_parser("scan", help="profile moving windows and count distinct minima")
    _add_data_args(p), _add_fit_args(p), _add_output_args(p)
    p.add_argument("--window-length", type=_positive_int, default=126, help="window length in trading days (default: 126)")
    p.add_argument("--step", type=_positive_int, default=5, help="window step in trading days (default: 5)")

    p = sub.add_parser("synth", help="write a synthetic LPPL price series as CSV")
    p.add_argument("--n", type=_positive_int, default=150, help="number of observations (default: 150)")
    p.add_argument("--tc-offset", type=_positive_float, default=30.0, help="critical time in trading days past the last observation (default: 30)")
    p.add_argument("--m", type=float, default=0.6, help="power-law exponent (default: 0.6)")
    p.add_argument("--omega", type=float, default=9.0, help="log-frequency (default: 9)")
    p.add_argument("--A", type=float, default=8.0, help="log-price level (default: 8)")
    p.add_argument("--B", type=float, default=-1.0, help="power-law amplitude (default: -1)")
    p.add_argument("--C", type=float, default=0.2, help="oscillation amplitude, >= 0 (default: 0.2)")
    p.add_argument("--phi", type=float, default=1.0, help="phase in radians (default: 1)")
    p.add_argument("--sigma", type=float, default=0.0, help="standard deviation of log-price noise (default: 0)")
    p.add_argument("--seed", type=_seed, default=0, help="noise seed (default: 0)")
    p.add_argument("--output", "-o", help="output file (default: standard output)")
    return parser


def _config(args) -> FitConfig:
    workers = args.workers if args.workers is not None else default_workers()
    try:
        return FitConfig(
            optimizer=OptimizerConfig(
                max_iterations=args.max_iter,
                x_tolerance=args.x_tol,
                f_tolerance=args.f_tol,
                n_starts=args.n_starts,
                rng_seed=args.seed,
                cluster_tolerance=FitConfig().optimizer.cluster_tolerance,
            ),
            tc_first=args.tc_first,
            tc_horizon=args.horizon,
            tc_step=args.tc_step,
            minima_cost_factor=args.minima_factor,
            legacy_n_starts=args.legacy_starts,
            min_window=args.min_window,
            workers=workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(args):
    series = load_csv(args.input)
    t1 = args.t1 or series.dates[0]
    t2 = args.t2 or series.dates[-1]
    try:
        window = slice_window(series, t1, t2, min_length=args.min_window)
    except EmptyWindowError:
        raise
    except ValueError as exc:
        raise EmptyWindowError(str(exc)) from None
    return series, window


def _window_info(series, window: FitWindow) -> dict:
    return {
        "t1": series.dates[window.start_index].isoformat(),
        "t2": series.dates[window.end_index].isoformat(),
        "start_index": window.start_index,
        "end_index": window.end_index,
        "n_points": window.length,
    }


def _fit_payload(command, series, result) -> dict:
    p, ph = result.params, result.phase_view
    return {
        "command": command,
        "window": _window_info(series, result.window),
        "params": {"t_c": p.t_c, "m": p.m, "omega": p.omega, "A": p.A, "B": p.B, "C1": p.C1, "C2": p.C2},
        "phase_view": {"t_c": ph.t_c, "m": ph.m, "omega": ph.omega, "A": ph.A, "B": ph.B, "C": ph.C, "phi": ph.phi},
        "t_c_days_after_t2": p.t_c - float(series.index[result.window.end_index]),
        "cost": result.cost,
        "qualification": result.qualification.as_dict(),
        "minima_count": result.minima_count,
        "n_evaluations": result.n_evaluations,
        "diagnostics": {"residuals": result.diagnostics},
    }


def _profile_payload(prof) -> dict:
    return {
        "tc_grid": prof.tc_grid,
        "f2_values": prof.f2_values,
        "m_hat": prof.m_hat,
        "omega_hat": prof.omega_hat,
        "qualified": [bool(q) for q in prof.qualified],
        "minima_counts": [int(c) for c in prof.minima_counts],
        "local_minima": prof.local_minima,
        "best_index": prof.best_index,
        "n_evaluations": prof.n_evaluations,
    }


def _fit_rows(payload) -> list[dict]:
    row = {"t1": payload["window"]["t1"], "t2": payload["window"]["t2"]}
    row.update(payload["params"])
    row.update({"C": payload["phase_view"]["C"], "phi": payload["phase_view"]["phi"]})
    row.update(
        {
            "cost": payload["cost"],
            "qualified": payload["qualification"]["qualified"],
            "minima_count": payload["minima_count"],
            "n_evaluations": payload["n_evaluations"],
        }
    )
    return [row]


def _parse_fix(items, series) -> dict[str, float]:
    fixed = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--fix expects NAME=VALUE, got {item!r}")
        name = name.strip()
        value = value.strip()
        if name == "tc" and "-" in value[1:]:
            try:
                idx = [d.isoformat() for d in series.dates].index(value)
            except ValueError:
                raise UsageError(f"date {value} not in the input series") from None
            fixed[name] = float(series.index[idx])
            continue
        try:
            fixed[name] = float(value)
        except ValueError:
            raise UsageError(f"invalid number in --fix {item!r}") from None
    return fixed


def _parse_grids(items) -> dict[str, np.ndarray]:
    grids = {}
    for item in items:
        name, sep, spec = item.partition("=")
        parts = spec.split(":")
        if not sep or len(parts) != 3:
            raise UsageError(f"--grid expects NAME=LO:HI:N, got {item!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"invalid --grid {item!r}") from None
        if n < 2 or not hi > lo:
            raise UsageError(f"--grid {item!r} needs N >= 2 and HI > LO")
        grids[name.strip()] = np.linspace(lo, hi, n)
    return grids


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (OSError, CsvParseError, EmptyWindowError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (CalibrationError, RankDeficiencyError, DomainError) as exc:
        log.error("calibration failed: %s", exc)
        return EXIT_CALIBRATION


def _dispatch(args) -> int:
    if args.command == "synth":
        try:
            params = PhaseParams(args.n - 1 + args.tc_offset, args.m, args.omega, args.A, args.B, args.C, args.phi)
            spec = SynthSpec(params, args.n, args.sigma, args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        _emit(to_csv(synth_generate(spec)), args.output)
        return EXIT_OK

    config = _config(args)
    series, window = _load(args)
    log.info("window %s..%s (%d points)", series.dates[window.start_index], series.dates[window.end_index], window.length)

    if args.command in ("fit", "legacy-fit"):
        result = (fit if args.command == "fit" else legacy_fit)(series, window, config)
        payload = _fit_payload(args.command, series, result)
        if args.command == "fit":
            payload["profile"] = _profile_payload(result.profile)
        if not result.qualification.qualified:
            log.info("fit not qualified: %s", [v.describe() for v in result.qualification.violations])
        text = dumps_json(payload) if args.format == "json" else dumps_csv(_fit_rows(payload))

    elif args.command == "profile":
        prof = profile_tc(series, window, config)
        rows = list(prof.rows())
        if args.format == "json":
            text = dumps_json({"command": "profile", "window": _window_info(series, window), **_profile_payload(prof)})
        else:
            text = dumps_csv(rows)

    elif args.command == "xsection":
        axes = tuple(a.strip() for a in args.axes.split(","))
        if len(axes) != 2:
            raise UsageError("--axes expects exactly two names")
        fixed = _parse_fix(args.fix, series)
        try:
            xs = cross_section(series, window, axes, fixed, _parse_grids(args.grid), args.cost, config)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if args.format == "json":
            text = dumps_json(
                {
                    "command": "xsection",
                    "window": _window_info(series, window),
                    "cost": xs.cost,
                    "axes": list(xs.axes),
                    "fixed": xs.fixed,
                    xs.axes[0]: xs.first,
                    xs.axes[1]: xs.second,
                    "values": xs.values,
                    "grid_local_minima": [list(ij) for ij in grid_local_minima_2d(xs.values)],
                }
            )
        else:
            text = dumps_csv(list(xs.rows()))

    elif args.command == "scan":
        if args.t1 or args.t2:
            sub = series if window.length == len(series) else _subseries(series, window)
        else:
            sub = series
        try:
            report = rolling_scan(sub, args.window_length, args.step, config)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        rows = [vars(r) for r in report.records]
        if args.format == "json":
            text = dumps_json(
                {
                    "command": "scan",
                    "window_length": report.window_length,
                    "step": report.step,
                    "minima_histogram": {str(k): v for k, v in report.minima_histogram().items()},
                    "records": rows,
                }
            )
        else:
            text = dumps_csv(rows)
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown command {args.command}")

    _emit(text, args.output)
    return EXIT_OK


def _subseries(series, window: FitWindow):
    sl = slice(window.start_index, window.end_index + 1)
    return replace(series, dates=series.dates[sl], price=series.price[sl], log_price=series.log_price[sl], index=series.index[sl])


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
