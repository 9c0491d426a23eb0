"""Configuration parsing, run orchestration, and deterministic serialization.

Config files are INI-style with sections [region], [agents], [protocol],
[mobility], [instrumentation] and optionally [experiment].  Unknown keys and
duplicate keys are hard errors.  All randomness flows from the config seed;
the REDWAVE_SEED environment variable is the only environment override.

CLI verbs: ``run`` (single run), ``sweep`` (experiment plan), ``audit``
(instrument checks with per-cell dumps), ``isolated`` (isolated-agent
experiment).  Exit codes: 0 success, 2 config error, 3 run failure with
--expect-completion, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import instrument
from .epidemic import RunRecord, SimParams, run
from .errors import ConfigurationError, RedwaveError
from .experiments import ExperimentPlan, SweepResult, isolated_count, replicate
from .geometry import Region, build_cell_grid
from .mobility import MobilityMode, RngStream

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN_FAILURE = 3
EXIT_IO = 4

_SCHEMA = {
    "region": {"kind", "size"},
    "agents": {"n", "density_one"},
    "protocol": {
        "r",
        "k",
        "phase_order",
        "transmission_scope",
        "sources",
        "max_steps",
        "regime",
    },
    "mobility": {"mode", "rho", "burn_in"},
    "instrumentation": {"cell_side", "gamma", "eta1", "eta2", "c0", "alpha"},
    "experiment": {"sweep_axis", "sweep_values", "replicas", "seed"},
}


def _fmt(x) -> str:
    """Serialize a number with 17 significant digits (bit-exact round trip)."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


class _StrictParser(configparser.ConfigParser):
    def __init__(self) -> None:
        super().__init__(strict=True, interpolation=None)

    def optionxform(self, optionstr: str) -> str:
        return optionstr.lower()


def _validate_keys(cp: configparser.ConfigParser) -> None:
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in section [{section}]")


def _check_regime(regime: str, params: SimParams, cell_side: float | None) -> None:
    """Enforce the declared parameter regime's guards."""
    R, rho = params.R, params.mobility.rho
    if regime == "sec3":
        if rho > R / (2 * math.sqrt(2)) * (1 + 1e-12):
            raise ConfigurationError(
                f"regime sec3 requires rho <= R/(2*sqrt(2)) = {R / (2 * math.sqrt(2)):g}, got {rho:g}"
            )
    elif regime == "sec4":
        upper = params.R**2 / math.sqrt(math.log(params.n)) if params.n > 1 else math.inf
        if not (R / 2 <= rho * (1 + 1e-12) and rho <= upper * (1 + 1e-12)):
            raise ConfigurationError(
                f"regime sec4 requires R/2 <= rho <= R^2/sqrt(log n), got rho={rho:g}"
            )
    elif regime == "sec5":
        if rho < 5 * R * (1 - 1e-12):
            raise ConfigurationError(f"regime sec5 requires rho >= 5R, got rho={rho:g}")
        if cell_side is not None:
            ratio = rho / cell_side
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigurationError(
                    "regime sec5 requires rho to be an integer multiple of the cell side"
                )
        if params.mobility.kind != "cellular":
            raise ConfigurationError("regime sec5 requires cellular mobility")
    else:
        raise ConfigurationError(f"unknown regime {regime!r}")


def parse_config(path: str):
    """Parse and validate a config file.

    Returns a SimParams, or an ExperimentPlan when an [experiment] section is
    present.  The REDWAVE_SEED environment variable overrides the seed.
    """
    cp = _StrictParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from exc
    _validate_keys(cp)

    try:
        region = Region(cp.get("region", "kind"), cp.getfloat("region", "size"))
        mode = cp.get("mobility", "mode", fallback="standard")
        rho = cp.getfloat("mobility", "rho", fallback=0.0)
        mobility = MobilityMode(mode, rho)
        burn_in = (
            cp.getint("mobility", "burn_in") if cp.has_option("mobility", "burn_in") else None
        )

        if cp.getboolean("agents", "density_one", fallback=False):
            n = max(1, int(math.floor(region.area)))
        else:
            n = cp.getint("agents", "n")

        sources: object = cp.get("protocol", "sources", fallback="random")
        if isinstance(sources, str) and sources != "random":
            pts = []
            for part in sources.split(";"):
                x, y = part.split(",")
                pts.append((float(x), float(y)))
            sources = pts

        seed = cp.getint("experiment", "seed", fallback=0) if cp.has_section("experiment") else 0
        env_seed = os.environ.get("REDWAVE_SEED")
        if env_seed is not None:
            seed = int(env_seed)

        params = SimParams(
            region=region,
            n=n,
            R=cp.getfloat("protocol", "r"),
            k=cp.getint("protocol", "k", fallback=1),
            mobility=mobility,
            phase_order=cp.get("protocol", "phase_order", fallback="transmit_then_move"),
            transmission_scope=cp.get("protocol", "transmission_scope", fallback="euclidean"),
            sources=sources,
            seed=seed,
            max_steps=cp.getint("protocol", "max_steps", fallback=10_000),
            burn_in=burn_in,
        )
    except (configparser.Error, ValueError) as exc:
        raise ConfigurationError(f"invalid config value: {exc}") from exc

    cell_side = (
        cp.getfloat("instrumentation", "cell_side")
        if cp.has_option("instrumentation", "cell_side")
        else None
    )
    regime = cp.get("protocol", "regime", fallback=None)
    if regime is not None:
        _check_regime(regime, params, cell_side)

    is_plan = cp.has_section("experiment") and any(
        cp.has_option("experiment", key)
        for key in ("sweep_axis", "sweep_values", "replicas")
    )
    if not is_plan:
        return params

    axis = cp.get("experiment", "sweep_axis", fallback=None)
    values: tuple = ()
    if cp.has_option("experiment", "sweep_values"):
        values = tuple(float(v) for v in cp.get("experiment", "sweep_values").split(","))
    return ExperimentPlan(
        base=params,
        sweep_axis=axis,
        sweep_values=values,
        replicas=cp.getint("experiment", "replicas", fallback=1),
        density_one=cp.getboolean("agents", "density_one", fallback=False),
    )


def instrumentation_options(path: str) -> dict:
    """The [instrumentation] section as a plain dict of floats."""
    cp = _StrictParser()
    with open(path) as fh:
        cp.read_file(fh)
    _validate_keys(cp)
    out = {}
    if cp.has_section("instrumentation"):
        for key in cp["instrumentation"]:
            out[key] = cp.getfloat("instrumentation", key)
    return out


def emit_config(params: SimParams, path: str) -> None:
    """Canonical config emitter; parse(emit(params)) round-trips."""
    cp = _StrictParser()
    cp["region"] = {"kind": params.region.kind, "size": _fmt(params.region.size)}
    cp["agents"] = {"n": str(params.n)}
    sources = params.sources
    if not isinstance(sources, str):
        sources = ";".join(f"{_fmt(float(x))},{_fmt(float(y))}" for x, y in sources)
    cp["protocol"] = {
        "r": _fmt(params.R),
        "k": str(params.k),
        "phase_order": params.phase_order,
        "transmission_scope": params.transmission_scope,
        "sources": sources,
        "max_steps": str(params.max_steps),
    }
    cp["mobility"] = {"mode": params.mobility.kind, "rho": _fmt(params.mobility.rho)}
    if params.burn_in is not None:
        cp["mobility"]["burn_in"] = str(params.burn_in)
    cp["experiment"] = {"seed": str(params.seed)}
    with open(path, "w") as fh:
        cp.write(fh)


# ---------------------------------------------------------------------------
# trace and summary emission
# ---------------------------------------------------------------------------

_TRACE_FIELDS = [
    "schema",
    "step",
    "white",
    "red",
    "black",
    "regular",
    "max_wavefront",
    "mean_wavefront",
    "cells",
]


def _trace_rows(record: RunRecord, dump_cells: str = "never", grid=None) -> list[dict]:
    rows = []
    nsteps = len(record.series.white)
    for t in range(nsteps):
        row: dict = {
            "schema": SCHEMA_VERSION,
            "step": t,
            "white": record.series.white[t],
            "red": record.series.red[t],
            "black": record.series.black[t],
            "regular": None,
            "max_wavefront": None,
            "mean_wavefront": None,
            "cells": None,
        }
        if grid is not None and record.snapshots is not None:
            snap = record.snapshots[t]
            states = instrument.classify_cells(snap, grid)
            row["regular"] = instrument.is_regular(states, grid).regular
            dists = [
                d
                for c, d in instrument.wavefront_distances(states, grid).items()
                if states[c] is instrument.CellState.WHITE and math.isfinite(d)
            ]
            if dists:
                row["max_wavefront"] = max(dists)
                row["mean_wavefront"] = float(np.mean(dists))
            if dump_cells == "each" or (dump_cells == "final" and t == nsteps - 1):
                row["cells"] = {f"{c[0]},{c[1]}": s.value for c, s in sorted(states.items())}
        rows.append(row)
    return rows


def emit_trace(
    record: RunRecord,
    fmt: str,
    path: str,
    dump_cells: str = "never",
    grid=None,
) -> None:
    """Write the per-step trace, byte-identical for identical records."""
    rows = _trace_rows(record, dump_cells=dump_cells, grid=grid)
    buf = io.StringIO()
    if fmt == "ndjson":
        for row in rows:
            buf.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            buf.write("\n")
    elif fmt == "csv":
        writer = csv.DictWriter(buf, fieldnames=_TRACE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            out = dict(row)
            if out["cells"] is not None:
                out["cells"] = json.dumps(out["cells"], sort_keys=True, separators=(",", ":"))
            for key in ("max_wavefront", "mean_wavefront"):
                if out[key] is not None:
                    out[key] = _fmt(float(out[key]))
            writer.writerow(out)
    else:
        raise ConfigurationError(f"unknown trace format {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc}") from exc


_SUMMARY_FIELDS = [
    "row_kind",
    "point",
    "replica",
    "seed",
    "L",
    "n",
    "R",
    "rho",
    "k",
    "completion_time",
    "failed",
    "failed_at",
    "t_r_over_d",
    "t_rho_over_d",
    "median_t",
    "completion_fraction",
]


def emit_summary(sweep: SweepResult, path: str) -> None:
    """One CSV row per (sweep point, replica), plus one aggregate row per
    point.  Failed runs carry the failure step and a flag, never a fake
    completion time."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_SUMMARY_FIELDS, lineterminator="\n")
    writer.writeheader()
    for p_idx, point in enumerate(sweep.points):
        params = point.params
        D = params.region.diameter
        rho = params.mobility.rho
        for r_idx, (t, f) in enumerate(zip(point.completion_times, point.failures)):
            row = {
                "row_kind": "replica",
                "point": p_idx,
                "replica": r_idx,
                "seed": params.seed + r_idx,
                "L": _fmt(params.region.size),
                "n": params.n,
                "R": _fmt(params.R),
                "rho": _fmt(rho),
                "k": params.k,
                "completion_time": "" if t is None else t,
                "failed": t is None,
                "failed_at": "" if f is None else f,
                "t_r_over_d": "" if t is None else _fmt(t * params.R / D),
                "t_rho_over_d": "" if t is None or rho == 0 else _fmt(t * rho / D),
                "median_t": "",
                "completion_fraction": "",
            }
            writer.writerow(row)
        med = point.median_completion()
        writer.writerow(
            {
                "row_kind": "aggregate",
                "point": p_idx,
                "replica": "",
                "seed": "",
                "L": _fmt(params.region.size),
                "n": params.n,
                "R": _fmt(params.R),
                "rho": _fmt(rho),
                "k": params.k,
                "completion_time": "",
                "failed": "",
                "failed_at": "",
                "t_r_over_d": "" if math.isnan(med) else _fmt(med * params.R / D),
                "t_rho_over_d": ""
                if math.isnan(med) or rho == 0
                else _fmt(med * rho / D),
                "median_t": "" if math.isnan(med) else _fmt(med),
                "completion_fraction": _fmt(point.completion_fraction()),
            }
        )
    try:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write summary {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="redwave")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "sweep", "audit", "isolated"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=".")
        sp.add_argument("--format", choices=["csv", "ndjson"], default="ndjson")
        sp.add_argument(
            "--dump-cells", choices=["never", "each", "final"], default="never"
        )
        if verb == "run":
            sp.add_argument("--expect-completion", action="store_true")
        if verb == "isolated":
            sp.add_argument("--trials", type=int, default=1)
    return parser


def _instrument_grid(params: SimParams, opts: dict):
    side = opts.get("cell_side")
    if side is None:
        return None
    gamma = opts.get("gamma", 0.3)
    return build_cell_grid(params.region, side, gamma)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        parsed = parse_config(args.config)
        opts = instrumentation_options(args.config)
        if args.seed is not None:
            if isinstance(parsed, ExperimentPlan):
                parsed = replace(parsed, base=replace(parsed.base, seed=args.seed))
            else:
                parsed = replace(parsed, seed=args.seed)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        os.makedirs(args.out, exist_ok=True)
        if args.verb == "run":
            if isinstance(parsed, ExperimentPlan):
                print("config error: run verb needs a single-run config", file=sys.stderr)
                return EXIT_CONFIG
            grid = _instrument_grid(parsed, opts)
            rec = run(parsed, record_snapshots=grid is not None)
            ext = "ndjson" if args.format == "ndjson" else "csv"
            out = os.path.join(args.out, f"trace.{ext}")
            emit_trace(rec, args.format, out, dump_cells=args.dump_cells, grid=grid)
            print(
                f"completion_time={rec.completion_time} failed_at={rec.failed_at} "
                f"trace={out}"
            )
            if args.expect_completion and rec.completion_time is None:
                return EXIT_RUN_FAILURE
        elif args.verb == "sweep":
            if not isinstance(parsed, ExperimentPlan):
                parsed = ExperimentPlan(base=parsed, density_one=False)
            result = replicate(parsed)
            out = os.path.join(args.out, "summary.csv")
            emit_summary(result, out)
            print(f"summary={out}")
        elif args.verb == "audit":
            if isinstance(parsed, ExperimentPlan):
                print("config error: audit verb needs a single-run config", file=sys.stderr)
                return EXIT_CONFIG
            grid = _instrument_grid(parsed, opts)
            if grid is None:
                print(
                    "config error: audit needs [instrumentation] cell_side",
                    file=sys.stderr,
                )
                return EXIT_CONFIG
            rec = run(parsed, record_snapshots=True)
            ext = "ndjson" if args.format == "ndjson" else "csv"
            out = os.path.join(args.out, f"audit.{ext}")
            dump = args.dump_cells if args.dump_cells != "never" else "each"
            emit_trace(rec, args.format, out, dump_cells=dump, grid=grid)
            print(f"audit={out}")
        elif args.verb == "isolated":
            if isinstance(parsed, ExperimentPlan):
                parsed = parsed.base
            total = 0
            bound = 0.0
            for trial in range(args.trials):
                res = isolated_count(
                    parsed.n, parsed.R, parsed.region, RngStream(parsed.seed + trial)
                )
                total += res.count
                bound = res.bound
            mean = total / args.trials
            print(f"mean_isolated={_fmt(mean)} bound={_fmt(bound)}")
    except RedwaveError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
