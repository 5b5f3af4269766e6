"""Command-line toolkit: simulate, fit, acf, influence, and mc subcommands.

Report-producing commands write a PNG figure next to every delimited
output. All outputs are deterministic for a fixed seed except measured
wall times (timing.csv and timing.png), which are inherently
run-dependent. The environment variable SPARFIMA_SEED overrides any seed
given on the command line or in a Monte Carlo config file.

Exit codes: 0 success, 2 usage error, 3 numerical/domain failure (a
machine-readable error JSON is written to stderr), 4 Monte Carlo run
degraded (some cell had more than 50% fit failures).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (ACF_SCHEMA_VERSION, acf_to_csv,
                          residual_diagnostics, spatial_acf)
from .errors import ParseError, SparfimaError
from .estimation import FIT_SCHEMA_VERSION, FitConfig, fit_qml
from .model import (FIELD_SCHEMA_VERSION, LatticeField, ModelSpec,
                    influence_profile, save_field, simulate)
from .montecarlo import (MC_SCHEMA_VERSION, McConfig, run_mc, write_manifest)
from .weights import (TRIPLET_SCHEMA_VERSION, SiteSet, queen_contiguity,
                      rook_contiguity, row_standardize)

SEED_ENV_VAR = "SPARFIMA_SEED"


def _version_string() -> str:
    return (f"sparfima {__version__} (schemas: fit-json={FIT_SCHEMA_VERSION}, "
            f"mc-report={MC_SCHEMA_VERSION}, field-csv={FIELD_SCHEMA_VERSION}, "
            f"acf-csv={ACF_SCHEMA_VERSION}, "
            f"weights-triplet={TRIPLET_SCHEMA_VERSION})")


# -- data ingestion ----------------------------------------------------------


def load_field(path, format: str = "long_csv",
               standardize: bool = False) -> LatticeField:
    """Read a regular-grid field from CSV.

    ``long_csv`` expects a ``row,col,value`` header with zero-based
    indices covering a full grid; ``dense_csv`` expects one CSV row per
    lattice row. With ``standardize`` the values are z-scored,
    (y - mean) / sd with the n-1 denominator.
    """
    if format == "long_csv":
        field = _load_long(path)
    elif format == "dense_csv":
        field = _load_dense(path)
    else:
        raise ValueError(f"unknown format {format!r}")
    if standardize:
        values = field.values
        sd = values.std(ddof=1)
        if sd == 0.0:
            raise ParseError("constant field cannot be standardized")
        field = LatticeField(field.sites, (values - values.mean()) / sd)
    return field


def _load_long(path) -> LatticeField:
    entries = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "row,col,value":
            raise ParseError(f"expected header 'row,col,value', got "
                             f"{header!r}", line=1)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError("expected 3 comma-separated fields",
                                 line=lineno)
            try:
                r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if (r, c) in entries:
                raise ParseError(f"duplicate cell ({r},{c})", line=lineno)
            entries[(r, c)] = v
    if not entries:
        raise ParseError("empty field file")
    rows = max(r for r, _ in entries) + 1
    cols = max(c for _, c in entries) + 1
    if len(entries) != rows * cols:
        missing = rows * cols - len(entries)
        raise ParseError(f"incomplete grid: {missing} of {rows}x{cols} "
                         "cells missing")
    values = np.empty(rows * cols)
    for (r, c), v in entries.items():
        values[r * cols + c] = v
    return LatticeField(SiteSet.regular_grid(rows, cols), values)


def _load_dense(path) -> LatticeField:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if rows and len(row) != len(rows[0]):
                raise ParseError(
                    f"ragged row: expected {len(rows[0])} values, got "
                    f"{len(row)}", line=lineno)
            rows.append(row)
    if not rows:
        raise ParseError("empty field file")
    arr = np.array(rows)
    return LatticeField(SiteSet.regular_grid(*arr.shape), arr.ravel())


# -- helpers -----------------------------------------------------------------


def _lattice(kind: str, rows: int, cols: int):
    builder = {"queen": queen_contiguity, "rook": rook_contiguity}[kind]
    return row_standardize(builder(rows, cols))


def _seed(args_seed: int | None) -> int:
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    if args_seed is None:
        raise ValueError(f"no seed given and {SEED_ENV_VAR} not set")
    return args_seed


def _grid_shape(field: LatticeField) -> tuple[int, int]:
    sites = field.sites
    if sites.layout != "regular_grid":
        raise ValueError("command requires a regular-grid field")
    return sites.rows, sites.cols


def _figure_path(out) -> Path:
    return Path(out).with_suffix(".png")


# -- subcommands -------------------------------------------------------------


def _cmd_simulate(args) -> int:
    w = _lattice(args.weights, args.rows, args.cols)
    sites = SiteSet.regular_grid(args.rows, args.cols)
    spec = ModelSpec(rho=args.rho, lam=args.lam, d=args.d,
                     sigma2=args.sigma2, w1=w, w2=w, alpha=args.alpha,
                     sites=sites)
    field = simulate(spec, _seed(args.seed))
    save_field(field, args.out)
    from .plotting import plot_field
    plot_field(field.values, args.rows, args.cols, _figure_path(args.out))
    return 0


def _cmd_fit(args) -> int:
    field = load_field(args.data, format=args.format,
                       standardize=args.standardize)
    rows, cols = _grid_shape(field)
    w = _lattice(args.weights, rows, cols)
    fit = fit_qml(field.values, w, config=FitConfig(variant=args.variant))
    out = Path(args.out)
    residuals_name = out.stem + ".residuals.csv"
    doc = fit.to_json_dict(include_residuals=False)
    doc["residuals_file"] = residuals_name
    doc["residual_diagnostics"] = residual_diagnostics(fit, w).to_dict()
    with out.open("w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with (out.parent / residuals_name).open("w", newline="") as fh:
        fh.write("index,residual\n")
        for i, r in enumerate(fit.residuals):
            fh.write(f"{i},{r:.17g}\n")
    return 0


def _cmd_acf(args) -> int:
    field = load_field(args.data, format=args.format,
                       standardize=args.standardize)
    rows, cols = _grid_shape(field)
    builder = {"queen": queen_contiguity, "rook": rook_contiguity}
    w_raw = builder[args.weights](rows, cols)
    results = spatial_acf(field.values, w_raw, args.max_lag)
    acf_to_csv(results, args.out)
    from .plotting import plot_acf
    plot_acf(results, _figure_path(args.out))
    return 0


def _cmd_influence(args) -> int:
    w = _lattice("queen", args.rows, args.cols)
    sites = SiteSet.regular_grid(args.rows, args.cols)
    spec = ModelSpec(rho=args.rho, lam=0.0, d=args.d, sigma2=1.0,
                     w1=w, w2=w, sites=sites)
    center = (args.rows // 2) * args.cols + (args.cols // 2)
    profile = influence_profile(spec, center)
    with open(args.out, "w", newline="") as fh:
        fh.write("distance,weight\n")
        for dist, weight in profile:
            fh.write(f"{dist:.17g},{weight:.17g}\n")
    from .plotting import plot_influence
    plot_influence(profile, _figure_path(args.out),
                   label=f"rho={args.rho:g}, d={args.d:g}")
    return 0


def _cmd_mc(args) -> int:
    config = McConfig.from_json(args.config)
    env = os.environ.get(SEED_ENV_VAR)
    overrides = {}
    if env is not None:
        overrides["seed"] = int(env)
    if args.workers is not None:
        overrides["parallelism"] = args.workers
    if overrides:
        from dataclasses import replace
        config = replace(config, **overrides)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(idx, total, cell):
        print(f"[{idx + 1}/{total}] grid={cell['grid_size']} "
              f"rho={cell['rho']:g} d={cell['d']:g} lam={cell['lam']:g}",
              file=sys.stderr)

    report = run_mc(config, progress=progress)
    report.write_rmse_bias_csv(out_dir / "rmse_bias.csv")
    report.write_timing_csv(out_dir / "timing.csv")
    write_manifest(config, out_dir)
    from .plotting import plot_rmse, plot_timing
    plot_rmse(report.cells, out_dir / "rmse.png")
    plot_timing(report.cells, out_dir / "timing.png")
    return 4 if report.degraded else 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparfima",
        description="Simulation, QML estimation and diagnostics for "
                    "spatial ARFIMA processes.")
    parser.add_argument("--version", action="version",
                        version=_version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a field on a lattice")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--weights", choices=["queen", "rook"], default="queen")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="QML fit of a field")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["long", "dense"], default="long")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--variant",
                   choices=["sparfima", "sparfima-noma", "sarma", "sar"],
                   default="sparfima-noma")
    p.add_argument("--weights", choices=["queen", "rook"], default="queen")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("acf", help="spatial autocorrelation function")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["long", "dense"], default="long")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--weights", choices=["queen", "rook"], default="queen")
    p.add_argument("--max-lag", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_acf)

    p = sub.add_parser("influence", help="influence-decay profile")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_influence)

    p = sub.add_parser("mc", help="Monte Carlo RMSE/bias study")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_mc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.format = getattr(args, "format", None)
    if args.format == "long":
        args.format = "long_csv"
    elif args.format == "dense":
        args.format = "dense_csv"
    try:
        return args.func(args)
    except SparfimaError as exc:
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(error), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
