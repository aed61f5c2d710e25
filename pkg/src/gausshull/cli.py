"""Command-line entry point.

    gausshull SUBCOMMAND --config run.toml [--seed N] [--workers N]
                         [--out DIR] [--directions K] [--polylines]

Writes ``records.csv`` (one row per record, header first) and
``summary.json`` into the output directory. The exit status is 0 iff every
configured band passes.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .experiments import (
    RUNNERS,
    as_records,
    check_boundary_condition,
    columns,
    evaluate_bands,
    hull_demo,
    nearest_neighbour_correlation,
    summarize,
)
from .geometry import ellipsoid_to_body

SUBCOMMANDS = {
    "converge": "convergence",
    "continuous": "continuous",
    "maxima": "maxima",
    "bounds": "bounds",
    "moments": "moments",
    "hull-demo": "hull_demo",
    "validate": None,
}


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_records(path: Path, kind: str, records) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(columns(kind))
        for rec in records:
            w.writerow([_cell(v) for v in rec.row()])


def write_polyline(path: Path, points) -> None:
    with path.open("w", newline="") as fh:
        for x, y in np.asarray(points, dtype=float).tolist():
            fh.write(f"{x!r},{y!r}\n")


def validate(cfg: RunConfig) -> dict:
    """Static checks: kernel decay and, for continuous regions, the boundary
    neighbourhood condition. Nothing is simulated."""
    checks = {"kernel_decays": cfg.kernel.decays}
    if cfg.region is not None:
        step = 1.0 if cfg.region.mode == "discrete" else cfg.region.h
        checks["nearest_neighbour_correlation"] = nearest_neighbour_correlation(cfg.kernel, step)
        far = np.zeros(cfg.kernel.m)
        far[0] = max(cfg.region.extents(cfg.region.index[-1]))
        checks["correlation_at_region_extent"] = abs(float(cfg.kernel(far)))
        if cfg.region.mode == "continuous":
            try:
                checks["boundary_ratio"] = check_boundary_condition(cfg)
                checks["boundary_condition"] = True
            except ValueError as exc:
                checks["boundary_condition"] = False
                checks["boundary_error"] = str(exc)
    checks["ok"] = checks["kernel_decays"] and checks.get("boundary_condition", True)
    return checks


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gausshull", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=list(SUBCOMMANDS))
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes (wall time only)")
    p.add_argument("--out", type=Path, help="output directory (overrides [run] out)")
    p.add_argument("--directions", type=int, help="direction grid size")
    p.add_argument("--polylines", action="store_true", help="also export 2D hull/ellipse polylines")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def run(subcommand: str, cfg: RunConfig, out: Path, workers: int = 1, polylines: bool = False) -> int:
    kind = SUBCOMMANDS[subcommand]
    if kind is None:
        checks = validate(cfg)
        print(json.dumps(_clean({"config": cfg.resolved(), "checks": checks}), indent=2, sort_keys=True))
        return 0 if checks["ok"] else 1

    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return 2

    demo = None
    if kind == "hull_demo":
        records, hull, ell = hull_demo(cfg)
        demo = (hull, ell)
    else:
        records = as_records(RUNNERS[kind](cfg, workers=workers))
        if polylines and kind == "convergence":
            _, hull, ell = hull_demo(cfg)
            demo = (hull, ell)

    write_records(out / "records.csv", kind, records)
    if demo is not None and cfg.dim == 2:
        hull, ell = demo
        write_polyline(out / "hull.csv", np.vstack([hull.vertices, hull.vertices[:1]]))
        body, _ = ellipsoid_to_body(ell, cfg.directions)
        write_polyline(out / "ellipsoid.csv", np.vstack([body.vertices, body.vertices[:1]]))

    verdicts = evaluate_bands(records, cfg.bands)
    summary = {
        "tool": "gausshull",
        "version": __version__,
        "subcommand": subcommand,
        "master_seed": cfg.seed,
        "config": cfg.resolved(),
        "summary": summarize(records),
        "bands": verdicts,
        "all_pass": all(v["pass"] for v in verdicts),
    }
    (out / "summary.json").write_text(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")

    failing = [v for v in verdicts if not v["pass"]]
    for v in verdicts:
        status = "PASS" if v["pass"] else "FAIL"
        print(f"{status} {v['aggregate']}({v['statistic']}) = {v['value']:.6g} in [{v['lower']}, {v['upper']}]")
    if failing:
        names = ", ".join(v["statistic"] for v in failing)
        print(f"error: band failures: {names}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.directions is not None:
        cfg = dataclasses.replace(cfg, directions=args.directions)
    out = args.out if args.out is not None else Path(cfg.out)
    try:
        return run(args.subcommand, cfg, out, workers=args.workers, polylines=args.polylines)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
