"""Command-line entry point: ``evsiting {validate,run,queue,mclp,report}``.

Exit codes: 0 success, 1 other stage failure, 2 validation or configuration
error, 3 infeasible optimisation, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import demand, equity, hexgrid, mclp, pipeline, queueing
from .config import ConfigError, load_config, resolve_input
from .ingest import ValidationError, validate_inputs

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3, 4
INFEASIBLE = (mclp.InfeasibleCoverage, queueing.InfeasiblePorts, queueing.InfeasibleSite)

log = logging.getLogger("evsiting")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON configuration file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--debug", action="store_true", help="write every intermediate table")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                   help="override a config value, e.g. mclp.P=8 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evsiting", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("validate", help="check every configured input file")
    _common(p)
    p = sub.add_parser("run", help="run the full pipeline and write the build plan")
    _common(p)

    p = sub.add_parser("queue", help="size or evaluate a single site")
    _common(p)
    p.add_argument("--lam", type=float, required=True, help="arrivals per hour")
    p.add_argument("--type", dest="charger_type", default="DCFC", choices=sorted(
        queueing.SERVICE_RATES))
    p.add_argument("--mu", type=float, help="service rate (default: per charger type)")
    p.add_argument("--ports", type=int, help="evaluate this port count instead of optimising")
    p.add_argument("--outage", type=float, default=0.0, help="outage probability p")
    p.add_argument("--capacity", type=int, help="system capacity N (default ports + extra)")
    p.add_argument("--salary", type=float, default=30.0, help="hourly waiting cost")
    p.add_argument("--area", default="urban", choices=sorted(queueing.AREA_INSTALL_MULTIPLIER))

    p = sub.add_parser("mclp", help="greedy coverage solver on candidate and demand tables")
    _common(p)
    p.add_argument("--candidates", type=Path, required=True)
    p.add_argument("--demand", type=Path, required=True)

    p = sub.add_parser("report", help="recompute coverage and equity for an existing plan")
    _common(p)
    p.add_argument("--plan", type=Path, required=True, help="build_plan.geojson")
    return parser


def _config(args):
    return load_config(args.config, args.overrides, args.seed)


def _out_dir(args, cfg) -> Path:
    if args.out is not None:
        return args.out
    return Path(cfg["_base_dir"]) / cfg["output_dir"]


def cmd_validate(args) -> int:
    report = validate_inputs(_config(args))
    for issue in report.warnings:
        print(f"warning: {issue}", file=sys.stderr)
    for issue in report.errors:
        print(f"error: {issue}", file=sys.stderr)
    print(f"{len(report.errors)} error(s), {len(report.warnings)} warning(s)")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    plan = pipeline.run(cfg, out, debug=args.debug)
    print(f"{len(plan.sites)} sites, capital {plan.total_capital:.2f}; outputs in {out}")
    return EXIT_OK


def cmd_queue(args) -> int:
    cfg = _config(args)
    q = cfg["queue"]
    mu = args.mu if args.mu is not None else q["service_rates"][args.charger_type]
    table = q["costs"][args.charger_type]
    cost = queueing.CostParams(args.charger_type, table["unit"],
                               table["install"] * q["area_install_multiplier"][args.area],
                               args.salary)
    extra = q["extra_capacity"]
    if args.ports is not None and args.capacity is not None:
        extra = args.capacity - args.ports
    caps = queueing.PortCaps(c_max=q["c_max"], rho_cap=q["rho_cap"], extra_capacity=extra)
    if args.ports is None:
        plan = queueing.optimize_ports(args.lam, mu, args.outage, cost, caps, "site",
                                       q["convention"])
    else:
        plan = queueing.evaluate_ports(args.lam, mu, args.outage, args.ports, cost, caps,
                                       "site", q["convention"])
    m = plan.metrics
    doc = {"type": plan.charger_type, "ports": plan.c, "c_eff": m.c_eff, "rho_eff": m.rho_eff,
           "P0": m.P0, "Lq": m.Lq, "Wq": m.Wq, "L": m.L, "pi_N": m.pi_N,
           "C_station": plan.C_station, "C_waiting": plan.C_waiting,
           "objective": plan.objective, "feasible": m.rho_eff <= q["rho_cap"]}
    print(json.dumps(doc, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_mclp(args) -> int:
    cfg = _config(args)
    m = cfg["mclp"]
    spec = hexgrid.GridSpec.from_dict(cfg["grid"])
    cands = [c for c in mclp.read_candidates_csv(args.candidates, spec) if not c.excluded]
    rows = demand.read_demand_csv(args.demand)
    if not cands or not rows:
        raise ValueError("need at least one candidate and one demand point")
    lat = np.array([r[1] for r in rows])
    lon = np.array([r[2] for r in rows])
    dx, dy = hexgrid.project(lat, lon, spec)
    weights = np.array([r[3] for r in rows])
    index = mclp.build_coverage_index([(c.x, c.y) for c in cands], np.column_stack([dx, dy]),
                                      m["radius_m"])
    ids = [c.id for c in cands]
    sigma = [c.sigma for c in cands]
    zones = [c.zone_id for c in cands]
    if m["P"] is not None:
        result = mclp.greedy_budget(index, weights, int(m["P"]), ids, sigma, zones, m["zone_cap"])
    else:
        result = mclp.greedy_coverage(index, weights, float(m["alpha"]), ids, sigma, zones,
                                      m["zone_cap"])
    by_id = {c.id: c for c in cands}
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    mclp.write_selection_csv(out / "selection.csv", result, by_id)
    print(f"{len(result.site_ids)} sites cover {result.coverage_fraction:.6f} of demand")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _config(args)
    spec = hexgrid.GridSpec.from_dict(cfg["grid"])
    cells = hexgrid.read_cells_csv(resolve_input(cfg, "cells"))
    sites = pipeline.read_plan_sites(args.plan, spec)
    cov, eq = pipeline.compute_reports(cells, sites, spec, cfg["report"]["radii_m"],
                                       cfg["report"]["area_samples"], cfg["seed"],
                                       cfg["demand"]["feature_resolution"])
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w", newline="\n") as fh:
        fh.write(equity.metrics_json(cov))
    with open(out / "equity.json", "w", newline="\n") as fh:
        fh.write(pipeline.json_text(pipeline.equity_doc(eq)))
    for c in cov:
        print(f"R={c.radius_m:.0f} m: tile {c.tile_coverage:.4f}, area {c.area_coverage:.4f}")
    print(f"equity gap (low - high) {eq.gap:.1f} m")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "run": cmd_run, "queue": cmd_queue, "mclp": cmd_mclp,
            "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, INFEASIBLE):
            return EXIT_INFEASIBLE
        if isinstance(exc.cause, OSError):
            return EXIT_IO
        return EXIT_FAIL
    except INFEASIBLE as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
