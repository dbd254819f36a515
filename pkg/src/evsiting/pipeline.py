"""Stage orchestration from inputs to a staged, costed build plan.

Stages run in a fixed order::

    grid -> centrality -> demand -> mclp -> voronoi -> queue -> forecast -> report

Each stage reads the context left by the previous ones. With ``debug=True``
every intermediate table is written next to the final outputs.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely

from . import centrality, demand, equity, forecast, hexgrid, mclp, queueing, roadgraph, voronoi
from .config import check_config, dumps, resolve_input
from .ingest import (ValidationError, load_zones, read_exclusions, read_hubs_csv,
                     validate_inputs)

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class PlannedSite:
    site_id: str
    zone_id: str
    lat: float
    lon: float
    x: float
    y: float
    origin: str  # "mclp" or "guarantee"
    charger_type: str = "DCFC"
    county_id: str = ""
    area_class: str = "urban"
    design_rate: float = 0.0
    plan: queueing.SitePlan | None = None
    activation_year: int | None = None

    @property
    def ports(self) -> int:
        return self.plan.c if self.plan else 0


@dataclass
class BuildPlan:
    sites: list = field(default_factory=list)
    years: list = field(default_factory=list)
    capital_by_year: dict = field(default_factory=dict)
    ports_by_year: dict = field(default_factory=dict)
    coverage: list = field(default_factory=list)
    equity: equity.EquityReport | None = None
    reachability_max_m: float = 0.0
    rho_cap: float = 0.9

    @property
    def total_capital(self) -> float:
        return sum(s.plan.C_station for s in self.sites if s.plan)


# -- staging ---------------------------------------------------------------------

def activation_year(rates: dict, years, mu: float, p: float, min_ports: int,
                    rho_cap: float) -> int:
    """First year whose demand saturates a minimum-size station.

    A site opens once ``rho_eff`` at ``min_ports`` would reach the cap, or in
    the year its demand peaks if it never does, so flat demand opens at once.
    """
    years = sorted(years)
    binding = rho_cap * min_ports * (1.0 - p) * mu
    target = min(max(rates[y] for y in years), binding)
    for y in years:
        if rates[y] >= target * (1.0 - 1e-12):
            return y
    return years[-1]


def stage_plan_by_year(plan: BuildPlan, site_rates: dict, outage: float = 0.0,
                       min_ports_by_type=None) -> BuildPlan:
    """Assign activation years and per-year capital and port stock.

    ``site_rates`` maps site id to ``{year: design arrival rate}``.
    """
    years = sorted(plan.years)
    if min_ports_by_type is None:
        min_ports_by_type = {"DCFC": voronoi.GUARANTEE_PORTS}
    capital = {y: 0.0 for y in years}
    ports = {y: defaultdict(int) for y in years}
    for s in plan.sites:
        mu = queueing.SERVICE_RATES[s.charger_type]
        min_ports = min_ports_by_type.get(s.charger_type, 1)
        s.activation_year = activation_year(site_rates[s.site_id], years, mu, outage,
                                            min_ports, plan.rho_cap)
        capital[s.activation_year] += s.plan.C_station
        for y in years:
            if y >= s.activation_year:
                ports[y][s.charger_type] += s.plan.c
    plan.capital_by_year = capital
    plan.ports_by_year = {y: dict(sorted(v.items())) for y, v in ports.items()}
    return plan


# -- context ---------------------------------------------------------------------

@dataclass
class Context:
    cfg: dict
    spec: hexgrid.GridSpec
    out_dir: Path | None
    debug: bool = False
    data: dict = field(default_factory=dict)

    def write(self, name: str, text: str, debug_only: bool = False) -> None:
        if self.out_dir is None or (debug_only and not self.debug):
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.out_dir / name, "w", newline="\n") as fh:
            fh.write(text)

    def path(self, name: str, debug_only: bool = False):
        if self.out_dir is None or (debug_only and not self.debug):
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name


def json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _r(v: float, nd: int = 6) -> float:
    return float(round(v, nd))


# -- stages ------------------------------------------------------------------------

def stage_grid(ctx: Context) -> None:
    cfg = ctx.cfg
    zones = sorted(load_zones(resolve_input(cfg, "zones")), key=lambda z: z.zone_id)
    cells = hexgrid.read_cells_csv(resolve_input(cfg, "cells"))
    res = cfg["demand"]["feature_resolution"]
    cells = sorted(cells, key=lambda c: c.index)
    table = demand.PoiWeightTable(dict(cfg["demand"]["poi_weights"]))
    pois_path = resolve_input(cfg, "pois")
    if pois_path is not None:
        scores = demand.poi_score([c.index for c in cells], demand.read_pois_csv(pois_path),
                                  table, ctx.spec)
        for c in cells:
            c.poi_score = scores[c.index]
    ctx.data.update(zones=zones, cells=cells, cell_by_index={c.index: c for c in cells},
                    feature_res=res)
    path = ctx.path("cells_scored.csv", debug_only=True)
    if path:
        hexgrid.write_cells_csv(path, cells)


def stage_centrality(ctx: Context) -> None:
    cfg, spec = ctx.cfg, ctx.spec
    ccfg = cfg["centrality"]
    records = roadgraph.read_edges_csv(resolve_input(cfg, "edges"))
    by_zone = defaultdict(list)
    for rec in records:
        by_zone[rec.zone_id].append(rec)
    graphs = {}
    for z in ctx.data["zones"]:
        if not by_zone.get(z.zone_id):
            log.warning("zone %s has no road records; it yields no candidates", z.zone_id)
            continue
        graphs[z.zone_id] = roadgraph.build_graph(z.ring, by_zone[z.zone_id], spec, z.zone_id)
    if not graphs:
        raise ValueError("no zone produced a road graph")
    res = ctx.data["feature_res"]
    cells = ctx.data["cell_by_index"]

    def poi_density(g):
        q, r = hexgrid.xy_to_axial(g.x, g.y, spec.edge(res))
        return np.array([getattr(cells.get(hexgrid.HexIndex(res, int(a), int(b))),
                                 "poi_score", 0.0) for a, b in zip(q, r)])

    train_ids = ccfg["training_zones"] or sorted(graphs)[: ccfg["n_training_zones"]]
    weighted = ccfg["weighted_betweenness"]
    training = [(graphs[z], roadgraph.betweenness(graphs[z], weighted=weighted))
                for z in train_ids]
    config = centrality.TrainConfig(hidden_dim=ccfg["hidden_dim"],
                                    learning_rate=ccfg["learning_rate"],
                                    epochs=ccfg["epochs"], seed=cfg["seed"],
                                    weight_decay=ccfg["weight_decay"])
    model = centrality.train(training, config, poi=[poi_density(g) for g, _ in training])
    scored, candidates = [], []
    excluded = set()
    ex_path = resolve_input(cfg, "exclusions")
    if ex_path is not None:
        excluded = read_exclusions(ex_path)
    for zid in sorted(graphs):
        g = graphs[zid]
        dens = poi_density(g)
        sc = centrality.forward(model, g, centrality.node_features(g, dens))
        kept = centrality.percentile_filter(sc, ccfg["tau"])
        scored.append((sc, kept))
        for k, nid in enumerate(g.node_ids):
            if nid in kept:
                candidates.append(mclp.CandidateSite(
                    id=nid, x=float(g.x[k]), y=float(g.y[k]), zone_id=zid,
                    c_gnn=float(sc.scores[k]), poi_load=float(dens[k]),
                    excluded=nid in excluded, lat=float(g.lat[k]), lon=float(g.lon[k])))
    ctx.data.update(graphs=graphs, model=model, candidates=candidates)
    ctx.write("model.json", model.to_json() + "\n", debug_only=True)
    path = ctx.path("centrality_scores.csv", debug_only=True)
    if path:
        centrality.write_scores_csv(path, scored)


def stage_demand(ctx: Context) -> None:
    cfg, spec = ctx.cfg, ctx.spec
    dcfg = cfg["demand"]
    fine = set()
    for z in ctx.data["zones"]:
        fine |= hexgrid.polyfill(z.ring, dcfg["demand_resolution"], spec)
    parent_feats = {c.index: (c.population, c.poi_score) for c in ctx.data["cells"]}
    built = demand.build_demand_points(fine, parent_feats, spec, dcfg["w_pop"], dcfg["w_poi"],
                                       parent_res=dcfg["feature_resolution"])
    if built.orphans:
        log.warning("%d demand cells have no parent features and were dropped", built.orphans)
    weights = built.weights
    factor = cfg["mclp"]["income_upweight"]
    if factor != 1.0:
        incomes = [ctx.data["cell_by_index"][hexgrid.ancestor(p.cell, dcfg["feature_resolution"],
                                                              spec)].median_income
                   for p in built.points]
        weights = mclp.income_upweight(weights, incomes, factor)
    xy = np.array([hexgrid.centroid_xy(p.cell, spec) for p in built.points]).reshape(-1, 2)
    ctx.data.update(demand=built, demand_xy=xy, demand_weights=weights)
    path = ctx.path("demand_points.csv", debug_only=True)
    if path:
        demand.write_demand_csv(path, built.points)


def stage_mclp(ctx: Context) -> None:
    m = ctx.cfg["mclp"]
    cands = ctx.data["candidates"]
    mclp.assign_rank_scores(cands, m["beta_poi"], m["beta_cent"])
    ranked = mclp.rank_per_zone(cands, m["k"])
    if not ranked:
        raise ValueError("no candidate survived ranking")
    xy = np.array([(c.x, c.y) for c in ranked])
    index = mclp.build_coverage_index(xy, ctx.data["demand_xy"], m["radius_m"])
    weights = ctx.data["demand_weights"]
    ids = [c.id for c in ranked]
    sigma = [c.sigma for c in ranked]
    zones = [c.zone_id for c in ranked]
    if m["one_per_zone"]:
        covered = {c.id: float(weights[s].sum()) for c, s in zip(ranked, index.sets)}
        choice = mclp.score_zone_sites(ranked, covered, m["beta_cent"], m["beta_cov"],
                                       zones=[z.zone_id for z in ctx.data["zones"]])
        order = sorted(choice.chosen.values())
        result = mclp.SelectionResult(total_demand=float(weights.sum()))
        uncovered = np.ones(len(weights), dtype=bool)
        pos = {sid: k for k, sid in enumerate(ids)}
        for sid in order:
            s = index.sets[pos[sid]]
            gain = float(weights[s][uncovered[s]].sum())
            uncovered[s] = False
            result.site_ids.append(sid)
            result.positions.append(pos[sid])
            result.marginal.append(gain)
            result.cumulative.append(result.covered + gain)
    elif m["P"] is not None:
        result = mclp.greedy_budget(index, weights, int(m["P"]), ids, sigma, zones, m["zone_cap"])
    else:
        result = mclp.greedy_coverage(index, weights, float(m["alpha"]), ids, sigma, zones,
                                      m["zone_cap"])
    by_id = {c.id: c for c in ranked}
    ctx.data.update(ranked=ranked, selection=result, site_lookup=by_id)
    path = ctx.path("candidates.csv", debug_only=True)
    if path:
        mclp.write_candidates_csv(path, sorted(cands, key=lambda c: (c.zone_id, c.id)))
    path = ctx.path("selection.csv")
    if path:
        mclp.write_selection_csv(path, result, by_id)
        ctx.write("selection.geojson", json_text({
            "type": "FeatureCollection", "features": mclp.selection_features(result, by_id)}))


def _zone_lookup(ctx: Context):
    polys = []
    for z in ctx.data["zones"]:
        ring = np.asarray(z.ring)
        x, y = hexgrid.project(ring[:, 0], ring[:, 1], ctx.spec)
        polys.append((z, shapely.Polygon(np.column_stack([x, y]))))

    def find(x, y):
        for z, poly in polys:
            if poly.covers(shapely.Point(x, y)):
                return z
        return min(polys, key=lambda zp: zp[1].distance(shapely.Point(x, y)))[0]
    return find


def stage_voronoi(ctx: Context) -> None:
    cfg, spec = ctx.cfg, ctx.spec
    vcfg = cfg["voronoi"]
    type_by_area = cfg["queue"]["charger_type_by_area"]
    find_zone = _zone_lookup(ctx)
    zone_by_id = {z.zone_id: z for z in ctx.data["zones"]}
    sites = []
    for sid in ctx.data["selection"].site_ids:
        c = ctx.data["site_lookup"][sid]
        z = zone_by_id[c.zone_id]
        sites.append(PlannedSite(sid, c.zone_id, c.lat, c.lon, c.x, c.y, "mclp",
                                 type_by_area[z.area_class], z.county_id, z.area_class))
    coarse = defaultdict(float)
    for cell in ctx.data["cells"]:
        coarse[hexgrid.ancestor(cell.index, vcfg["resolution"], spec)] += cell.population
    coarse_ids = sorted(coarse)
    cxy = np.array([hexgrid.centroid_xy(i, spec) for i in coarse_ids])
    cw = np.array([coarse[i] for i in coarse_ids])
    cid = [f"{i.resolution}:{i.q}:{i.r}" for i in coarse_ids]
    hub_xy = [(s.x, s.y) for s in sites if s.charger_type == "DCFC"]
    hub_ids = [s.site_id for s in sites if s.charger_type == "DCFC"]
    hub_path = resolve_input(cfg, "hubs")
    if hub_path is not None:
        for hid, lat, lon in read_hubs_csv(hub_path):
            x, y = hexgrid.project(lat, lon, spec)
            hub_xy.append((float(x), float(y)))
            hub_ids.append(hid)
    added = voronoi.repair_coverage(cxy, np.array(hub_xy).reshape(-1, 2), cw, cid,
                                    vcfg["threshold_m"])
    for h in added:
        lat, lon = hexgrid.unproject(h.x, h.y, spec)
        z = find_zone(h.x, h.y)
        sites.append(PlannedSite(h.hub_id, z.zone_id, float(lat), float(lon), h.x, h.y,
                                 "guarantee", "DCFC", z.county_id, z.area_class))
        hub_xy.append((h.x, h.y))
        hub_ids.append(h.hub_id)
    report = voronoi.assign_nearest(cxy, np.array(hub_xy), hub_ids, cid, vcfg["threshold_m"])
    if report.violations:
        raise RuntimeError(f"reachability repair left {len(report.violations)} violations")
    ctx.data.update(sites=sites, reachability=report, added_hubs=added)
    path = ctx.path("reachability.csv")
    if path:
        voronoi.write_report_csv(path, report)


def _outage(cfg) -> float:
    q = cfg["queue"]
    if not q["outage_events"] or not q["households"]:
        return 0.0
    return queueing.outage_rate(queueing.OutageStats(
        [tuple(e) for e in q["outage_events"]], q["households"], q["days"]))


def stage_queue(ctx: Context) -> None:
    cfg = ctx.cfg
    q = cfg["queue"]
    fcfg = cfg["forecast"]
    traffic = forecast.read_traffic_csv(resolve_input(cfg, "traffic"))
    counties = {c.county_id: c for c in forecast.read_counties_csv(resolve_input(cfg, "counties"))}
    years = sorted(fcfg["years"])
    envelope = forecast.PenetrationEnvelope(fcfg["envelope"])
    betas = forecast.project_counties(list(counties.values()), years, envelope,
                                      fcfg["base_year"])
    # traffic lookup by nearest road node for hubs without their own counts
    node_xy, node_ids = [], []
    for g in ctx.data["graphs"].values():
        for k, nid in enumerate(g.node_ids):
            if nid in traffic:
                node_xy.append((g.x[k], g.y[k]))
                node_ids.append(nid)
    node_xy = np.array(node_xy).reshape(-1, 2)
    p = _outage(cfg)
    caps_base = dict(c_max=q["c_max"], rho_cap=q["rho_cap"], extra_capacity=q["extra_capacity"])
    site_rates = {}
    for s in ctx.data["sites"]:
        key = s.site_id
        if key not in traffic:
            if not len(node_xy):
                raise ValueError(f"no traffic counts available for site {key}")
            d = np.hypot(node_xy[:, 0] - s.x, node_xy[:, 1] - s.y)
            key = node_ids[int(np.argmin(d))]
        profile = forecast.arrival_rates(traffic[key], 1.0, s.site_id)
        gross = profile.design_rate
        site_rates[s.site_id] = {y: gross * betas[(s.county_id, y)] for y in years}
        s.design_rate = site_rates[s.site_id][years[-1]]
        mu = q["service_rates"][s.charger_type]
        cost_tab = q["costs"][s.charger_type]
        cost = queueing.CostParams(
            s.charger_type, cost_tab["unit"],
            cost_tab["install"] * q["area_install_multiplier"][s.area_class],
            counties[s.county_id].avg_hourly_wage)
        c_min = cfg["voronoi"]["min_ports"] if s.charger_type == "DCFC" else 1
        caps = queueing.PortCaps(c_min=c_min, **caps_base)
        s.plan = queueing.optimize_ports(s.design_rate, mu, p, cost, caps, s.site_id,
                                         q["convention"])
    ctx.data.update(site_rates=site_rates, betas=betas, outage=p)
    path = ctx.path("sites.csv")
    if path:
        queueing.write_site_plans_csv(path, [s.plan for s in ctx.data["sites"]])


def stage_forecast(ctx: Context) -> None:
    cfg = ctx.cfg
    plan = BuildPlan(sites=ctx.data["sites"], years=sorted(cfg["forecast"]["years"]),
                     rho_cap=cfg["queue"]["rho_cap"],
                     reachability_max_m=ctx.data["reachability"].max_distance)
    stage_plan_by_year(plan, ctx.data["site_rates"], ctx.data["outage"],
                       {"DCFC": cfg["voronoi"]["min_ports"]})
    ctx.data["plan"] = plan
    path = ctx.path("forecast.csv")
    if path:
        forecast.write_forecast_csv(path, ctx.data["betas"])


def compute_reports(cells, sites_xy, spec, radii, samples, seed, feature_res):
    cell_xy = np.array([hexgrid.centroid_xy(c.index, spec) for c in cells])
    cov = [equity.coverage_metrics(cell_xy, sites_xy, r, cell_edge=spec.edge(feature_res),
                                   samples=samples, seed=seed) for r in radii]
    eq = equity.equity_report(cell_xy, [c.population for c in cells],
                              [c.median_income for c in cells], sites_xy)
    return cov, eq


def stage_report(ctx: Context) -> None:
    cfg = ctx.cfg
    plan = ctx.data["plan"]
    # measure from the published 6-decimal coordinates so `report` reproduces it
    lat = np.round([s.lat for s in plan.sites], 6)
    lon = np.round([s.lon for s in plan.sites], 6)
    sites_xy = np.column_stack(hexgrid.project(lat, lon, ctx.spec))
    plan.coverage, plan.equity = compute_reports(
        ctx.data["cells"], sites_xy, ctx.spec, cfg["report"]["radii_m"],
        cfg["report"]["area_samples"], cfg["seed"], ctx.data["feature_res"])
    ctx.write("metrics.json", equity.metrics_json(plan.coverage))
    ctx.write("equity.json", json_text(equity_doc(plan.equity)))
    ctx.write("build_plan.geojson", json_text(plan_geojson(plan)))
    ctx.write("plan_summary.json", json_text(plan_summary(plan)))


STAGE_FUNCS = {
    "grid": stage_grid, "centrality": stage_centrality, "demand": stage_demand,
    "mclp": stage_mclp, "voronoi": stage_voronoi, "queue": stage_queue,
    "forecast": stage_forecast, "report": stage_report,
}


# -- serialisation ----------------------------------------------------------------

def equity_doc(rep: equity.EquityReport) -> dict:
    d = rep.to_dict()
    d["mean_distance_m"] = {k: _r(v, 3) for k, v in d["mean_distance_m"].items()}
    d["population"] = {k: _r(v, 3) for k, v in d["population"].items()}
    d["gap_m"] = _r(d["gap_m"], 3)
    return d


def plan_geojson(plan: BuildPlan) -> dict:
    feats = []
    for s in sorted(plan.sites, key=lambda s: s.site_id):
        m = s.plan.metrics
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [_r(s.lon), _r(s.lat)]},
            "properties": {
                "site_id": s.site_id, "zone_id": s.zone_id, "origin": s.origin,
                "type": s.charger_type, "ports": s.plan.c, "c_eff": _r(m.c_eff),
                "rho_eff": _r(m.rho_eff, 9), "P0": _r(m.P0, 9), "Lq": _r(m.Lq, 9),
                "Wq": _r(m.Wq, 9), "lambda": _r(s.design_rate, 9),
                "C_station": _r(s.plan.C_station, 2), "C_waiting": _r(s.plan.C_waiting, 6),
                "objective": _r(s.plan.objective, 6), "activation_year": s.activation_year,
            },
        })
    return {"type": "FeatureCollection", "features": feats}


def plan_summary(plan: BuildPlan) -> dict:
    return {
        "n_sites": len(plan.sites),
        "total_capital": _r(plan.total_capital, 2),
        "capital_by_year": {str(y): _r(v, 2) for y, v in plan.capital_by_year.items()},
        "ports_by_year": {str(y): v for y, v in plan.ports_by_year.items()},
        "reachability_max_m": _r(plan.reachability_max_m, 3),
        "coverage": [{"radius_m": c.radius_m, "tile": _r(c.tile_coverage, 6),
                      "area": _r(c.area_coverage, 6)} for c in plan.coverage],
    }


def read_plan_sites(path, spec: hexgrid.GridSpec) -> np.ndarray:
    """Planar coordinates of every point feature in a build-plan GeoJSON."""
    with open(path) as fh:
        doc = json.load(fh)
    pts = [f["geometry"]["coordinates"] for f in doc.get("features", [])
           if (f.get("geometry") or {}).get("type") == "Point"]
    if not pts:
        raise ValueError(f"{path}: no point features")
    lon, lat = np.asarray(pts, dtype=float).T
    x, y = hexgrid.project(lat, lon, spec)
    return np.column_stack([x, y])


# -- entry points ----------------------------------------------------------------

def make_context(cfg: dict, out_dir=None, debug: bool = False) -> Context:
    check_config(cfg)
    out = Path(out_dir) if out_dir is not None else None
    return Context(cfg, hexgrid.GridSpec.from_dict(cfg["grid"]), out, debug)


def run_stages(ctx: Context, until: str | None = None) -> Context:
    report = validate_inputs(ctx.cfg)
    for w in report.warnings:
        log.warning("%s", w)
    if not report.ok:
        raise ValidationError(report)
    if ctx.debug:
        ctx.write("config.json", dumps(ctx.cfg))
    for name in ctx.cfg["stages"]:
        try:
            STAGE_FUNCS[name](ctx)
        except (ValidationError, OSError):
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        if name == until:
            break
    return ctx


def run(cfg: dict, out_dir=None, debug: bool = False) -> BuildPlan:
    ctx = run_stages(make_context(cfg, out_dir, debug))
    return ctx.data["plan"]
