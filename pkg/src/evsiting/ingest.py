"""Input loading and validation with file/line/field diagnostics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .config import resolve_input
from .demand import POI_CLASSES, POI_FIELDS
from .forecast import COUNTY_FIELDS, TRAFFIC_FIELDS
from .hexgrid import CELL_FIELDS
from .roadgraph import EDGE_FIELDS

HUB_FIELDS = ["hub_id", "lat", "lon"]


class ValidationError(ValueError):
    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("\n".join(str(i) for i in report.errors))


@dataclass
class Issue:
    file: str
    line: int | None
    field: str | None
    message: str

    def __str__(self):
        where = self.file if self.line is None else f"{self.file}:{self.line}"
        return f"{where}: {self.field + ': ' if self.field else ''}{self.message}"


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, *args):
        self.errors.append(Issue(*args))

    def warn(self, *args):
        self.warnings.append(Issue(*args))


@dataclass
class Zone:
    zone_id: str
    county_id: str
    area_class: str
    ring: list  # (lat, lon)


def load_zones(path) -> list[Zone]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: expected a GeoJSON FeatureCollection")
    zones = []
    for k, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise ValueError(f"{path}: feature {k}: geometry must be a Polygon")
        ring = [(float(lat), float(lon)) for lon, lat in geom["coordinates"][0]]
        zones.append(Zone(str(props["zone_id"]), str(props.get("county_id", "")),
                          str(props.get("area_class", "urban")), ring))
    return zones


def zones_geojson(zones) -> dict:
    feats = []
    for z in zones:
        ring = [[round(lon, 6), round(lat, 6)] for lat, lon in z.ring]
        if ring[0] != ring[-1]:
            ring.append(ring[0])
        feats.append({"type": "Feature",
                      "geometry": {"type": "Polygon", "coordinates": [ring]},
                      "properties": {"zone_id": z.zone_id, "county_id": z.county_id,
                                     "area_class": z.area_class}})
    return {"type": "FeatureCollection", "features": feats}


def read_hubs_csv(path) -> list:
    hubs = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            hubs.append((row["hub_id"], float(row["lat"]), float(row["lon"])))
    return hubs


def read_exclusions(path) -> set:
    with open(path, newline="") as fh:
        return {row["node_id"] for row in csv.DictReader(fh)}


def _rows(path, required, report: ValidationReport):
    name = str(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        report.error(name, None, None, f"cannot open: {exc.strerror}")
        return []
    with fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        absent = [c for c in required if c not in cols]
        if absent:
            report.error(name, 1, ",".join(absent), "missing column(s)")
            return []
        return [(line, row) for line, row in enumerate(reader, start=2)]


def _num(report, name, line, row, key, lo=None, hi=None, strict_lo=False):
    raw = row.get(key)
    try:
        v = float(raw)
    except (TypeError, ValueError):
        report.error(name, line, key, f"not a number: {raw!r}")
        return None
    if not math.isfinite(v):
        report.error(name, line, key, "not finite")
        return None
    if lo is not None and (v <= lo if strict_lo else v < lo):
        report.error(name, line, key, f"{v} below allowed minimum {lo}")
    if hi is not None and v > hi:
        report.error(name, line, key, f"{v} above allowed maximum {hi}")
    return v


def validate_inputs(cfg: dict) -> ValidationReport:
    """Schema, range and cross-file checks for every configured input."""
    report = ValidationReport()
    zones_path = resolve_input(cfg, "zones")
    zone_ids, county_refs = set(), {}
    try:
        zones = load_zones(zones_path)
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        report.error(str(zones_path), None, None, f"malformed zones file: {exc}")
        zones = []
    multipliers = cfg["queue"]["area_install_multiplier"]
    for z in zones:
        if z.zone_id in zone_ids:
            report.error(str(zones_path), None, "zone_id", f"duplicate zone {z.zone_id!r}")
        zone_ids.add(z.zone_id)
        county_refs[z.zone_id] = z.county_id
        if len(set(z.ring)) < 3:
            report.error(str(zones_path), None, "geometry", f"zone {z.zone_id}: degenerate polygon")
        if z.area_class not in multipliers:
            report.error(str(zones_path), None, "area_class",
                         f"zone {z.zone_id}: unknown area class {z.area_class!r}")

    counties = set()
    path = resolve_input(cfg, "counties")
    for line, row in _rows(path, COUNTY_FIELDS, report):
        counties.add(row["county_id"])
        total = _num(report, str(path), line, row, "vehicle_count", lo=0, strict_lo=True)
        if total is not None and total <= 0:
            report.errors[-1].message = "zero total vehicles: division by zero in EV share"
        _num(report, str(path), line, row, "ev_count", lo=0)
        _num(report, str(path), line, row, "share_2024", lo=0, hi=1)
        _num(report, str(path), line, row, "share_2025", lo=0, hi=1)
        _num(report, str(path), line, row, "avg_hourly_wage", lo=0)
    for zid, cid in sorted(county_refs.items()):
        if cid not in counties:
            report.error(str(zones_path), None, "county_id",
                         f"zone {zid} references unknown county {cid!r}")

    path = resolve_input(cfg, "cells")
    res = cfg["demand"]["feature_resolution"]
    for line, row in _rows(path, CELL_FIELDS, report):
        r = _num(report, str(path), line, row, "res")
        if r is not None and int(r) != res:
            report.error(str(path), line, "res", f"expected resolution {res}, got {int(r)}")
        _num(report, str(path), line, row, "population", lo=0)
        _num(report, str(path), line, row, "poi_score", lo=0)
        _num(report, str(path), line, row, "median_income", lo=0)
        _num(report, str(path), line, row, "ev_share", lo=0, hi=1)
        if row["zone_id"] and row["zone_id"] not in zone_ids:
            report.warn(str(path), line, "zone_id", f"unknown zone {row['zone_id']!r}")

    path = resolve_input(cfg, "edges")
    edge_zones = set()
    for line, row in _rows(path, EDGE_FIELDS, report):
        for key in EDGE_FIELDS[3:]:
            _num(report, str(path), line, row, key)
        if row["node_a_id"] == row["node_b_id"]:
            report.warn(str(path), line, "node_b_id", "self-loop dropped")
        if row["zone_id"] not in zone_ids:
            report.error(str(path), line, "zone_id", f"unknown zone {row['zone_id']!r}")
        edge_zones.add(row["zone_id"])
    for zid in sorted(zone_ids - edge_zones):
        report.warn(str(path), None, "zone_id", f"zone {zid} has no road records")

    path = resolve_input(cfg, "pois")
    if path is not None:
        for line, row in _rows(path, POI_FIELDS, report):
            if row["canonical_class"] not in POI_CLASSES:
                report.error(str(path), line, "canonical_class",
                             f"unknown canonical class {row['canonical_class']!r}")
            c = _num(report, str(path), line, row, "count", lo=1)
            if c is not None and c != int(c):
                report.error(str(path), line, "count", "must be an integer")
            _num(report, str(path), line, row, "lat")
            _num(report, str(path), line, row, "lon")

    path = resolve_input(cfg, "traffic")
    for line, row in _rows(path, TRAFFIC_FIELDS, report):
        for t in range(24):
            key = f"h{t}"
            if not (row.get(key) or "").strip():
                report.error(str(path), line, key, f"missing hour {t}")
            else:
                _num(report, str(path), line, row, key, lo=0)

    for key in ("hubs", "exclusions"):
        path = resolve_input(cfg, key)
        if path is not None and not Path(path).exists():
            report.error(str(path), None, None, "file not found")
    return report
