"""POI load per cell and weighted demand points."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .hexgrid import GridSpec, HexIndex, ancestor, centroid, point_to_cell
from .roadgraph import minmax

# Priority rank from most to least EV-charging pull.
POI_CLASSES = (
    "commercial-retail",
    "parking",
    "transport-hub",
    "workplace",
    "government-public",
    "residential",
)
POI_FIELDS = ["lat", "lon", "canonical_class", "count"]
DEMAND_FIELDS = ["id", "lat", "lon", "p_norm", "s_norm", "d"]


@dataclass(frozen=True)
class PoiRecord:
    lat: float
    lon: float
    canonical_class: str
    count: int = 1
    record_id: str = ""

    def __post_init__(self):
        if self.canonical_class not in POI_CLASSES:
            raise ValueError(
                f"POI {self.record_id or (self.lat, self.lon)}: "
                f"unknown canonical class {self.canonical_class!r}")
        if self.count < 1:
            raise ValueError(f"POI {self.record_id}: count must be >= 1")


@dataclass(frozen=True)
class PoiWeightTable:
    weights: dict = field(default_factory=lambda: {
        cls: float(len(POI_CLASSES) + 1 - rank)
        for rank, cls in enumerate(POI_CLASSES, start=1)
    })

    def __post_init__(self):
        missing = set(POI_CLASSES) - set(self.weights)
        if missing:
            raise ValueError(f"weight table lacks classes {sorted(missing)}")
        if any(w <= 0 for w in self.weights.values()):
            raise ValueError("POI weights must be positive")

    def __getitem__(self, cls: str) -> float:
        return self.weights[cls]


@dataclass
class DemandPoint:
    id: str
    cell: HexIndex
    lat: float
    lon: float
    p_norm: float
    s_norm: float
    weight: float


@dataclass
class DemandBuild:
    points: list
    orphans: int = 0

    @property
    def weights(self) -> np.ndarray:
        return np.array([p.weight for p in self.points])


def poi_score(cells: Iterable[HexIndex], pois: Iterable[PoiRecord],
              table: PoiWeightTable, spec: GridSpec) -> dict:
    """Weighted POI count per cell; every requested cell gets an entry."""
    cells = list(cells)
    resolutions = {c.resolution for c in cells}
    if len(resolutions) > 1:
        raise ValueError("cells must share one resolution")
    scores = {c: 0.0 for c in cells}
    if not cells:
        return scores
    res = resolutions.pop()
    for poi in pois:
        if poi.canonical_class not in table.weights:
            raise ValueError(f"POI {poi.record_id}: unknown class {poi.canonical_class!r}")
        idx = point_to_cell(poi.lat, poi.lon, res, spec)
        if idx in scores:
            scores[idx] += table[poi.canonical_class] * poi.count
    return scores


def build_demand_points(fine_cells: Iterable[HexIndex], parent_features: Mapping,
                        spec: GridSpec, w_pop: float = 0.6, w_poi: float = 0.4,
                        parent_res: int = 8) -> DemandBuild:
    """Demand points at fine-cell centroids, weighted from parent-cell features.

    ``parent_features`` maps a ``parent_res`` cell to ``(population, poi_score)``.
    Both inherited quantities are min-max scaled over all demand points before
    ``d = w_pop * p + w_poi * s``. Fine cells without a featured parent are
    dropped and counted in ``orphans``.
    """
    if w_pop < 0 or w_poi < 0:
        raise ValueError("demand weights must be non-negative")
    kept, pops, pois = [], [], []
    orphans = 0
    for idx in sorted(fine_cells):
        feats = parent_features.get(ancestor(idx, parent_res, spec))
        if feats is None:
            orphans += 1
            continue
        kept.append(idx)
        pops.append(float(feats[0]))
        pois.append(float(feats[1]))
    p_norm = minmax(pops)
    s_norm = minmax(pois)
    points = []
    for idx, p, s in zip(kept, p_norm, s_norm):
        lat, lon = centroid(idx, spec)
        points.append(DemandPoint(f"{idx.resolution}:{idx.q}:{idx.r}", idx, lat, lon,
                                  float(p), float(s), float(w_pop * p + w_poi * s)))
    return DemandBuild(points, orphans)


def read_pois_csv(path) -> list[PoiRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(POI_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                out.append(PoiRecord(float(row["lat"]), float(row["lon"]),
                                     row["canonical_class"], int(row["count"]),
                                     record_id=f"{path}:{line}"))
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    return out


def write_pois_csv(path, pois: Iterable[PoiRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POI_FIELDS)
        for p in pois:
            writer.writerow([f"{p.lat:.6f}", f"{p.lon:.6f}", p.canonical_class, p.count])


def write_demand_csv(path, points: Iterable[DemandPoint]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DEMAND_FIELDS)
        for p in points:
            writer.writerow([p.id, f"{p.lat:.6f}", f"{p.lon:.6f}",
                             f"{p.p_norm:.9f}", f"{p.s_norm:.9f}", f"{p.weight:.9f}"])


def class_counts(pois: Iterable[PoiRecord], res: int, spec: GridSpec) -> dict:
    """``cell -> {class: count}``; mostly useful for inspection."""
    counts: dict = defaultdict(lambda: defaultdict(int))
    for poi in pois:
        counts[point_to_cell(poi.lat, poi.lon, res, spec)][poi.canonical_class] += poi.count
    return {k: dict(v) for k, v in counts.items()}


def read_demand_csv(path) -> list:
    """``(id, lat, lon, d)`` rows of a demand-point table."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "lat", "lon", "d"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                d = float(row["d"])
                if d < 0 or not math.isfinite(d):
                    raise ValueError(f"demand weight {d} must be finite and >= 0")
                out.append((row["id"], float(row["lat"]), float(row["lon"]), d))
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    return out
