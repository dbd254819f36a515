"""Multi-resolution hexagonal grid on a local equirectangular projection.

Cells are pointy-top hexagons addressed by axial ``(q, r)`` coordinates at
resolutions 6 (coarsest) through 10 (finest). Every resolution shares the
projection origin as the centroid of cell ``(0, 0)``. Parent and child
relations are defined by centroid containment, so a child belongs to exactly
one parent but the union of a cell's children only approximates its hexagon.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
import shapely

SQRT3 = math.sqrt(3.0)
RESOLUTIONS = (6, 7, 8, 9, 10)
DEFAULT_EDGE_LENGTHS = {6: 14_000.0, 7: 5_300.0, 8: 2_000.0, 9: 760.0, 10: 600.0}

# Maximum offset from the origin, in degrees, before the flat projection is refused.
VALIDITY_BAND_DEG = 15.0

CELL_FIELDS = ["res", "q", "r", "lat", "lon", "population", "poi_score",
               "median_income", "ev_share", "zone_id"]


class HexIndex(NamedTuple):
    resolution: int
    q: int
    r: int


@dataclass(frozen=True)
class GridSpec:
    """Projection origin and per-resolution hexagon edge lengths (meters)."""

    origin_lat: float = 33.75
    origin_lon: float = -84.39
    edge_lengths: dict = field(default_factory=lambda: dict(DEFAULT_EDGE_LENGTHS))
    meters_per_deg_lat: float = 111_320.0
    meters_per_deg_lon_equator: float = 111_320.0

    def __post_init__(self):
        edges = {int(k): float(v) for k, v in self.edge_lengths.items()}
        object.__setattr__(self, "edge_lengths", edges)
        if sorted(edges) != list(RESOLUTIONS):
            raise ValueError(f"edge lengths must cover resolutions {RESOLUTIONS}")
        values = [edges[res] for res in RESOLUTIONS]
        if any(v <= 0 for v in values):
            raise ValueError("edge lengths must be positive")
        if any(a <= b for a, b in zip(values, values[1:])):
            raise ValueError("edge lengths must strictly decrease with resolution")

    @property
    def meters_per_deg_lon(self) -> float:
        return self.meters_per_deg_lon_equator * math.cos(math.radians(self.origin_lat))

    def edge(self, res: int) -> float:
        _check_resolution(res)
        return self.edge_lengths[res]

    def cell_area(self, res: int) -> float:
        """Planar hexagon area in square meters."""
        return 1.5 * SQRT3 * self.edge(res) ** 2

    def to_dict(self) -> dict:
        return {
            "origin_lat": self.origin_lat,
            "origin_lon": self.origin_lon,
            "edge_lengths": {str(k): v for k, v in sorted(self.edge_lengths.items())},
            "meters_per_deg_lat": self.meters_per_deg_lat,
            "meters_per_deg_lon_equator": self.meters_per_deg_lon_equator,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        data = dict(data)
        if "edge_lengths" in data:
            data["edge_lengths"] = {int(k): float(v) for k, v in data["edge_lengths"].items()}
        return cls(**data)


@dataclass
class HexCell:
    index: HexIndex
    lat: float
    lon: float
    population: float = 0.0
    poi_score: float = 0.0
    median_income: float = 0.0
    ev_share: float = 0.0
    zone_id: str = ""

    def __post_init__(self):
        if self.population < 0:
            raise ValueError(f"cell {self.index}: negative population")
        if self.poi_score < 0:
            raise ValueError(f"cell {self.index}: negative poi_score")
        if not 0.0 <= self.ev_share <= 1.0:
            raise ValueError(f"cell {self.index}: ev_share outside [0, 1]")


def _check_resolution(res: int) -> None:
    if res not in RESOLUTIONS:
        raise ValueError(f"unsupported resolution {res!r}; expected one of {RESOLUTIONS}")


# -- projection ---------------------------------------------------------------

def project(lat, lon, spec: GridSpec):
    """Map lat/lon (degrees) to planar meters relative to the origin."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if np.any(np.abs(lat - spec.origin_lat) > VALIDITY_BAND_DEG) or np.any(
        np.abs(lon - spec.origin_lon) > VALIDITY_BAND_DEG
    ):
        raise ValueError("point outside the projection validity band")
    x = (lon - spec.origin_lon) * spec.meters_per_deg_lon
    y = (lat - spec.origin_lat) * spec.meters_per_deg_lat
    return x, y


def unproject(x, y, spec: GridSpec):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lat = spec.origin_lat + y / spec.meters_per_deg_lat
    lon = spec.origin_lon + x / spec.meters_per_deg_lon
    return lat, lon


# -- lattice arithmetic (planar) ---------------------------------------------

def _cube_round(qf, rf):
    qf = np.asarray(qf, dtype=float)
    rf = np.asarray(rf, dtype=float)
    sf = -qf - rf
    q, r, s = np.round(qf), np.round(rf), np.round(sf)
    dq, dr, ds = np.abs(q - qf), np.abs(r - rf), np.abs(s - sf)
    fix_q = (dq > dr) & (dq > ds)
    fix_r = ~fix_q & (dr > ds)
    q = np.where(fix_q, -r - s, q)
    r = np.where(fix_r, -q - s, r)
    return q.astype(np.int64), r.astype(np.int64)


def xy_to_axial(x, y, edge: float):
    """Vectorised planar point to axial cell coordinates."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    qf = (SQRT3 / 3.0 * x - y / 3.0) / edge
    rf = (2.0 / 3.0 * y) / edge
    return _cube_round(qf, rf)


def axial_to_xy(q, r, edge: float):
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    return edge * SQRT3 * (q + r / 2.0), edge * 1.5 * r


def hex_vertices_xy(q: int, r: int, edge: float) -> np.ndarray:
    cx, cy = axial_to_xy(q, r, edge)
    angles = np.radians(30.0 + 60.0 * np.arange(6))
    return np.column_stack([cx + edge * np.cos(angles), cy + edge * np.sin(angles)])


# -- public cell operations --------------------------------------------------

def point_to_cell(lat: float, lon: float, res: int, spec: GridSpec) -> HexIndex:
    """Return the cell at ``res`` whose hexagon contains the point."""
    _check_resolution(res)
    x, y = project(lat, lon, spec)
    q, r = xy_to_axial(x, y, spec.edge(res))
    return HexIndex(res, int(q), int(r))


def points_to_cells(lat, lon, res: int, spec: GridSpec):
    """Vectorised :func:`point_to_cell`; returns axial ``(q, r)`` arrays."""
    _check_resolution(res)
    x, y = project(lat, lon, spec)
    return xy_to_axial(x, y, spec.edge(res))


def centroid_xy(idx: HexIndex, spec: GridSpec) -> tuple[float, float]:
    x, y = axial_to_xy(idx.q, idx.r, spec.edge(idx.resolution))
    return float(x), float(y)


def centroid(idx: HexIndex, spec: GridSpec) -> tuple[float, float]:
    """Cell centroid as ``(lat, lon)``."""
    lat, lon = unproject(*centroid_xy(idx, spec), spec)
    return float(lat), float(lon)


def cell_polygon(idx: HexIndex, spec: GridSpec) -> list[tuple[float, float]]:
    """Closed ring of ``(lat, lon)`` hexagon vertices."""
    verts = hex_vertices_xy(idx.q, idx.r, spec.edge(idx.resolution))
    lat, lon = unproject(verts[:, 0], verts[:, 1], spec)
    ring = list(zip(lat.tolist(), lon.tolist()))
    return ring + ring[:1]


def parent(idx: HexIndex, spec: GridSpec) -> HexIndex:
    if idx.resolution <= RESOLUTIONS[0]:
        raise ValueError(f"{idx} is already at the coarsest resolution")
    _check_resolution(idx.resolution)
    coarse = idx.resolution - 1
    x, y = centroid_xy(idx, spec)
    q, r = xy_to_axial(x, y, spec.edge(coarse))
    return HexIndex(coarse, int(q), int(r))


def ancestor(idx: HexIndex, res: int, spec: GridSpec) -> HexIndex:
    """Repeated :func:`parent` up to resolution ``res``."""
    _check_resolution(res)
    if res > idx.resolution:
        raise ValueError("ancestor resolution must not be finer than the cell")
    while idx.resolution > res:
        idx = parent(idx, spec)
    return idx


def children(idx: HexIndex, spec: GridSpec) -> set[HexIndex]:
    """Finer cells whose centroids fall inside ``idx``'s hexagon."""
    _check_resolution(idx.resolution)
    if idx.resolution >= RESOLUTIONS[-1]:
        raise ValueError(f"{idx} is already at the finest resolution")
    fine = idx.resolution + 1
    edge_c, edge_f = spec.edge(idx.resolution), spec.edge(fine)
    cx, cy = centroid_xy(idx, spec)
    q0, r0 = xy_to_axial(cx, cy, edge_f)
    n = int(math.ceil(edge_c / edge_f)) + 2
    dq, dr = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1))
    qs = dq.ravel() + int(q0)
    rs = dr.ravel() + int(r0)
    x, y = axial_to_xy(qs, rs, edge_f)
    pq, pr = xy_to_axial(x, y, edge_c)
    inside = (pq == idx.q) & (pr == idx.r)
    return {HexIndex(fine, int(q), int(r)) for q, r in zip(qs[inside], rs[inside])}


def _ring_xy(polygon, spec: GridSpec) -> np.ndarray:
    ring = [tuple(map(float, p)) for p in polygon]
    if len(ring) > 1 and ring[0] == ring[-1]:
        ring = ring[:-1]
    if len(set(ring)) < 3:
        raise ValueError("degenerate polygon: fewer than 3 distinct vertices")
    arr = np.asarray(ring)
    x, y = project(arr[:, 0], arr[:, 1], spec)
    return np.column_stack([x, y])


def lattice_in_bbox(xmin, ymin, xmax, ymax, edge: float):
    """Axial coordinates of every cell whose centroid may fall in the box."""
    r_lo = int(math.floor(ymin / (1.5 * edge))) - 1
    r_hi = int(math.ceil(ymax / (1.5 * edge))) + 1
    qs, rs = [], []
    for r in range(r_lo, r_hi + 1):
        q_lo = int(math.floor(xmin / (SQRT3 * edge) - r / 2.0)) - 1
        q_hi = int(math.ceil(xmax / (SQRT3 * edge) - r / 2.0)) + 1
        span = np.arange(q_lo, q_hi + 1)
        qs.append(span)
        rs.append(np.full(span.shape, r))
    return np.concatenate(qs), np.concatenate(rs)


def polyfill(polygon, res: int, spec: GridSpec) -> set[HexIndex]:
    """Cells at ``res`` whose centroids lie strictly inside a lat/lon ring."""
    _check_resolution(res)
    ring = _ring_xy(polygon, spec)
    poly = shapely.Polygon(ring)
    if poly.area <= 0:
        raise ValueError("degenerate polygon: zero area")
    edge = spec.edge(res)
    xmin, ymin, xmax, ymax = poly.bounds
    qs, rs = lattice_in_bbox(xmin, ymin, xmax, ymax, edge)
    x, y = axial_to_xy(qs, rs, edge)
    inside = shapely.contains_xy(poly, x, y)
    return {HexIndex(res, int(q), int(r)) for q, r in zip(qs[inside], rs[inside])}


# -- CSV interface -----------------------------------------------------------

def write_cells_csv(path, cells: Iterable[HexCell]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CELL_FIELDS)
        for c in cells:
            writer.writerow([
                c.index.resolution, c.index.q, c.index.r,
                f"{c.lat:.6f}", f"{c.lon:.6f}", repr(float(c.population)),
                repr(float(c.poi_score)), repr(float(c.median_income)),
                repr(float(c.ev_share)), c.zone_id,
            ])


def read_cells_csv(path) -> list[HexCell]:
    cells = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CELL_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                idx = HexIndex(int(row["res"]), int(row["q"]), int(row["r"]))
                _check_resolution(idx.resolution)
                cells.append(HexCell(
                    index=idx, lat=float(row["lat"]), lon=float(row["lon"]),
                    population=float(row["population"]),
                    poi_score=float(row["poi_score"]),
                    median_income=float(row["median_income"]),
                    ev_share=float(row["ev_share"]), zone_id=row["zone_id"],
                ))
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    return cells
