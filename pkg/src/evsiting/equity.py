"""Tile/area coverage and income-tercile access distances."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import shapely
from scipy.spatial import cKDTree

from .hexgrid import SQRT3

TERCILES = ("low", "mid", "high")


@dataclass
class CoverageMetrics:
    radius_m: float
    tile_coverage: float
    area_coverage: float


@dataclass
class EquityReport:
    low: float
    mid: float
    high: float
    population: tuple

    @property
    def gap(self) -> float:
        return self.low - self.high

    def to_dict(self) -> dict:
        return {"mean_distance_m": {"low": self.low, "mid": self.mid, "high": self.high},
                "population": dict(zip(TERCILES, self.population)),
                "gap_m": self.gap}


def nearest_distance(points, sites) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    sites = np.asarray(sites, dtype=float).reshape(-1, 2)
    if len(sites) == 0:
        return np.full(len(points), np.inf)
    d, _ = cKDTree(sites).query(points)
    return np.asarray(d, dtype=float)


def sample_hexagons(centres, edge: float, n: int, rng) -> np.ndarray:
    """Uniform points over a union of equal, non-overlapping hexagons."""
    centres = np.asarray(centres, dtype=float).reshape(-1, 2)
    which = rng.integers(0, len(centres), n)
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        m = n - filled
        u = rng.uniform(-edge, edge, (2 * m, 2))
        ax, ay = np.abs(u[:, 0]), np.abs(u[:, 1])
        # pointy-top hexagon: |x| <= sqrt3/2 * e and |y| <= e - |x| / sqrt3
        ok = (ax <= SQRT3 / 2 * edge) & (ay <= edge - ax / SQRT3)
        u = u[ok][:m]
        out[filled:filled + len(u)] = u
        filled += len(u)
    return out + centres[which]


def sample_polygon(polygon_xy, n: int, rng) -> np.ndarray:
    poly = shapely.Polygon(polygon_xy)
    xmin, ymin, xmax, ymax = poly.bounds
    out = []
    got = 0
    while got < n:
        pts = rng.uniform((xmin, ymin), (xmax, ymax), (2 * (n - got) + 16, 2))
        pts = pts[shapely.contains_xy(poly, pts[:, 0], pts[:, 1])][: n - got]
        out.append(pts)
        got += len(pts)
    return np.vstack(out)


def coverage_metrics(cell_xy, site_xy, radius: float, cell_edge: float | None = None,
                     study_polygon=None, samples: int = 100_000, seed: int = 0) -> CoverageMetrics:
    """Share of cell centroids and of land area within ``radius`` of any site.

    Area is estimated by seeded Monte-Carlo over ``study_polygon`` (planar ring)
    or, by default, over the union of the cells' hexagons of edge ``cell_edge``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    cell_xy = np.asarray(cell_xy, dtype=float).reshape(-1, 2)
    if len(cell_xy) == 0:
        raise ValueError("no cells")
    tile = float(np.mean(nearest_distance(cell_xy, site_xy) <= radius))
    rng = np.random.default_rng(seed)
    if study_polygon is not None:
        pts = sample_polygon(study_polygon, samples, rng)
    elif cell_edge is not None:
        pts = sample_hexagons(cell_xy, cell_edge, samples, rng)
    else:
        raise ValueError("need cell_edge or study_polygon for area coverage")
    area = float(np.mean(nearest_distance(pts, site_xy) <= radius))
    return CoverageMetrics(float(radius), tile, area)


def income_terciles(population, income) -> np.ndarray:
    """Tercile label 0/1/2 per cell from population-weighted income rank.

    Cells are ordered by income and placed by where the middle of their
    population falls in the cumulative distribution.
    """
    pop = np.asarray(population, dtype=float)
    inc = np.asarray(income, dtype=float)
    order = np.argsort(inc, kind="stable")
    total = pop.sum()
    cum = np.cumsum(pop[order]) - 0.5 * pop[order]
    label = np.empty(len(pop), dtype=np.int64)
    label[order] = np.minimum((3.0 * cum / total).astype(np.int64), 2)
    return label


def equity_report(cell_xy, population, income, site_xy) -> EquityReport:
    pop = np.asarray(population, dtype=float)
    if pop.sum() <= 0:
        raise ValueError("total population is zero")
    if len(np.asarray(site_xy).reshape(-1, 2)) == 0:
        raise ValueError("at least one site is required")
    dist = nearest_distance(cell_xy, site_xy)
    label = income_terciles(pop, income)
    means, pops = [], []
    for k in range(3):
        m = label == k
        w = pop[m].sum()
        pops.append(float(w))
        means.append(float(np.dot(pop[m], dist[m]) / w) if w > 0 else math.nan)
    return EquityReport(*means, population=tuple(pops))


def metrics_json(metrics) -> str:
    """Coverage metrics for several radii as a sorted-key JSON document."""
    doc = {"radii": [asdict(m) for m in sorted(metrics, key=lambda m: m.radius_m)]}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
