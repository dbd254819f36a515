"""Distance-band coverage and greedy maximal-coverage site selection."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .hexgrid import project
from .roadgraph import minmax

SELECTION_FIELDS = ["step", "site_id", "zone_id", "lat", "lon", "marginal_demand",
                    "cumulative_fraction"]


class InfeasibleCoverage(ValueError):
    def __init__(self, target: float, max_fraction: float):
        self.target = target
        self.max_fraction = max_fraction
        super().__init__(
            f"coverage target {target:.4f} exceeds the achievable fraction {max_fraction:.6f}")


@dataclass
class CandidateSite:
    id: str
    x: float
    y: float
    zone_id: str
    c_gnn: float = 0.5
    poi_load: float = 0.0
    excluded: bool = False
    lat: float = math.nan
    lon: float = math.nan
    sigma: float = 0.0


@dataclass
class CoverageIndex:
    radius: float
    sets: list
    n_demand: int

    def matrix(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(len(self.sets)), [len(s) for s in self.sets])
        cols = np.concatenate(self.sets) if self.sets else np.zeros(0, dtype=np.int64)
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                             shape=(len(self.sets), self.n_demand))


@dataclass
class SelectionResult:
    site_ids: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    marginal: list = field(default_factory=list)
    cumulative: list = field(default_factory=list)
    total_demand: float = 0.0

    @property
    def covered(self) -> float:
        return self.cumulative[-1] if self.cumulative else 0.0

    @property
    def fractions(self) -> list:
        if self.total_demand <= 0:
            return [0.0] * len(self.cumulative)
        return [c / self.total_demand for c in self.cumulative]

    @property
    def coverage_fraction(self) -> float:
        return self.covered / self.total_demand if self.total_demand > 0 else 0.0


def assign_rank_scores(candidates: Sequence[CandidateSite], beta_poi: float = 0.6,
                       beta_cent: float = 0.4) -> None:
    """Set ``sigma`` from zone-normalised POI load and centrality (in place)."""
    by_zone = defaultdict(list)
    for c in candidates:
        by_zone[c.zone_id].append(c)
    for members in by_zone.values():
        pois = minmax([c.poi_load for c in members])
        cents = minmax([c.c_gnn for c in members])
        for c, p, g in zip(members, pois, cents):
            c.sigma = float(beta_poi * p + beta_cent * g)


def build_coverage_index(cand_xy, demand_xy, radius: float) -> CoverageIndex:
    """Exact ``dist <= radius`` sets via a KD-tree ball query."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    cand_xy = np.asarray(cand_xy, dtype=float).reshape(-1, 2)
    demand_xy = np.asarray(demand_xy, dtype=float).reshape(-1, 2)
    if len(cand_xy) == 0 or len(demand_xy) == 0:
        return CoverageIndex(radius, [np.zeros(0, dtype=np.int64) for _ in cand_xy],
                             len(demand_xy))
    tree = cKDTree(demand_xy)
    # pad the query so boundary points are decided by the exact test below
    hits = tree.query_ball_point(cand_xy, radius * (1 + 1e-9) + 1e-9)
    sets = []
    for i, idx in enumerate(hits):
        idx = np.asarray(sorted(idx), dtype=np.int64)
        if idx.size:
            d = np.hypot(demand_xy[idx, 0] - cand_xy[i, 0], demand_xy[idx, 1] - cand_xy[i, 1])
            idx = idx[d <= radius]
        sets.append(idx)
    return CoverageIndex(radius, sets, len(demand_xy))


def _greedy(index: CoverageIndex, weights, done, site_ids=None, sigma=None,
            zones=None, zone_cap=None) -> SelectionResult:
    w = np.asarray(weights, dtype=float)
    if w.shape != (index.n_demand,):
        raise ValueError("weights must align with the demand points")
    n = len(index.sets)
    ids = list(site_ids) if site_ids is not None else list(range(n))
    sig = np.zeros(n) if sigma is None else np.asarray(sigma, dtype=float)
    mat = index.matrix()
    uncovered = np.ones(index.n_demand, dtype=bool)
    available = np.ones(n, dtype=bool)
    per_zone: dict = defaultdict(int)
    if zones is not None and zone_cap is not None:
        for i, z in enumerate(zones):
            cap = zone_cap.get(z) if isinstance(zone_cap, Mapping) else zone_cap
            if cap is not None and cap <= 0:
                available[i] = False
    result = SelectionResult(total_demand=float(w.sum()))
    covered = 0.0
    while not done(result) and available.any():
        gains = mat @ (w * uncovered)
        gains[~available] = -np.inf
        best = gains.max()
        if not best > 0:
            break
        tied = np.flatnonzero(gains == best)
        top = sig[tied].max()
        tied = [i for i in tied if sig[i] == top]
        pick = min(tied, key=lambda i: ids[i])
        available[pick] = False
        uncovered[index.sets[pick]] = False
        covered += float(best)
        result.site_ids.append(ids[pick])
        result.positions.append(int(pick))
        result.marginal.append(float(best))
        result.cumulative.append(covered)
        if zones is not None and zone_cap is not None:
            z = zones[pick]
            per_zone[z] += 1
            cap = zone_cap.get(z) if isinstance(zone_cap, Mapping) else zone_cap
            if cap is not None and per_zone[z] >= cap:
                available &= np.array([zz != z for zz in zones])
    return result


def greedy_budget(index: CoverageIndex, weights, P: int, site_ids=None, sigma=None,
                  zones=None, zone_cap=None) -> SelectionResult:
    """Pick up to ``P`` sites, each covering the most still-uncovered demand.

    Ties go to the higher ``sigma``, then the lower site id. Selection stops
    early once no candidate adds demand.
    """
    if P < 0:
        raise ValueError("P must be non-negative")
    return _greedy(index, weights, lambda r: len(r.site_ids) >= P, site_ids, sigma,
                   zones, zone_cap)


def max_coverage_fraction(index: CoverageIndex, weights) -> float:
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return 1.0
    reach = np.zeros(index.n_demand, dtype=bool)
    for s in index.sets:
        reach[s] = True
    return float(w[reach].sum() / total)


def greedy_coverage(index: CoverageIndex, weights, alpha: float, site_ids=None, sigma=None,
                    zones=None, zone_cap=None) -> SelectionResult:
    """Shortest greedy prefix whose covered demand reaches ``alpha`` of the total."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    w = np.asarray(weights, dtype=float)
    total = float(w.sum())
    best = max_coverage_fraction(index, w)
    if best < alpha - 1e-12:
        raise InfeasibleCoverage(alpha, best)
    goal = alpha * total * (1.0 - 1e-12)
    result = _greedy(index, w, lambda r: r.covered >= goal, site_ids, sigma, zones, zone_cap)
    if result.covered < goal:
        raise InfeasibleCoverage(alpha, result.coverage_fraction)
    return result


def rank_per_zone(candidates: Iterable[CandidateSite], k: int = 5) -> list:
    """Top-``k`` non-excluded candidates of every zone by ``sigma`` (ties by id)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    by_zone = defaultdict(list)
    for c in candidates:
        if not c.excluded:
            by_zone[c.zone_id].append(c)
    out = []
    for zone in sorted(by_zone):
        out.extend(sorted(by_zone[zone], key=lambda c: (-c.sigma, c.id))[:k])
    return out


@dataclass
class ZoneChoice:
    chosen: dict
    skipped: list


def score_zone_sites(candidates: Iterable[CandidateSite], coverage: Mapping,
                     beta_cent: float = 0.4, beta_cov: float = 0.6,
                     zones: Iterable[str] | None = None) -> ZoneChoice:
    """One site per zone maximising ``beta_cent * c + beta_cov * cov``.

    Centrality and covered demand are min-max scaled within each zone.
    Zones listed in ``zones`` with no candidate are reported in ``skipped``.
    """
    if beta_cent < 0 or beta_cov < 0 or (beta_cent == 0 and beta_cov == 0):
        raise ValueError("weights must be non-negative and not both zero")
    by_zone = defaultdict(list)
    for c in candidates:
        if not c.excluded:
            by_zone[c.zone_id].append(c)
    chosen = {}
    for zone, members in sorted(by_zone.items()):
        cent = minmax([c.c_gnn for c in members])
        cov = minmax([coverage.get(c.id, 0.0) for c in members])
        score = beta_cent * cent + beta_cov * cov
        top = score.max()
        chosen[zone] = min(c.id for c, s in zip(members, score) if s == top)
    skipped = sorted(set(zones or ()) - set(chosen))
    return ZoneChoice(chosen, skipped)


def income_upweight(weights, incomes, factor: float = 1.0) -> np.ndarray:
    """Scale demand of below-median-income points by ``factor`` (1 = off)."""
    w = np.asarray(weights, dtype=float).copy()
    inc = np.asarray(incomes, dtype=float)
    if factor != 1.0 and inc.size:
        w[inc < np.median(inc)] *= factor
    return w


def write_selection_csv(path, result: SelectionResult, sites: Mapping) -> None:
    """``sites`` maps site id to its :class:`CandidateSite`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SELECTION_FIELDS)
        for step, (sid, gain, frac) in enumerate(
                zip(result.site_ids, result.marginal, result.fractions), start=1):
            s = sites[sid]
            writer.writerow([step, sid, s.zone_id, f"{s.lat:.6f}", f"{s.lon:.6f}",
                             f"{gain:.9f}", f"{frac:.9f}"])


def selection_features(result: SelectionResult, sites: Mapping) -> list:
    feats = []
    for step, (sid, gain, frac) in enumerate(
            zip(result.site_ids, result.marginal, result.fractions), start=1):
        s = sites[sid]
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point",
                         "coordinates": [round(s.lon, 6), round(s.lat, 6)]},
            "properties": {"step": step, "site_id": sid, "zone_id": s.zone_id,
                           "marginal_demand": round(gain, 9),
                           "cumulative_fraction": round(frac, 9)},
        })
    return feats


CANDIDATE_FIELDS = ["id", "zone_id", "lat", "lon", "c_gnn", "poi_load", "sigma", "excluded"]


def write_candidates_csv(path, candidates: Iterable[CandidateSite]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CANDIDATE_FIELDS)
        for c in candidates:
            writer.writerow([c.id, c.zone_id, f"{c.lat:.6f}", f"{c.lon:.6f}", f"{c.c_gnn:.9f}",
                             f"{c.poi_load:.9f}", f"{c.sigma:.9f}", int(c.excluded)])


def read_candidates_csv(path, spec) -> list:
    """Candidates with planar coordinates projected through ``spec``."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "zone_id", "lat", "lon"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                lat, lon = float(row["lat"]), float(row["lon"])
                x, y = project(lat, lon, spec)
                out.append(CandidateSite(
                    row["id"], float(x), float(y), row["zone_id"],
                    c_gnn=float(row.get("c_gnn") or 0.5),
                    poi_load=float(row.get("poi_load") or 0.0),
                    excluded=(row.get("excluded") or "0").strip() in ("1", "true", "True"),
                    lat=lat, lon=lon, sigma=float(row.get("sigma") or 0.0)))
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    return out
