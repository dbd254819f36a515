"""Per-zone road graphs and exact betweenness centrality."""

from __future__ import annotations

import csv
import heapq
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple

import numpy as np
import shapely

from .hexgrid import GridSpec, project

EDGE_FIELDS = ["zone_id", "node_a_id", "node_b_id", "lat_a", "lon_a", "lat_b", "lon_b"]


class EdgeRecord(NamedTuple):
    zone_id: str
    node_a: str
    node_b: str
    lat_a: float
    lon_a: float
    lat_b: float
    lon_b: float


@dataclass
class RoadGraph:
    """Undirected intersection graph of one zone.

    Nodes are stored positionally; ``edges`` holds index pairs ``(i, j)`` with
    ``i < j`` and ``lengths`` the planar segment length in meters.
    """

    zone_id: str
    node_ids: list
    lat: np.ndarray
    lon: np.ndarray
    x: np.ndarray
    y: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.lengths = np.asarray(self.lengths, dtype=float)
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        n = len(self.node_ids)
        self.degree = np.bincount(self.edges.ravel(), minlength=n)
        self.neighbors = [[] for _ in range(n)]
        self.neighbor_lengths = [[] for _ in range(n)]
        for (a, b), length in zip(self.edges.tolist(), self.lengths.tolist()):
            self.neighbors[a].append(b)
            self.neighbors[b].append(a)
            self.neighbor_lengths[a].append(length)
            self.neighbor_lengths[b].append(length)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def components(self) -> int:
        seen = np.zeros(self.n_nodes, dtype=bool)
        count = 0
        for start in range(self.n_nodes):
            if seen[start]:
                continue
            count += 1
            seen[start] = True
            stack = [start]
            while stack:
                v = stack.pop()
                for w in self.neighbors[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(w)
        return count

    @classmethod
    def from_xy(cls, xy, edges, zone_id="z", node_ids=None, spec: GridSpec | None = None):
        """Build directly from planar coordinates; lat/lon filled if ``spec`` given."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        edges = _dedupe_edges(edges)
        if node_ids is None:
            node_ids = [str(i) for i in range(len(xy))]
        if spec is not None:
            from .hexgrid import unproject
            lat, lon = unproject(xy[:, 0], xy[:, 1], spec)
        else:
            lat = lon = np.full(len(xy), np.nan)
        lengths = (np.hypot(*(xy[edges[:, 0]] - xy[edges[:, 1]]).T)
                   if len(edges) else np.zeros(0))
        return cls(zone_id, list(node_ids), lat, lon, xy[:, 0].copy(), xy[:, 1].copy(),
                   edges, lengths)


def _dedupe_edges(edges) -> np.ndarray:
    pairs = {tuple(sorted((int(a), int(b)))) for a, b in edges if int(a) != int(b)}
    return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)


def build_graph(zone_polygon, records: Iterable[EdgeRecord], spec: GridSpec,
                zone_id: str | None = None) -> RoadGraph:
    """Clip edge records to a lat/lon zone polygon and build the zone graph.

    Nodes outside the polygon are dropped together with every edge touching
    them. Self-loops and duplicate segments are discarded.
    """
    records = list(records)
    if zone_id is not None:
        records = [rec for rec in records if rec.zone_id == zone_id]
    coords: dict = {}
    for rec in records:
        coords.setdefault(rec.node_a, (rec.lat_a, rec.lon_a))
        coords.setdefault(rec.node_b, (rec.lat_b, rec.lon_b))
    ring = np.asarray([tuple(map(float, p)) for p in zone_polygon])
    rx, ry = project(ring[:, 0], ring[:, 1], spec)
    poly = shapely.Polygon(np.column_stack([rx, ry]))
    ids = sorted(coords)
    if not ids:
        raise ValueError(f"zone {zone_id!r}: no edge records")
    latlon = np.asarray([coords[i] for i in ids], dtype=float)
    x, y = project(latlon[:, 0], latlon[:, 1], spec)
    inside = shapely.intersects_xy(poly, x, y)
    keep = [i for i, ok in zip(ids, inside) if ok]
    if not keep:
        raise ValueError(f"zone {zone_id!r}: clipping left no nodes")
    pos = {nid: k for k, nid in enumerate(keep)}
    sel = np.flatnonzero(inside)
    pairs = [(pos[r.node_a], pos[r.node_b]) for r in records
             if r.node_a in pos and r.node_b in pos]
    edges = _dedupe_edges(pairs)
    xs, ys = x[sel], y[sel]
    lengths = (np.hypot(xs[edges[:, 0]] - xs[edges[:, 1]], ys[edges[:, 0]] - ys[edges[:, 1]])
               if len(edges) else np.zeros(0))
    zid = zone_id if zone_id is not None else (records[0].zone_id if records else "")
    return RoadGraph(zid, keep, latlon[sel, 0], latlon[sel, 1], xs, ys, edges, lengths)


# -- betweenness ---------------------------------------------------------------

def _bfs_order(g: RoadGraph, s: int):
    n = g.n_nodes
    sigma = [0] * n
    dist = [-1] * n
    preds = [[] for _ in range(n)]
    sigma[s], dist[s] = 1, 0
    order = []
    queue = deque([s])
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in g.neighbors[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, sigma, preds


def _dijkstra_order(g: RoadGraph, s: int):
    n = g.n_nodes
    sigma = [0] * n
    dist = [np.inf] * n
    preds = [[] for _ in range(n)]
    sigma[s], dist[s] = 1, 0.0
    order = []
    done = [False] * n
    heap = [(0.0, s)]
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        order.append(v)
        for w, length in zip(g.neighbors[v], g.neighbor_lengths[v]):
            nd = d + length
            if nd < dist[w]:
                dist[w] = nd
                sigma[w] = sigma[v]
                preds[w] = [v]
                heapq.heappush(heap, (nd, w))
            elif nd == dist[w] and not done[w]:
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, sigma, preds


def raw_betweenness(g: RoadGraph, weighted: bool = False, exact: bool = False):
    """Brandes accumulation over unordered source/target pairs.

    ``exact=True`` accumulates with :class:`fractions.Fraction` and returns a
    list of fractions; otherwise a float array.
    """
    n = g.n_nodes
    zero = Fraction(0) if exact else 0.0
    bc = [zero] * n
    search = _dijkstra_order if weighted else _bfs_order
    for s in range(n):
        order, sigma, preds = search(g, s)
        delta = [zero] * n
        for w in reversed(order):
            coeff = (Fraction(1) + delta[w]) / sigma[w] if exact else (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
            if w != s:
                bc[w] += delta[w]
    # each unordered pair was counted from both endpoints
    if exact:
        return [b / 2 for b in bc]
    return np.asarray(bc, dtype=float) / 2.0


def minmax(values) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant vector maps to zeros."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def betweenness(g: RoadGraph, weighted: bool = False) -> np.ndarray:
    """Zone-normalised betweenness in [0, 1]."""
    if g.n_nodes == 0:
        raise ValueError("betweenness of an empty graph")
    if g.n_nodes == 1:
        return np.zeros(1)
    return minmax(raw_betweenness(g, weighted=weighted))


# -- CSV interface -------------------------------------------------------------

def read_edges_csv(path) -> list[EdgeRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(EDGE_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                out.append(EdgeRecord(
                    row["zone_id"], row["node_a_id"], row["node_b_id"],
                    float(row["lat_a"]), float(row["lon_a"]),
                    float(row["lat_b"]), float(row["lon_b"]),
                ))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    return out


def write_edges_csv(path, records: Iterable[EdgeRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EDGE_FIELDS)
        for rec in records:
            writer.writerow([rec.zone_id, rec.node_a, rec.node_b,
                             f"{rec.lat_a:.6f}", f"{rec.lon_a:.6f}",
                             f"{rec.lat_b:.6f}", f"{rec.lon_b:.6f}"])
