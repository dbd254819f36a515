"""Seeded synthetic inputs: road graphs, queue instances and a pipeline fixture."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from .roadgraph import RoadGraph


def random_geometric_graph(n: int, rng, extent: float = 3_000.0, mean_degree: float = 5.0,
                           origin=(0.0, 0.0), zone_id: str = "z", spec=None) -> RoadGraph:
    """Uniform points in a square joined within a radius sized for ``mean_degree``.

    Only the largest connected component is returned.
    """
    xy = rng.uniform(0.0, extent, size=(n, 2)) + np.asarray(origin, dtype=float)
    radius = math.sqrt(mean_degree * extent * extent / (math.pi * n))
    pairs = np.array(sorted(cKDTree(xy).query_pairs(radius)), dtype=np.int64).reshape(-1, 2)
    g = RoadGraph.from_xy(xy, pairs, zone_id=zone_id)
    keep = _largest_component(g)
    remap = -np.ones(n, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    sub = pairs[(remap[pairs[:, 0]] >= 0) & (remap[pairs[:, 1]] >= 0)]
    ids = [f"{zone_id}-{i}" for i in range(len(keep))]
    return RoadGraph.from_xy(xy[keep], remap[sub], zone_id=zone_id, node_ids=ids, spec=spec)


def _largest_component(g: RoadGraph) -> np.ndarray:
    label = -np.ones(g.n_nodes, dtype=np.int64)
    best, best_size = 0, 0
    for start in range(g.n_nodes):
        if label[start] >= 0:
            continue
        label[start] = start
        stack, size = [start], 0
        while stack:
            v = stack.pop()
            size += 1
            for w in g.neighbors[v]:
                if label[w] < 0:
                    label[w] = start
                    stack.append(w)
        if size > best_size:
            best, best_size = start, size
    return np.flatnonzero(label == best)


def grid_graph(rows: int, cols: int, spacing: float = 100.0, zone_id: str = "grid") -> RoadGraph:
    xy = np.array([(c * spacing, r * spacing) for r in range(rows) for c in range(cols)], float)
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.append((k, k + 1))
            if r + 1 < rows:
                edges.append((k, k + cols))
    return RoadGraph.from_xy(xy, edges, zone_id=zone_id)


def centrality_suite(seed: int = 0, n_zones: int = 5, sizes=(50, 150),
                     mean_degree: float = 30.0):
    """Independent random geometric zones with node counts drawn from ``sizes``.

    The default density keeps betweenness mostly position driven; at road-like
    mean degrees (4 to 8) it is dominated by bottlenecks that local features
    cannot see.
    """
    rng = np.random.default_rng(seed)
    zones = []
    for k in range(n_zones):
        n = int(rng.integers(sizes[0], sizes[1] + 1))
        zones.append(random_geometric_graph(n, rng, mean_degree=mean_degree,
                                            zone_id=f"syn{k}"))
    return zones


# -- pipeline fixture ------------------------------------------------------------

FIXTURE_ZONES = (
    # zone_id, county_id, area_class, (xmin, xmax, ymin, ymax) in meters
    ("Z1", "C1", "urban", (-18_000.0, -6_000.0, -6_500.0, 6_500.0)),
    ("Z2", "C1", "urban", (-6_000.0, 6_000.0, -6_500.0, 6_500.0)),
    ("Z3", "C2", "suburban", (6_000.0, 18_000.0, -6_500.0, 6_500.0)),
    # far-off rural zone without roads; only the reachability repair serves it
    ("R1", "C2", "rural", (60_000.0, 64_000.0, -2_000.0, 2_000.0)),
)


def _box_ring(box, spec):
    from .hexgrid import unproject
    xmin, xmax, ymin, ymax = box
    xs = np.array([xmin, xmax, xmax, xmin, xmin])
    ys = np.array([ymin, ymin, ymax, ymax, ymin])
    lat, lon = unproject(xs, ys, spec)
    return [(round(float(a), 6), round(float(b), 6)) for a, b in zip(lat, lon)]


def make_fixture(directory, seed: int = 0, nodes_per_zone: int = 90) -> dict:
    """Write a small, self-consistent input set and its ``config.json``.

    Three 12 x 13 km road zones side by side plus a remote rural zone with
    no roads. Returns the config document that was written.
    """
    import json
    from pathlib import Path

    from . import demand, forecast, hexgrid, roadgraph
    from .ingest import Zone, zones_geojson

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    spec = hexgrid.GridSpec()

    zones = [Zone(zid, cid, area, _box_ring(box, spec)) for zid, cid, area, box in FIXTURE_ZONES]
    with open(out / "zones.geojson", "w", newline="\n") as fh:
        fh.write(json.dumps(zones_geojson(zones), sort_keys=True, indent=2) + "\n")

    records, traffic, graphs = [], {}, []
    for zid, _, _, box in FIXTURE_ZONES[:3]:
        xmin, xmax, ymin, ymax = box
        g = random_geometric_graph(nodes_per_zone, rng, extent=xmax - xmin,
                                   origin=(xmin, -0.5 * (xmax - xmin)), mean_degree=5.0,
                                   zone_id=zid, spec=spec)
        graphs.append(g)
        for a, b in g.edges:
            records.append(roadgraph.EdgeRecord(zid, g.node_ids[a], g.node_ids[b],
                                                float(g.lat[a]), float(g.lon[a]),
                                                float(g.lat[b]), float(g.lon[b])))
        for k, nid in enumerate(g.node_ids):
            base = rng.uniform(150.0, 450.0) * (0.6 + 0.1 * g.degree[k])
            hours = np.arange(24)
            shape = 0.25 + np.exp(-0.5 * ((hours - 13.0) / 4.0) ** 2)
            traffic[nid] = list(np.round(base * shape * rng.uniform(0.9, 1.1, 24), 1))
    # one segment that leaves its zone; clipping must drop it
    a, b = graphs[0], graphs[1]
    records.append(roadgraph.EdgeRecord("Z1", a.node_ids[0], b.node_ids[0],
                                        float(a.lat[0]), float(a.lon[0]),
                                        float(b.lat[0]), float(b.lon[0])))
    roadgraph.write_edges_csv(out / "edges.csv", records)
    forecast.write_traffic_csv(out / "traffic.csv", traffic)

    # res-8 cells: every cell in a zone plus the parent of every demand cell
    cells = set()
    for z in zones:
        cells |= hexgrid.polyfill(z.ring, 8, spec)
        cells |= {hexgrid.ancestor(c, 8, spec) for c in hexgrid.polyfill(z.ring, 10, spec)}
    rows = []
    for idx in sorted(cells):
        x, y = hexgrid.centroid_xy(idx, spec)
        lat, lon = hexgrid.centroid(idx, spec)
        zone = next((zid for zid, _, _, (x0, x1, y0, y1) in FIXTURE_ZONES
                     if x0 <= x <= x1 and y0 <= y <= y1), "")
        centres = np.array([-12_000.0, 0.0, 12_000.0, 62_000.0])
        bump = np.exp(-0.5 * (((x - centres) / 4_000.0) ** 2 + (y / 4_000.0) ** 2))
        pop = float(np.round(800.0 * bump.max() * rng.uniform(0.5, 1.5) + 20.0))
        income = float(np.round(45_000.0 + 1.2 * x * rng.uniform(0.6, 1.0)
                                + rng.normal(0.0, 6_000.0)))
        rows.append(hexgrid.HexCell(idx, lat, lon, pop, 0.0, max(income, 12_000.0),
                                    float(np.round(rng.uniform(0.01, 0.05), 4)), zone))
    hexgrid.write_cells_csv(out / "cells.csv", rows)

    pois = []
    for _ in range(180):
        zid, _, _, (x0, x1, y0, y1) = FIXTURE_ZONES[int(rng.integers(0, 3))]
        x, y = rng.uniform(x0, x1), rng.uniform(y0, y1)
        lat, lon = hexgrid.unproject(x, y, spec)
        pois.append(demand.PoiRecord(round(float(lat), 6), round(float(lon), 6),
                                     demand.POI_CLASSES[int(rng.integers(0, 6))],
                                     int(rng.integers(1, 6))))
    demand.write_pois_csv(out / "pois.csv", pois)

    forecast.write_counties_csv(out / "counties.csv", [
        forecast.CountyStats("C1", 24_000.0, 1_000_000.0, 0.02, 0.024, 32.0),
        forecast.CountyStats("C2", 6_000.0, 500_000.0, 0.01, 0.012, 26.0),
    ])
    with open(out / "exclusions.csv", "w", newline="\n") as fh:
        fh.write("node_id\n" + graphs[2].node_ids[0] + "\n")

    cfg = {
        "seed": seed,
        "inputs": {"zones": "zones.geojson", "edges": "edges.csv", "cells": "cells.csv",
                   "pois": "pois.csv", "counties": "counties.csv", "traffic": "traffic.csv",
                   "hubs": None, "exclusions": "exclusions.csv"},
        "mclp": {"P": 6},
    }
    with open(out / "config.json", "w", newline="\n") as fh:
        fh.write(json.dumps(cfg, sort_keys=True, indent=2) + "\n")
    return cfg
