"""Nearest-hub assignment and the 30 km fast-charge reachability repair."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

DEFAULT_THRESHOLD_M = 30_000.0
GUARANTEE_PORTS = 5
REPORT_FIELDS = ["centroid_id", "hub_id", "distance_m", "violation"]


@dataclass
class ReachabilityReport:
    centroid_ids: list
    hub_ids: list
    distances: np.ndarray
    threshold: float

    @property
    def max_distance(self) -> float:
        return float(self.distances.max()) if self.distances.size else 0.0

    @property
    def violations(self) -> list:
        return [cid for cid, d in zip(self.centroid_ids, self.distances) if d > self.threshold]


@dataclass
class AddedHub:
    hub_id: str
    centroid_id: str
    x: float
    y: float
    min_ports: int = GUARANTEE_PORTS
    charger_type: str = "DCFC"


def _nearest(centroids: np.ndarray, hubs: np.ndarray, chunk: int = 4096):
    """Index of the first closest hub per centroid, and that distance."""
    idx = np.empty(len(centroids), dtype=np.int64)
    dist = np.empty(len(centroids))
    for lo in range(0, len(centroids), chunk):
        c = centroids[lo:lo + chunk]
        d = np.hypot(c[:, None, 0] - hubs[None, :, 0], c[:, None, 1] - hubs[None, :, 1])
        k = np.argmin(d, axis=1)
        idx[lo:lo + chunk] = k
        dist[lo:lo + chunk] = d[np.arange(len(c)), k]
    return idx, dist


def assign_nearest(centroids, hubs, hub_ids=None, centroid_ids=None,
                   threshold: float = DEFAULT_THRESHOLD_M) -> ReachabilityReport:
    """Assign every centroid to its closest hub; equal distances go to the lower id."""
    centroids = np.asarray(centroids, dtype=float).reshape(-1, 2)
    hubs = np.asarray(hubs, dtype=float).reshape(-1, 2)
    if len(hubs) == 0:
        raise ValueError("at least one hub is required")
    hub_ids = list(range(len(hubs))) if hub_ids is None else list(hub_ids)
    centroid_ids = list(range(len(centroids))) if centroid_ids is None else list(centroid_ids)
    order = sorted(range(len(hubs)), key=lambda i: hub_ids[i])
    k, dist = _nearest(centroids, hubs[order])
    return ReachabilityReport(centroid_ids, [hub_ids[order[i]] for i in k], dist, threshold)


def repair_coverage(centroids, hubs, weights=None, centroid_ids=None,
                    threshold: float = DEFAULT_THRESHOLD_M, prefix: str = "G") -> list:
    """Add hubs at violating centroids until every centroid is within ``threshold``.

    Each round places a hub on the violating centroid with the largest weight
    (ties: farthest from its hub, then lowest id). The new hub sits at distance
    zero from that centroid, so every round removes at least one violation for
    good and the loop ends.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    centroids = np.asarray(centroids, dtype=float).reshape(-1, 2)
    hubs = np.asarray(hubs, dtype=float).reshape(-1, 2)
    n = len(centroids)
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    centroid_ids = list(range(n)) if centroid_ids is None else list(centroid_ids)
    if len(hubs):
        _, dist = _nearest(centroids, hubs)
    else:
        dist = np.full(n, np.inf)
    added = []
    while n and dist.max() > threshold:
        bad = np.flatnonzero(dist > threshold)
        pick = min(bad, key=lambda i: (-weights[i], -dist[i], centroid_ids[i]))
        x, y = centroids[pick]
        added.append(AddedHub(f"{prefix}{len(added) + 1}", centroid_ids[pick], float(x), float(y)))
        dist = np.minimum(dist, np.hypot(centroids[:, 0] - x, centroids[:, 1] - y))
    return added


def write_report_csv(path, report: ReachabilityReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        for cid, hid, d in zip(report.centroid_ids, report.hub_ids, report.distances):
            writer.writerow([cid, hid, f"{d:.3f}", int(d > report.threshold)])
