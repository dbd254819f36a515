"""EV share projection, hourly arrival rates and statewide port paths."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

DAYTIME_HOURS = range(8, 20)
COUNTY_FIELDS = ["county_id", "ev_count", "vehicle_count", "share_2024", "share_2025",
                 "avg_hourly_wage"]
TRAFFIC_FIELDS = ["site_id"] + [f"h{t}" for t in range(24)]

# Statewide port stock required by the reference deployment, 2024-2030.
CAPACITY_TABLE = {
    "DCFC": {2024: 2_216, 2025: 2_418, 2026: 2_671, 2027: 2_956, 2028: 3_341,
             2029: 3_778, 2030: 4_353},
    "L2": {2024: 13_725, 2025: 15_303, 2026: 17_100, 2027: 19_150, 2028: 21_549,
           2029: 24_572, 2030: 28_793},
}
STATED_CAGR = {"DCFC": 0.122, "L2": 0.133}


@dataclass
class CountyStats:
    county_id: str
    ev_count: float
    vehicle_count: float
    share_2024: float
    share_2025: float
    avg_hourly_wage: float = 0.0

    def __post_init__(self):
        if self.vehicle_count <= 0:
            raise ValueError(f"county {self.county_id}: total vehicles must be positive")
        for name in ("share_2024", "share_2025"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"county {self.county_id}: {name} outside [0, 1]")

    @property
    def beta(self) -> float:
        return self.ev_count / self.vehicle_count

    @property
    def cagr(self) -> float:
        """Growth rate implied by the two observed shares (0 without a 2024 base)."""
        if self.share_2024 <= 0:
            return 0.0
        return self.share_2025 / self.share_2024 - 1.0


@dataclass
class PenetrationEnvelope:
    """Statewide EV-share ceiling by year; years before the first entry are uncapped."""

    caps: dict = field(default_factory=dict)

    def __post_init__(self):
        self.caps = {int(y): float(v) for y, v in self.caps.items()}
        values = [self.caps[y] for y in sorted(self.caps)]
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("envelope must be non-decreasing over years")

    def __call__(self, year: int) -> float:
        known = [y for y in self.caps if y <= year]
        return self.caps[max(known)] if known else math.inf


def project_share(beta_base: float, g: float, year_offset: int,
                  envelope: PenetrationEnvelope | None = None,
                  base_year: int = 2025) -> float:
    if not 0.0 <= beta_base <= 1.0:
        raise ValueError("base share must lie in [0, 1]")
    if g <= -1.0:
        raise ValueError("growth rate must exceed -1")
    cap = envelope(base_year + year_offset) if envelope is not None else math.inf
    return min(beta_base * (1.0 + g) ** year_offset, cap, 1.0)


@dataclass
class ArrivalProfile:
    site_id: str
    counts: np.ndarray
    rates: np.ndarray

    @property
    def design_rate(self) -> float:
        return float(self.rates[list(DAYTIME_HOURS)].mean())


def arrival_rates(counts, beta: float, site_id: str = "") -> ArrivalProfile:
    """Hourly EV arrivals ``n_t * beta`` and their 08:00-20:00 mean.

    ``counts`` is a 24-long sequence or an ``hour -> count`` mapping; missing
    or blank hours are reported together.
    """
    if isinstance(counts, Mapping):
        values = [counts.get(t) for t in range(24)]
    else:
        values = list(counts)
        values += [None] * (24 - len(values))
    gaps = [t for t, v in enumerate(values[:24])
            if v is None or (isinstance(v, float) and math.isnan(v))]
    if gaps or len(values) != 24:
        raise ValueError(f"site {site_id}: missing hourly counts for hours {gaps}")
    n = np.asarray(values, dtype=float)
    if np.any(n < 0) or beta < 0:
        raise ValueError(f"site {site_id}: counts and share must be non-negative")
    return ArrivalProfile(site_id, n, n * beta)


def implied_cagr(base: float, target: float, years: int) -> float:
    return (target / base) ** (1.0 / years) - 1.0


def capacity_path(base_ports: float, cagr: float, years: int) -> list:
    """Port counts for ``0..years`` years out, rounded to whole ports."""
    if base_ports <= 0:
        raise ValueError("base port count must be positive")
    return [int(round(base_ports * (1.0 + cagr) ** t)) for t in range(years + 1)]


def project_counties(counties: Sequence[CountyStats], years: Sequence[int],
                     envelope: PenetrationEnvelope | None = None,
                     base_year: int = 2025) -> dict:
    """``{(county_id, year): beta}`` grown from each county's current share."""
    out = {}
    for county in counties:
        for year in years:
            out[(county.county_id, year)] = project_share(
                county.beta, county.cagr, year - base_year, envelope, base_year)
    return out


# -- CSV interfaces ------------------------------------------------------------

def read_counties_csv(path) -> list[CountyStats]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COUNTY_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                out.append(CountyStats(row["county_id"], float(row["ev_count"]),
                                       float(row["vehicle_count"]), float(row["share_2024"]),
                                       float(row["share_2025"]), float(row["avg_hourly_wage"])))
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    return out


def write_counties_csv(path, counties: Sequence[CountyStats]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COUNTY_FIELDS)
        for c in counties:
            writer.writerow([c.county_id, repr(c.ev_count), repr(c.vehicle_count),
                             repr(c.share_2024), repr(c.share_2025), repr(c.avg_hourly_wage)])


def read_traffic_csv(path) -> dict:
    """``site_id -> list of 24 counts``; gaps raise with the hour names."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        absent = [f for f in TRAFFIC_FIELDS if f not in cols]
        if absent:
            raise ValueError(f"{path}: missing columns {absent}")
        for line, row in enumerate(reader, start=2):
            blank = [f"h{t}" for t in range(24) if not (row.get(f"h{t}") or "").strip()]
            if blank:
                raise ValueError(f"{path}:{line}: missing hourly values {blank}")
            try:
                out[row["site_id"]] = [float(row[f"h{t}"]) for t in range(24)]
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    return out


def write_traffic_csv(path, traffic: Mapping) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAFFIC_FIELDS)
        for sid in sorted(traffic):
            writer.writerow([sid] + [f"{v:.3f}" for v in traffic[sid]])


def write_forecast_csv(path, betas: Mapping) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["county_id", "year", "beta"])
        for (cid, year) in sorted(betas):
            writer.writerow([cid, year, f"{betas[(cid, year)]:.9f}"])
