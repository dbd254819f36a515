"""Finite-capacity multi-server queue with outage-reduced servers.

Each site is a birth-death chain on ``0..N`` vehicles: arrivals at rate
``lam`` while fewer than ``N`` vehicles are present, departures at
``min(n, c_eff) * mu`` where ``c_eff = c * (1 - p)``. Metrics come from the
product-form stationary distribution. The textbook-style closed forms for
``P0`` and ``Lq`` quoted with the model are evaluated alongside for comparison
only; they floor ``c_eff`` and disagree with the chain whenever ``c_eff`` is
fractional.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

SERVICE_RATES = {"DCFC": 2.0, "L2": 0.25}

# (low, high) USD per port
CHARGER_COSTS = {
    "L2": {"unit": (2_200.0, 4_600.0), "install": (2_200.0, 6_000.0)},
    "DCFC": {"unit": (91_400.0, 134_800.0), "install": (54_750.0, 105_950.0)},
}

AREA_INSTALL_MULTIPLIER = {"urban": 1.0, "suburban": 0.9, "mixed": 0.8, "rural": 0.7}

DEFAULT_RHO_CAP = 0.9
DEFAULT_EXTRA_CAPACITY = 10
SITE_PLAN_FIELDS = ["site_id", "type", "c", "c_eff", "rho_eff", "P0", "Lq", "Wq",
                    "C_station", "C_waiting", "objective"]


class InfeasibleSite(ValueError):
    pass


class InfeasiblePorts(ValueError):
    def __init__(self, required: int, c_max: int):
        self.required = required
        self.c_max = c_max
        super().__init__(f"utilisation cap needs at least {required} ports; cap is {c_max}")


# -- outage ---------------------------------------------------------------------

@dataclass
class OutageStats:
    events: list
    households: float
    days: float

    def __post_init__(self):
        if self.households < 0 or self.days < 1:
            raise ValueError("households must be >= 0 and days >= 1")
        for o, h in self.events:
            if o < 0 or h < 0:
                raise ValueError("outage events must be non-negative")


def outage_rate(stats: OutageStats) -> float:
    """Household-weighted share of days without power."""
    denom = stats.households * stats.days
    if denom <= 0:
        raise ValueError("households x days must be positive")
    p = sum(o * h for o, h in stats.events) / denom
    if p >= 1.0:
        raise InfeasibleSite(f"outage rate {p:.6f} >= 1 leaves no working ports")
    return p


# -- chain ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueueParams:
    lam: float
    mu: float
    c: int
    p: float = 0.0
    N: int | None = None

    def __post_init__(self):
        if self.N is None:
            object.__setattr__(self, "N", self.c + DEFAULT_EXTRA_CAPACITY)
        if self.lam < 0:
            raise ValueError("arrival rate must be non-negative")
        if self.mu <= 0:
            raise ValueError("service rate must be positive")
        if int(self.c) != self.c or self.c < 1:
            raise ValueError("port count must be an integer >= 1")
        if not 0.0 <= self.p < 1.0:
            raise ValueError("outage rate must lie in [0, 1)")
        if self.N < self.c:
            raise ValueError("system capacity N must be >= c")

    @property
    def c_eff(self) -> float:
        return self.c * (1.0 - self.p)

    @property
    def rho_eff(self) -> float:
        return self.lam / (self.c_eff * self.mu)


@dataclass
class QueueMetrics:
    c_eff: float
    rho_eff: float
    P0: float
    Lq: float
    Wq: float
    Wq_raw: float
    L: float
    pi_N: float
    lam_admitted: float
    printed_P0: float = math.nan
    printed_Lq: float = math.nan


def servers(params: QueueParams, convention: str = "continuous") -> float:
    if convention == "continuous":
        return params.c_eff
    if convention == "floor":
        # a zero-server chain never empties; keep one port working
        return float(max(1, math.floor(params.c_eff)))
    raise ValueError(f"unknown server convention {convention!r}")


def stationary_distribution(params: QueueParams, convention: str = "continuous") -> np.ndarray:
    """Product-form stationary probabilities of occupancy ``0..N``."""
    N = params.N
    if params.lam == 0:
        pi = np.zeros(N + 1)
        pi[0] = 1.0
        return pi
    s = servers(params, convention)
    k = np.arange(1, N + 1, dtype=float)
    log_ratio = math.log(params.lam) - np.log(np.minimum(k, s) * params.mu)
    log_pi = np.concatenate([[0.0], np.cumsum(log_ratio)])
    log_pi -= log_pi.max()
    pi = np.exp(log_pi)
    total = pi.sum()
    if not math.isfinite(total) or total <= 0:
        raise FloatingPointError("stationary distribution failed to normalise")
    return pi / total


def printed_closed_form(params: QueueParams) -> tuple[float, float]:
    """``(P0, Lq)`` from the closed forms exactly as printed; NaN at ``rho_eff == 1``."""
    a = float(params.lam) / float(params.mu)
    rho = float(params.rho_eff)
    s = math.floor(params.c_eff)
    s1 = math.floor(params.c_eff + 1)
    N = params.N
    if abs(rho - 1.0) < 1e-9 or params.lam == 0:
        return (1.0, 0.0) if params.lam == 0 else (math.nan, math.nan)
    head = sum(a ** n / math.factorial(n) for n in range(s))
    tail = a ** s / math.factorial(s) * (1 - rho ** (N - s + 1)) / (1 - rho)
    p0 = 1.0 / (head + tail)
    if s - rho == 0:
        return p0, math.nan
    lq = (p0 * a ** s1 / (math.factorial(s1) * (s - rho) ** 2)
          * (1 - rho ** (N - s + 1) - (N - s + 1) * (1 - rho) * rho ** (N - s)))
    return p0, lq


def stationary_metrics(params: QueueParams, convention: str = "continuous") -> QueueMetrics:
    pi = stationary_distribution(params, convention)
    s = servers(params, convention)
    n = np.arange(params.N + 1, dtype=float)
    lq = float(np.sum(np.maximum(n - s, 0.0) * pi))
    pi_n = float(pi[-1])
    lam_adm = params.lam * (1.0 - pi_n)
    wq = lq / lam_adm if lam_adm > 0 else 0.0
    wq_raw = lq / params.lam if params.lam > 0 else 0.0
    metrics = QueueMetrics(
        c_eff=params.c_eff, rho_eff=params.rho_eff, P0=float(pi[0]), Lq=lq, Wq=wq,
        Wq_raw=wq_raw, L=float(np.dot(n, pi)), pi_N=pi_n, lam_admitted=lam_adm,
    )
    try:
        metrics.printed_P0, metrics.printed_Lq = printed_closed_form(params)
    except (OverflowError, ZeroDivisionError):
        pass
    for name, ours, theirs in (("P0", metrics.P0, metrics.printed_P0),
                               ("Lq", metrics.Lq, metrics.printed_Lq),
                               ("Wq", metrics.Wq, metrics.Wq_raw)):
        if math.isfinite(theirs) and abs(ours - theirs) > 1e-6 * max(abs(ours), 1e-300):
            log.debug("%s: chain %.12g vs printed form %.12g (%s)", name, ours, theirs, params)
    return metrics


# -- costs ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CostParams:
    charger_type: str
    c_port: float
    c_install: float
    c_salary: float

    def __post_init__(self):
        if self.charger_type not in SERVICE_RATES:
            raise ValueError(f"unknown charger type {self.charger_type!r}")
        if min(self.c_port, self.c_install, self.c_salary) < 0:
            raise ValueError("costs must be non-negative")

    @property
    def mu(self) -> float:
        return SERVICE_RATES[self.charger_type]

    @classmethod
    def midpoint(cls, charger_type: str, c_salary: float, area: str = "urban",
                 multipliers=None) -> "CostParams":
        """Midpoint hardware and install costs; install scaled by area class."""
        multipliers = multipliers or AREA_INSTALL_MULTIPLIER
        table = CHARGER_COSTS[charger_type]
        return cls(charger_type, sum(table["unit"]) / 2.0,
                   sum(table["install"]) / 2.0 * multipliers[area], c_salary)


def station_cost(cost: CostParams, c_eff: float) -> float:
    return (cost.c_port + cost.c_install) * c_eff


def waiting_cost(c_salary: float, metrics: QueueMetrics) -> float:
    return c_salary * metrics.Lq * metrics.Wq


# -- sizing ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PortCaps:
    c_min: int = 1
    c_max: int = 50
    rho_cap: float = DEFAULT_RHO_CAP
    extra_capacity: int = DEFAULT_EXTRA_CAPACITY


@dataclass
class SitePlan:
    site_id: str
    charger_type: str
    c: int
    metrics: QueueMetrics
    C_station: float
    C_waiting: float

    @property
    def objective(self) -> float:
        return self.C_station / 365.0 + self.C_waiting


def min_feasible_ports(lam: float, mu: float, p: float, caps: PortCaps) -> int:
    c = max(1, caps.c_min)
    if lam > 0:
        c = max(c, int(math.floor(lam / (caps.rho_cap * mu * (1.0 - p)))) - 1)
    while lam / (c * (1.0 - p) * mu) > caps.rho_cap:
        c += 1
    return c


def evaluate_ports(lam: float, mu: float, p: float, c: int, cost: CostParams,
                   caps: PortCaps = PortCaps(), site_id: str = "",
                   convention: str = "continuous") -> SitePlan:
    params = QueueParams(lam, mu, c, p, c + caps.extra_capacity)
    m = stationary_metrics(params, convention)
    return SitePlan(site_id, cost.charger_type, c, m, station_cost(cost, m.c_eff),
                    waiting_cost(cost.c_salary, m))


def optimize_ports(lam: float, mu: float, p: float, cost: CostParams,
                   caps: PortCaps = PortCaps(), site_id: str = "",
                   convention: str = "continuous") -> SitePlan:
    """Scan every feasible port count and keep the cheapest daily objective.

    Feasible means ``rho_eff <= rho_cap``; ties resolve to fewer ports.
    """
    c_lo = min_feasible_ports(lam, mu, p, caps)
    if c_lo > caps.c_max:
        raise InfeasiblePorts(c_lo, caps.c_max)
    best = None
    for c in range(c_lo, caps.c_max + 1):
        plan = evaluate_ports(lam, mu, p, c, cost, caps, site_id, convention)
        if best is None or plan.objective < best.objective:
            best = plan
    return best


def write_site_plans_csv(path, plans: Iterable[SitePlan]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SITE_PLAN_FIELDS)
        for sp_ in plans:
            m = sp_.metrics
            writer.writerow([sp_.site_id, sp_.charger_type, sp_.c, f"{m.c_eff:.6f}",
                             f"{m.rho_eff:.9f}", f"{m.P0:.9f}", f"{m.Lq:.9f}",
                             f"{m.Wq:.9f}", f"{sp_.C_station:.2f}", f"{sp_.C_waiting:.6f}",
                             f"{sp_.objective:.6f}"])
