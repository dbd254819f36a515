import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evsiting import forecast as fc
from evsiting.forecast import CountyStats, PenetrationEnvelope


def test_zero_growth_keeps_share():
    assert fc.project_share(0.02, 0.0, 5) == 0.02


def test_three_years_of_ten_percent():
    assert fc.project_share(0.02, 0.1, 3) == pytest.approx(0.02662)


def test_envelope_caps_share():
    env = PenetrationEnvelope({2026: 0.03, 2030: 0.05})
    assert fc.project_share(0.02, 0.5, 1, env) == 0.03
    assert fc.project_share(0.02, 0.5, 0, env) == 0.02
    assert fc.project_share(0.02, 0.5, 10, env) == 0.05
    with pytest.raises(ValueError):
        PenetrationEnvelope({2026: 0.05, 2027: 0.04})


@given(st.floats(0, 0.5), st.floats(0, 0.3), st.integers(0, 10))
def test_share_monotone_in_year(beta, g, k):
    assert fc.project_share(beta, g, k + 1) >= fc.project_share(beta, g, k)


def test_county_share_and_cagr():
    c = CountyStats("c", 200, 10_000, 0.01, 0.012)
    assert c.beta == 0.02 and c.cagr == pytest.approx(0.2)
    with pytest.raises(ValueError):
        CountyStats("c", 1, 0, 0.01, 0.01)
    betas = fc.project_counties([c], [2025, 2027])
    assert betas[("c", 2027)] == pytest.approx(0.02 * 1.2 ** 2)


def test_zero_share_zero_rates():
    prof = fc.arrival_rates([100] * 24, 0.0)
    assert np.all(prof.rates == 0) and prof.design_rate == 0.0


def test_constant_counts():
    assert fc.arrival_rates([120] * 24, 0.05).design_rate == pytest.approx(6.0)


def test_only_daytime_hours_count():
    counts = [1000.0] * 8 + [10.0] * 12 + [1000.0] * 4
    assert fc.arrival_rates(counts, 0.1).design_rate == pytest.approx(1.0)


def test_missing_hour_named():
    with pytest.raises(ValueError, match=r"\[23\]"):
        fc.arrival_rates([1.0] * 23, 0.1, "s")
    with pytest.raises(ValueError, match=r"\[5\]"):
        fc.arrival_rates({t: 1.0 for t in range(24) if t != 5}, 0.1, "s")


def test_implied_growth_of_reference_table():
    for kind, lo, hi in [("DCFC", 0.118, 0.120), ("L2", 0.130, 0.132)]:
        t = fc.CAPACITY_TABLE[kind]
        assert lo < fc.implied_cagr(t[2024], t[2030], 6) < hi


def test_capacity_path_edges():
    assert fc.capacity_path(100, 0.1, 0) == [100]
    assert fc.capacity_path(100, 0.1, 2) == [100, 110, 121]
    with pytest.raises(ValueError):
        fc.capacity_path(0, 0.1, 2)


def test_csv_round_trips(tmp_path):
    cs = [CountyStats("a", 5, 100, 0.04, 0.05, 31.5)]
    fc.write_counties_csv(tmp_path / "c.csv", cs)
    assert fc.read_counties_csv(tmp_path / "c.csv") == cs
    fc.write_traffic_csv(tmp_path / "t.csv", {"s": list(range(24))})
    assert fc.read_traffic_csv(tmp_path / "t.csv")["s"] == list(map(float, range(24)))
    header = ",".join(fc.TRAFFIC_FIELDS)
    (tmp_path / "bad.csv").write_text(header + "\ns" + ",1" * 23 + ",\n")
    with pytest.raises(ValueError, match="h23"):
        fc.read_traffic_csv(tmp_path / "bad.csv")
    fc.write_forecast_csv(tmp_path / "f.csv", {("a", 2026): 0.05})
    assert (tmp_path / "f.csv").read_text().splitlines()[1] == "a,2026,0.050000000"
