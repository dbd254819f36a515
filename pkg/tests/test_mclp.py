import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evsiting import mclp
from evsiting.mclp import CandidateSite, CoverageIndex
from oracles import brute_coverage_sets, exhaustive_mclp


def index_from_sets(sets, n):
    return CoverageIndex(1.0, [np.asarray(sorted(s), dtype=np.int64) for s in sets], n)


def test_far_candidate_covers_nothing():
    idx = mclp.build_coverage_index([(6_000.0, 0.0)], [(0.0, 0.0)], 5_000.0)
    assert idx.sets[0].size == 0


def test_colocated_and_boundary_covered():
    idx = mclp.build_coverage_index([(0.0, 0.0)], [(0.0, 0.0), (5_000.0, 0.0), (5_000.1, 0.0)],
                                    5_000.0)
    assert idx.sets[0].tolist() == [0, 1]


def test_index_equals_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(3):
        cand = rng.uniform(0, 50_000, (200, 2))
        dem = rng.uniform(0, 50_000, (2_000, 2))
        idx = mclp.build_coverage_index(cand, dem, 5_000.0)
        assert [set(s.tolist()) for s in idx.sets] == brute_coverage_sets(cand, dem, 5_000.0)


def test_radius_must_be_positive():
    with pytest.raises(ValueError):
        mclp.build_coverage_index([(0, 0)], [(0, 0)], 0.0)


def test_zero_budget():
    idx = index_from_sets([{0, 1}], 3)
    res = mclp.greedy_budget(idx, np.ones(3), 0)
    assert res.site_ids == [] and res.coverage_fraction == 0.0


def test_all_covering_candidate_alone():
    idx = index_from_sets([{0}, {0, 1, 2, 3}, {2}], 4)
    for P in (1, 2, 5):
        res = mclp.greedy_budget(idx, np.ones(4), P)
        assert res.site_ids == [1]


def test_greedy_bound_small_instance():
    rng = np.random.default_rng(3)
    sets = [set(np.flatnonzero(rng.random(40) < 0.15).tolist()) for _ in range(10)]
    w = rng.uniform(0, 1, 40)
    res = mclp.greedy_budget(index_from_sets(sets, 40), w, 3)
    assert res.covered >= (1 - 1 / math.e) * exhaustive_mclp(sets, w, 3) - 1e-12


def test_alpha_one_single_site():
    idx = index_from_sets([{0, 1}, {0, 1, 2}], 3)
    assert mclp.greedy_coverage(idx, np.ones(3), 1.0).site_ids == [1]


def test_alpha_infeasible():
    idx = index_from_sets([{0}, {1}], 4)
    with pytest.raises(mclp.InfeasibleCoverage) as err:
        mclp.greedy_coverage(idx, np.ones(4), 0.9)
    assert err.value.max_fraction == pytest.approx(0.5)


def test_layered_hand_trace():
    # A covers 0-4 (50 %), B covers 4-6 (30 %, overlaps A), C covers 7-9 (30 %)
    idx = index_from_sets([set(range(0, 5)), set(range(4, 7)), set(range(7, 10))], 10)
    res = mclp.greedy_coverage(idx, np.ones(10), 0.8, site_ids=["A", "B", "C"])
    assert res.site_ids == ["A", "C"]
    assert res.marginal == [5.0, 3.0]
    assert res.fractions == pytest.approx([0.5, 0.8])


def test_ties_by_sigma_then_id():
    idx = index_from_sets([{0}, {1}, {2}], 3)
    res = mclp.greedy_budget(idx, np.ones(3), 1, site_ids=["c", "a", "b"], sigma=[0.5, 0.1, 0.5])
    assert res.site_ids == ["b"]
    res = mclp.greedy_budget(idx, np.ones(3), 3, site_ids=["c", "a", "b"])
    assert res.site_ids == ["a", "b", "c"]


def test_zone_cap():
    idx = index_from_sets([{0, 1}, {2, 3}, {4}], 5)
    res = mclp.greedy_budget(idx, np.ones(5), 3, zones=["z1", "z1", "z2"], zone_cap=1)
    assert res.positions == [0, 2]
    res = mclp.greedy_budget(idx, np.ones(5), 3, zones=["z1", "z1", "z2"],
                             zone_cap={"z1": 2, "z2": 0})
    assert res.positions == [0, 1]


def test_stops_when_nothing_left_to_gain():
    idx = index_from_sets([{0}, {0}], 2)
    res = mclp.greedy_budget(idx, np.array([1.0, 1.0]), 5)
    assert len(res.site_ids) == 1


@st.composite
def instances(draw):
    n_i = draw(st.integers(1, 8))
    n_j = draw(st.integers(1, 25))
    sets = [set(draw(st.lists(st.integers(0, n_j - 1), max_size=n_j))) for _ in range(n_i)]
    w = draw(st.lists(st.floats(0, 10), min_size=n_j, max_size=n_j))
    return sets, np.array(w), draw(st.integers(0, n_i))


@given(instances())
def test_greedy_properties(inst):
    sets, w, P = inst
    res = mclp.greedy_budget(index_from_sets(sets, len(w)), w, P)
    assert len(res.site_ids) <= P
    assert len(set(res.site_ids)) == len(res.site_ids)
    # diminishing returns and exact bookkeeping of the covered union
    assert all(a >= b - 1e-9 for a, b in zip(res.marginal, res.marginal[1:]))
    union = set().union(*(sets[i] for i in res.positions)) if res.positions else set()
    assert res.covered == pytest.approx(sum(w[j] for j in union), abs=1e-9)
    assert res.covered >= (1 - 1 / math.e) * exhaustive_mclp(sets, w, P) - 1e-9


def cand(i, zone, sigma=0.0, c_gnn=0.5, poi=0.0, excluded=False):
    return CandidateSite(i, 0.0, 0.0, zone, c_gnn=c_gnn, poi_load=poi, excluded=excluded,
                         sigma=sigma)


def test_rank_small_zone_kept_whole():
    cs = [cand(f"n{k}", "z", sigma=k) for k in range(3)]
    assert len(mclp.rank_per_zone(cs, 5)) == 3


def test_rank_drops_lowest():
    sig = [0.9, 0.7, 0.5, 0.3, 0.2, 0.1]
    cs = [cand(f"n{k}", "z", sigma=s) for k, s in enumerate(sig)]
    kept = mclp.rank_per_zone(cs, 5)
    assert [c.sigma for c in kept] == sig[:5]


def test_rank_skips_excluded():
    cs = [cand("best", "z", sigma=1.0, excluded=True), cand("b", "z", sigma=0.5)]
    assert [c.id for c in mclp.rank_per_zone(cs, 5)] == ["b"]


def test_rank_scores_per_zone():
    cs = [cand("a", "z1", c_gnn=0.2, poi=10), cand("b", "z1", c_gnn=0.8, poi=0),
          cand("c", "z2", c_gnn=0.5, poi=3)]
    mclp.assign_rank_scores(cs, 0.6, 0.4)
    assert [c.sigma for c in cs] == pytest.approx([0.6, 0.4, 0.0])


def test_zone_site_weights():
    cs = [cand("a", "z", c_gnn=1.0), cand("b", "z", c_gnn=0.0)]
    cov = {"a": 0.0, "b": 1.0}
    assert mclp.score_zone_sites(cs, cov, 0.4, 0.6).chosen == {"z": "b"}
    assert mclp.score_zone_sites(cs, cov, 1.0, 0.0).chosen == {"z": "a"}
    assert mclp.score_zone_sites(cs, cov, 0.0, 1.0).chosen == {"z": "b"}
    res = mclp.score_zone_sites(cs, cov, zones=["z", "empty"])
    assert res.skipped == ["empty"]
    with pytest.raises(ValueError):
        mclp.score_zone_sites(cs, cov, 0.0, 0.0)


def test_income_upweight():
    w = mclp.income_upweight([1.0, 1.0, 1.0], [10, 20, 30], 2.0)
    assert w.tolist() == [2.0, 1.0, 1.0]
    assert mclp.income_upweight([1.0], [5], 1.0).tolist() == [1.0]


def test_selection_outputs(tmp_path):
    cs = {"a": CandidateSite("a", 0, 0, "z", lat=33.7, lon=-84.4)}
    res = mclp.greedy_budget(index_from_sets([{0}], 1), np.ones(1), 1, site_ids=["a"])
    mclp.write_selection_csv(tmp_path / "s.csv", res, cs)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[1].startswith("1,a,z,33.700000,-84.400000,")
    feat = mclp.selection_features(res, cs)[0]
    assert feat["geometry"]["coordinates"] == [-84.4, 33.7]
