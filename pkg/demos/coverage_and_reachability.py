"""Greedy site selection on random demand, then the 30 km reachability repair.

Run: python3 demos/coverage_and_reachability.py
"""

import numpy as np

from evsiting import equity, mclp, voronoi

rng = np.random.default_rng(0)

# demand clusters around three towns plus a thin rural scatter, in metres
towns = np.array([(20e3, 20e3), (60e3, 35e3), (35e3, 70e3)])
demand = np.vstack([rng.normal(t, 6e3, (600, 2)) for t in towns]
                   + [rng.uniform(0, 120e3, (300, 2))])
weights = rng.gamma(2.0, 1.0, len(demand))
candidates = rng.uniform(0, 120e3, (250, 2))

index = mclp.build_coverage_index(candidates, demand, radius=5_000.0)
print("budget  covered share")
for P in (2, 5, 10, 20, 40):
    res = mclp.greedy_budget(index, weights, P)
    print(f"{P:6d}  {res.coverage_fraction:.3f}")

res = mclp.greedy_coverage(index, weights, alpha=0.6)
print(f"\n60% coverage needs {len(res.site_ids)} sites")
hubs = candidates[res.positions]

# coarse centroids over the whole region must reach a hub within 30 km
g = np.arange(0, 125e3, 10e3)
centroids = np.array([(x, y) for x in g for y in g])
before = voronoi.assign_nearest(centroids, hubs)
added = voronoi.repair_coverage(centroids, hubs)
after = voronoi.assign_nearest(centroids, np.vstack([hubs] + [[(h.x, h.y)] for h in added]))
print(f"max distance to a hub: {before.max_distance / 1e3:.1f} km before, "
      f"{after.max_distance / 1e3:.1f} km after adding {len(added)} guarantee hubs")

for r in (5e3, 10e3, 30e3):
    m = equity.coverage_metrics(centroids, hubs, r, cell_edge=10e3 / np.sqrt(3), samples=20_000)
    print(f"R = {r / 1e3:4.0f} km  tile {m.tile_coverage:.3f}  area {m.area_coverage:.3f}")
