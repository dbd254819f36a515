"""Build the synthetic four-zone region and run the full planning pipeline on it.

Run: python3 demos/fixture_pipeline.py [output_dir]
"""

import json
import sys
import tempfile
from pathlib import Path

from evsiting import load_config, run
from evsiting.synthetic import make_fixture

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
make_fixture(work / "data", seed=0)
cfg = load_config(work / "data" / "config.json")
plan = run(cfg, work / "out")

print(f"{len(plan.sites)} sites, total capital {plan.total_capital:,.0f}")
for s in sorted(plan.sites, key=lambda s: s.site_id):
    m = s.plan.metrics
    print(f"  {s.site_id:>8} {s.zone_id:>3} {s.origin:>9} {s.ports:3d} ports  "
          f"lambda {s.design_rate:6.2f}/h  rho_eff {m.rho_eff:.3f}  opens {s.activation_year}")
print("capital by year:", {y: round(v) for y, v in plan.capital_by_year.items()})
print(f"worst centroid-to-hub distance {plan.reachability_max_m / 1e3:.1f} km")
print(json.dumps(plan.equity.to_dict()["mean_distance_m"], indent=2))
print(f"outputs in {work / 'out'}")
