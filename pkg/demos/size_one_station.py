"""Size a single fast-charging site and see how outages change the answer.

Run: python3 demos/size_one_station.py
"""

from evsiting import queueing as qu

# a busy urban site: 9 EVs an hour in the daytime, 45 minute sessions on average
lam, mu = 9.0, qu.SERVICE_RATES["DCFC"]
cost = qu.CostParams.midpoint("DCFC", c_salary=30.0)

print(f"{'outage p':>9} {'ports':>6} {'rho_eff':>8} {'Lq':>8} {'Wq (min)':>9} {'daily cost':>11}")
for p in (0.0, 0.02, 0.05, 0.10, 0.20):
    plan = qu.optimize_ports(lam, mu, p, cost, qu.PortCaps(c_min=5))
    m = plan.metrics
    print(f"{p:9.2f} {plan.c:6d} {m.rho_eff:8.3f} {m.Lq:8.4f} {60 * m.Wq:9.2f} "
          f"{plan.objective:11.2f}")

# the whole cost curve for one setting, to show why the optimum sits where it does
print("\nports  station/day  waiting/day  total")
for c in range(5, 13):
    plan = qu.evaluate_ports(lam, mu, 0.05, c, cost, qu.PortCaps())
    print(f"{c:5d} {plan.C_station / 365:12.2f} {plan.C_waiting:12.4f} {plan.objective:7.2f}")
