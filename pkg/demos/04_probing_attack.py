#!/usr/bin/env python3
"""What a balance-probing attack costs once locking is paid for.

The attacker bisects a target channel's hidden balance with fake payments.
Under the original fee model every probe is free.  With non-refundable fee
shares, each probe the target locks costs the attacker the covering share
(which equals the target's collateral cost), so the inferred information
finally has a price tag that grows with the balance being probed.
"""

from pcnsim import FeeModel
from pcnsim.probe import ProbeScenario, binary_search_balance, cost_curve

C = 4_600_000  # typical channel capacity, in satoshis

print("one bisection, hidden balance 3,141,592 sat:")
for model in (FeeModel.ORIGINAL, FeeModel.MOD_GUARANTEED):
    scenario = ProbeScenario(true_balance=3_141_592, capacity=C, fee_model=model)
    result = binary_search_balance(scenario, granularity=1)
    print(f"  {model.value:12s} -> [{result.inferred_low:,}, "
          f"{result.inferred_high:,}) in {result.iterations} probes, "
          f"total fees {result.total_cost} sat")
print("  (free probes come with a catch: after the first failure a rational")
print("   target's success estimate collapses and it stops locking, so the")
print("   original-model bisection above converged on a wrong interval; the")
print("   covering share keeps the target cooperating, at a price)")

print("\ncost curve under guaranteed shares (risk factor 1.5e-7):")
template = ProbeScenario(true_balance=0, capacity=C)
balances = [k * C // 22 for k in range(23)]
points = cost_curve(template, balances, granularity=1)
print(f"  {'balance':>12s} {'probes':>7s} {'cost':>6s} {'window mean':>12s}")
for p in points[::3]:
    print(f"  {p.balance:>12,} {p.iterations:>7d} {p.cost:>6d} "
          f"{p.window_mean_cost:>12.1f}")

slope = sum(p.balance * p.window_mean_cost for p in points) / \
    sum(p.balance**2 for p in points) * 1e6
print(f"\n  windowed cost rate: ~{slope:.0f} sat per million sat inferred")
print("  (scales with the risk factor: ten times the risk, ten times the rate)")

tenfold = ProbeScenario(true_balance=0, capacity=C, risk_factor=1.5e-6,
                        fee_rate=3e-4)
points10 = cost_curve(tenfold, balances, granularity=1)
slope10 = sum(p.balance * p.window_mean_cost for p in points10) / \
    sum(p.balance**2 for p in points10) * 1e6
print(f"  at risk factor 1.5e-6 the rate is ~{slope10:.0f} sat per million")
