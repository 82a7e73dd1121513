#!/usr/bin/env python3
"""Route planning: fees compound backward, failures bias routes away.

Two candidate routes connect the sender to the receiver.  The cheap one wins
while its record is clean; one observed refusal later, the failure bias
(penalty divided by the product of per-hop success estimates) overwhelms a
few satoshis of fee difference and the planner detours.  Waiting lets the
estimate recover and the cheap route come back.
"""

import json

from pcnsim import BeliefStore, ObservationKey, ObservationKind, find_path, ingest_snapshot

DOC = {
    "nodes": [{"id": n} for n in ("sender", "alpha", "beta", "receiver")],
    "channels": [
        {"id": "s-a", "node1": "sender", "node2": "alpha", "capacity_sat": 400_000,
         "node1_policy": {"base_fee_sat": 0, "fee_rate": 0.0, "timelock_delta": 40},
         "node2_policy": {"base_fee_sat": 0, "fee_rate": 0.0, "timelock_delta": 40}},
        {"id": "a-r", "node1": "alpha", "node2": "receiver", "capacity_sat": 400_000,
         "node1_policy": {"base_fee_sat": 1, "fee_rate": 0.00005, "timelock_delta": 40},
         "node2_policy": {"base_fee_sat": 1, "fee_rate": 0.00005, "timelock_delta": 40}},
        {"id": "s-b", "node1": "sender", "node2": "beta", "capacity_sat": 400_000,
         "node1_policy": {"base_fee_sat": 0, "fee_rate": 0.0, "timelock_delta": 40},
         "node2_policy": {"base_fee_sat": 0, "fee_rate": 0.0, "timelock_delta": 40}},
        {"id": "b-r", "node1": "beta", "node2": "receiver", "capacity_sat": 400_000,
         "node1_policy": {"base_fee_sat": 8, "fee_rate": 0.0002, "timelock_delta": 40},
         "node2_policy": {"base_fee_sat": 8, "fee_rate": 0.0002, "timelock_delta": 40}},
    ],
}

net = ingest_snapshot(json.dumps(DOC).encode())
for ch in net.channels.values():
    ch.balance1 = ch.capacity  # fund the forward direction

store = BeliefStore()  # apriori 0.6, half-lives 30/60 minutes
AMOUNT = 30_000


def plan_and_print(label, clock):
    plan = find_path(net, "sender", "receiver", AMOUNT, risk_factor=1.5e-7,
                     belief_source=store, clock=clock)
    hops = " -> ".join(plan.nodes)
    print(f"{label:35s} {hops}   total fee {plan.total_fee} sat")
    for hop in plan.hops:
        print(f"    {hop.from_node:>8} locks {hop.amount_to_forward} "
              f"(fee {hop.fee}, timelock left {hop.cumulative_timelock})")
    return plan


plan_and_print("fresh view, t=100:", clock=100.0)

print("\nthe cheap route's second hop refuses a payment at t=100 ...\n")
store.record_failure(
    ObservationKey("sender", "alpha", "receiver",
                   ObservationKind.SENDER_REFUSAL_TO_LOCK),
    100.0,
)

plan_and_print("one minute later, t=101:", clock=101.0)
p = store.path_success_probability("sender", "alpha", "receiver", 101.0)
print(f"    (alpha->receiver success estimate is down to {p:.4f})")

plan_and_print("six hours later, t=460:", clock=460.0)
p = store.path_success_probability("sender", "alpha", "receiver", 460.0)
print(f"    (estimate recovered to {p:.4f}; cheap route wins again)")
