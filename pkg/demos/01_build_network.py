#!/usr/bin/env python3
"""Build a channel graph: generate, ingest, repair, and fund it.

Walks the full topology pipeline: a seeded synthetic snapshot (some policy
fields deliberately missing), ingestion with cleanup accounting, empirical
resampling of the missing parameters, and a uniform split of every channel's
capacity into the two directional balances.
"""

import json
from collections import Counter

from pcnsim import ingest_snapshot, initialize_balances, sample_missing_params
from pcnsim.synthetic import scale_free_snapshot

snapshot = scale_free_snapshot(num_nodes=300, seed=42, missing_policy_rate=0.25)
print(f"snapshot: {len(snapshot['nodes'])} nodes, {len(snapshot['channels'])} channels")

net = ingest_snapshot(json.dumps(snapshot).encode())
print(f"ingested: {len(net.adjacency)} nodes, {len(net.channels)} channels, "
      f"{net.ingest_warnings} cleanup warnings")

incomplete = sum(
    1 for ch in net.channels.values()
    for pol in (ch.policy1, ch.policy2) if not pol.is_complete()
)
print(f"policies missing at least one field: {incomplete}")

sample_missing_params(net, seed=42)
incomplete_after = sum(
    1 for ch in net.channels.values()
    for pol in (ch.policy1, ch.policy2) if not pol.is_complete()
)
print(f"after resampling from observed values: {incomplete_after} incomplete")

rates = Counter(
    pol.fee_rate for ch in net.channels.values() for pol in (ch.policy1, ch.policy2)
)
print("fee-rate distribution (top 5):")
for rate, count in rates.most_common(5):
    print(f"  {rate:.6f}: {count}")

initialize_balances(net, seed=42)
checks = all(
    0 <= ch.balance1 <= ch.capacity
    and ch.balance_from(ch.node1) + ch.balance_from(ch.node2) == ch.capacity
    for ch in net.channels.values()
)
print(f"directional balances sum to capacity on every channel: {checks}")

degrees = sorted((len(chs) for chs in net.adjacency.values()), reverse=True)
print(f"degree: max={degrees[0]}, median={degrees[len(degrees) // 2]}, min={degrees[-1]}")
