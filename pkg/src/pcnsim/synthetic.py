"""Seeded synthetic channel graphs in the snapshot document layout.

Real channel-graph snapshots cannot be bundled, so experiments and tests
build scale-free graphs (preferential attachment, like the live network)
with capacities, fees and timelocks drawn from pools resembling commonly
advertised values.  A fraction of policies can be left unset to exercise
the missing-parameter repair path.
"""

from __future__ import annotations

import random

import networkx as nx

__all__ = ["scale_free_snapshot", "line_snapshot"]

# Pools loosely shaped after commonly advertised channel parameters.
CAPACITY_POOL = (
    400_000, 800_000, 1_000_000, 2_000_000, 2_000_000,
    4_600_000, 4_600_000, 8_000_000, 16_000_000,
)
BASE_FEE_POOL = (0, 1, 1, 1)
FEE_RATE_POOL = (
    0.000001, 0.00001, 0.00003, 0.00005,
    0.0001, 0.0001, 0.0002, 0.0003,
)
TIMELOCK_POOL = (14, 14, 40, 40, 144)


def scale_free_snapshot(
    num_nodes: int = 500,
    seed: int = 0,
    attachment: int = 2,
    missing_policy_rate: float = 0.0,
) -> dict:
    """Snapshot document for a preferential-attachment channel graph.

    Each graph edge becomes one channel; both directions draw independent
    policies.  With ``missing_policy_rate`` > 0 some policy fields are null
    and must be filled by resampling before routing.
    """
    if num_nodes < attachment + 1:
        raise ValueError("num_nodes must exceed the attachment count")
    rng = random.Random(f"synthetic:{seed}")
    graph = nx.barabasi_albert_graph(num_nodes, attachment, seed=rng.randint(0, 2**31))

    def policy(rng: random.Random) -> dict:
        full = {
            "base_fee_sat": rng.choice(BASE_FEE_POOL),
            "fee_rate": rng.choice(FEE_RATE_POOL),
            "timelock_delta": rng.choice(TIMELOCK_POOL),
        }
        if missing_policy_rate > 0.0:
            for key in full:
                if rng.random() < missing_policy_rate:
                    full[key] = None
        return full

    nodes = [{"id": f"n{idx:05d}"} for idx in range(num_nodes)]
    channels = []
    for k, (u, v) in enumerate(sorted(graph.edges())):
        channels.append(
            {
                "id": f"c{k:06d}",
                "node1": f"n{u:05d}",
                "node2": f"n{v:05d}",
                "capacity_sat": rng.choice(CAPACITY_POOL),
                "node1_policy": policy(rng),
                "node2_policy": policy(rng),
            }
        )
    return {"nodes": nodes, "channels": channels}


def line_snapshot(
    num_nodes: int,
    capacity: int = 1_000_000,
    base_fee: int = 1,
    fee_rate: float = 0.0001,
    timelock_delta: int = 40,
) -> dict:
    """Snapshot for a simple line of identical channels (handy in tests)."""
    if num_nodes < 2:
        raise ValueError("need at least two nodes")
    policy = {
        "base_fee_sat": base_fee,
        "fee_rate": fee_rate,
        "timelock_delta": timelock_delta,
    }
    return {
        "nodes": [{"id": f"n{idx}"} for idx in range(num_nodes)],
        "channels": [
            {
                "id": f"c{idx}",
                "node1": f"n{idx}",
                "node2": f"n{idx + 1}",
                "capacity_sat": capacity,
                "node1_policy": dict(policy),
                "node2_policy": dict(policy),
            }
            for idx in range(num_nodes - 1)
        ],
    }
