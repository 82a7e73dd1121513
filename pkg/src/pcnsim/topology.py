"""Channel-graph construction: snapshot ingestion, parameter repair, balances.

A network is a set of nodes joined by payment channels.  Each channel has a
fixed public capacity and two directional balances that always sum to that
capacity.  Forwarding parameters (base fee, proportional fee rate, timelock
delta) are per direction and may be missing in a snapshot, in which case they
can be filled in by resampling from the observed values.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import BinaryIO, Iterable, Union

__all__ = [
    "ChannelParams",
    "Channel",
    "Network",
    "SnapshotError",
    "EmptyNetworkError",
    "ingest_snapshot",
    "sample_missing_params",
    "initialize_balances",
]


class SnapshotError(ValueError):
    """Snapshot document cannot be parsed or violates the schema."""


class EmptyNetworkError(SnapshotError):
    """Snapshot contains no usable nodes or channels after cleanup."""


@dataclass(frozen=True)
class ChannelParams:
    """Forwarding policy for one direction of a channel.

    base_fee is in whole satoshis, fee_rate is a dimensionless fraction,
    timelock_delta is in blocks.  Any of the three may be None in a freshly
    ingested snapshot until repaired by :func:`sample_missing_params`.
    """

    base_fee: int | None = None
    fee_rate: float | None = None
    timelock_delta: int | None = None

    def is_complete(self) -> bool:
        return (
            self.base_fee is not None
            and self.fee_rate is not None
            and self.timelock_delta is not None
        )

    def validate(self) -> None:
        if self.base_fee is not None and self.base_fee < 0:
            raise SnapshotError(f"base_fee must be >= 0, got {self.base_fee}")
        if self.fee_rate is not None and not (0.0 <= self.fee_rate < 1.0):
            raise SnapshotError(f"fee_rate must be in [0, 1), got {self.fee_rate}")
        if self.timelock_delta is not None and self.timelock_delta <= 0:
            raise SnapshotError(
                f"timelock_delta must be > 0, got {self.timelock_delta}"
            )


@dataclass
class Channel:
    """A payment channel between two nodes.

    ``policy1`` governs forwarding in the node1 -> node2 direction and
    ``policy2`` the reverse.  ``balance1`` is the amount spendable by node1
    toward node2; the reverse balance is ``capacity - balance1`` so the two
    directions always sum to the capacity.
    """

    channel_id: str
    node1: str
    node2: str
    capacity: int
    policy1: ChannelParams = field(default_factory=ChannelParams)
    policy2: ChannelParams = field(default_factory=ChannelParams)
    balance1: int = 0

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise SnapshotError(
                f"channel {self.channel_id}: capacity must be > 0, got {self.capacity}"
            )
        if not (0 <= self.balance1 <= self.capacity):
            raise ValueError(
                f"channel {self.channel_id}: balance {self.balance1} outside "
                f"[0, {self.capacity}]"
            )

    def other(self, node: str) -> str:
        return self.node2 if node == self.node1 else self.node1

    def policy_from(self, node: str) -> ChannelParams:
        """Forwarding policy for payments sent by ``node`` over this channel."""
        return self.policy1 if node == self.node1 else self.policy2

    def balance_from(self, node: str) -> int:
        """Spendable balance of ``node`` toward the other endpoint."""
        return self.balance1 if node == self.node1 else self.capacity - self.balance1

    def move(self, from_node: str, amount: int) -> None:
        """Shift ``amount`` satoshis from ``from_node``'s side to the other.

        Capacity is conserved; a negative resulting balance is a programming
        error in the caller (locks must be balance-checked first).
        """
        if amount < 0:
            raise ValueError("amount must be >= 0")
        if self.balance_from(from_node) < amount:
            raise ValueError(
                f"channel {self.channel_id}: move of {amount} from {from_node} "
                f"exceeds balance {self.balance_from(from_node)}"
            )
        if from_node == self.node1:
            self.balance1 -= amount
        else:
            self.balance1 += amount


@dataclass
class Network:
    """Directed-balance channel graph with an adjacency index."""

    channels: dict[str, Channel] = field(default_factory=dict)
    adjacency: dict[str, list[Channel]] = field(default_factory=dict)
    ingest_warnings: int = 0

    @property
    def nodes(self) -> set[str]:
        return set(self.adjacency)

    def add_channel(self, channel: Channel) -> None:
        self.channels[channel.channel_id] = channel
        self.adjacency.setdefault(channel.node1, []).append(channel)
        self.adjacency.setdefault(channel.node2, []).append(channel)

    def copy(self) -> "Network":
        """Copy with private balances; immutable policies are shared."""
        dup = Network(ingest_warnings=self.ingest_warnings)
        for ch in self.channels.values():
            dup.add_channel(replace(ch))
        return dup

    def to_snapshot(self) -> dict:
        """Serialize back to the snapshot document layout."""

        def policy_dict(p: ChannelParams) -> dict:
            return {
                "base_fee_sat": p.base_fee,
                "fee_rate": p.fee_rate,
                "timelock_delta": p.timelock_delta,
            }

        return {
            "nodes": [{"id": n} for n in sorted(self.adjacency)],
            "channels": [
                {
                    "id": ch.channel_id,
                    "node1": ch.node1,
                    "node2": ch.node2,
                    "capacity_sat": ch.capacity,
                    "node1_policy": policy_dict(ch.policy1),
                    "node2_policy": policy_dict(ch.policy2),
                }
                for ch in self.channels.values()
            ],
        }


def _parse_policy(raw: object, channel_id: str) -> ChannelParams:
    if raw is None:
        return ChannelParams()
    if not isinstance(raw, dict):
        raise SnapshotError(f"channel {channel_id}: policy must be an object")
    base = raw.get("base_fee_sat")
    rate = raw.get("fee_rate")
    delta = raw.get("timelock_delta")
    params = ChannelParams(
        base_fee=None if base is None else int(base),
        fee_rate=None if rate is None else float(rate),
        timelock_delta=None if delta is None else int(delta),
    )
    try:
        params.validate()
    except SnapshotError as exc:
        raise SnapshotError(f"channel {channel_id}: {exc}") from None
    return params


def ingest_snapshot(source: Union[bytes, str, BinaryIO]) -> Network:
    """Build a Network from a snapshot JSON document.

    Cleanup rules: duplicate node or channel ids keep the first occurrence,
    channels referencing unknown nodes are dropped, and nodes left without
    channels are dropped.  Every dropped or deduplicated entry increments
    ``ingest_warnings``.

    Raises SnapshotError (with the byte offset for syntax errors) on a
    malformed document and EmptyNetworkError if nothing usable remains.
    """
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SnapshotError(
            f"malformed snapshot: {exc.msg} at byte offset {exc.pos}"
        ) from None

    if not isinstance(doc, dict) or "nodes" not in doc or "channels" not in doc:
        raise SnapshotError("snapshot must be an object with 'nodes' and 'channels'")

    warnings = 0
    known: set[str] = set()
    for entry in doc["nodes"]:
        node_id = entry.get("id") if isinstance(entry, dict) else None
        if not node_id or not isinstance(node_id, str):
            raise SnapshotError(f"node entry missing string id: {entry!r}")
        if node_id in known:
            warnings += 1
            continue
        known.add(node_id)

    net = Network()
    for entry in doc["channels"]:
        if not isinstance(entry, dict):
            raise SnapshotError(f"channel entry must be an object: {entry!r}")
        try:
            cid = str(entry["id"])
            n1 = str(entry["node1"])
            n2 = str(entry["node2"])
            cap = int(entry["capacity_sat"])
        except KeyError as exc:
            raise SnapshotError(f"channel entry missing field {exc}") from None
        if cid in net.channels:
            warnings += 1
            continue
        if n1 not in known or n2 not in known or n1 == n2:
            warnings += 1
            continue
        channel = Channel(
            channel_id=cid,
            node1=n1,
            node2=n2,
            capacity=cap,
            policy1=_parse_policy(entry.get("node1_policy"), cid),
            policy2=_parse_policy(entry.get("node2_policy"), cid),
            balance1=cap // 2,
        )
        net.add_channel(channel)

    # Nodes without any channel are dropped.
    warnings += len(known - set(net.adjacency))

    net.ingest_warnings = warnings
    if not net.channels:
        raise EmptyNetworkError("snapshot has no usable channels")
    return net


def _policies(net: Network) -> Iterable[tuple[Channel, str]]:
    for ch in net.channels.values():
        yield ch, "policy1"
        yield ch, "policy2"


def sample_missing_params(network: Network, seed: int) -> Network:
    """Fill missing policy fields by resampling observed values.

    Each of the three fields has its own donor pool built from all non-null
    values in the network; missing entries draw independently and with
    replacement.  Deterministic for a given seed.  Requires at least one
    fully specified policy.
    """
    pools: dict[str, list] = {"base_fee": [], "fee_rate": [], "timelock_delta": []}
    any_complete = False
    for ch, attr in _policies(network):
        p: ChannelParams = getattr(ch, attr)
        any_complete = any_complete or p.is_complete()
        if p.base_fee is not None:
            pools["base_fee"].append(p.base_fee)
        if p.fee_rate is not None:
            pools["fee_rate"].append(p.fee_rate)
        if p.timelock_delta is not None:
            pools["timelock_delta"].append(p.timelock_delta)
    if not any_complete:
        raise ValueError("no channel has a complete policy to sample from")

    rng = random.Random(f"params:{seed}")
    for ch, attr in _policies(network):
        p: ChannelParams = getattr(ch, attr)
        if p.is_complete():
            continue
        setattr(
            ch,
            attr,
            ChannelParams(
                base_fee=p.base_fee
                if p.base_fee is not None
                else rng.choice(pools["base_fee"]),
                fee_rate=p.fee_rate
                if p.fee_rate is not None
                else rng.choice(pools["fee_rate"]),
                timelock_delta=p.timelock_delta
                if p.timelock_delta is not None
                else rng.choice(pools["timelock_delta"]),
            ),
        )
    return network


def initialize_balances(network: Network, seed: int) -> Network:
    """Split every channel's capacity uniformly between its two directions.

    balance(node1 -> node2) is drawn uniformly from [0, capacity] and the
    reverse direction gets the complement.  Deterministic for a given seed.
    """
    rng = random.Random(f"balances:{seed}")
    for cid in sorted(network.channels):
        ch = network.channels[cid]
        ch.balance1 = rng.randint(0, ch.capacity)
    return network
