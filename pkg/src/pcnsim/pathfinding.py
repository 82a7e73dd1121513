"""Cheapest-route search over a channel graph.

The route cost combines three ingredients per hop: the forwarding fee, a
timelock penalty proportional to amount x timelock x risk factor, and a
failure-history bias equal to a fixed penalty divided by the product of the
per-hop success probabilities.  Search runs from the receiver toward the
sender so that forwarded amounts (which grow by each hop's fee) are known
exactly when an edge is priced.

The bias term is not additive along a path, so the search keeps, per frontier
node, the running suffix-probability product and relaxes on the combined
node cost.  This is a single-pass heuristic: it can return a slightly
suboptimal route when probabilities differ across branches, and is exact when
they do not (the bias then adds the same constant to every candidate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Optional, Protocol, Sequence

from .topology import Channel, ChannelParams, Network

__all__ = [
    "round_half_up",
    "hop_fee",
    "edge_weight",
    "channel_success_probability",
    "path_bias",
    "HopPlan",
    "PathPlan",
    "find_path",
]


def round_half_up(value: float) -> int:
    """Round to the nearest integer with .5 going up (not banker's)."""
    return math.floor(value + 0.5)


def hop_fee(params: ChannelParams, amount: int) -> int:
    """Forwarding fee in whole satoshis: base_fee + round(amount * fee_rate)."""
    if amount < 0:
        raise ValueError("amount must be >= 0")
    if params.base_fee is None or params.fee_rate is None:
        raise ValueError("fee parameters are incomplete")
    return params.base_fee + round_half_up(amount * params.fee_rate)


def edge_weight(amount: int, hop_timelock: int, risk_factor: float, fee: int) -> float:
    """Routing weight of one hop: amount * timelock * risk_factor + fee."""
    if amount < 0 or hop_timelock < 0 or risk_factor < 0 or fee < 0:
        raise ValueError("edge_weight inputs must be >= 0")
    return amount * hop_timelock * risk_factor + fee


def channel_success_probability(
    time_since_last_failure: Optional[float], apriori: float, half_life: float
) -> float:
    """Estimated success probability of a channel.

    With no recorded failure the channel-independent apriori value applies;
    otherwise the estimate starts at zero right after the failure and climbs
    back toward the apriori value with the given half-life (minutes).
    """
    if not 0.0 <= apriori <= 1.0:
        raise ValueError("apriori must be in [0, 1]")
    if half_life <= 0:
        raise ValueError("half_life must be > 0")
    if time_since_last_failure is None:
        return apriori
    if time_since_last_failure < 0:
        raise ValueError("time since failure must be >= 0")
    return apriori * (1.0 - 2.0 ** (-time_since_last_failure / half_life))


def path_bias(success_probs: Sequence[float], penalty: float) -> float:
    """Failure-history bias: penalty / product of hop success probabilities.

    A zero probability anywhere makes the path unusable (+inf).
    """
    product = 1.0
    for p in success_probs:
        if p < 0.0 or p > 1.0:
            raise ValueError("probabilities must be in [0, 1]")
        product *= p
    if product == 0.0:
        return math.inf
    return penalty / product


class HopProbabilitySource(Protocol):
    """Sender-side estimate of a directed hop's success probability."""

    def path_success_probability(
        self, observer: str, from_node: str, to_node: str, now: float
    ) -> float: ...


@dataclass(frozen=True)
class HopPlan:
    """One hop of a planned payment, in sender-to-receiver order.

    ``fee`` is the fee charged by ``from_node`` for forwarding
    ``amount_to_forward`` over this channel; it is zero on the first hop
    because the sender does not charge itself.
    """

    channel: Channel
    from_node: str
    to_node: str
    amount_to_forward: int
    fee: int
    hop_timelock: int
    cumulative_timelock: int


@dataclass(frozen=True)
class PathPlan:
    """A complete route: hops from sender to receiver plus fee totals."""

    hops: tuple[HopPlan, ...]
    amount: int
    total_fee: int

    @property
    def nodes(self) -> list[str]:
        return [self.hops[0].from_node] + [h.to_node for h in self.hops]

    @property
    def num_hops(self) -> int:
        return len(self.hops)


def find_path(
    network: Network,
    sender: str,
    receiver: str,
    amount: int,
    risk_factor: float,
    penalty: float = 100.0,
    belief_source: Optional[HopProbabilitySource] = None,
    clock: float = 0.0,
) -> Optional[PathPlan]:
    """Search for the cheapest usable route from sender to receiver.

    Channels are priced with ``edge_weight`` on the exact amount they would
    have to lock; a hop is excluded when its public capacity cannot cover
    that amount, and first hops are additionally excluded when the sender's
    own spendable balance cannot (the sender knows its own channels).
    Without a ``belief_source`` every hop gets probability 1, which turns the
    bias into a constant.  Ties break toward the lexicographically smallest
    next-hop node.  Returns None when no route exists.
    """
    if sender == receiver:
        raise ValueError("sender and receiver must differ")
    if amount <= 0:
        raise ValueError("amount must be > 0")
    if sender not in network.adjacency or receiver not in network.adjacency:
        return None

    def hop_probability(u: str, w: str) -> float:
        if belief_source is None:
            return 1.0
        return belief_source.path_success_probability(sender, u, w, clock)

    # Per settled node: suffix weight sum, suffix probability product, the
    # amount a predecessor must lock to reach it, and the forward link.
    State = tuple[float, float, int, Optional[Channel], Optional[str]]
    settled: dict[str, State] = {}
    # Tentative best (cost, next_node) per node for deterministic tie-breaks.
    best: dict[str, tuple[float, str]] = {receiver: (penalty, "")}
    pending: dict[str, State] = {receiver: (0.0, 1.0, amount, None, None)}
    heap: list[tuple[float, str]] = [(penalty, receiver)]

    while heap:
        cost, w = heappop(heap)
        if w in settled or cost > best[w][0]:
            continue
        settled[w] = pending[w]
        if w == sender:
            break
        weight_sum, prob_product, lock_in, _, _ = settled[w]
        for channel in network.adjacency[w]:
            u = channel.other(w)
            if u in settled:
                continue
            if channel.capacity < lock_in:
                continue
            if u == sender and channel.balance_from(sender) < lock_in:
                continue
            policy = channel.policy_from(u)
            if not policy.is_complete():
                continue
            p = hop_probability(u, w)
            if p <= 0.0:
                continue
            fee = 0 if u == sender else hop_fee(policy, lock_in)
            new_weight = weight_sum + edge_weight(
                lock_in, policy.timelock_delta, risk_factor, fee
            )
            new_prob = prob_product * p
            new_cost = new_weight + penalty / new_prob
            known = best.get(u)
            if known is None or (new_cost, w) < known:
                best[u] = (new_cost, w)
                pending[u] = (new_weight, new_prob, lock_in + fee, channel, w)
                heappush(heap, (new_cost, u))

    if sender not in settled:
        return None

    hops: list[HopPlan] = []
    node = sender
    while node != receiver:
        _, _, _, channel, nxt = settled[node]
        _, _, lock_in_next, _, _ = settled[nxt]
        policy = channel.policy_from(node)
        fee = 0 if node == sender else hop_fee(policy, lock_in_next)
        hops.append(
            HopPlan(
                channel=channel,
                from_node=node,
                to_node=nxt,
                amount_to_forward=lock_in_next,
                fee=fee,
                hop_timelock=policy.timelock_delta,
                cumulative_timelock=0,  # filled below
            )
        )
        node = nxt

    cumulative = 0
    finished: list[HopPlan] = []
    for hop in reversed(hops):
        cumulative += hop.hop_timelock
        finished.append(
            HopPlan(
                channel=hop.channel,
                from_node=hop.from_node,
                to_node=hop.to_node,
                amount_to_forward=hop.amount_to_forward,
                fee=hop.fee,
                hop_timelock=hop.hop_timelock,
                cumulative_timelock=cumulative,
            )
        )
    finished.reverse()

    total_fee = sum(h.fee for h in finished[1:])
    assert finished[0].amount_to_forward == amount + total_fee
    return PathPlan(hops=tuple(finished), amount=amount, total_fee=total_fee)
