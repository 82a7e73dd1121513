"""Sequential payment execution over a channel network.

Each run owns a private copy of the network and a fresh belief store.  A
small participant pool is drawn per run; payments pick sender, receiver,
amount and inter-payment delay from seeded streams, so identical
configurations replay identically and different fee models see the same
payment sequence.  Payments resolve immediately: the route is planned, each
forwarding node plays its lock move in path order, and the first refusal
ends the payment.  Successes move balances along the route; failures leave
balances untouched but transfer the non-refundable fee shares and update
everyone's failure memories.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .beliefs import BeliefStore, ObservationKey, ObservationKind
from .game import (
    FeeModel,
    HopEconomics,
    Move,
    choose_fraction,
    collateral_cost,
    decide_lock,
)
from .pathfinding import PathPlan, find_path, round_half_up
from .topology import Network

__all__ = [
    "SimConfig",
    "Outcome",
    "PaymentRecord",
    "MetricValue",
    "Metrics",
    "run_simulation",
    "settle_success",
    "settle_failure",
    "compute_metrics",
    "metrics_csv",
    "records_jsonl",
]


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    fee_model: FeeModel = FeeModel.ORIGINAL
    num_payments: int = 1000
    num_runs: int = 10
    participant_pool_size: int = 10
    amount_range: tuple[int, int] = (16_000, 48_000)
    delay_range: tuple[float, float] = (0.1, 1.0)
    risk_factor: float = 1.5e-7
    penalty: float = 100.0
    apriori: float = 0.6
    half_life_intermediary: float = 30.0
    tau: float = 2.0

    def __post_init__(self) -> None:
        if self.participant_pool_size < 2:
            raise ValueError("participant pool needs at least 2 nodes")
        if self.amount_range[0] > self.amount_range[1] or self.amount_range[0] <= 0:
            raise ValueError("amount_range must be a non-empty positive interval")
        if self.delay_range[0] > self.delay_range[1] or self.delay_range[0] < 0:
            raise ValueError("delay_range must be a non-empty non-negative interval")
        if self.tau <= 1.0:
            raise ValueError("tau must be > 1")


class Outcome(Enum):
    SUCCEEDED = "succeeded"
    FAILED_NO_PATH = "failed_no_path"
    FAILED_REFUSAL = "failed_refusal"


@dataclass
class PaymentRecord:
    run: int
    index: int
    sender: str
    receiver: str
    amount: int
    path: Optional[PathPlan]
    moves: tuple[Move, ...]
    outcome: Outcome
    refusal_hop: Optional[int]
    fees_paid: int
    nonrefundable_paid: int
    nonrefundable_credits: tuple[int, ...]
    fractions: tuple[float, ...]
    timestamp: float
    refusal_reason: Optional[str] = None  # "balance" or "utility"


@dataclass(frozen=True)
class MetricValue:
    per_run: tuple[Optional[float], ...]
    mean: Optional[float]
    std: Optional[float]


@dataclass(frozen=True)
class Metrics:
    success_ratio: MetricValue
    lock_ratio: MetricValue
    intermediary_fee: MetricValue
    sender_fee: MetricValue
    intermediary_nonrefundable: MetricValue
    sender_nonrefundable: MetricValue

    def as_dict(self) -> dict[str, MetricValue]:
        return {
            "SR": self.success_ratio,
            "LR": self.lock_ratio,
            "F_I": self.intermediary_fee,
            "F_S": self.sender_fee,
            "F_I_prime": self.intermediary_nonrefundable,
            "F_S_prime": self.sender_nonrefundable,
        }


def run_simulation(
    network: Network, config: SimConfig
) -> tuple[Metrics, list[PaymentRecord]]:
    """Execute ``num_runs`` independent runs of ``num_payments`` payments.

    Every run copies the input network (balances evolve privately), samples
    its participant pool from all nodes, and advances a simulated clock by a
    uniform delay before each payment.  All draws are deterministic in
    ``config.seed`` and independent of the fee model, so runs under
    different models are directly comparable.
    """
    records: list[PaymentRecord] = []
    all_nodes = sorted(network.adjacency)
    pool_size = min(config.participant_pool_size, len(all_nodes))
    if pool_size < 2:
        raise ValueError("network too small to sample a participant pool")

    for run in range(config.num_runs):
        net = network.copy()
        store = BeliefStore(
            apriori=config.apriori,
            half_life_intermediary=config.half_life_intermediary,
            tau=config.tau,
        )
        rng = random.Random(f"payments:{config.seed}:{run}")
        pool = rng.sample(all_nodes, pool_size)
        clock = 0.0
        for index in range(config.num_payments):
            clock += rng.uniform(*config.delay_range)
            sender, receiver = rng.sample(pool, 2)
            amount = rng.randint(*config.amount_range)
            record = _execute_payment(
                net, store, config, run, index, sender, receiver, amount, clock
            )
            records.append(record)

    return compute_metrics(records, config.num_runs), records


def _hop_fractions(
    path: PathPlan,
    model: FeeModel,
    store: BeliefStore,
    sender: str,
    risk_factor: float,
    clock: float,
) -> tuple[list[HopEconomics], list[float]]:
    """Economics and offered non-refundable fraction per forwarding hop."""
    econs: list[HopEconomics] = []
    fractions: list[float] = []
    for hop in path.hops[1:]:
        collateral = collateral_cost(
            hop.cumulative_timelock, hop.amount_to_forward, risk_factor
        )
        base = HopEconomics(
            fee=hop.fee,
            collateral=collateral,
            nonrefundable_fraction=0.0,
            amount=hop.amount_to_forward,
            cumulative_timelock=hop.cumulative_timelock,
        )
        if model is FeeModel.MOD_INCENTIVIZED:
            p_tilde = store.success_estimate(
                ObservationKey(
                    sender,
                    hop.from_node,
                    hop.to_node,
                    ObservationKind.SENDER_POST_LOCK_FAILURE,
                ),
                clock,
            )
            buffer = store.sender_buffer(sender, hop.from_node, hop.to_node, clock)
            x = choose_fraction(model, base, p_tilde=p_tilde, buffer=buffer)
        else:
            x = choose_fraction(model, base)
        econs.append(
            HopEconomics(
                fee=base.fee,
                collateral=base.collateral,
                nonrefundable_fraction=x,
                amount=base.amount,
                cumulative_timelock=base.cumulative_timelock,
            )
        )
        fractions.append(x)
    return econs, fractions


def _execute_payment(
    net: Network,
    store: BeliefStore,
    config: SimConfig,
    run: int,
    index: int,
    sender: str,
    receiver: str,
    amount: int,
    clock: float,
) -> PaymentRecord:
    path = find_path(
        net,
        sender,
        receiver,
        amount,
        risk_factor=config.risk_factor,
        penalty=config.penalty,
        belief_source=store,
        clock=clock,
    )
    if path is None:
        return PaymentRecord(
            run, index, sender, receiver, amount, None, (), Outcome.FAILED_NO_PATH,
            None, 0, 0, (), (), clock,
        )

    econs, fractions = _hop_fractions(
        path, config.fee_model, store, sender, config.risk_factor, clock
    )

    moves: list[Move] = []
    refusal_hop: Optional[int] = None
    refusal_reason: Optional[str] = None
    for i, hop in enumerate(path.hops[1:]):
        balance_ok = hop.channel.balance_from(hop.from_node) >= hop.amount_to_forward
        p_own = store.success_estimate(
            ObservationKey(
                hop.from_node,
                hop.from_node,
                hop.to_node,
                ObservationKind.INTERMEDIARY_DOWNSTREAM_FAILURE,
            ),
            clock,
        )
        decision = decide_lock(config.fee_model, econs[i], p_own, balance_ok)
        moves.append(decision.move)
        if decision.move is Move.NO_LOCK:
            refusal_hop = i
            refusal_reason = "balance" if not balance_ok else "utility"
            break

    record = PaymentRecord(
        run, index, sender, receiver, amount, path, tuple(moves),
        Outcome.SUCCEEDED if refusal_hop is None else Outcome.FAILED_REFUSAL,
        refusal_hop, 0, 0, (), tuple(fractions), clock,
        refusal_reason=refusal_reason,
    )

    if refusal_hop is None:
        settle_success(record, net)
        record.fees_paid = path.total_fee
    else:
        _, credits = settle_failure(record, net)
        record.nonrefundable_credits = credits
        record.nonrefundable_paid = sum(credits)
        _record_failure_observations(store, record, clock)
    return record


def _record_failure_observations(
    store: BeliefStore, record: PaymentRecord, clock: float
) -> None:
    """After a refusal: locked forwarders remember the downstream failure;
    the sender remembers post-lock failures for hops that locked and the
    refusal for the hop that did not."""
    assert record.path is not None and record.refusal_hop is not None
    sender = record.sender
    for i, hop in enumerate(record.path.hops[1:]):
        if i < record.refusal_hop:
            store.record_failure(
                ObservationKey(
                    hop.from_node,
                    hop.from_node,
                    hop.to_node,
                    ObservationKind.INTERMEDIARY_DOWNSTREAM_FAILURE,
                ),
                clock,
            )
            store.record_failure(
                ObservationKey(
                    sender,
                    hop.from_node,
                    hop.to_node,
                    ObservationKind.SENDER_POST_LOCK_FAILURE,
                ),
                clock,
            )
        elif i == record.refusal_hop:
            store.record_failure(
                ObservationKey(
                    sender,
                    hop.from_node,
                    hop.to_node,
                    ObservationKind.SENDER_REFUSAL_TO_LOCK,
                ),
                clock,
            )
            break


def settle_success(payment: PaymentRecord, network: Network) -> Network:
    """Move each hop's locked amount forward; capacity is conserved."""
    if payment.outcome is not Outcome.SUCCEEDED:
        raise ValueError("settle_success requires a succeeded payment")
    assert payment.path is not None
    for hop in payment.path.hops:
        hop.channel.move(hop.from_node, hop.amount_to_forward)
    return network


def settle_failure(
    payment: PaymentRecord, network: Network
) -> tuple[Network, tuple[int, ...]]:
    """Release all locks without touching balances and pay out the
    non-refundable fee shares.

    Returns per-forwarding-hop credits (whole satoshis, rounded half-up);
    hops that never locked get zero.  The sender's total outlay is the sum.
    """
    if payment.outcome is Outcome.SUCCEEDED:
        raise ValueError("settle_failure requires a failed payment")
    if payment.path is None:
        return network, ()
    credits: list[int] = []
    for i, hop in enumerate(payment.path.hops[1:]):
        locked = i < len(payment.moves) and payment.moves[i] is Move.LOCK
        if locked and payment.fractions[i] > 0.0:
            credits.append(round_half_up(payment.fractions[i] * hop.fee))
        else:
            credits.append(0)
    return network, tuple(credits)


def _mean(values: Sequence[float]) -> Optional[float]:
    if not values:
        return None
    return sum(values) / len(values)


def _aggregate(per_run: Sequence[Optional[float]]) -> MetricValue:
    present = [v for v in per_run if v is not None]
    if not present:
        return MetricValue(tuple(per_run), None, None)
    mean = sum(present) / len(present)
    variance = sum((v - mean) ** 2 for v in present) / len(present)
    return MetricValue(tuple(per_run), mean, math.sqrt(variance))


def compute_metrics(records: Sequence[PaymentRecord], num_runs: int) -> Metrics:
    """Aggregate per-run ratios and fee averages.

    Per run: success ratio over all attempts (routeless attempts count as
    failures), lock ratio over forwarding moves, full-fee averages per
    sender payment and per (forwarder, payment) participation with failures
    contributing zero, and non-refundable averages over failed payments
    only.  Runs with an empty denominator report the metric as absent.
    """
    sr: list[Optional[float]] = []
    lr: list[Optional[float]] = []
    f_i: list[Optional[float]] = []
    f_s: list[Optional[float]] = []
    f_i_prime: list[Optional[float]] = []
    f_s_prime: list[Optional[float]] = []

    for run in range(num_runs):
        batch = [r for r in records if r.run == run]
        attempted = len(batch)
        succeeded = sum(1 for r in batch if r.outcome is Outcome.SUCCEEDED)
        sr.append(succeeded / attempted if attempted else None)

        moves = [m for r in batch for m in r.moves]
        lr.append(
            sum(1 for m in moves if m is Move.LOCK) / len(moves) if moves else None
        )

        fee_entries: list[float] = []
        sender_fees: list[float] = []
        nonref_entries: list[float] = []
        sender_nonref: list[float] = []
        for r in batch:
            if r.path is None:
                continue
            ok = r.outcome is Outcome.SUCCEEDED
            sender_fees.append(float(r.fees_paid) if ok else 0.0)
            for hop in r.path.hops[1:]:
                fee_entries.append(float(hop.fee) if ok else 0.0)
            if not ok:
                sender_nonref.append(float(r.nonrefundable_paid))
                for i in range(len(r.path.hops) - 1):
                    credit = (
                        r.nonrefundable_credits[i]
                        if i < len(r.nonrefundable_credits)
                        else 0
                    )
                    nonref_entries.append(float(credit))
        f_i.append(_mean(fee_entries))
        f_s.append(_mean(sender_fees))
        f_i_prime.append(_mean(nonref_entries))
        f_s_prime.append(_mean(sender_nonref))

    return Metrics(
        success_ratio=_aggregate(sr),
        lock_ratio=_aggregate(lr),
        intermediary_fee=_aggregate(f_i),
        sender_fee=_aggregate(f_s),
        intermediary_nonrefundable=_aggregate(f_i_prime),
        sender_nonrefundable=_aggregate(f_s_prime),
    )


def metrics_csv(metrics: Metrics) -> str:
    """Per-run metric table, one row per run, blank cells for absent values."""
    names = ["SR", "LR", "F_I", "F_S", "F_I_prime", "F_S_prime"]
    columns = metrics.as_dict()
    num_runs = len(metrics.success_ratio.per_run)
    lines = ["run," + ",".join(names)]
    for run in range(num_runs):
        cells = [str(run)]
        for name in names:
            value = columns[name].per_run[run]
            cells.append("" if value is None else repr(value))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def records_jsonl(records: Iterable[PaymentRecord]) -> Iterable[str]:
    """One JSON object per payment, stable field order."""
    for r in records:
        yield json.dumps(
            {
                "run": r.run,
                "index": r.index,
                "sender": r.sender,
                "receiver": r.receiver,
                "amount": r.amount,
                "path": None if r.path is None else r.path.nodes,
                "moves": [m.value for m in r.moves],
                "outcome": r.outcome.value,
                "refusal_hop": r.refusal_hop,
                "fees_paid": r.fees_paid,
                "nonrefundable_paid": r.nonrefundable_paid,
                "nonrefundable_credits": list(r.nonrefundable_credits),
                "fractions": list(r.fractions),
                "timestamp": r.timestamp,
                "refusal_reason": r.refusal_reason,
            },
            sort_keys=True,
        )
