"""Channel-balance inference by bisection, with its fee cost.

The attacker sits one hop away from the target channel and fires fake
payments through it; the far endpoint plays receiver.  A probe "locks" when
the target has both the balance and the incentive to forward, and the
attacker then lets the payment die, so under non-refundable fees every
locked probe costs the offered fee share.  Bisection over [0, capacity]
narrows the hidden balance to the requested granularity.

The attack reads a refusal as "balance too low", so it needs targets that
lock whenever they can.  The attacker therefore offers the collateral-covering
fraction from the first probe on; with the default scenario parameters the
fee dominates the collateral over the whole amount range, keeping that
fraction below one and the inference sound.  Under the original fee model
probes cost nothing (and a belief-updating target may stop cooperating, so
the inferred interval is only trustworthy while it locks).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .beliefs import BeliefStore, ObservationKey, ObservationKind
from .game import FeeModel, HopEconomics, Move, collateral_cost, decide_lock
from .pathfinding import round_half_up
from .topology import ChannelParams

__all__ = [
    "ProbeScenario",
    "ProbeResult",
    "CostPoint",
    "probe_once",
    "binary_search_balance",
    "cost_curve",
    "cost_curve_csv",
]


@dataclass(frozen=True)
class ProbeScenario:
    """One target channel as seen from the attacker.

    ``true_balance`` is hidden from the attacker and only drives the
    lock-or-not outcomes.  The fee parameters belong to the target hop.
    """

    true_balance: int
    capacity: int = 4_600_000
    timelock: int = 144
    base_fee: int = 1
    fee_rate: float = 1e-4
    risk_factor: float = 1.5e-7
    fee_model: FeeModel = FeeModel.MOD_GUARANTEED
    attacker: str = "prober"
    target: str = "target"
    far_node: str = "peer"
    apriori: float = 0.6
    half_life_intermediary: float = 30.0
    tau: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.true_balance <= self.capacity:
            raise ValueError("true_balance must lie in [0, capacity]")

    @property
    def fee_params(self) -> ChannelParams:
        return ChannelParams(
            base_fee=self.base_fee,
            fee_rate=self.fee_rate,
            timelock_delta=self.timelock,
        )


@dataclass(frozen=True)
class ProbeResult:
    inferred_low: int
    inferred_high: int  # exclusive
    iterations: int
    total_cost: int


@dataclass(frozen=True)
class CostPoint:
    balance: int
    iterations: int
    cost: int
    window_mean_cost: float


def _target_economics(scenario: ProbeScenario, amount: int) -> HopEconomics:
    from .pathfinding import hop_fee

    fee = hop_fee(scenario.fee_params, amount)
    collateral = collateral_cost(scenario.timelock, amount, scenario.risk_factor)
    if scenario.fee_model is FeeModel.ORIGINAL:
        x = 0.0
    else:
        # Covering fraction: after the first failed probe a rational target
        # demands it anyway, so the attacker leads with it.
        x = min(1.0, collateral / fee) if fee > 0 else 0.0
    return HopEconomics(
        fee=fee,
        collateral=collateral,
        nonrefundable_fraction=x,
        amount=amount,
        cumulative_timelock=scenario.timelock,
    )


def probe_once(
    scenario: ProbeScenario,
    amount: int,
    target_belief: float,
    clock: float,
) -> tuple[bool, int]:
    """One fake payment of ``amount`` through the target hop.

    Returns whether the target locked and the non-refundable fee this cost
    the attacker.  The probe itself always ends in failure (the attacker
    withholds completion), so a locked probe costs round(x * fee) and an
    unlocked one nothing.
    """
    if not 0 <= amount <= scenario.capacity:
        raise ValueError("amount must lie in [0, capacity]")
    economics = _target_economics(scenario, amount)
    model = (
        FeeModel.ORIGINAL
        if scenario.fee_model is FeeModel.ORIGINAL
        else FeeModel.MOD_GUARANTEED
    )
    decision = decide_lock(
        model, economics, target_belief, amount <= scenario.true_balance
    )
    if decision.move is not Move.LOCK:
        return False, 0
    if economics.nonrefundable_fraction <= 0.0:
        return True, 0
    return True, round_half_up(economics.nonrefundable_fraction * economics.fee)


def binary_search_balance(
    scenario: ProbeScenario, granularity: int = 1
) -> ProbeResult:
    """Narrow the hidden balance down to ``granularity`` satoshis.

    Maintains [low, high) starting at [0, capacity + 1): a locked probe at
    the midpoint raises the floor, a refused one lowers the ceiling.  Probes
    are spaced by the usual inter-payment delays and every locked probe
    leaves the target with a fresh downstream-failure memory.
    """
    if granularity < 1:
        raise ValueError("granularity must be >= 1")
    store = BeliefStore(
        apriori=scenario.apriori,
        half_life_intermediary=scenario.half_life_intermediary,
        tau=scenario.tau,
    )
    key = ObservationKey(
        scenario.target,
        scenario.target,
        scenario.far_node,
        ObservationKind.INTERMEDIARY_DOWNSTREAM_FAILURE,
    )
    rng = random.Random(f"probe:{scenario.seed}:{scenario.true_balance}")
    clock = 0.0
    low, high = 0, scenario.capacity + 1
    iterations = 0
    total_cost = 0
    while high - low > granularity:
        clock += rng.uniform(0.1, 1.0)
        mid = (low + high) // 2
        belief = store.success_estimate(key, clock)
        locked, cost = probe_once(scenario, mid, belief, clock)
        iterations += 1
        total_cost += cost
        if locked:
            low = mid
            store.record_failure(key, clock)
        else:
            high = mid
    return ProbeResult(low, high, iterations, total_cost)


def cost_curve(
    scenario_template: ProbeScenario,
    balances: Sequence[int],
    granularity: int = 1,
    window: int = 500_000,
) -> list[CostPoint]:
    """Probe cost per hidden balance, with centered sliding-window means.

    Each balance gets a fresh target (no belief carry-over).  The window
    mean at a point averages the raw costs of all sampled balances within
    +/- window/2 of it.
    """
    raw: list[tuple[int, int, int]] = []
    for balance in balances:
        result = binary_search_balance(
            replace(scenario_template, true_balance=balance), granularity
        )
        raw.append((balance, result.iterations, result.total_cost))

    half = window / 2.0
    points: list[CostPoint] = []
    for balance, iterations, cost in raw:
        nearby = [c for b, _, c in raw if abs(b - balance) <= half]
        points.append(
            CostPoint(balance, iterations, cost, sum(nearby) / len(nearby))
        )
    return points


def cost_curve_csv(points: Iterable[CostPoint]) -> str:
    lines = ["B,iterations,cost_sat,window_mean_cost"]
    for p in points:
        lines.append(
            f"{p.balance},{p.iterations},{p.cost},{p.window_mean_cost!r}"
        )
    return "\n".join(lines) + "\n"
