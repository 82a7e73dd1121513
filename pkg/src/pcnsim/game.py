"""Lock-or-refuse economics for forwarding nodes, under three fee models.

A forwarding node that locks funds bears an opportunity cost proportional to
amount x remaining timelock x risk factor.  Under the original fee model it
is paid only when the payment succeeds; the two modified models pay a
non-refundable fraction ``x`` of the fee to every node that locked, success
or not.  ``guaranteed`` picks x so the fee covers the opportunity cost
outright; ``incentivized`` picks the smallest x the sender believes
sufficient, plus an adaptive safety buffer.

The module also builds the full extensive-form tree of a payment (locking
moves, then secret-reveal moves) with the leaf payoffs spelled out, and
evaluates it by belief-weighted backward induction.  The tree serves as an
independent check of the closed-form lock decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

__all__ = [
    "FeeModel",
    "Move",
    "HopEconomics",
    "LockDecision",
    "collateral_cost",
    "utility_lock_original",
    "utility_lock_modified",
    "decide_lock",
    "xtilde",
    "choose_fraction",
    "GameLeaf",
    "GameNode",
    "GameTree",
    "InductionResult",
    "build_game_tree",
    "backward_induct",
]


class FeeModel(Enum):
    ORIGINAL = "original"
    MOD_GUARANTEED = "guaranteed"
    MOD_INCENTIVIZED = "incentivized"


class Move(Enum):
    LOCK = "L"
    NO_LOCK = "NL"
    REVEAL = "H"
    WITHHOLD = "DH"


@dataclass(frozen=True)
class HopEconomics:
    """Money quantities a forwarding node weighs for one payment.

    Fees are integer satoshis; the collateral (opportunity) cost is real
    valued.  ``nonrefundable_fraction`` is the share of the fee paid even on
    failure, zero under the original model.
    """

    fee: int
    collateral: float
    nonrefundable_fraction: float
    amount: int
    cumulative_timelock: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.nonrefundable_fraction <= 1.0:
            raise ValueError("nonrefundable_fraction must be in [0, 1]")
        if self.collateral < 0:
            raise ValueError("collateral must be >= 0")


@dataclass(frozen=True)
class LockDecision:
    move: Move
    expected_utility: float


def collateral_cost(cumulative_timelock: int, amount: int, risk_factor: float) -> float:
    """Opportunity cost of locked funds: timelock * amount * risk_factor."""
    if cumulative_timelock < 0 or amount < 0 or risk_factor < 0:
        raise ValueError("collateral_cost inputs must be >= 0")
    return cumulative_timelock * amount * risk_factor


def utility_lock_original(p_success: float, fee: int, collateral: float) -> float:
    """Expected utility of locking when the fee is paid only on success.

    p*(fee - collateral) - (1-p)*collateral, which reduces to
    p*fee - collateral.
    """
    _check_probability(p_success)
    return p_success * (fee - collateral) - (1.0 - p_success) * collateral


def utility_lock_modified(
    p_success: float, fee: int, collateral: float, x: float
) -> float:
    """Expected utility of locking when a fraction x of the fee is kept on failure.

    p*(fee - collateral) + (1-p)*(x*fee - collateral).
    """
    _check_probability(p_success)
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    return p_success * (fee - collateral) + (1.0 - p_success) * (
        x * fee - collateral
    )


def decide_lock(
    model: FeeModel,
    economics: HopEconomics,
    p_success: float,
    balance_sufficient: bool,
) -> LockDecision:
    """Forwarding node's move: refuse outright without balance, else lock
    exactly when the model's expected lock utility is non-negative.

    The boundary is inclusive: a node indifferent between locking and not
    (utility exactly zero) locks, so a fraction covering the collateral
    exactly still guarantees participation.
    """
    if not balance_sufficient:
        return LockDecision(Move.NO_LOCK, 0.0)
    if model is FeeModel.ORIGINAL:
        utility = utility_lock_original(p_success, economics.fee, economics.collateral)
    else:
        utility = utility_lock_modified(
            p_success,
            economics.fee,
            economics.collateral,
            economics.nonrefundable_fraction,
        )
    move = Move.LOCK if utility >= 0.0 else Move.NO_LOCK
    return LockDecision(move, utility)


def xtilde(p_tilde: float, fee: int, collateral: float) -> float:
    """Smallest fraction making the expected lock utility zero under belief
    ``p_tilde``, clamped to [0, 1].

    Solves p*(f-c) + (1-p)*(x*f-c) = 0 for x: (c - p*f) / ((1-p)*f).
    A certain-success belief needs no non-refundable fee, so p=1 maps to 0.
    """
    _check_probability(p_tilde)
    if fee <= 0:
        raise ValueError("fee must be > 0")
    if p_tilde == 1.0:
        return 0.0
    raw = (collateral - p_tilde * fee) / ((1.0 - p_tilde) * fee)
    return min(1.0, max(0.0, raw))


def choose_fraction(
    model: FeeModel,
    economics: HopEconomics,
    p_tilde: Optional[float] = None,
    buffer: Optional[float] = None,
) -> float:
    """Non-refundable fraction the sender offers for one hop.

    original: 0.  guaranteed: collateral/fee, clamped to 1 when the fee
    cannot cover the collateral (the guarantee then no longer holds).
    incentivized: xtilde under the sender's belief plus the adaptive buffer,
    clamped to 1.
    """
    if model is FeeModel.ORIGINAL:
        return 0.0
    if economics.fee <= 0:
        # Nothing to split; a zero fee cannot fund a non-refundable share.
        return 0.0
    if model is FeeModel.MOD_GUARANTEED:
        return min(1.0, economics.collateral / economics.fee)
    if p_tilde is None or buffer is None:
        raise ValueError("incentivized model needs p_tilde and buffer")
    return min(1.0, xtilde(p_tilde, economics.fee, economics.collateral) + buffer)


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")


# ---------------------------------------------------------------------------
# Extensive-form tree oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameLeaf:
    """Terminal outcome: one utility per player, sender first, receiver last."""

    utilities: tuple[float, ...]
    label: str


@dataclass
class GameNode:
    """Decision point: ``player`` picks ``stop_move`` (ending the payment at
    ``stop_leaf``) or ``go_move`` (continuing to ``continuation``)."""

    player: int
    phase: str  # "lock" or "unlock"
    stop_move: Move
    go_move: Move
    stop_leaf: GameLeaf
    continuation: "GameNode | GameLeaf"


@dataclass
class GameTree:
    """Payment game for a path with ``num_hops`` hops (players 0..num_hops)."""

    num_hops: int
    root: GameNode
    success_leaf: GameLeaf


def build_game_tree(
    num_hops: int,
    fees: Sequence[int],
    collaterals: Sequence[float],
    amounts: Sequence[int],
    success_utility: float,
    fractions: Optional[Sequence[float]] = None,
) -> GameTree:
    """Spell out the full payment game for a path of ``num_hops`` hops.

    ``fees`` and ``fractions`` cover the forwarding players 1..num_hops-1,
    ``collaterals`` and ``amounts`` cover hops 0..num_hops-1 (sender
    included).  Locking decisions come in path order; once everyone locked,
    reveal decisions run from the receiver back to the first forwarder.
    Omitted ``fractions`` mean no non-refundable fees.
    """
    n = num_hops
    if n < 2:
        raise ValueError("need at least 2 hops for a non-trivial game")
    if len(fees) != n - 1 or len(collaterals) != n or len(amounts) != n:
        raise ValueError("fees need n-1 entries; collaterals and amounts need n")
    xs = list(fractions) if fractions is not None else [0.0] * (n - 1)
    if len(xs) != n - 1:
        raise ValueError("fractions need n-1 entries")

    players = n + 1
    alpha = amounts[n - 1]

    def fee(i: int) -> int:
        return fees[i - 1]

    def frac(i: int) -> float:
        return xs[i - 1]

    def leaf_no_lock(i: int) -> GameLeaf:
        """Player i refused to lock; players before it already had."""
        u = [0.0] * players
        if i > 0:
            u[0] = -collaterals[0] - sum(frac(j) * fee(j) for j in range(1, i))
            for j in range(1, i):
                u[j] = frac(j) * fee(j) - collaterals[j]
        return GameLeaf(tuple(u), f"v{i}:NL")

    def leaf_receiver_withholds() -> GameLeaf:
        u = [0.0] * players
        u[0] = -collaterals[0] - sum(frac(j) * fee(j) for j in range(1, n))
        for j in range(1, n):
            u[j] = frac(j) * fee(j) - collaterals[j]
        return GameLeaf(tuple(u), f"v{n}:DH")

    def leaf_withholds(k: int) -> GameLeaf:
        """Forwarder k keeps the secret: everyone behind it claimed already."""
        u = [0.0] * players
        u[0] = -collaterals[0] - sum(frac(j) * fee(j) for j in range(1, n))
        for j in range(1, n):
            if j > k:
                u[j] = fee(j) - collaterals[j]
            elif j == k:
                u[j] = frac(k) * fee(k) - collaterals[k] - amounts[k]
            else:
                u[j] = frac(j) * fee(j) - collaterals[j]
        u[n] = success_utility
        return GameLeaf(tuple(u), f"v{k}:DH")

    success = [0.0] * players
    success[0] = success_utility - collaterals[0] - sum(fee(j) for j in range(1, n)) - alpha
    for j in range(1, n):
        success[j] = fee(j) - collaterals[j]
    success[n] = success_utility
    success_leaf = GameLeaf(tuple(success), "success")

    # Assemble the spine back to front: reveal decisions v1..v(n-1), the
    # receiver's reveal, then locking decisions v(n-1)..v0.
    tail: GameNode | GameLeaf = success_leaf
    for k in range(1, n):
        tail = GameNode(
            player=k,
            phase="unlock",
            stop_move=Move.WITHHOLD,
            go_move=Move.REVEAL,
            stop_leaf=leaf_withholds(k),
            continuation=tail,
        )
    tail = GameNode(
        player=n,
        phase="unlock",
        stop_move=Move.WITHHOLD,
        go_move=Move.REVEAL,
        stop_leaf=leaf_receiver_withholds(),
        continuation=tail,
    )
    for i in range(n - 1, -1, -1):
        tail = GameNode(
            player=i,
            phase="lock",
            stop_move=Move.NO_LOCK,
            go_move=Move.LOCK,
            stop_leaf=leaf_no_lock(i),
            continuation=tail,
        )
    assert isinstance(tail, GameNode)
    return GameTree(num_hops=n, root=tail, success_leaf=success_leaf)


@dataclass
class InductionResult:
    """Moves chosen at every decision node plus each chooser's valuation.

    ``lock_utilities`` holds the belief-weighted expected utility each
    forwarding player assigned to locking; the sender's entry is the utility
    it collects at the success leaf (it initiates regardless).
    """

    lock_moves: dict[int, Move]
    unlock_moves: dict[int, Move]
    lock_utilities: dict[int, float]
    outcome: GameLeaf


def backward_induct(
    tree: GameTree, beliefs: Sequence[Optional[float]]
) -> InductionResult:
    """Resolve the tree under expected-utility maximization.

    ``beliefs[i]`` is player i's subjective probability that the payment
    completes once it has locked; the sender's entry is ignored because it
    initiates whenever it attempts a payment at all.  Reveal moves are
    resolved by exact comparison (revealing weakly dominates withholding);
    locking moves compare zero against the belief-weighted mix of the
    success leaf and that player's failure-after-lock payoff, both read off
    the tree's leaves.
    """
    n = tree.num_hops
    if len(beliefs) < n:
        raise ValueError(f"need beliefs for players 0..{n - 1}")

    # Failure-after-lock payoff per player: identical at every leaf where the
    # player locked and a later player refused, so read it off any of them.
    failure_payoff: dict[int, float] = {}
    node: GameNode | GameLeaf = tree.root
    lock_nodes: dict[int, GameNode] = {}
    unlock_nodes: dict[int, GameNode] = {}
    while isinstance(node, GameNode):
        if node.phase == "lock":
            lock_nodes[node.player] = node
        else:
            unlock_nodes[node.player] = node
        node = node.continuation

    for i in range(1, n):
        candidates = [
            lock_nodes[j].stop_leaf.utilities[i] for j in range(i + 1, n)
        ] + [unlock_nodes[n].stop_leaf.utilities[i]]
        assert all(
            math.isclose(c, candidates[0], abs_tol=1e-12) for c in candidates
        ), "failure payoff must not depend on where the failure happens"
        failure_payoff[i] = candidates[0]

    lock_moves: dict[int, Move] = {0: Move.LOCK}
    lock_utilities: dict[int, float] = {0: tree.success_leaf.utilities[0]}
    for i in range(1, n):
        p = beliefs[i]
        if p is None:
            raise ValueError(f"player {i} needs a belief")
        _check_probability(p)
        u_lock = p * tree.success_leaf.utilities[i] + (1.0 - p) * failure_payoff[i]
        lock_moves[i] = Move.LOCK if u_lock >= 0.0 else Move.NO_LOCK
        lock_utilities[i] = u_lock

    # Reveal phase: resolve from the deepest node outward; each player
    # compares withholding now against the resolved continuation.
    unlock_moves: dict[int, Move] = {}
    resolved: GameLeaf = tree.success_leaf
    for k in list(range(1, n)) + [n]:
        node = unlock_nodes[k]
        if resolved.utilities[k] >= node.stop_leaf.utilities[k]:
            unlock_moves[k] = Move.REVEAL
        else:
            unlock_moves[k] = Move.WITHHOLD
            resolved = node.stop_leaf

    # Outcome under the chosen profile.
    outcome: GameLeaf
    refuser = next((i for i in range(n) if lock_moves[i] is Move.NO_LOCK), None)
    if refuser is not None:
        outcome = lock_nodes[refuser].stop_leaf
    else:
        outcome = tree.success_leaf
        for k in [n] + list(range(n - 1, 0, -1)):
            if unlock_moves[k] is Move.WITHHOLD:
                outcome = unlock_nodes[k].stop_leaf
                break
    return InductionResult(lock_moves, unlock_moves, lock_utilities, outcome)
