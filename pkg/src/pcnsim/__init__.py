"""Payment-channel-network simulator with fee-incentive games.

Submodules:

* ``topology`` — snapshot ingestion, parameter repair, balance setup
* ``pathfinding`` — fee/weight/bias formulas and cheapest-route search
* ``beliefs`` — failure memories and success-probability estimates
* ``game`` — lock economics for three fee models plus a game-tree oracle
* ``sim`` — sequential payment execution and metrics
* ``probe`` — balance inference by bisection and its fee cost
* ``htlc2`` — two-preimage conditional payments with fee delivery
* ``synthetic`` — seeded synthetic snapshots
* ``cli`` — command-line experiment front end
"""

from .beliefs import BeliefStore, ClockRegressionError, ObservationKey, ObservationKind
from .game import (
    FeeModel,
    HopEconomics,
    LockDecision,
    Move,
    backward_induct,
    build_game_tree,
    choose_fraction,
    collateral_cost,
    decide_lock,
    utility_lock_modified,
    utility_lock_original,
    xtilde,
)
from .pathfinding import (
    HopPlan,
    PathPlan,
    channel_success_probability,
    edge_weight,
    find_path,
    hop_fee,
    path_bias,
    round_half_up,
)
from .probe import ProbeResult, ProbeScenario, binary_search_balance, cost_curve, probe_once
from .sim import (
    Metrics,
    Outcome,
    PaymentRecord,
    SimConfig,
    compute_metrics,
    run_simulation,
    settle_failure,
    settle_success,
)
from .topology import (
    Channel,
    ChannelParams,
    EmptyNetworkError,
    Network,
    SnapshotError,
    ingest_snapshot,
    initialize_balances,
    sample_missing_params,
)

__version__ = "0.1.0"

__all__ = [
    "BeliefStore",
    "Channel",
    "ChannelParams",
    "ClockRegressionError",
    "EmptyNetworkError",
    "FeeModel",
    "HopEconomics",
    "HopPlan",
    "LockDecision",
    "Metrics",
    "Move",
    "Network",
    "ObservationKey",
    "ObservationKind",
    "Outcome",
    "PathPlan",
    "PaymentRecord",
    "ProbeResult",
    "ProbeScenario",
    "SimConfig",
    "SnapshotError",
    "backward_induct",
    "binary_search_balance",
    "build_game_tree",
    "channel_success_probability",
    "choose_fraction",
    "collateral_cost",
    "compute_metrics",
    "cost_curve",
    "decide_lock",
    "edge_weight",
    "find_path",
    "hop_fee",
    "ingest_snapshot",
    "initialize_balances",
    "path_bias",
    "probe_once",
    "round_half_up",
    "run_simulation",
    "sample_missing_params",
    "settle_failure",
    "settle_success",
    "utility_lock_modified",
    "utility_lock_original",
    "xtilde",
]
