"""Command-line experiment runner.

Modes: ``simulate`` (one fee model, metrics.csv + records.jsonl),
``compare`` (all three fee models on the same payment sequences,
comparison.csv), ``probe`` (balance-probing cost sweep, cost_curve.csv),
``game-oracle`` (closed-form lock decisions checked against the game tree),
and ``htlc2-trace`` (protocol event log, htlc2_trace.jsonl).

Configuration files are TOML (or JSON); command-line flags override file
values.  Every output is written atomically and is byte-identical across
reruns with the same inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .game import FeeModel, Move, backward_induct, build_game_tree, decide_lock, HopEconomics
from .htlc2 import AdversaryScript, Htlc2Engine, ScriptKind, setup_payment, trace_jsonl
from .pathfinding import Channel, ChannelParams, HopPlan, PathPlan
from .probe import ProbeScenario, cost_curve, cost_curve_csv
from .sim import Metrics, SimConfig, metrics_csv, records_jsonl, run_simulation
from .topology import Network, ingest_snapshot, initialize_balances, sample_missing_params

__all__ = ["main", "compare_models", "comparison_csv", "load_config", "MODEL_NAMES"]

MODEL_NAMES = {
    "original": FeeModel.ORIGINAL,
    "guaranteed": FeeModel.MOD_GUARANTEED,
    "incentivized": FeeModel.MOD_INCENTIVIZED,
}

_CONFIG_KEYS = {
    "num_payments",
    "num_runs",
    "participant_pool_size",
    "amount_range",
    "delay_range",
    "risk_factor",
    "penalty",
    "apriori",
    "half_life_intermediary",
    "tau",
}


def load_config(path: Optional[str]) -> dict:
    """Read a TOML or JSON config; unknown keys are rejected."""
    if path is None:
        return {}
    raw = Path(path).read_bytes()
    if path.endswith(".json"):
        values = json.loads(raw.decode("utf-8"))
    else:
        values = tomllib.loads(raw.decode("utf-8"))
    unknown = set(values) - _CONFIG_KEYS - {"fee_model", "seed"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("amount_range", "delay_range"):
        if key in values:
            values[key] = tuple(values[key])
    return values


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _load_network(snapshot_path: str, seed: int) -> Network:
    with open(snapshot_path, "rb") as fh:
        net = ingest_snapshot(fh)
    sample_missing_params(net, seed)
    initialize_balances(net, seed)
    return net


def _build_sim_config(args: argparse.Namespace, fee_model: FeeModel) -> SimConfig:
    values = load_config(args.config)
    values.pop("fee_model", None)
    values.pop("seed", None)
    config = SimConfig(seed=args.seed, fee_model=fee_model, **values)
    overrides = {}
    if args.risk is not None:
        overrides["risk_factor"] = args.risk
    if args.payments is not None:
        overrides["num_payments"] = args.payments
    if args.runs is not None:
        overrides["num_runs"] = args.runs
    if args.pool is not None:
        overrides["participant_pool_size"] = args.pool
    return replace(config, **overrides) if overrides else config


def compare_models(
    network: Network, base_config: SimConfig
) -> dict[FeeModel, Metrics]:
    """Run all three fee models over identical payment sequences.

    Payment draws depend only on the seed, never on the fee model, so the
    three runs are paired sample by sample.
    """
    results: dict[FeeModel, Metrics] = {}
    for model in (FeeModel.ORIGINAL, FeeModel.MOD_GUARANTEED, FeeModel.MOD_INCENTIVIZED):
        metrics, _ = run_simulation(network, replace(base_config, fee_model=model))
        results[model] = metrics
    return results


def comparison_csv(results: dict[FeeModel, Metrics]) -> str:
    metric_names = ["SR", "LR", "F_I", "F_S", "F_I_prime", "F_S_prime"]
    header = ["model"]
    for name in metric_names:
        header += [f"{name}_mean", f"{name}_std"]
    lines = [",".join(header)]
    for model, metrics in results.items():
        cells = [model.value]
        table = metrics.as_dict()
        for name in metric_names:
            value = table[name]
            cells.append("" if value.mean is None else repr(value.mean))
            cells.append("" if value.std is None else repr(value.std))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _mode_simulate(args: argparse.Namespace) -> int:
    model = MODEL_NAMES[args.model or "original"]
    config = _build_sim_config(args, model)
    network = _load_network(args.snapshot, args.seed)
    metrics, records = run_simulation(network, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "metrics.csv", metrics_csv(metrics))
    _atomic_write(out / "records.jsonl", "\n".join(records_jsonl(records)) + "\n")
    print(f"wrote {out / 'metrics.csv'} and {out / 'records.jsonl'}")
    return 0


def _mode_compare(args: argparse.Namespace) -> int:
    config = _build_sim_config(args, FeeModel.ORIGINAL)
    network = _load_network(args.snapshot, args.seed)
    results = compare_models(network, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "comparison.csv", comparison_csv(results))
    print(f"wrote {out / 'comparison.csv'}")
    return 0


def _mode_probe(args: argparse.Namespace) -> int:
    model = MODEL_NAMES[args.model or "guaranteed"]
    scenario = ProbeScenario(
        true_balance=0,
        capacity=args.capacity,
        timelock=args.timelock,
        risk_factor=args.risk if args.risk is not None else 1.5e-7,
        fee_model=model,
        seed=args.seed,
    )
    count = max(2, args.balance_samples)
    step = scenario.capacity / (count - 1)
    balances = sorted({int(round(k * step)) for k in range(count)})
    points = cost_curve(scenario, balances, granularity=args.granularity)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "cost_curve.csv", cost_curve_csv(points))
    print(f"wrote {out / 'cost_curve.csv'}")
    return 0


def _random_oracle_instance(rng: random.Random):
    num_hops = rng.randint(2, 5)
    fees = [rng.randint(1, 20) for _ in range(num_hops - 1)]
    amounts = [rng.randint(1_000, 50_000) for _ in range(num_hops)]
    collaterals = [rng.uniform(0.0, 25.0) for _ in range(num_hops)]
    fractions = [rng.choice([0.0, rng.random()]) for _ in range(num_hops - 1)]
    beliefs = [rng.random() for _ in range(num_hops)]
    return num_hops, fees, amounts, collaterals, fractions, beliefs


def _mode_game_oracle(args: argparse.Namespace) -> int:
    rng = random.Random(f"oracle:{args.seed}")
    trials = args.trials
    mismatches = 0
    for _ in range(trials):
        num_hops, fees, amounts, collaterals, fractions, beliefs = (
            _random_oracle_instance(rng)
        )
        success_utility = amounts[0] + sum(fees) + collaterals[0] + 1_000
        tree = build_game_tree(
            num_hops, fees, collaterals, amounts, success_utility, fractions
        )
        result = backward_induct(tree, beliefs)
        for i in range(1, num_hops):
            econ = HopEconomics(
                fee=fees[i - 1],
                collateral=collaterals[i],
                nonrefundable_fraction=fractions[i - 1],
                amount=amounts[i],
                cumulative_timelock=1,
            )
            model = (
                FeeModel.ORIGINAL
                if fractions[i - 1] == 0.0
                else FeeModel.MOD_INCENTIVIZED
            )
            direct = decide_lock(model, econ, beliefs[i], True)
            if direct.move is not result.lock_moves[i]:
                mismatches += 1
        if any(m is not Move.REVEAL for m in result.unlock_moves.values()):
            mismatches += 1
    print(f"game-oracle: {trials} random trees, {mismatches} mismatches")
    return 0 if mismatches == 0 else 1


def _linear_path_plan(num_nodes: int, amount: int) -> PathPlan:
    nodes = [f"n{i}" for i in range(num_nodes)]
    params = ChannelParams(base_fee=1, fee_rate=0.0001, timelock_delta=40)
    hops = []
    fees = [0] * (num_nodes - 1)
    forward = [0] * (num_nodes - 1)
    forward[-1] = amount
    for i in range(num_nodes - 2, 0, -1):
        from .pathfinding import hop_fee

        fees[i] = hop_fee(params, forward[i])
        forward[i - 1] = forward[i] + fees[i]
    cumulative = 0
    plans = []
    for i in range(num_nodes - 2, -1, -1):
        cumulative += params.timelock_delta
        channel = Channel(
            channel_id=f"c{i}",
            node1=nodes[i],
            node2=nodes[i + 1],
            capacity=10 * forward[0],
            policy1=params,
            policy2=params,
            balance1=8 * forward[0],
        )
        plans.append(
            HopPlan(
                channel=channel,
                from_node=nodes[i],
                to_node=nodes[i + 1],
                amount_to_forward=forward[i],
                fee=fees[i],
                hop_timelock=params.timelock_delta,
                cumulative_timelock=cumulative,
            )
        )
    plans.reverse()
    return PathPlan(hops=tuple(plans), amount=amount, total_fee=sum(fees[1:]))


def _mode_htlc2_trace(args: argparse.Namespace) -> int:
    path = _linear_path_plan(args.path_nodes, args.amount)
    fractions = [0.4] * (args.path_nodes - 2)
    setup = setup_payment(path, fractions, args.seed)
    script = AdversaryScript()
    if args.script.startswith("bribe:"):
        script = AdversaryScript(
            ScriptKind.BRIBED_SUCCESSOR, int(args.script.split(":")[1])
        )
    elif args.script.startswith("wrongpreimage:"):
        script = AdversaryScript(
            ScriptKind.SOURCE_WRONG_PREIMAGE, int(args.script.split(":")[1])
        )
    elif args.script != "honest":
        raise ValueError(f"unknown script {args.script!r}")
    engine = Htlc2Engine()
    report = engine.run_payment(setup, script)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(
        out / "htlc2_trace.jsonl", "\n".join(trace_jsonl(engine.events)) + "\n"
    )
    status = "succeeded" if report.succeeded else "failed"
    print(f"wrote {out / 'htlc2_trace.jsonl'} ({status})")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcnsim",
        description="payment-channel-network routing and fee-incentive experiments",
    )
    parser.add_argument(
        "mode",
        nargs="?",
        choices=["simulate", "compare", "probe", "game-oracle", "htlc2-trace"],
        help="experiment mode",
    )
    parser.add_argument("--mode", dest="mode_flag", help=argparse.SUPPRESS)
    parser.add_argument("--config", help="TOML or JSON simulation config")
    parser.add_argument("--snapshot", help="snapshot JSON path")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, required=True, help="experiment seed")
    parser.add_argument("--risk", type=float, help="risk factor override")
    parser.add_argument(
        "--model", choices=sorted(MODEL_NAMES), help="fee model (simulate/probe)"
    )
    parser.add_argument("--payments", type=int, help="payments per run")
    parser.add_argument("--runs", type=int, help="number of runs")
    parser.add_argument("--pool", type=int, help="participant pool size")
    parser.add_argument("--capacity", type=int, default=4_600_000)
    parser.add_argument("--timelock", type=int, default=144)
    parser.add_argument("--granularity", type=int, default=1)
    parser.add_argument("--balance-samples", type=int, default=47)
    parser.add_argument("--trials", type=int, default=1000)
    parser.add_argument("--path-nodes", type=int, default=4)
    parser.add_argument("--amount", type=int, default=20_000)
    parser.add_argument("--script", default="honest")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    mode = args.mode or args.mode_flag
    if mode is None:
        parser.print_usage(sys.stderr)
        print("pcnsim: error: a mode is required", file=sys.stderr)
        return 2

    try:
        if mode == "simulate":
            if not args.snapshot:
                raise ValueError("simulate requires --snapshot")
            return _mode_simulate(args)
        if mode == "compare":
            if not args.snapshot:
                raise ValueError("compare requires --snapshot")
            return _mode_compare(args)
        if mode == "probe":
            return _mode_probe(args)
        if mode == "game-oracle":
            return _mode_game_oracle(args)
        if mode == "htlc2-trace":
            return _mode_htlc2_trace(args)
        print(f"pcnsim: error: unknown mode {mode!r}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"pcnsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
