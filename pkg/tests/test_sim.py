import json

import pytest

from pcnsim.beliefs import BeliefStore, ObservationKey, ObservationKind
from pcnsim.game import FeeModel, Move
from pcnsim.sim import (
    Outcome,
    PaymentRecord,
    SimConfig,
    _execute_payment,
    compute_metrics,
    metrics_csv,
    records_jsonl,
    run_simulation,
    settle_failure,
    settle_success,
)
from pcnsim.synthetic import scale_free_snapshot
from pcnsim.topology import ingest_snapshot, initialize_balances


def build_net(channels, balances=None):
    nodes = sorted({n for _, a, b, *_ in channels for n in (a, b)})
    doc = {
        "nodes": [{"id": n} for n in nodes],
        "channels": [
            {
                "id": cid, "node1": n1, "node2": n2, "capacity_sat": cap,
                "node1_policy": {"base_fee_sat": base, "fee_rate": rate,
                                 "timelock_delta": delta},
                "node2_policy": {"base_fee_sat": base, "fee_rate": rate,
                                 "timelock_delta": delta},
            }
            for cid, n1, n2, cap, base, rate, delta in channels
        ],
    }
    net = ingest_snapshot(json.dumps(doc).encode())
    for cid, balance in (balances or {}).items():
        net.channels[cid].balance1 = balance
    return net


def execute_one(net, store, model, sender, receiver, amount, clock=10.0,
                risk=1.5e-7):
    config = SimConfig(seed=0, fee_model=model, num_payments=1, num_runs=1,
                       risk_factor=risk)
    return _execute_payment(net, store, config, 0, 0, sender, receiver,
                            amount, clock)


class TestSettlement:
    def test_single_hop_moves_amount(self):
        net = build_net([("c0", "s", "r", 100, 0, 0.0, 40)], {"c0": 50})
        store = BeliefStore()
        record = execute_one(net, store, FeeModel.ORIGINAL, "s", "r", 10)
        assert record.outcome is Outcome.SUCCEEDED
        assert net.channels["c0"].balance_from("s") == 40
        assert net.channels["c0"].balance_from("r") == 60

    def test_two_hops_move_amount_plus_fee(self):
        # Middle node charges 2 on 10: first channel moves 12, second 10.
        net = build_net(
            [("c0", "s", "m", 10_000, 2, 0.0, 40),
             ("c1", "m", "r", 10_000, 2, 0.0, 40)],
            {"c0": 5_000, "c1": 5_000},
        )
        record = execute_one(net, BeliefStore(), FeeModel.ORIGINAL, "s", "r", 10)
        assert record.outcome is Outcome.SUCCEEDED
        assert record.fees_paid == 2
        assert net.channels["c0"].balance_from("s") == 5_000 - 12
        assert net.channels["c1"].balance_from("m") == 5_000 - 10
        for ch in net.channels.values():
            assert ch.balance_from(ch.node1) + ch.balance_from(ch.node2) == \
                ch.capacity

    def test_settle_success_requires_success(self):
        net = build_net([("c0", "s", "r", 100, 0, 0.0, 40)])
        record = PaymentRecord(0, 0, "s", "r", 10, None, (), Outcome.FAILED_NO_PATH,
                               None, 0, 0, (), (), 0.0)
        with pytest.raises(ValueError):
            settle_success(record, net)

    def test_failure_leaves_balances_untouched(self):
        net = build_net(
            [("c0", "s", "m", 100_000, 5, 0.0, 40),
             ("c1", "m", "r", 100_000, 5, 0.0, 40)],
            {"c0": 90_000, "c1": 100},  # middle node cannot forward
        )
        before = {cid: ch.balance1 for cid, ch in net.channels.items()}
        record = execute_one(net, BeliefStore(), FeeModel.MOD_GUARANTEED,
                             "s", "r", 10_000)
        assert record.outcome is Outcome.FAILED_REFUSAL
        assert {cid: ch.balance1 for cid, ch in net.channels.items()} == before

    def test_failure_credits_locked_hops_only(self):
        # Three hops; the second forwarder refuses, the first keeps its share.
        net = build_net(
            [("c0", "s", "m1", 500_000, 5, 0.0, 40),
             ("c1", "m1", "m2", 500_000, 5, 0.0, 40),
             ("c2", "m2", "r", 500_000, 5, 0.0, 40)],
            {"c0": 400_000, "c1": 400_000, "c2": 10},
        )
        store = BeliefStore()
        # risk chosen so the first forwarder's covering share is ~0.4 of its
        # fee of 5 (collateral 80 * 20005 * 1.25e-6 ~= 2.0) and rounds to 2.
        record = execute_one(net, store, FeeModel.MOD_GUARANTEED, "s", "r",
                             20_000, risk=1.25e-6)
        assert record.outcome is Outcome.FAILED_REFUSAL
        assert record.refusal_hop == 1
        assert record.refusal_reason == "balance"
        assert record.moves == (Move.LOCK, Move.NO_LOCK)
        x1 = record.fractions[0]
        f1 = record.path.hops[1].fee
        expected = int(x1 * f1 + 0.5)
        assert expected == 2
        assert record.nonrefundable_credits == (expected, 0)
        assert record.nonrefundable_paid == expected

    def test_original_failure_transfers_nothing(self):
        net = build_net(
            [("c0", "s", "m", 500_000, 5, 0.0, 40),
             ("c1", "m", "r", 500_000, 5, 0.0, 40)],
            {"c0": 400_000, "c1": 10},
        )
        record = execute_one(net, BeliefStore(), FeeModel.ORIGINAL, "s", "r", 20_000)
        assert record.outcome is Outcome.FAILED_REFUSAL
        assert record.nonrefundable_paid == 0
        assert all(c == 0 for c in record.nonrefundable_credits)

    def test_settle_failure_rejects_success(self):
        net = build_net([("c0", "s", "r", 100, 0, 0.0, 40)], {"c0": 50})
        record = execute_one(net, BeliefStore(), FeeModel.ORIGINAL, "s", "r", 10)
        with pytest.raises(ValueError):
            settle_failure(record, net)


class TestBeliefUpdates:
    def test_refusal_recorded_for_sender(self):
        net = build_net(
            [("c0", "s", "m", 500_000, 5, 0.0, 40),
             ("c1", "m", "r", 500_000, 5, 0.0, 40)],
            {"c0": 400_000, "c1": 10},
        )
        store = BeliefStore()
        record = execute_one(net, store, FeeModel.ORIGINAL, "s", "r", 20_000)
        assert record.outcome is Outcome.FAILED_REFUSAL
        assert record.refusal_hop == 0
        key = ObservationKey("s", "m", "r", ObservationKind.SENDER_REFUSAL_TO_LOCK)
        assert store.last_failure_time(key) == record.timestamp
        # The refusing node forwarded nothing, so it records no failure itself.
        own = ObservationKey("m", "m", "r",
                             ObservationKind.INTERMEDIARY_DOWNSTREAM_FAILURE)
        assert store.last_failure_time(own) is None

    def test_locked_hops_record_downstream_failure(self):
        net = build_net(
            [("c0", "s", "m1", 500_000, 5, 0.0, 40),
             ("c1", "m1", "m2", 500_000, 5, 0.0, 40),
             ("c2", "m2", "r", 500_000, 5, 0.0, 40)],
            {"c0": 400_000, "c1": 400_000, "c2": 10},
        )
        store = BeliefStore()
        record = execute_one(net, store, FeeModel.ORIGINAL, "s", "r", 20_000)
        assert record.refusal_hop == 1
        t = record.timestamp
        assert store.last_failure_time(ObservationKey(
            "m1", "m1", "m2",
            ObservationKind.INTERMEDIARY_DOWNSTREAM_FAILURE)) == t
        assert store.last_failure_time(ObservationKey(
            "s", "m1", "m2", ObservationKind.SENDER_POST_LOCK_FAILURE)) == t
        assert store.last_failure_time(ObservationKey(
            "s", "m2", "r", ObservationKind.SENDER_REFUSAL_TO_LOCK)) == t
        # Nothing recorded for the hop downstream of the refusal.
        assert store.last_failure_time(ObservationKey(
            "s", "m2", "r", ObservationKind.SENDER_POST_LOCK_FAILURE)) is None

    def test_success_records_nothing(self):
        net = build_net(
            [("c0", "s", "m", 500_000, 5, 0.0, 40),
             ("c1", "m", "r", 500_000, 5, 0.0, 40)],
            {"c0": 400_000, "c1": 400_000},
        )
        store = BeliefStore()
        record = execute_one(net, store, FeeModel.ORIGINAL, "s", "r", 20_000)
        assert record.outcome is Outcome.SUCCEEDED
        assert store.dump() == {}


class TestRunSimulation:
    def test_direct_channel_only(self):
        net = build_net([("c0", "a", "b", 10**6, 1, 0.0001, 40)], {"c0": 500_000})
        config = SimConfig(seed=1, num_payments=20, num_runs=2,
                           participant_pool_size=2)
        metrics, records = run_simulation(net, config)
        assert metrics.success_ratio.mean == 1.0
        assert metrics.lock_ratio.mean is None  # no forwarding moves at all
        assert all(r.outcome is Outcome.SUCCEEDED for r in records)

    def test_zero_payments_reports_absent(self):
        net = build_net([("c0", "a", "b", 10**6, 1, 0.0001, 40)])
        config = SimConfig(seed=1, num_payments=0, num_runs=2,
                           participant_pool_size=2)
        metrics, records = run_simulation(net, config)
        assert records == []
        for value in metrics.as_dict().values():
            assert value.mean is None and value.std is None

    def test_deterministic_and_capacity_conserving(self):
        snap = scale_free_snapshot(40, seed=7)
        net = ingest_snapshot(json.dumps(snap).encode())
        initialize_balances(net, 7)
        config = SimConfig(seed=3, fee_model=FeeModel.MOD_INCENTIVIZED,
                           num_payments=120, num_runs=2, risk_factor=1.5e-7)
        metrics_a, records_a = run_simulation(net, config)
        metrics_b, records_b = run_simulation(net, config)
        assert list(records_jsonl(records_a)) == list(records_jsonl(records_b))
        assert metrics_a == metrics_b
        for ch in net.channels.values():  # input network untouched
            assert ch.balance_from(ch.node1) + ch.balance_from(ch.node2) == \
                ch.capacity

    def test_nonrefundable_ledger_balances(self):
        snap = scale_free_snapshot(40, seed=8)
        net = ingest_snapshot(json.dumps(snap).encode())
        initialize_balances(net, 8)
        config = SimConfig(seed=5, fee_model=FeeModel.MOD_GUARANTEED,
                           num_payments=150, num_runs=1, risk_factor=1.5e-6)
        _, records = run_simulation(net, config)
        debited = sum(r.nonrefundable_paid for r in records)
        credited = sum(sum(r.nonrefundable_credits) for r in records)
        assert debited == credited
        failed = [r for r in records if r.outcome is Outcome.FAILED_REFUSAL]
        assert failed, "scenario should produce refusals"

    def test_guaranteed_refusals_only_balance_or_clamped(self):
        snap = scale_free_snapshot(60, seed=9)
        net = ingest_snapshot(json.dumps(snap).encode())
        initialize_balances(net, 9)
        config = SimConfig(seed=6, fee_model=FeeModel.MOD_GUARANTEED,
                           num_payments=300, num_runs=1, risk_factor=1.5e-6)
        _, records = run_simulation(net, config)
        from pcnsim.game import collateral_cost

        for r in records:
            if r.outcome is not Outcome.FAILED_REFUSAL:
                continue
            if r.refusal_reason == "balance":
                continue
            # A utility refusal needs the whole fee to fall short of the
            # collateral: either the share clamped at 1, or there was no
            # fee to offer a share of at all.
            hop = r.path.hops[1 + r.refusal_hop]
            c = collateral_cost(hop.cumulative_timelock, hop.amount_to_forward,
                                config.risk_factor)
            assert hop.fee == 0 or r.fractions[r.refusal_hop] == 1.0
            assert c > hop.fee


class TestMetrics:
    def make_record(self, run, succeeded, moves=(), path=None, fees=0,
                    nonref=0, credits=()):
        outcome = Outcome.SUCCEEDED if succeeded else (
            Outcome.FAILED_REFUSAL if path else Outcome.FAILED_NO_PATH)
        return PaymentRecord(run, 0, "s", "r", 10, path, tuple(moves), outcome,
                             None if succeeded else 0, fees, nonref,
                             tuple(credits), (), 0.0)

    def test_success_ratio(self):
        records = [self.make_record(0, i < 7) for i in range(10)]
        metrics = compute_metrics(records, 1)
        assert metrics.success_ratio.per_run == (0.7,)

    def test_lock_ratio_counts_moves(self):
        records = [
            self.make_record(0, True, moves=(Move.LOCK, Move.LOCK)),
            self.make_record(0, False, moves=(Move.NO_LOCK,)),
            self.make_record(0, True, moves=(Move.LOCK,)),
        ]
        metrics = compute_metrics(records, 1)
        assert metrics.lock_ratio.per_run == (0.75,)

    def test_original_nonrefundable_zero(self):
        net = build_net(
            [("c0", "s", "m", 500_000, 5, 0.0, 40),
             ("c1", "m", "r", 500_000, 5, 0.0, 40)],
            {"c0": 400_000, "c1": 10},
        )
        record = execute_one(net, BeliefStore(), FeeModel.ORIGINAL, "s", "r", 20_000)
        metrics = compute_metrics([record], 1)
        assert metrics.intermediary_nonrefundable.per_run == (0.0,)
        assert metrics.sender_nonrefundable.per_run == (0.0,)

    def test_csv_shape(self):
        records = [self.make_record(0, True), self.make_record(1, False)]
        text = metrics_csv(compute_metrics(records, 2))
        lines = text.strip().split("\n")
        assert lines[0] == "run,SR,LR,F_I,F_S,F_I_prime,F_S_prime"
        assert len(lines) == 3
        assert lines[1].startswith("0,1.0,")
