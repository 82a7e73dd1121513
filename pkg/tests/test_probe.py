import math

import pytest

from pcnsim.game import FeeModel
from pcnsim.pathfinding import hop_fee, round_half_up
from pcnsim.probe import (
    ProbeScenario,
    binary_search_balance,
    cost_curve,
    cost_curve_csv,
    probe_once,
)


def scenario(**kwargs):
    defaults = dict(true_balance=2_000_000)
    defaults.update(kwargs)
    return ProbeScenario(**defaults)


class TestProbeOnce:
    def test_amount_above_balance_never_locks(self):
        locked, cost = probe_once(scenario(true_balance=1_000), 5_000, 0.6, 1.0)
        assert (locked, cost) == (False, 0)

    def test_guaranteed_lock_costs_rounded_collateral(self):
        # x*f == collateral = 144 * 1_000_000 * 1.5e-7 = 21.6 -> 22 sat.
        s = scenario(true_balance=2_000_000)
        locked, cost = probe_once(s, 1_000_000, 0.6, 1.0)
        assert locked
        assert cost == 22 == round_half_up(21.6)

    def test_original_lock_is_free(self):
        s = scenario(fee_model=FeeModel.ORIGINAL)
        locked, cost = probe_once(s, 1_000_000, 0.6, 1.0)
        assert locked
        assert cost == 0

    def test_guaranteed_locks_even_at_zero_belief(self):
        s = scenario()
        locked, _ = probe_once(s, 1_000_000, 0.0, 1.0)
        assert locked

    def test_amount_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            probe_once(scenario(), scenario().capacity + 1, 0.6, 1.0)


class TestBisection:
    def test_hand_traced_example(self):
        # [0,9): mid 4 locks; [4,9): mid 6 fails; [4,6): mid 5 locks; [5,6).
        result = binary_search_balance(
            scenario(true_balance=5, capacity=8), granularity=1)
        assert result.iterations == 3
        assert (result.inferred_low, result.inferred_high) == (5, 6)

    def test_zero_balance_is_free(self):
        result = binary_search_balance(
            scenario(true_balance=0, capacity=8), granularity=1)
        assert result.total_cost == 0
        assert (result.inferred_low, result.inferred_high) == (0, 1)

    def test_exhaustive_small_capacities(self):
        for capacity in (1, 3, 7, 16, 33, 64):
            for balance in range(capacity + 1):
                result = binary_search_balance(
                    scenario(true_balance=balance, capacity=capacity, seed=2))
                assert result.inferred_low <= balance < result.inferred_high
                assert result.inferred_high - result.inferred_low <= 1
                assert result.iterations <= \
                    math.ceil(math.log2(max(capacity, 2))) + 1

    def test_granularity_respected(self):
        result = binary_search_balance(
            scenario(true_balance=3_000_000), granularity=1_000)
        assert result.inferred_high - result.inferred_low <= 1_000
        assert result.inferred_low <= 3_000_000 < result.inferred_high

    def test_granularity_must_be_positive(self):
        with pytest.raises(ValueError):
            binary_search_balance(scenario(), granularity=0)

    def test_deterministic(self):
        a = binary_search_balance(scenario(true_balance=1_234_567, seed=9))
        b = binary_search_balance(scenario(true_balance=1_234_567, seed=9))
        assert a == b


class TestCostCurve:
    def test_single_zero_balance_row(self):
        points = cost_curve(scenario(true_balance=0), [0])
        assert len(points) == 1
        assert points[0].cost == 0 and points[0].window_mean_cost == 0.0

    def test_original_curve_is_all_zero(self):
        points = cost_curve(
            scenario(fee_model=FeeModel.ORIGINAL, true_balance=0),
            [0, 1_000_000, 2_300_000, 4_600_000],
        )
        assert all(p.cost == 0 and p.window_mean_cost == 0.0 for p in points)

    def test_windowed_trend_increases(self):
        template = scenario(true_balance=0)
        balances = [k * 100_000 for k in range(47)]
        points = cost_curve(template, balances)
        low = [p.window_mean_cost for p in points if p.balance <= 1_000_000]
        high = [p.window_mean_cost for p in points if p.balance >= 3_600_000]
        assert sum(high) / len(high) > sum(low) / len(low)

    def test_fees_dominate_collateral_across_range(self):
        # Soundness condition for the attack: the covering share stays below
        # one for every probe amount, so a refusal always means low balance.
        s = scenario(true_balance=0)
        for amount in (1, 1_000, 100_000, 2_300_000, 4_600_000):
            fee = hop_fee(s.fee_params, amount)
            assert fee >= s.timelock * amount * s.risk_factor

    def test_csv_shape(self):
        points = cost_curve(scenario(true_balance=0), [0, 2_300_000])
        text = cost_curve_csv(points)
        lines = text.strip().split("\n")
        assert lines[0] == "B,iterations,cost_sat,window_mean_cost"
        assert len(lines) == 3

    def test_cost_band_reached_under_tenfold_risk(self):
        # With a ten-times-higher risk factor (and fees scaled to keep the
        # covering share below one) the windowed cost lands inside the
        # 500..4500 sat-per-million band.
        template = ProbeScenario(
            true_balance=0, risk_factor=1.5e-6, fee_rate=3e-4)
        balances = [k * 200_000 for k in range(24)]
        points = cost_curve(template, balances)
        slope = (
            sum(p.balance * p.window_mean_cost for p in points)
            / sum(p.balance**2 for p in points)
        ) * 1e6
        assert 500 <= slope <= 4500
