from __future__ import annotations

import numpy as np
import pytest

from dras.errors import (
    EmptySampleSet,
    IndexOutOfRange,
    InvalidCosts,
    InvalidSupport,
    LengthMismatch,
    ScenarioInfeasible,
    TooLarge,
)
from dras.schedule import (
    CostParams,
    DurationSupport,
    Instance,
    NoShowSupport,
    SampleSet,
    Schedule,
    cost_via_partition_oracle,
    duration_cost_lp,
    duration_costs,
    infer_budget,
    infer_support,
    noshow_cost_lp,
    noshow_costs,
    pi_coefficient,
    pi_table,
    total_cost_duration,
    total_cost_noshow,
)


def unit_costs(n):
    return CostParams.uniform(n, 2.0, 1.0, 20.0)


def test_matched_durations_cost_nothing():
    assert total_cost_duration([1.0, 1.0], [1.0, 1.0], unit_costs(2)) == 0.0


def test_hand_recursions():
    costs = CostParams([2.0], [1.0], 20.0)
    val, w, v = total_cost_duration([0.0], [2.0], costs, return_parts=True)
    assert w[1] == 2.0 and val == 40.0
    val, w, v = total_cost_duration([3.0], [1.0], costs, return_parts=True)
    assert v[0] == 2.0 and val == 2.0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        total_cost_duration([1.0, 1.0], [1.0], unit_costs(2))
    with pytest.raises(LengthMismatch):
        CostParams([1.0, 1.0], [1.0], 2.0)


def test_cost_assumption_enforced():
    with pytest.raises(InvalidCosts):
        CostParams([1.0, 1.0], [0.0, 2.0], 5.0)
    with pytest.raises(InvalidCosts):
        CostParams([-1.0], [0.0], 5.0)
    CostParams([1.0, 1.0], [0.0, 1.0], 5.0)


def test_noshow_collapses_to_duration_model():
    rng = np.random.default_rng(0)
    costs = CostParams(rng.random(5) + 1, np.full(5, 0.5), 7.0)
    for _ in range(50):
        s = rng.random(5)
        u = rng.random(5) * 2
        assert total_cost_noshow(s, u, np.ones(5), costs) == total_cost_duration(s, u, costs)


def test_noshow_examples():
    assert total_cost_noshow([1.0], [0.0], [0.0], CostParams([1.0], [1.0], 20.0)) == 1.0
    val, w, v = total_cost_noshow([1.0, 1.0], [0.0, 2.0], [0.0, 1.0], CostParams.uniform(2, 1, 1, 5), return_parts=True)
    assert (w[1], v[0], w[2], val) == (0.0, 1.0, 1.0, 6.0)
    assert noshow_cost_lp([1.0, 1.0], [0.0, 2.0], [0.0, 1.0], CostParams.uniform(2, 1, 1, 5)) == pytest.approx(6.0)


def test_noshow_scenario_validation():
    costs = CostParams.uniform(2, 1, 1, 5)
    with pytest.raises(ScenarioInfeasible):
        total_cost_noshow([1.0, 1.0], [1.0, 2.0], [0.0, 1.0], costs)
    with pytest.raises(ScenarioInfeasible):
        total_cost_noshow([1.0, 1.0], [0.0, 2.0], [0.5, 1.0], costs)
    sup = NoShowSupport([0.5, 0.5], [3.0, 3.0], 0)
    with pytest.raises(ScenarioInfeasible):
        total_cost_noshow([1.0, 1.0], [0.0, 2.0], [0.0, 1.0], costs, support=sup)


def test_recursion_matches_lp_for_random_noshow_scenarios():
    rng = np.random.default_rng(1)
    for trial in range(60):
        n = int(rng.integers(1, 7))
        c = rng.random(n) * 3
        d = np.zeros(n)
        for i in range(1, n):
            d[i] = max(0.0, d[i - 1] + rng.uniform(-1, 1) * c[i])
        costs = CostParams(c, d, float(rng.random() * 10))
        s = rng.random(n) * 2
        lam = (rng.random(n) < 0.7).astype(float)
        mu = lam * rng.random(n) * 3
        ref = noshow_cost_lp(s, mu, lam, costs)
        assert noshow_costs(s, mu, lam, costs)[0] == pytest.approx(ref, abs=1e-8)


def test_recursion_matches_lp_for_durations():
    rng = np.random.default_rng(2)
    costs = unit_costs(6)
    for _ in range(30):
        s, u = rng.random(6) * 2, rng.random(6) * 2
        assert total_cost_duration(s, u, costs) == pytest.approx(duration_cost_lp(s, u, costs), abs=1e-8)


def test_pi_coefficients():
    costs = CostParams([2.0, 2.0], [1.0, 1.0], 20.0)
    assert pi_coefficient(1, 1, costs) == -1
    assert pi_coefficient(1, 2, costs) == 1
    assert pi_coefficient(1, 3, costs) == 22
    assert pi_coefficient(2, 2, costs) == -1
    assert pi_coefficient(2, 3, costs) == 20
    with pytest.raises(IndexOutOfRange):
        pi_coefficient(2, 1, costs)
    with pytest.raises(IndexOutOfRange):
        pi_coefficient(1, 4, costs)


def test_pi_table_agrees_with_scalar_accessor():
    rng = np.random.default_rng(3)
    costs = CostParams(rng.random(5) + 1, np.full(5, 0.3), 4.0)
    P = pi_table(costs)
    for i in range(1, 6):
        for l in range(i, 7):
            assert P[i - 1, l - 1] == pytest.approx(pi_coefficient(i, l, costs))


def test_partition_oracle_examples():
    costs = CostParams([2.0], [1.0], 20.0)
    assert cost_via_partition_oracle([0.0], [2.0], costs) == 40.0
    assert cost_via_partition_oracle([1.0, 2.0], [1.0, 2.0], unit_costs(2)) == 0.0
    with pytest.raises(TooLarge):
        cost_via_partition_oracle(np.zeros(13), np.zeros(13), unit_costs(13))


def test_partition_oracle_matches_recursion():
    rng = np.random.default_rng(4)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        c = rng.random(n) * 3
        d = np.minimum.accumulate(rng.random(n)) if rng.random() < 0.5 else np.full(n, rng.random())
        costs = CostParams(c, d, float(rng.random() * 20))
        s, u = rng.random(n) * 2, rng.random(n) * 2
        assert cost_via_partition_oracle(s, u, costs) == pytest.approx(total_cost_duration(s, u, costs), abs=1e-9)


def test_costs_nonnegative_and_jointly_convex():
    rng = np.random.default_rng(5)
    costs = unit_costs(6)
    for _ in range(300):
        s1, s2, u1, u2 = (rng.random(6) * 3 for _ in range(4))
        a = rng.random()
        f1 = total_cost_duration(s1, u1, costs)
        f2 = total_cost_duration(s2, u2, costs)
        fm = total_cost_duration(a * s1 + (1 - a) * s2, a * u1 + (1 - a) * u2, costs)
        assert f1 >= 0 and f2 >= 0
        assert fm <= a * f1 + (1 - a) * f2 + 1e-9


def test_batch_costs_match_scalar():
    rng = np.random.default_rng(6)
    costs = unit_costs(4)
    s = rng.random(4)
    U = rng.random((10, 4)) * 2
    batch = duration_costs(s, U, costs)
    for k in range(10):
        assert batch[k] == total_cost_duration(s, U[k], costs)


def test_schedule_validation():
    Schedule([1.0, 2.0], 3.0)
    with pytest.raises(ValueError):
        Schedule([1.0, 2.5], 3.0)
    with pytest.raises(ValueError):
        Schedule([-1.0, 1.0], 3.0)
    np.testing.assert_allclose(Schedule.equal_spacing(3, 15).s, [5, 5, 5])


def test_support_validation():
    with pytest.raises(InvalidSupport):
        DurationSupport([1.0], [1.0])
    with pytest.raises(InvalidSupport):
        NoShowSupport([0.0, 0.0], [1.0, 1.0], 3)


def test_infer_support():
    sup = infer_support(SampleSet([[1.0, 2.0], [3.0, 1.0]]))
    np.testing.assert_array_equal(sup.uL, [1.0, 1.0])
    np.testing.assert_array_equal(sup.uU, [3.0, 2.0])
    single = infer_support(SampleSet([[1.0, 0.0]]))
    assert np.all(single.uU > single.uL)
    assert single.uU[0] - 1.0 == pytest.approx(1e-9)
    with pytest.raises(EmptySampleSet):
        SampleSet(np.zeros((0, 2)))


def test_infer_support_noshow_uses_shows_only():
    rng = np.random.default_rng(7)
    lam = (rng.random((40, 5)) < 0.6).astype(float)
    mu = lam * (1 + rng.random((40, 5)))
    S = SampleSet(mu, lam)
    sup = infer_support(S)
    assert np.all(sup.uL >= 1.0)
    ns = NoShowSupport(sup.uL, sup.uU, infer_budget(S))
    assert ns.contains_noshow(mu, lam).all()


def test_infer_budget():
    assert infer_budget(SampleSet(np.ones((3, 4)), np.ones((3, 4)))) == 0
    assert infer_budget(SampleSet(np.zeros((1, 4)), np.zeros((1, 4)))) == 4
    lam = np.ones((3, 4))
    lam[0, :1] = 0
    lam[1, :3] = 0
    lam[2, :2] = 0
    assert infer_budget(SampleSet(np.where(lam == 1, 1.0, 0.0), lam)) == 3


def test_instance_json_round_trip(tmp_path):
    inst = Instance(15.0, unit_costs(3), [0.1, 0.2, 0.3], [2.0, 2.0, 2.0], 1)
    path = tmp_path / "inst.json"
    inst.save(path)
    back = Instance.load(path)
    assert back.to_dict() == inst.to_dict()


def test_sample_csv_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    S = SampleSet(rng.random((5, 3)))
    S.to_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(SampleSet.from_csv(tmp_path / "d.csv", n=3).values, S.values)
    lam = (rng.random((5, 3)) < 0.5).astype(float)
    T = SampleSet(lam * rng.random((5, 3)), lam)
    T.to_csv(tmp_path / "ns.csv")
    back = SampleSet.from_csv(tmp_path / "ns.csv", n=3)
    assert back.is_noshow
    np.testing.assert_array_equal(back.shows, T.shows)
    np.testing.assert_array_equal(back.values, T.values)
