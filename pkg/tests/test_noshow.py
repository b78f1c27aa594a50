from __future__ import annotations

import itertools

import numpy as np
import pytest

from dras.duration import WassersteinBall, omega_oracle, solve_saa, solve_wdras
from dras.errors import InvalidCosts, InvalidSupport
from dras.lp import LpBuilder, solve_lp
from dras.noshow import (
    NO_SHOW,
    SHOW,
    TERMINAL,
    build_direct_lp_noshow_p1,
    build_network,
    evaluate_sup_expectation_noshow,
    f_ij,
    longest_path_oracle,
    network_for,
    peel_paths,
    rho_cap_noshow,
    solve_wns,
    transport_distance_noshow,
    worst_case_distribution_noshow,
)
from dras.schedule import CostParams, DurationSupport, Instance, NoShowSupport, SampleSet, noshow_costs
from oracles import brute_omega_noshow as _brute_omega
from oracles import noshow_case as _random_case
from oracles import oc_prices as _oc_prices


# ---------------------------------------------------------------- network


def test_network_small_example():
    net = build_network(2, 1, 1.0, 20.0)
    L1 = {(int(net.node_lbar[k]), float(net.node_y[k])) for k in net.layer_nodes(1)}
    L2 = {(int(net.node_lbar[k]), float(net.node_y[k])) for k in net.layer_nodes(2)}
    assert L1 == {(1, 21.0), (0, 21.0), (0, 20.0), (1, 0.0), (0, 0.0), (1, -1.0), (0, -1.0)}
    assert L2 == {(1, 20.0), (0, 20.0), (1, -1.0), (0, -1.0)}
    assert net.n_nodes == 7 + 4 + 2
    assert (net.arc_layer == 2).sum() == 11
    assert net.arcs_of_class(TERMINAL).size == 4


def test_zero_budget_network_has_one_count_per_layer():
    net = build_network(5, 0, 1.0, 10.0)
    for i in range(1, 6):
        assert set(net.node_lbar[net.layer_nodes(i)]) == {0}
    assert net.arcs_of_class(NO_SHOW).size == 0


def _paths_from_oc(n, K, d0, C):
    """Node and arc sets visited by all (show pattern, price) pairs satisfying the condition."""
    nodes, arcs = set(), set()
    for lam in itertools.product((0, 1), repeat=n):
        if n - sum(lam) > K:
            continue
        lbar = np.cumsum(1 - np.array(lam))
        for y in _oc_prices(lam, 1.0, d0, C):
            seq = [("S",)] + [(i + 1, int(lbar[i]), float(y[i])) for i in range(n)] + [("E",)]
            nodes.update(seq[1:-1])
            arcs.update(zip(seq[:-1], seq[1:]))
    return nodes, arcs


@pytest.mark.parametrize("n,K", [(n, K) for n in range(1, 7) for K in range(0, min(n, 3) + 1)])
def test_network_matches_enumerated_paths(n, K):
    d0, C = 0.7, 9.0
    net = build_network(n, K, d0, C)
    key = lambda v: ("S",) if v == net.source else ("E",) if v == net.sink else (
        int(net.node_layer[v]), int(net.node_lbar[v]), float(net.node_y[v]))
    nodes = {key(v) for v in range(1, net.n_nodes - 1)}
    arcs = {(key(t), key(h)) for t, h in zip(net.arc_tail, net.arc_head)}
    ref_nodes, ref_arcs = _paths_from_oc(n, K, d0, C)
    assert nodes == ref_nodes
    assert arcs == ref_arcs
    # the graph is quadratic in n and linear in K
    assert net.n_nodes <= 2 * (K + 1) * n * (n + 1) + 2


def test_path_scenario_round_trip():
    rng = np.random.default_rng(0)
    net = build_network(5, 2, 1.0, 12.0)
    costs = CostParams.uniform(5, 1.0, 1.0, 12.0)
    sup = NoShowSupport(np.zeros(5), np.full(5, 2.0), 2)
    for _ in range(50):
        r = longest_path_oracle(rng.uniform(0, 5), rng.random(5), rng.random(5), np.ones(5), net, sup, costs)
        lam, y = net.path_to_scenario(r.path)
        assert list(net.scenario_to_path(lam, y)) == list(r.path)


def test_non_homogeneous_costs_rejected():
    with pytest.raises(InvalidCosts):
        network_for(CostParams([1.0, 2.0], [1.0, 1.0], 5.0), 1)


# ---------------------------------------------------------------- f and oracle


def test_f_examples():
    assert f_ij(0, 2.0, 3.0, 1.0, 1.0, 1.0, 0.0, 2.0) == (-8.0, 0.0)
    val, mu = f_ij(1, 2.0, 1e6, 1.0, 1.3, 1.0, 0.0, 2.0)
    assert val == pytest.approx(2.0 * (1.3 - 1.0)) and mu == 1.3


def test_f_show_branch_matches_grid():
    rng = np.random.default_rng(1)
    g = np.linspace(0, 1, 20001)
    for _ in range(100):
        y, rho, s = rng.normal() * 5, rng.uniform(0, 6), rng.random()
        uL = rng.uniform(0, 1)
        uU = uL + rng.uniform(0.2, 2)
        lam_hat = float(rng.integers(0, 2))
        mu_hat = lam_hat * (uL + rng.random() * (uU - uL))
        mu = np.concatenate([uL + g * (uU - uL), [np.clip(mu_hat, uL, uU)]])
        ref = np.max(y * (mu - s) - rho * np.abs(mu - mu_hat) - rho * abs(1 - lam_hat))
        assert f_ij(1, y, rho, s, mu_hat, lam_hat, uL, uU)[0] == pytest.approx(ref, abs=1e-9)


def test_oracle_matches_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        K = int(rng.integers(0, min(n, 2) + 1))
        costs, sup, S = _random_case(rng, n, 1, K)
        net = network_for(costs, K)
        s = rng.random(n) * 1.5
        rho = float(rng.choice([0.0, rng.uniform(0, 3), rng.uniform(0, 40)]))
        r = longest_path_oracle(rho, s, S.values[0], S.shows[0], net, sup, costs)
        assert r.value == pytest.approx(_brute_omega(rho, s, S.values[0], S.shows[0], sup, costs), abs=1e-8)


def test_oracle_output_structure():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        K = int(rng.integers(0, n + 1))
        costs, sup, S = _random_case(rng, n, 1, K)
        c0, d0, C = costs.c[0], costs.d[0], costs.C
        net = network_for(costs, K)
        s = rng.random(n)
        rho = rng.uniform(0, 5)
        p = float(rng.choice([1.0, 2.0]))
        r = longest_path_oracle(rho, s, S.values[0], S.shows[0], net, sup, costs, p)
        # optimality condition on the prices, in units of c0
        y = r.y / c0
        assert np.isclose(y[-1], -d0 / c0) or np.isclose(y[-1], C / c0)
        for i in range(n - 1):
            assert np.isclose(y[i], -d0 / c0) or np.isclose(y[i], y[i + 1] + r.lam[i + 1])
        assert sup.contains_noshow(r.mu, r.lam, tol=1e-12)[0]
        vals = f_ij(r.lam, r.y, rho, s, S.values[0], S.shows[0], sup.uL, sup.uU, p)[0]
        assert r.value == pytest.approx(vals.sum(), abs=1e-9)
        np.testing.assert_allclose(r.grad_s, -r.y)


def test_zero_budget_all_show_matches_duration_oracle():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        costs, sup, S = _random_case(rng, n, 1, 0)
        net = network_for(costs, 0)
        s, rho = rng.random(n), rng.uniform(0, 10)
        a = longest_path_oracle(rho, s, S.values[0], np.ones(n), net, sup, costs).value
        b = omega_oracle(rho, s, S.values[0], DurationSupport(sup.uL, sup.uU), costs).value
        assert a == pytest.approx(b, abs=1e-9)


def test_zero_rho_is_support_worst_case():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(1, 5))
        K = int(rng.integers(0, n + 1))
        costs, sup, S = _random_case(rng, n, 1, K)
        s = rng.random(n)
        best = -np.inf
        for lam in itertools.product((0, 1), repeat=n):
            lam = np.array(lam, dtype=float)
            if (1 - lam).sum() > K:
                continue
            for pick in itertools.product((0, 1), repeat=n):
                mu = lam * np.where(np.array(pick) == 1, sup.uU, sup.uL)
                best = max(best, noshow_costs(s, mu, lam, costs)[0])
        r = longest_path_oracle(0.0, s, S.values[0], S.shows[0], network_for(costs, K), sup, costs)
        assert r.value == pytest.approx(best, abs=1e-9)


def test_dp_matches_longest_path_lp():
    rng = np.random.default_rng(6)
    for _ in range(30):
        n = int(rng.integers(1, 6))
        K = int(rng.integers(0, min(n, 3) + 1))
        costs, sup, S = _random_case(rng, n, 1, K)
        net = network_for(costs, K)
        s, rho = rng.random(n), rng.uniform(0, 4)
        r = longest_path_oracle(rho, s, S.values[0], S.shows[0], net, sup, costs)
        body = net.arc_class != TERMINAL
        i = np.where(body, net.arc_layer - 1, 0)
        lam = (net.arc_lam == 1).astype(float)
        y = np.where(body, costs.c[0] * net.node_y[net.arc_head], 0.0)
        g = np.where(body, f_ij(lam, y, rho, s[i], S.values[0][i], S.shows[0][i], sup.uL[i], sup.uU[i])[0], 0.0)
        b = LpBuilder("max")
        z = b.add_var_block(net.n_arcs, cost=g, name="z")
        rows = np.concatenate([net.arc_tail, net.arc_head])
        cols = np.concatenate([z, z])
        vals = np.concatenate([np.ones(net.n_arcs), -np.ones(net.n_arcs)])
        rhs = np.zeros(net.n_nodes)
        rhs[net.source], rhs[net.sink] = 1.0, -1.0
        b.add_rows(rows, cols, vals, "=", rhs)
        assert solve_lp(b.build()).objective == pytest.approx(r.value, abs=1e-8)


def test_noshow_cuts_underestimate_and_rho_gradient():
    rng = np.random.default_rng(7)
    h = 1e-6
    checked = 0
    for _ in range(60):
        n = int(rng.integers(1, 6))
        K = int(rng.integers(0, min(n, 2) + 1))
        costs, sup, S = _random_case(rng, n, 1, K)
        net = network_for(costs, K)
        p = float(rng.choice([1.0, 2.0]))
        mu, lam = S.values[0], S.shows[0]
        s0, rho0 = rng.random(n), rng.uniform(0.1, 8)
        r = longest_path_oracle(rho0, s0, mu, lam, net, sup, costs, p)
        for _ in range(20):
            s, rho = rng.random(n) * 2, rng.uniform(0, 15)
            cut = r.value + r.grad_rho * (rho - rho0) + r.grad_s @ (s - s0)
            assert longest_path_oracle(rho, s, mu, lam, net, sup, costs, p).value >= cut - 1e-9
        lo = longest_path_oracle(rho0 - h, s0, mu, lam, net, sup, costs, p)
        hi = longest_path_oracle(rho0 + h, s0, mu, lam, net, sup, costs, p)
        if np.allclose(lo.mu, r.mu, atol=1e-4) and np.allclose(hi.mu, r.mu, atol=1e-4) \
                and np.array_equal(lo.lam, r.lam) and np.array_equal(hi.lam, r.lam):
            assert (hi.value - lo.value) / (2 * h) == pytest.approx(r.grad_rho, abs=1e-4)
            checked += 1
    assert checked > 30


def test_rho_cap_freezes_scenarios():
    rng = np.random.default_rng(8)
    for _ in range(40):
        n = int(rng.integers(1, 6))
        K = int(rng.integers(0, n + 1))
        costs, sup, S = _random_case(rng, n, 1, K)
        s = rng.random(n)
        r = longest_path_oracle(rho_cap_noshow(costs, sup), s, S.values[0], S.shows[0], network_for(costs, K), sup,
                                costs)
        assert r.value == pytest.approx(noshow_costs(s, S.values, S.shows, costs)[0], abs=1e-9)


# ---------------------------------------------------------------- solvers


def test_methods_agree_noshow():
    rng = np.random.default_rng(9)
    for _ in range(10):
        n = int(rng.integers(1, 7))
        N = int(rng.integers(1, 21))
        K = int(rng.integers(0, min(n, 2) + 1))
        costs, sup, S = _random_case(rng, n, N, K)
        inst = Instance(float(rng.uniform(0.3, 1.2) * n), costs)
        eps = float(rng.choice([0.01, 0.3, 2.0]))
        a = solve_wns(S, inst, WassersteinBall(1, eps), "direct-lp", support=sup)
        b = solve_wns(S, inst, WassersteinBall(1, eps), "cutting-plane", support=sup)
        assert b.objective == pytest.approx(a.objective, rel=1e-5, abs=1e-7)
        assert a.objective == pytest.approx(eps * a.rho + a.theta.mean(), abs=1e-6)


def test_zero_radius_noshow_is_saa():
    rng = np.random.default_rng(10)
    costs, sup, S = _random_case(rng, 5, 15, 2)
    inst = Instance(5.0, costs)
    saa = solve_saa(S, inst)
    for method in ("direct-lp", "cutting-plane"):
        sol = solve_wns(S, inst, WassersteinBall(1, 0.0), method, support=sup)
        assert sol.objective == pytest.approx(saa.objective, rel=1e-7)
        assert sol.objective == pytest.approx(noshow_costs(sol.s, S.values, S.shows, costs).mean(), rel=1e-7)


def test_zero_budget_matches_duration_lp():
    rng = np.random.default_rng(11)
    costs, sup, S = _random_case(rng, 4, 8, 0)
    inst = Instance(4.0, costs)
    for eps in (0.0, 0.1, 1.0):
        a = solve_wns(S, inst, WassersteinBall(1, eps), "direct-lp", support=sup).objective
        b = solve_wdras(SampleSet(S.values), inst, WassersteinBall(1, eps), "direct-lp",
                        support=DurationSupport(sup.uL, sup.uU)).objective
        assert a == pytest.approx(b, rel=1e-7)


def test_noshow_monotone_in_radius_and_budget():
    rng = np.random.default_rng(12)
    costs, sup, S = _random_case(rng, 4, 10, 1)
    inst = Instance(4.0, costs)
    by_eps = [solve_wns(S, inst, WassersteinBall(1, e), support=sup).objective for e in (0, 0.05, 0.5, 2)]
    assert np.all(np.diff(by_eps) >= -1e-7)
    by_K = [solve_wns(S, inst, WassersteinBall(1, 0.3), support=NoShowSupport(sup.uL, sup.uU, K)).objective
            for K in range(1, 5)]
    assert np.all(np.diff(by_K) >= -1e-7)


def test_p2_noshow_cutting_plane():
    rng = np.random.default_rng(13)
    costs, sup, S = _random_case(rng, 3, 6, 1)
    inst = Instance(3.0, costs)
    ball = WassersteinBall(2, 0.4)
    sol = solve_wns(S, inst, ball, support=sup)
    assert sol.method == "cutting-plane"
    ev = evaluate_sup_expectation_noshow(sol.s, S, sup, costs, ball, T=inst.T)
    assert ev == pytest.approx(sol.objective, rel=1e-6)


def test_samples_must_fit_budget():
    costs = CostParams.uniform(3, 1, 1, 5)
    S = SampleSet([[0.0, 0.0, 1.0]], [[0, 0, 1]])
    with pytest.raises(InvalidSupport):
        solve_wns(S, Instance(3.0, costs, [0.5] * 3, [2.0] * 3, 1), WassersteinBall(1, 0.1))


# ---------------------------------------------------------------- worst case


def test_peeling_reproduces_arc_flows():
    rng = np.random.default_rng(14)
    net = build_network(4, 2, 1.0, 8.0)
    costs = CostParams.uniform(4, 1.0, 1.0, 8.0)
    sup = NoShowSupport(np.zeros(4), np.full(4, 2.0), 2)
    flow = np.zeros(net.n_arcs)
    weights = rng.dirichlet(np.ones(5))
    for w in weights:
        r = longest_path_oracle(rng.uniform(0, 3), rng.random(4), rng.random(4) * 2, (rng.random(4) < 0.7) * 1.0,
                                net, sup, costs)
        flow[r.path] += w
    back = np.zeros(net.n_arcs)
    for w, path in peel_paths(flow.copy(), net):
        back[path] += w
    np.testing.assert_allclose(back, flow, atol=1e-7)


def test_noshow_worst_case_zero_radius():
    rng = np.random.default_rng(15)
    costs, sup, S = _random_case(rng, 4, 6, 2)
    wc = worst_case_distribution_noshow(rng.random(4), S, sup, costs, 0.0)
    assert len(wc.weights) == 6
    order = np.argsort(wc.source)
    np.testing.assert_array_equal(wc.mu[order], S.values)
    np.testing.assert_array_equal(wc.lam[order], S.shows)


def test_noshow_worst_case_certification():
    rng = np.random.default_rng(16)
    for _ in range(12):
        n = int(rng.integers(1, 6))
        N = int(rng.integers(1, 8))
        K = int(rng.integers(0, min(n, 2) + 1))
        costs, sup, S = _random_case(rng, n, N, K)
        s = rng.random(n)
        eps = float(rng.choice([0.05, 0.5, 3.0]))
        wc = worst_case_distribution_noshow(s, S, sup, costs, eps)
        assert wc.weights.sum() == pytest.approx(1.0, abs=1e-9)
        assert sup.contains_noshow(wc.mu, wc.lam, tol=1e-9).all()
        assert wc.expectation(lambda M, L: noshow_costs(s, M, L, costs)) == pytest.approx(wc.lp_value, abs=1e-6)
        assert transport_distance_noshow(wc, S) <= eps + 1e-7
        ev = evaluate_sup_expectation_noshow(s, S, sup, costs, WassersteinBall(1, eps), T=float(n))
        assert ev == pytest.approx(wc.lp_value, rel=1e-6, abs=1e-6)


def test_direct_lp_size_is_linear_in_arcs():
    rng = np.random.default_rng(17)
    costs, sup, S = _random_case(rng, 4, 3, 1)
    net = network_for(costs, 1)
    lp, _ = build_direct_lp_noshow_p1(S.values, S.shows, net, sup, costs, 0.1, 4.0)
    n_show = net.arcs_of_class(SHOW).size
    n_other = net.n_arcs - n_show
    assert lp.n_rows == 3 * (3 * n_show + n_other) + 1
    assert lp.n_vars == 1 + 4 + 3 * net.n_nodes
