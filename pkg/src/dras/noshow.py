"""Wasserstein-robust scheduling with random no-shows and service durations.

A scenario is ``xi = (mu, lambda)`` with show-up flags ``lambda`` in
``{0, 1}^n`` (at most ``K`` zeros) and realized durations ``mu`` that vanish
for no-shows. Under homogeneous costs the per-sample adjusted cost

    omega'_j(rho, s) = sup_xi g(s, xi) - rho * ||xi - xi_j||_p^p

is the longest S-E path in a layered network whose nodes ``(lbar_i, y_i)``
track the number of no-shows so far and the dual price of appointment
``i``. Prices live on the grid ``{-d0 + t, C + t}`` in units of the waiting
cost ``c0``; node and arc classes are stored explicitly so that the
oracle, the p = 1 LP and the worst-case extraction share one structure.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cutting_plane import CUT_TOL, MAX_ITER, CutPool, Master, kelley
from .duration import (
    AUTO_DIRECT_LIMIT,
    PEEL_RESIDUAL,
    SNAP,
    DroSolution,
    WassersteinBall,
    _fit_horizon,
    _resolve_method,
    inner_max_1d,
)
from .errors import DecompositionResidual, InfeasibleModel, InvalidCosts, InvalidSupport, LengthMismatch
from .lp import LinearProgram, LpBuilder, solve_lp, solve_transport
from .schedule import (
    CostParams,
    Instance,
    NoShowSupport,
    SampleSet,
    Schedule,
    infer_noshow_support,
    noshow_costs,
)

NO_SHOW, SHOW, TERMINAL = 0, 1, 2
IDLE_SIDE, OVERTIME_SIDE = 0, 1


@dataclass(frozen=True)
class NoShowNetwork:
    """Layered DAG of the no-show dynamic program.

    Nodes are numbered in topological order: ``S`` is 0, then layers 1..n
    sorted by ``(lbar, y)``, and ``E`` is last. Arc ``a`` enters layer
    ``arc_layer[a]`` and fixes the show-up flag ``arc_lam[a]`` of appointment
    ``arc_layer[a] - 1`` (0-based); terminal arcs have layer ``n + 1``.
    Prices ``node_y`` are normalized by the waiting cost.
    """

    n: int
    K: int
    d0: float
    C: float
    node_layer: np.ndarray
    node_lbar: np.ndarray
    node_side: np.ndarray
    node_offset: np.ndarray
    node_y: np.ndarray
    arc_tail: np.ndarray
    arc_head: np.ndarray
    arc_layer: np.ndarray
    arc_lam: np.ndarray
    arc_class: np.ndarray
    in_arcs: np.ndarray = field(repr=False)  # (n_nodes, max indegree), -1 padded, ascending

    @property
    def n_nodes(self) -> int:
        return self.node_layer.size

    @property
    def n_arcs(self) -> int:
        return self.arc_tail.size

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.n_nodes - 1

    def layer_nodes(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.node_layer == i)

    def arcs_of_class(self, cls: int, layer: int | None = None) -> np.ndarray:
        mask = self.arc_class == cls
        if layer is not None:
            mask &= self.arc_layer == layer
        return np.flatnonzero(mask)

    def path_to_scenario(self, path) -> tuple[np.ndarray, np.ndarray]:
        """Show-up flags and normalized prices along an S-E arc list."""
        path = np.asarray(path)
        body = path[self.arc_layer[path] <= self.n]
        order = np.argsort(self.arc_layer[body])
        body = body[order]
        return self.arc_lam[body].astype(float), self.node_y[self.arc_head[body]]

    def scenario_to_path(self, lam, y) -> list[int]:
        """Inverse of :meth:`path_to_scenario`; raises KeyError when no such path exists."""
        lam = np.asarray(lam)
        y = np.asarray(y, dtype=float)
        node, lbar, path = self.source, 0, []
        for i in range(1, self.n + 1):
            lbar += 1 - int(lam[i - 1])
            cand = [a for a in np.flatnonzero(self.arc_tail == node)
                    if self.arc_layer[a] == i and self.node_lbar[self.arc_head[a]] == lbar
                    and np.isclose(self.node_y[self.arc_head[a]], y[i - 1], rtol=0, atol=1e-12)]
            if not cand:
                raise KeyError(f"no arc into layer {i} for lbar={lbar}, y={y[i - 1]}")
            path.append(int(cand[0]))
            node = self.arc_head[cand[0]]
        path.append(int(np.flatnonzero((self.arc_tail == node) & (self.arc_class == TERMINAL))[0]))
        return path


def build_network(n: int, K: int, d0: float, C: float) -> NoShowNetwork:
    """Network for ``n`` appointments and no-show budget ``K`` with unit waiting cost.

    ``d0`` and ``C`` are the idleness and overtime costs divided by the
    waiting cost. A price may move from ``y_{i-1}`` to ``y_i`` either because
    ``y_{i-1}`` sits at the idle price ``-d0`` (any ``y_i`` follows) or
    because ``y_i = y_{i-1} - lambda_i`` on the same side of the grid.
    Nodes that lie on no S-E path are removed.
    """
    n, K = int(n), int(K)
    if n < 1:
        raise ValueError("need at least one appointment")
    if not 0 <= K <= n:
        raise InvalidSupport(f"no-show budget must be an integer in [0, {n}], got {K}")

    # enumerate layer nodes as (layer, lbar, side, offset)
    keys = [(0, 0, 0, 0)]
    for i in range(1, n + 1):
        for lbar in range(K + 1):
            for side in (IDLE_SIDE, OVERTIME_SIDE):
                for t in range(n - i + 1):
                    keys.append((i, lbar, side, t))
    keys.append((n + 1, 0, 0, 0))
    index = {k: q for q, k in enumerate(keys)}

    tails, heads, lams = [], [], []
    for lbar1 in (0, 1):
        if lbar1 > K:
            continue
        for side in (IDLE_SIDE, OVERTIME_SIDE):
            for t in range(n):
                tails.append(0)
                heads.append(index[(1, lbar1, side, t)])
                lams.append(1 - lbar1)
    for i in range(2, n + 1):
        for lbar in range(K + 1):
            for side in (IDLE_SIDE, OVERTIME_SIDE):
                for t in range(n - i + 2):
                    tail = index[(i - 1, lbar, side, t)]
                    for lam in (1, 0):
                        nl = lbar + 1 - lam
                        if nl > K:
                            continue
                        if side == IDLE_SIDE and t == 0:
                            targets = [(s2, t2) for s2 in (IDLE_SIDE, OVERTIME_SIDE) for t2 in range(n - i + 1)]
                        else:
                            targets = [(side, t - lam)] if 0 <= t - lam <= n - i else []
                        for s2, t2 in targets:
                            tails.append(tail)
                            heads.append(index[(i, nl, s2, t2)])
                            lams.append(lam)
    for lbar in range(K + 1):
        for side in (IDLE_SIDE, OVERTIME_SIDE):
            tails.append(index[(n, lbar, side, 0)])
            heads.append(len(keys) - 1)
            lams.append(-1)
    tails, heads, lams = map(np.asarray, (tails, heads, lams))

    # prune nodes off every S-E path
    m = len(keys)
    fwd = np.zeros(m, dtype=bool)
    fwd[0] = True
    bwd = np.zeros(m, dtype=bool)
    bwd[-1] = True
    layer_of = np.array([k[0] for k in keys])
    for i in range(1, n + 2):
        sel = layer_of[heads] == i
        fwd[heads[sel & fwd[tails]]] = True
    for i in range(n + 1, 0, -1):
        sel = layer_of[heads] == i
        bwd[tails[sel & bwd[heads]]] = True
    keep_node = fwd & bwd
    keep_arc = keep_node[tails] & keep_node[heads]

    arr = np.array(keys)
    y_all = np.where(arr[:, 2] == IDLE_SIDE, -float(d0), float(C)) + arr[:, 3]
    y_all[0] = y_all[-1] = np.nan
    # topological numbering sorted by (layer, lbar, y)
    kept = np.flatnonzero(keep_node)
    order = kept[np.lexsort((y_all[kept], arr[kept, 1], arr[kept, 0]))]
    new_id = -np.ones(m, dtype=np.int64)
    new_id[order] = np.arange(order.size)

    t_new, h_new, lam_new = new_id[tails[keep_arc]], new_id[heads[keep_arc]], lams[keep_arc]
    layer_new = arr[order, 0]
    arc_layer = layer_new[h_new]
    # arcs ordered by (layer, tail, head)
    aorder = np.lexsort((h_new, t_new, arc_layer))
    t_new, h_new, lam_new, arc_layer = t_new[aorder], h_new[aorder], lam_new[aorder], arc_layer[aorder]
    arc_class = np.where(lam_new < 0, TERMINAL, np.where(lam_new == 1, SHOW, NO_SHOW))

    indeg = np.bincount(h_new, minlength=order.size)
    in_arcs = -np.ones((order.size, max(int(indeg.max()), 1)), dtype=np.int64)
    fill = np.zeros(order.size, dtype=np.int64)
    for a, h in enumerate(h_new):
        in_arcs[h, fill[h]] = a
        fill[h] += 1

    return NoShowNetwork(
        n=n, K=K, d0=float(d0), C=float(C),
        node_layer=layer_new, node_lbar=arr[order, 1], node_side=arr[order, 2], node_offset=arr[order, 3],
        node_y=y_all[order], arc_tail=t_new, arc_head=h_new, arc_layer=arc_layer, arc_lam=lam_new,
        arc_class=arc_class, in_arcs=in_arcs,
    )


def waiting_unit(costs: CostParams) -> float:
    """Common waiting cost ``c0``; the no-show model needs homogeneous costs."""
    if not costs.homogeneous:
        raise InvalidCosts("the no-show model requires equal waiting costs and equal idleness costs")
    c0 = float(costs.c[0])
    if c0 <= 0:
        raise InvalidCosts("the no-show model requires a positive waiting cost")
    return c0


def network_for(costs: CostParams, K: int) -> NoShowNetwork:
    c0 = waiting_unit(costs)
    return build_network(costs.n, K, float(costs.d[0]) / c0, costs.C / c0)


# ---------------------------------------------------------------- oracle


def f_ij(lam, y, rho, s_i, mu_hat, lam_hat, uL_i, uU_i, p: float = 1.0):
    """Best single-appointment contribution for a fixed show flag and price; broadcasts.

    Returns ``(value, mu_star)``.
    """
    lam, y, rho, s_i, mu_hat, lam_hat, uL_i, uU_i = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (lam, y, rho, s_i, mu_hat, lam_hat, uL_i, uU_i))
    )
    absent = -y * s_i - rho * (np.abs(mu_hat) ** p + np.abs(lam_hat) ** p)
    h, u = inner_max_1d(y, rho, mu_hat, uL_i, uU_i, p)
    present = h - y * s_i - rho * np.abs(1.0 - lam_hat) ** p
    val = np.where(lam == 1, present, absent)
    mu = np.where(lam == 1, u, 0.0)
    if val.ndim == 0:
        return float(val), float(mu)
    return val, mu


@dataclass
class PathResult:
    """Longest-path output; arrays carry a leading sample axis for batch calls.

    ``y`` holds prices in cost units (normalized price times ``c0``).
    """

    value: np.ndarray
    path: np.ndarray  # arc indices, one per layer plus the terminal arc
    lam: np.ndarray
    y: np.ndarray
    mu: np.ndarray
    grad_rho: np.ndarray
    grad_s: np.ndarray

    def squeeze(self) -> "PathResult":
        return PathResult(float(self.value[0]), self.path[0], self.lam[0], self.y[0], self.mu[0],
                          float(self.grad_rho[0]), self.grad_s[0])


def _arc_values(rho, s, MU, LAM, net: NoShowNetwork, uL, uU, c0, p):
    """Arc lengths (N x arcs) and the duration each show arc would realize."""
    body = net.arc_class != TERMINAL
    i = np.where(body, net.arc_layer - 1, 0)
    y = np.where(body, c0 * net.node_y[net.arc_head], 0.0)
    lam = np.where(net.arc_lam == 1, 1.0, 0.0)
    val, mu = f_ij(lam[None, :], y[None, :], rho, s[i][None, :], MU[:, i], LAM[:, i], uL[i][None, :],
                   uU[i][None, :], p)
    return np.where(body[None, :], val, 0.0), mu


def _longest_paths(G: np.ndarray, net: NoShowNetwork):
    """Forward DP in topological order; ties go to the smallest arc index."""
    N = G.shape[0]
    V = np.full((N, net.n_nodes), -np.inf)
    V[:, 0] = 0.0
    choice = np.zeros((N, net.n_nodes), dtype=np.int64)
    for i in range(1, net.n + 2):
        nodes = net.layer_nodes(i)
        arcs = net.in_arcs[nodes]  # (h, deg)
        valid = arcs >= 0
        a = np.where(valid, arcs, 0)
        cand = V[:, net.arc_tail[a]] + G[:, a]
        cand = np.where(valid[None], cand, -np.inf)
        best = np.argmax(cand, axis=2)
        V[:, nodes] = np.take_along_axis(cand, best[:, :, None], axis=2)[:, :, 0]
        choice[:, nodes] = a[np.arange(nodes.size)[None, :], best]
    paths = np.zeros((N, net.n + 1), dtype=np.int64)
    node = np.full(N, net.sink)
    rows = np.arange(N)
    for step in range(net.n, -1, -1):
        arc = choice[rows, node]
        paths[:, step] = arc
        node = net.arc_tail[arc]
    return V[:, -1], paths


def _path_oracle(rho, s, MU, LAM, net, uL, uU, c0, p) -> PathResult:
    G, MUa = _arc_values(rho, s, MU, LAM, net, uL, uU, c0, p)
    value, paths = _longest_paths(G, net)
    body = paths[:, :-1]
    rows = np.arange(MU.shape[0])[:, None]
    lam = (net.arc_lam[body] == 1).astype(float)
    y = c0 * net.node_y[net.arc_head[body]]
    mu = MUa[rows, body]
    grad_rho = -(np.abs(mu - MU) ** p + np.abs(lam - LAM) ** p).sum(axis=1)
    return PathResult(value, paths, lam, y, mu, grad_rho, -y)


def longest_path_oracle(rho, schedule, mu_hat, lam_hat, network: NoShowNetwork, support, costs: CostParams,
                        p: float = 1.0) -> PathResult:
    """Exact ``omega'_j(rho, s)`` with the maximizing scenario and a subgradient.

    ``mu_hat``/``lam_hat`` may be single vectors or N x n arrays.
    """
    s = schedule.s if isinstance(schedule, Schedule) else np.asarray(schedule, dtype=float)
    MU = np.asarray(mu_hat, dtype=float)
    single = MU.ndim == 1
    MU = np.atleast_2d(MU)
    LAM = np.atleast_2d(np.asarray(lam_hat, dtype=float))
    if MU.shape != LAM.shape or MU.shape[1] != s.size or network.n != s.size or support.n != s.size:
        raise LengthMismatch("schedule, samples, network and support must share their length")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    res = _path_oracle(float(rho), s, MU, LAM, network, support.uL, support.uU, waiting_unit(costs), p)
    return res.squeeze() if single else res


def noshow_oracle(MU, LAM, network: NoShowNetwork, support, costs: CostParams, p: float):
    """Batch oracle closure for :func:`dras.cutting_plane.kelley`."""
    MU = np.atleast_2d(np.asarray(MU, dtype=float))
    LAM = np.atleast_2d(np.asarray(LAM, dtype=float))
    c0 = waiting_unit(costs)

    def oracle(rho, s, idx):
        r = _path_oracle(rho, s, MU[idx], LAM[idx], network, support.uL, support.uU, c0, p)
        return r.value, r.grad_rho, r.grad_s

    return oracle


def rho_cap_noshow(costs: CostParams, support: NoShowSupport) -> float:
    """For p = 1, no scenario moves once rho exceeds a Lipschitz constant of g.

    A unit change of some ``mu_i`` moves g by at most the largest price,
    and flipping one show flag changes at most one waiting charge, which is
    below ``c0 * sum(uU)``.
    """
    c0 = waiting_unit(costs)
    n = costs.n
    ymax = max(costs.C + c0 * (n - 1), float(costs.d[0]))
    return float(max(ymax, c0 * support.uU.sum()))


def rho_upper_bound_noshow(costs: CostParams, support: NoShowSupport, T: float, ball: WassersteinBall) -> float:
    """Beyond this rho the dual objective exceeds its value at rho = 0."""
    if ball.p == 1:
        return rho_cap_noshow(costs, support)
    c0 = waiting_unit(costs)
    g_max = (costs.n * c0 + costs.C) * support.uU.sum() + float(costs.d[0]) * T
    return float(g_max / ball.eps_p)


# ---------------------------------------------------------------- p = 1 LP


def build_direct_lp_noshow_p1(MU, LAM, network: NoShowNetwork, support, costs: CostParams, epsilon: float,
                              T: float, rho_bound: float | None = None) -> tuple[LinearProgram, dict]:
    """Dual of the longest-path LP for every sample, sharing ``rho`` and ``s``.

    Variables: ``rho``, ``s`` (n), node potentials ``alpha`` (N x nodes).
    Show arcs carry three rows, one per duration breakpoint
    ``{uL, clamp(mu_hat), uU}``.
    """
    MU = np.atleast_2d(np.asarray(MU, dtype=float))
    LAM = np.atleast_2d(np.asarray(LAM, dtype=float))
    N, n = MU.shape
    c0 = waiting_unit(costs)
    net = network
    V = net.n_nodes
    b = LpBuilder("min")
    rho = b.add_var_block(1, cost=epsilon, upper=np.inf if rho_bound is None else rho_bound, name="rho")[0]
    s = b.add_var_block(n, name="s")
    cost_alpha = np.zeros((N, V))
    cost_alpha[:, net.source] = 1.0 / N
    cost_alpha[:, net.sink] = -1.0 / N
    alpha = b.add_var_block((N, V), lower=-np.inf, cost=cost_alpha, name="alpha")
    j = np.arange(N)[:, None]

    def block(arcs, s_coef, rho_coef, rhs):
        # alpha_tail - alpha_head + s_coef * s_i + rho_coef * rho >= rhs, one row per (j, arc)
        A = arcs.size
        m = N * A
        r = np.arange(m)
        tails = alpha[j, net.arc_tail[arcs][None, :]].ravel()
        heads = alpha[j, net.arc_head[arcs][None, :]].ravel()
        rows = [r, r, r]
        cols = [tails, heads, np.full(m, rho)]
        vals = [np.ones(m), -np.ones(m), np.broadcast_to(rho_coef, (N, A)).ravel()]
        if s_coef is not None:
            rows.append(r)
            cols.append(np.tile(s[net.arc_layer[arcs] - 1], N))
            vals.append(np.tile(s_coef, N))
        b.add_rows(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), ">=",
                   np.broadcast_to(rhs, (N, A)).ravel())

    term = net.arcs_of_class(TERMINAL)
    block(term, None, 0.0, 0.0)
    for cls in (NO_SHOW, SHOW):
        arcs = net.arcs_of_class(cls)
        if arcs.size == 0:
            continue
        i = net.arc_layer[arcs] - 1
        y = c0 * net.node_y[net.arc_head[arcs]]
        mu, lam = MU[:, i], LAM[:, i]
        if cls == NO_SHOW:
            block(arcs, y, np.abs(mu) + np.abs(lam), 0.0)
        else:
            m = np.clip(mu, support.uL[i], support.uU[i])
            for bp in (np.broadcast_to(support.uL[i], mu.shape), m, np.broadcast_to(support.uU[i], mu.shape)):
                block(arcs, y, np.abs(1.0 - lam) + np.abs(bp - mu), bp * y[None, :])
    b.add_rows(np.zeros(n, dtype=np.int64), s, 1.0, "<=", [T])
    return b.build(), {"rho": rho, "s": s, "alpha": alpha}


# ---------------------------------------------------------------- solvers


def _noshow_support_for(samples: SampleSet, instance: Instance) -> NoShowSupport:
    if instance.has_support:
        K = instance.K if instance.K is not None else _budget(samples)
        sup = NoShowSupport(instance.uL, instance.uU, K)
    else:
        sup = infer_noshow_support(samples)
        if instance.K is not None:
            sup = NoShowSupport(sup.uL, sup.uU, instance.K)
    if sup.n != samples.n:
        raise LengthMismatch("support and samples differ in length")
    if not sup.contains_noshow(samples.values, _shows(samples), tol=1e-9).all():
        raise InvalidSupport("some samples lie outside the no-show support")
    return sup


def _budget(samples: SampleSet) -> int:
    return int((1 - _shows(samples)).sum(axis=1).max())


def _shows(samples: SampleSet) -> np.ndarray:
    return samples.shows if samples.shows is not None else np.ones_like(samples.values)


def solve_wns(
    samples: SampleSet,
    instance: Instance,
    ball: WassersteinBall,
    method: str = "auto",
    *,
    support: NoShowSupport | None = None,
    network: NoShowNetwork | None = None,
    cut_tol: float = CUT_TOL,
    max_iter: int = MAX_ITER,
    pool: CutPool | None = None,
    pool_ids: np.ndarray | None = None,
    master: Master | None = None,
    start: tuple[float, np.ndarray] | None = None,
    backend: str = "highs",
) -> DroSolution:
    """Robust schedule against no-shows and durations; arguments mirror ``solve_wdras``."""
    method = _resolve_method(method)
    MU = samples.values
    LAM = _shows(samples)
    N, n = MU.shape
    if instance.n != n:
        raise LengthMismatch(f"instance has n={instance.n} but samples have {n} columns")
    sup = support if support is not None else _noshow_support_for(samples, instance)
    costs = instance.costs
    net = network if network is not None else network_for(costs, sup.K)
    p = float(ball.p)
    if ball.epsilon == 0:
        p = 1.0
    if method == "auto":
        method = "direct-lp" if p == 1 and N * net.n_arcs <= AUTO_DIRECT_LIMIT else "cutting-plane"
    if method == "direct-lp" and p != 1:
        raise ValueError("the direct LP reformulation requires p = 1")
    eps_p = float(ball.epsilon) ** p
    cap = rho_cap_noshow(costs, sup)
    rho_max = cap if p == 1 else rho_upper_bound_noshow(costs, sup, instance.T, WassersteinBall(p, ball.epsilon))
    c0 = waiting_unit(costs)

    if method == "direct-lp":
        lp, idx = build_direct_lp_noshow_p1(MU, LAM, net, sup, costs, ball.epsilon, instance.T, rho_bound=cap)
        sol = solve_lp(lp, backend=backend)
        if not sol.optimal:
            raise InfeasibleModel(f"direct LP returned {sol.status.value}")
        rho = float(np.clip(sol.x[idx["rho"]], 0.0, cap))
        s = np.clip(sol.x[idx["s"]], 0.0, None)
        iterations = sol.iterations
        extra = {"lp_objective": float(sol.objective), "lp_rows": lp.n_rows, "lp_vars": lp.n_vars}
    else:
        oracle = noshow_oracle(MU, LAM, net, sup, costs, p)
        res = kelley(oracle, N, n, instance.T, eps_p, rho_max, pool=pool, global_ids=pool_ids, master=master,
                     start=start, cut_tol=cut_tol, max_iter=max_iter)
        rho, s, iterations = res.rho, res.s, res.iterations
        extra = {"lower_bound": res.lower_bound, "cuts": res.n_cuts}
    s = _fit_horizon(s, instance.T)
    if ball.epsilon == 0:
        rho = cap
    theta = _path_oracle(rho, s, MU, LAM, net, sup.uL, sup.uU, c0, p).value
    extra.update({"K": sup.K, "nodes": net.n_nodes, "arcs": net.n_arcs})
    return DroSolution(Schedule(s, instance.T), rho, float(eps_p * rho + theta.mean()), method, iterations,
                       theta, extra)


# ---------------------------------------------------------------- worst case


@dataclass
class NoShowWorstCase:
    mu: np.ndarray  # (M, n)
    lam: np.ndarray  # (M, n)
    weights: np.ndarray
    source: np.ndarray
    lp_value: float

    @property
    def atoms(self) -> np.ndarray:
        """Concatenated ``(mu, lambda)`` scenario vectors."""
        return np.hstack([self.mu, self.lam])

    def expectation(self, fn) -> float:
        return float(self.weights @ fn(self.mu, self.lam))


def worst_case_lp_noshow(schedule, MU, LAM, network: NoShowNetwork, support, costs: CostParams, epsilon: float):
    """Flow LP: ``p`` on no-show arcs, ``q``/``w``/``r`` on show arcs, ``o`` on terminal arcs."""
    s = schedule.s if isinstance(schedule, Schedule) else np.asarray(schedule, dtype=float)
    MU = np.atleast_2d(np.asarray(MU, dtype=float))
    LAM = np.atleast_2d(np.asarray(LAM, dtype=float))
    N, n = MU.shape
    net = network
    c0 = waiting_unit(costs)
    uL, uU = support.uL, support.uU
    e0, e1, eE = (net.arcs_of_class(c) for c in (NO_SHOW, SHOW, TERMINAL))
    i0, i1 = net.arc_layer[e0] - 1, net.arc_layer[e1] - 1
    y0, y1 = c0 * net.node_y[net.arc_head[e0]], c0 * net.node_y[net.arc_head[e1]]
    M = np.clip(MU[:, i1], uL[i1], uU[i1])

    b = LpBuilder("max")
    pv = b.add_var_block((N, e0.size), cost=-(y0 * s[i0])[None, :] / N * np.ones((N, 1)), name="p")
    qv = b.add_var_block((N, e1.size), cost=y1 * (uL[i1] - s[i1]) / N * np.ones((N, 1)), name="q")
    wv = b.add_var_block((N, e1.size), cost=y1 * (M - s[i1]) / N, name="w")
    rv = b.add_var_block((N, e1.size), cost=y1 * (uU[i1] - s[i1]) / N * np.ones((N, 1)), name="r")
    ov = b.add_var_block((N, eE.size), name="o")

    # columns carrying flow on each arc, with the arc they belong to
    arc_cols = [(e0, pv), (e1, qv), (e1, wv), (e1, rv), (eE, ov)]
    V = net.n_nodes
    rows, cols, vals = [], [], []
    for arcs, var in arc_cols:
        for end, sign in ((net.arc_tail, 1.0), (net.arc_head, -1.0)):
            node = end[arcs]
            keep = node != net.sink
            r = (np.arange(N)[:, None] * (V - 1) + node[None, keep]).ravel()
            rows.append(r)
            cols.append(var[:, keep].ravel())
            vals.append(np.full(r.size, sign))
    rhs = np.zeros((N, V - 1))
    rhs[:, net.source] = 1.0
    b.add_rows(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), "=", rhs.ravel())
    b.add_rows((np.arange(N)[:, None] * np.ones((1, eE.size), dtype=np.int64)).ravel(), ov.ravel(), 1.0, "=",
               np.ones(N))

    mu0, lam0 = MU[:, i0], LAM[:, i0]
    mu1, lam1 = MU[:, i1], LAM[:, i1]
    base = np.abs(1.0 - lam1)
    dist = [
        (pv, (np.abs(mu0) + np.abs(lam0)) / N),
        (qv, (base + np.abs(uL[i1] - mu1)) / N),
        (wv, (base + np.abs(M - mu1)) / N),
        (rv, (base + np.abs(uU[i1] - mu1)) / N),
    ]
    b.add_rows(np.zeros(sum(v.size for v, _ in dist), dtype=np.int64),
               np.concatenate([v.ravel() for v, _ in dist]), np.concatenate([d.ravel() for _, d in dist]),
               "<=", [epsilon])
    return b.build(), {"p": pv, "q": qv, "w": wv, "r": rv, "o": ov, "arcs": (e0, e1, eE), "M": M}


def _widest_path_net(flow: np.ndarray, net: NoShowNetwork):
    best = np.full(net.n_nodes, -np.inf)
    best[net.source] = np.inf
    arc_in = np.full(net.n_nodes, -1)
    for a in range(net.n_arcs):  # arcs are sorted by layer, so tails are final before use
        t, h = net.arc_tail[a], net.arc_head[a]
        if flow[a] <= 0 or best[t] <= 0:
            continue
        cap = min(best[t], flow[a])
        if cap > best[h]:
            best[h] = cap
            arc_in[h] = a
    if not best[net.sink] > 0:
        return 0.0, []
    path, node = [], net.sink
    while node != net.source:
        a = arc_in[node]
        path.append(a)
        node = net.arc_tail[a]
    return float(best[net.sink]), path[::-1]


def peel_paths(flow: np.ndarray, net: NoShowNetwork, residual_tol: float = PEEL_RESIDUAL):
    """Decompose one unit of S-E flow into weighted paths, widest first."""
    flow = np.where(flow < SNAP, 0.0, flow).astype(float)
    out, total = [], 0.0
    for _ in range(flow.size + 1):
        w, path = _widest_path_net(flow, net)
        if w <= 0:
            break
        flow[path] -= w
        flow[np.abs(flow) < SNAP] = 0.0
        out.append((w, path))
        total += w
    if abs(1.0 - total) > residual_tol:
        raise DecompositionResidual(f"peeling left mass {1.0 - total:.3g} unassigned")
    return [(w / total, path) for w, path in out]


def worst_case_distribution_noshow(schedule, samples: SampleSet, support: NoShowSupport, costs: CostParams,
                                   epsilon: float, network: NoShowNetwork | None = None,
                                   backend: str = "highs") -> NoShowWorstCase:
    """Discrete distribution in the 1-Wasserstein ball attaining the worst-case expected cost."""
    if epsilon < 0:
        raise ValueError("radius must be nonnegative")
    MU = samples.values
    LAM = _shows(samples)
    N, n = MU.shape
    net = network if network is not None else network_for(costs, support.K)
    lp, idx = worst_case_lp_noshow(schedule, MU, LAM, net, support, costs, epsilon)
    sol = solve_lp(lp, backend=backend)
    if not sol.optimal:
        raise InfeasibleModel(f"worst-case LP returned {sol.status.value}")
    x = np.where(np.abs(sol.x) < SNAP, 0.0, sol.x)
    e0, e1, eE = idx["arcs"]
    i1 = net.arc_layer[e1] - 1
    uL, uU = support.uL[i1], support.uU[i1]
    M = idx["M"]
    mus, lams, weights, source = [], [], [], []
    for j in range(N):
        flow = np.zeros(net.n_arcs)
        q, w, r = x[idx["q"][j]], x[idx["w"][j]], x[idx["r"][j]]
        tot = q + w + r
        flow[e0] = x[idx["p"][j]]
        flow[e1] = tot
        flow[eE] = x[idx["o"][j]]
        with np.errstate(invalid="ignore", divide="ignore"):
            coord = M[j] + np.where(tot > 0, (q * (uL - M[j]) + r * (uU - M[j])) / tot, 0.0)
        coord = np.clip(coord, uL, uU)
        coord_of = np.zeros(net.n_arcs)
        coord_of[e1] = coord
        merged: dict[bytes, int] = {}
        for wt, path in peel_paths(flow, net):
            path = np.asarray(path[:-1])
            lam = (net.arc_lam[path] == 1).astype(float)
            mu = np.where(lam == 1, coord_of[path], 0.0)
            key = np.concatenate([mu, lam]).tobytes()
            if key in merged:
                weights[merged[key]] += wt / N
            else:
                merged[key] = len(weights)
                mus.append(mu)
                lams.append(lam)
                weights.append(wt / N)
                source.append(j)
    weights = np.asarray(weights)
    weights /= weights.sum()
    return NoShowWorstCase(np.asarray(mus), np.asarray(lams), weights, np.asarray(source), float(sol.objective))


def evaluate_sup_expectation_noshow(schedule, samples: SampleSet, support: NoShowSupport, costs: CostParams,
                                    ball: WassersteinBall, T: float | None = None,
                                    network: NoShowNetwork | None = None, tol: float = 1e-8) -> float:
    """Worst-case expected cost of a fixed schedule, by convex search over rho."""
    from .duration import _golden_min

    s = schedule.s if isinstance(schedule, Schedule) else np.asarray(schedule, dtype=float)
    MU, LAM = samples.values, _shows(samples)
    if ball.epsilon == 0:
        return float(noshow_costs(s, MU, LAM, costs).mean())
    net = network if network is not None else network_for(costs, support.K)
    c0 = waiting_unit(costs)
    p = float(ball.p)

    def phi(rho):
        return ball.eps_p * rho + _path_oracle(rho, s, MU, LAM, net, support.uL, support.uU, c0, p).value.mean()

    hi = rho_upper_bound_noshow(costs, support, s.sum() if T is None else T, ball)
    return _golden_min(phi, 0.0, hi, tol)


def transport_distance_noshow(wc: NoShowWorstCase, samples: SampleSet, backend: str = "auto") -> float:
    """1-Wasserstein distance (l1 over concatenated (mu, lambda)) to the empirical distribution."""
    A = wc.atoms
    B = np.hstack([samples.values, _shows(samples)])
    cost = np.abs(A[:, None, :] - B[None, :, :]).sum(axis=2)
    return solve_transport(wc.weights, np.full(B.shape[0], 1.0 / B.shape[0]), cost, backend=backend)
