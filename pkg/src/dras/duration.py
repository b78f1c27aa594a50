"""Wasserstein-robust scheduling with random service durations.

The worst-case expected cost over a p-Wasserstein ball around the empirical
distribution is ``min_rho eps^p rho + (1/N) sum_j omega_j(rho, s)`` where

    omega_j(rho, s) = sup_{u in box} f(s, u) - rho * ||u - u_j||_p^p.

For a box support, ``omega_j`` is a longest-path problem over interval
partitions of ``{1, ..., n+1}`` whose arc scores need only a 1-D concave
(p > 1) or three-point (p = 1) maximization per coordinate. That gives an
exact separation oracle (used by the cutting-plane solver) and, for p = 1,
a polynomial-size LP.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cutting_plane import CUT_TOL, MAX_ITER, CutPool, Master, kelley
from .errors import DecompositionResidual, InfeasibleModel, InvalidSupport, LengthMismatch
from .lp import LinearProgram, LpBuilder, solve_lp, solve_transport
from .schedule import (
    CostParams,
    DurationSupport,
    Instance,
    SampleSet,
    Schedule,
    duration_costs,
    infer_support,
    pi_table,
)

AUTO_DIRECT_LIMIT = 5e4
GOLDEN_TOL = 1e-8
SNAP = 1e-10
PEEL_RESIDUAL = 1e-7
METHODS = ("auto", "direct-lp", "cutting-plane")
_ALIASES = {"lp": "direct-lp", "cp": "cutting-plane"}


@dataclass(frozen=True)
class WassersteinBall:
    p: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"Wasserstein order must be >= 1, got {self.p}")
        if not self.epsilon >= 0:
            raise ValueError(f"radius must be nonnegative, got {self.epsilon}")

    @property
    def eps_p(self) -> float:
        return float(self.epsilon) ** float(self.p)


@dataclass
class DroSolution:
    schedule: Schedule
    rho: float
    objective: float
    method: str
    iterations: int
    theta: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def s(self) -> np.ndarray:
        return self.schedule.s

    def to_dict(self) -> dict:
        return {
            "s": [float(x) for x in self.s],
            "rho": float(self.rho),
            "objective": float(self.objective),
            "diagnostics": {"method": self.method, "iterations": int(self.iterations), **self.diagnostics},
        }


@dataclass
class OracleResult:
    """Separation output. Arrays carry a leading sample axis for batch calls.

    ``ell[i]`` is the (0-based) end of the interval containing appointment
    ``i``; the value ``n`` denotes the overtime position.
    """

    value: np.ndarray
    ell: np.ndarray
    u_star: np.ndarray
    grad_rho: np.ndarray
    grad_s: np.ndarray

    def squeeze(self) -> "OracleResult":
        return OracleResult(float(self.value[0]), self.ell[0], self.u_star[0], float(self.grad_rho[0]), self.grad_s[0])


@dataclass
class WorstCaseDistribution:
    atoms: np.ndarray  # (M, n)
    weights: np.ndarray  # (M,)
    source: np.ndarray  # sample index each atom was transported from
    lp_value: float

    def expectation(self, fn) -> float:
        return float(self.weights @ fn(self.atoms))


# ---------------------------------------------------------------- oracle


def inner_max_1d(pi, rho, uhat, uL, uU, p):
    """Maximize ``pi*u - rho*|u - uhat|^p`` over ``[uL, uU]``; broadcasts over arrays.

    Returns ``(value, u_star)``.
    """
    pi, rho, uhat, uL, uU = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (pi, rho, uhat, uL, uU)))
    m = np.clip(uhat, uL, uU)
    if p == 1:
        cand = np.stack([m, uL, uU])
        vals = pi * cand - rho * np.abs(cand - uhat)
        k = np.argmax(vals, axis=0)  # first maximum, so ties keep the sample value
        u = np.take_along_axis(cand, k[None], axis=0)[0]
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (np.abs(pi) / (p * rho)) ** (1.0 / (p - 1.0))
        stationary = uhat + np.sign(pi) * step
        at_zero = np.where(pi > 0, uU, np.where(pi < 0, uL, m))
        u = np.where(rho > 0, np.clip(np.where(pi == 0, uhat, stationary), uL, uU), at_zero)
    val = pi * u - rho * np.abs(u - uhat) ** p
    if val.ndim == 0:
        return float(val), float(u)
    return val, u


def _partition_dp(S: np.ndarray):
    """Best interval partition for scores ``S[j, k, l]`` (interval from k ending at l).

    Returns the value and, per sample, the interval end assigned to every
    appointment. Ties go to the smallest interval end.
    """
    N, n, _ = S.shape
    V = np.zeros((N, n + 1))
    choice = np.zeros((N, n), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        ls = np.arange(k, n + 1)
        nxt = np.minimum(ls + 1, n)
        cand = S[:, k, k:] + V[:, nxt]
        best = np.argmax(cand, axis=1)
        choice[:, k] = k + best
        V[:, k] = cand[np.arange(N), best]
    ell = np.zeros((N, n), dtype=np.int64)
    rows = np.arange(N)
    k = np.zeros(N, dtype=np.int64)
    active = np.ones(N, dtype=bool)
    while active.any():
        idx = rows[active]
        kk = k[active]
        l = choice[idx, kk]
        stop = np.minimum(l, n - 1)
        for j, a, b, lv in zip(idx, kk, stop, l):
            ell[j, a:b + 1] = lv
        k[active] = stop + 1
        active &= k < n
    return V[:, 0], ell


def _omega(rho, s, U, uL, uU, P, p) -> OracleResult:
    N, n = U.shape
    valid = ~np.isnan(P)
    Pz = np.where(valid, P, 0.0)
    h, u = inner_max_1d(Pz[None], rho, U[:, :, None], uL[None, :, None], uU[None, :, None], p)
    z = np.where(valid[None], h - s[None, :, None] * Pz[None], 0.0)
    # S[j, k, l] = sum_{i=k}^{min(l, n-1)} z[j, i, l]; entries with i > l are zero
    S = np.flip(np.cumsum(np.flip(z, axis=1), axis=1), axis=1)
    value, ell = _partition_dp(S)
    rows = np.arange(n)
    u_star = np.take_along_axis(u, ell[:, :, None], axis=2)[:, :, 0]
    pis = P[rows[None, :], ell]
    grad_rho = -(np.abs(u_star - U) ** p).sum(axis=1)
    return OracleResult(value, ell, u_star, grad_rho, -pis)


def omega_oracle(rho, schedule, sample, support: DurationSupport, costs: CostParams, p: float = 1.0) -> OracleResult:
    """Exact ``omega_j(rho, s)`` with maximizing partition, durations and subgradient.

    ``sample`` may be one duration vector or an N x n array.
    """
    s = schedule.s if isinstance(schedule, Schedule) else np.asarray(schedule, dtype=float)
    U = np.asarray(sample, dtype=float)
    single = U.ndim == 1
    U = np.atleast_2d(U)
    if U.shape[1] != s.size or support.n != s.size or costs.n != s.size:
        raise LengthMismatch("schedule, samples, support and costs must share their length")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    res = _omega(float(rho), s, U, support.uL, support.uU, pi_table(costs), p)
    return res.squeeze() if single else res


def rho_cap(costs: CostParams) -> float:
    """For p = 1 no sample moves once rho exceeds every |pi|."""
    return float(np.nanmax(np.abs(pi_table(costs))))


def rho_upper_bound(costs: CostParams, support: DurationSupport, ball: WassersteinBall) -> float:
    """A radius multiplier beyond which the dual objective only increases."""
    if ball.p == 1:
        return rho_cap(costs)
    M = np.nanmax(np.abs(pi_table(costs)), axis=1)
    return float(M @ (support.uU - support.uL) / ball.eps_p)


# ---------------------------------------------------------------- p = 1 LP


def _pairs(n: int):
    I, L = np.nonzero(np.triu(np.ones((n, n + 1))))
    return I, L


def build_direct_lp_p1(U, support: DurationSupport, costs: CostParams, epsilon: float, T: float,
                       rho_bound: float | None = None) -> tuple[LinearProgram, dict]:
    """LP whose optimum is the p = 1 robust objective.

    Variables: ``rho``, ``s`` (n), ``gamma`` (N x n), ``z`` (N x n(n+3)/2),
    with one z per (appointment i, interval end l >= i) and sample. Returns
    the LP and the index arrays of each block.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    N, n = U.shape
    P = pi_table(costs)
    I, L = _pairs(n)
    K = I.size
    pos = -np.ones((n, n + 1), dtype=np.int64)
    pos[I, L] = np.arange(K)

    b = LpBuilder("min")
    rho = b.add_var_block(1, cost=epsilon, upper=np.inf if rho_bound is None else rho_bound, name="rho")[0]
    s = b.add_var_block(n, name="s")
    gamma = b.add_var_block((N, n), lower=-np.inf, cost=1.0 / N, name="gamma")
    z = b.add_var_block((N, K), lower=-np.inf, name="z")

    # interval [k, l]: sum_{i=k}^{min(l,n-1)} (gamma_ij - z_ilj) >= 0, one row per (k, l, j)
    rows, cols, vals = [], [], []
    for r, (k, l) in enumerate(zip(I, L)):
        span = np.arange(k, min(l, n - 1) + 1)
        rows.append(np.full(2 * span.size, r))
        cols.append(np.concatenate([span, n + pos[span, l]]))
        vals.append(np.concatenate([np.ones(span.size), -np.ones(span.size)]))
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    # lay the template out for every sample: gamma offset j*n, z offset j*K
    j = np.arange(N)
    is_gamma = cols < n
    base = np.where(is_gamma, gamma[0, 0] + cols, z[0, 0] + cols - n)
    step = np.where(is_gamma, n, K)
    all_rows = (rows[None, :] + K * j[:, None]).ravel()
    all_cols = (base[None, :] + step[None, :] * j[:, None]).ravel()
    b.add_rows(all_rows, all_cols, np.tile(vals, N), ">=", np.zeros(N * K))

    # breakpoints: z_ilj + pi_il s_i + |b - u_ij| rho >= pi_il b for b in {uL, clamp(u), uU}
    pi = P[I, L]
    zi = z.ravel()
    si = s[np.tile(I, N)]
    Ui = U[:, I].ravel()
    pii = np.tile(pi, N)
    for bp in (np.tile(support.uL[I], N), np.clip(Ui, np.tile(support.uL[I], N), np.tile(support.uU[I], N)),
               np.tile(support.uU[I], N)):
        m = zi.size
        r = np.arange(m)
        b.add_rows(
            np.concatenate([r, r, r]),
            np.concatenate([zi, si, np.full(m, rho)]),
            np.concatenate([np.ones(m), pii, np.abs(bp - Ui)]),
            ">=",
            pii * bp,
        )
    b.add_rows(np.zeros(n, dtype=np.int64), s, 1.0, "<=", [T])
    lp = b.build()
    return lp, {"rho": rho, "s": s, "gamma": gamma, "z": z, "pairs": (I, L)}


# ---------------------------------------------------------------- solvers


def _resolve_method(method: str) -> str:
    method = _ALIASES.get(method, method)
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    return method


def _support_for(samples: SampleSet, instance: Instance) -> DurationSupport:
    if instance.has_support:
        sup = instance.duration_support()
    else:
        sup = infer_support(samples)
    if sup.n != samples.n:
        raise LengthMismatch("support and samples differ in length")
    if not sup.contains(samples.values, tol=1e-9).all():
        raise InvalidSupport("some samples lie outside the duration support")
    return sup


def duration_oracle(U, support: DurationSupport, costs: CostParams, p: float):
    """Batch oracle closure in the form expected by :func:`dras.cutting_plane.kelley`."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    P = pi_table(costs)

    def oracle(rho, s, idx):
        r = _omega(rho, s, U[idx], support.uL, support.uU, P, p)
        return r.value, r.grad_rho, r.grad_s

    return oracle


def solve_wdras(
    samples: SampleSet,
    instance: Instance,
    ball: WassersteinBall,
    method: str = "auto",
    *,
    support: DurationSupport | None = None,
    cut_tol: float = CUT_TOL,
    max_iter: int = MAX_ITER,
    pool: CutPool | None = None,
    pool_ids: np.ndarray | None = None,
    master: Master | None = None,
    start: tuple[float, np.ndarray] | None = None,
    backend: str = "highs",
) -> DroSolution:
    """Robust schedule minimizing the worst-case expected cost over the ball.

    ``pool``/``pool_ids`` let repeated cutting-plane solves on overlapping
    sample sets reuse earlier cuts; ``pool_ids`` gives each row of
    ``samples`` a stable identity within the pool. A ``master`` built on
    that pool additionally keeps the simplex basis between calls. ``start``
    is the ``(rho, s)`` point used to seed samples that have no cut yet.
    ``backend`` applies to the direct LP.
    """
    method = _resolve_method(method)
    U = samples.values
    N, n = U.shape
    if instance.n != n:
        raise LengthMismatch(f"instance has n={instance.n} but samples have {n} columns")
    sup = support if support is not None else _support_for(samples, instance)
    costs = instance.costs
    p = float(ball.p)
    # an empty ball is the same for every p, and p = 1 attains the limit rho -> inf
    if ball.epsilon == 0:
        p = 1.0
    if method == "auto":
        method = "direct-lp" if p == 1 and N * n * n <= AUTO_DIRECT_LIMIT else "cutting-plane"
    if method == "direct-lp" and p != 1:
        raise ValueError("the direct LP reformulation requires p = 1")
    eps_p = float(ball.epsilon) ** p
    cap = rho_cap(costs)
    rho_max = cap if p == 1 else rho_upper_bound(costs, sup, WassersteinBall(p, ball.epsilon))
    P = pi_table(costs)

    if method == "direct-lp":
        lp, idx = build_direct_lp_p1(U, sup, costs, ball.epsilon, instance.T, rho_bound=cap)
        sol = solve_lp(lp, backend=backend)
        if not sol.optimal:
            raise InfeasibleModel(f"direct LP returned {sol.status.value}")
        rho = float(np.clip(sol.x[idx["rho"]], 0.0, cap))
        s = np.clip(sol.x[idx["s"]], 0.0, None)
        iterations = sol.iterations
        extra = {"lp_objective": float(sol.objective), "lp_rows": lp.n_rows, "lp_vars": lp.n_vars}
    else:
        oracle = duration_oracle(U, sup, costs, p)
        res = kelley(oracle, N, n, instance.T, eps_p, rho_max, pool=pool, global_ids=pool_ids, master=master,
                     start=start, cut_tol=cut_tol, max_iter=max_iter)
        rho, s, iterations = res.rho, res.s, res.iterations
        extra = {"lower_bound": res.lower_bound, "cuts": res.n_cuts}
    s = _fit_horizon(s, instance.T)
    if ball.epsilon == 0:
        # every rho beyond the cap evaluates the empirical cost exactly
        rho = cap
    theta = _omega(rho, s, U, sup.uL, sup.uU, P, p).value
    return DroSolution(Schedule(s, instance.T), rho, float(eps_p * rho + theta.mean()), method, iterations,
                       theta, extra)


def _fit_horizon(s: np.ndarray, T: float) -> np.ndarray:
    s = np.maximum(s, 0.0)
    total = s.sum()
    if total > T:
        s = s * (T / total)
    return s


def solve_saa(samples: SampleSet, instance: Instance, backend: str = "highs") -> DroSolution:
    """Minimize the empirical mean cost via the recursion LP (waiting/idleness variables per sample).

    No-show samples are handled by waiving waiting costs of absent appointees.
    """
    U = samples.values
    N, n = U.shape
    if instance.n != n:
        raise LengthMismatch(f"instance has n={instance.n} but samples have {n} columns")
    costs = instance.costs
    lam = samples.shows if samples.shows is not None else np.ones_like(U)
    b = LpBuilder("min")
    s = b.add_var_block(n, name="s")
    # w[:, i] is the waiting time of appointment i+1 (the last column is overtime)
    wc = np.concatenate([costs.c[1:][None, :] * lam[:, 1:], np.full((N, 1), costs.C)], axis=1) / N
    w = b.add_var_block((N, n), cost=wc, name="w")
    v = b.add_var_block((N, n), cost=np.broadcast_to(costs.d / N, (N, n)), name="v")
    # w_{i+1} - v_i - w_i + s_i = u_i   (w_0 = 0)
    r = np.arange(N * n)
    prev = np.where(np.tile(np.arange(n), N) > 0, w.ravel() - 1, -1)
    has_prev = prev >= 0
    rows = np.concatenate([r, r, r[has_prev], r])
    cols = np.concatenate([w.ravel(), v.ravel(), prev[has_prev], np.tile(s, N)])
    vals = np.concatenate([np.ones(r.size), -np.ones(r.size), -np.ones(has_prev.sum()), np.ones(r.size)])
    b.add_rows(rows, cols, vals, "=", U.ravel())
    b.add_rows(np.zeros(n, dtype=np.int64), s, 1.0, "<=", [instance.T])
    lp = b.build()
    sol = solve_lp(lp, backend=backend)
    if not sol.optimal:
        raise InfeasibleModel(f"SAA LP returned {sol.status.value}")
    s_opt = _fit_horizon(sol.x[s], instance.T)
    if samples.shows is None:
        costs_each = duration_costs(s_opt, U, costs)
    else:
        from .schedule import noshow_costs

        costs_each = noshow_costs(s_opt, U, samples.shows, costs)
    return DroSolution(Schedule(s_opt, instance.T), 0.0, float(costs_each.mean()), "saa", sol.iterations,
                       costs_each, {"lp_objective": float(sol.objective)})


# ---------------------------------------------------------------- worst case and evaluation


def evaluate_sup_expectation(schedule, samples: SampleSet, support: DurationSupport, costs: CostParams,
                             ball: WassersteinBall, tol: float = GOLDEN_TOL) -> float:
    """Worst-case expected cost of a fixed schedule, by convex search over rho."""
    s = schedule.s if isinstance(schedule, Schedule) else np.asarray(schedule, dtype=float)
    U = samples.values if isinstance(samples, SampleSet) else np.atleast_2d(samples)
    if ball.epsilon == 0:
        return float(duration_costs(s, U, costs).mean())
    P = pi_table(costs)
    p = float(ball.p)
    eps_p = ball.eps_p

    def phi(rho):
        return eps_p * rho + _omega(rho, s, U, support.uL, support.uU, P, p).value.mean()

    hi = rho_upper_bound(costs, support, ball)
    return _golden_min(phi, 0.0, hi, tol)


def _golden_min(phi, lo, hi, tol):
    g = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = phi(x1), phi(x2)
    best = min(phi(lo), phi(hi), f1, f2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = phi(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = phi(x2)
        best = min(best, f1, f2)
    return float(best)


def worst_case_lp(schedule, U, support: DurationSupport, costs: CostParams, epsilon: float):
    """Primal LP over interval-partition flows ``p`` and shifts ``q`` (down) and ``r`` (up)."""
    s = schedule.s if isinstance(schedule, Schedule) else np.asarray(schedule, dtype=float)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    N, n = U.shape
    P = pi_table(costs)
    I, L = _pairs(n)
    K = I.size
    pos = -np.ones((n, n + 1), dtype=np.int64)
    pos[I, L] = np.arange(K)
    uL, uU = support.uL, support.uU
    M = np.clip(U, uL, uU)
    pi = P[I, L]

    b = LpBuilder("max")
    # objective of P_{ilj} = sum_{k<=i} p_{klj} is pi_il (m - s_i); push it onto each p_{klj}
    Mi = M[:, I]  # (N, K), coordinate of pair (i, l)
    coefP = pi[None, :] * (Mi - s[I][None, :]) / N  # per (i, l) pair
    costP = np.zeros((N, K))
    distP = np.zeros((N, K))
    dist_m = np.abs(Mi - U[:, I]) / N
    for kk in range(K):
        k, l = I[kk], L[kk]
        span = np.arange(k, min(l, n - 1) + 1)
        costP[:, kk] = coefP[:, pos[span, l]].sum(axis=1)
        distP[:, kk] = dist_m[:, pos[span, l]].sum(axis=1)
    p = b.add_var_block((N, K), cost=costP, name="p")
    q = b.add_var_block((N, K), cost=pi[None, :] * (uL[I][None, :] - Mi) / N, name="q")
    r = b.add_var_block((N, K), cost=pi[None, :] * (uU[I][None, :] - Mi) / N, name="r")

    # every appointment is covered exactly once: sum_{k<=i<=l} p_{klj} = 1
    cover_rows, cover_cols = [], []
    for kk in range(K):
        k, l = I[kk], L[kk]
        span = np.arange(k, min(l, n - 1) + 1)
        cover_rows.append(span)
        cover_cols.append(np.full(span.size, kk))
    cr = np.concatenate(cover_rows)
    cc = np.concatenate(cover_cols)
    j = np.arange(N)
    b.add_rows((cr[None, :] + n * j[:, None]).ravel(), p[j][:, cc].ravel(), 1.0, "=", np.ones(N * n))

    # P_{ilj} - q_{ilj} - r_{ilj} >= 0 with P_{ilj} = sum_{k<=i} p_{klj}
    rows, cols = [], []
    for kk in range(K):
        i, l = I[kk], L[kk]
        ks = np.arange(0, i + 1)
        rows.append(np.full(ks.size, kk))
        cols.append(pos[ks, l])
    pr = np.concatenate(rows)
    pc = np.concatenate(cols)
    base_rows = np.concatenate([pr, np.arange(K), np.arange(K)])
    all_rows = (base_rows[None, :] + K * j[:, None]).ravel()
    all_cols = np.concatenate([p[:, pc], q, r], axis=1).ravel()
    all_vals = np.tile(np.concatenate([np.ones(pr.size), -np.ones(K), -np.ones(K)]), N)
    b.add_rows(all_rows, all_cols, all_vals, ">=", np.zeros(N * K))

    # transport budget
    dq = (Mi - uL[I][None, :]) / N
    dr = (uU[I][None, :] - Mi) / N
    b.add_rows(np.zeros(3 * N * K, dtype=np.int64),
               np.concatenate([p.ravel(), q.ravel(), r.ravel()]),
               np.concatenate([distP.ravel(), dq.ravel(), dr.ravel()]), "<=", [epsilon])
    return b.build(), {"p": p, "q": q, "r": r, "pairs": (I, L), "M": M}


def _widest_path(flow: np.ndarray, I, L, n):
    """Max-bottleneck path in the interval DAG (nodes 0..n+1, arc (k,l): k -> min(l+1, n) or n+1)."""
    head = np.where(L == n, n + 1, L + 1)
    best = np.full(n + 2, -np.inf)
    best[0] = np.inf
    arc_in = np.full(n + 2, -1)
    for kk in np.argsort(I, kind="stable"):
        if flow[kk] <= 0 or best[I[kk]] <= 0:
            continue
        cap = min(best[I[kk]], flow[kk])
        if cap > best[head[kk]]:
            best[head[kk]] = cap
            arc_in[head[kk]] = kk
    sink = n if best[n] >= best[n + 1] else n + 1
    if not np.isfinite(best[sink]) or best[sink] <= 0:
        return 0.0, []
    path, node = [], sink
    while node != 0:
        kk = arc_in[node]
        path.append(kk)
        node = I[kk]
    return float(best[sink]), path[::-1]


def peel_partitions(flow: np.ndarray, I, L, n, residual_tol: float = PEEL_RESIDUAL):
    """Decompose one unit of interval-partition flow into weighted partitions."""
    flow = np.where(flow < SNAP, 0.0, flow).astype(float)
    out = []
    total = 0.0
    for _ in range(flow.size + 1):
        w, path = _widest_path(flow, I, L, n)
        if w <= 0:
            break
        flow[path] -= w
        flow[np.abs(flow) < SNAP] = 0.0
        out.append((w, path))
        total += w
    if abs(1.0 - total) > residual_tol:
        raise DecompositionResidual(f"peeling left mass {1.0 - total:.3g} unassigned")
    return [(w / total, path) for w, path in out]


def worst_case_distribution(schedule, samples: SampleSet, support: DurationSupport, costs: CostParams,
                            epsilon: float, backend: str = "highs") -> WorstCaseDistribution:
    """Discrete distribution in the 1-Wasserstein ball attaining the worst-case expected cost."""
    if epsilon < 0:
        raise ValueError("radius must be nonnegative")
    U = samples.values if isinstance(samples, SampleSet) else np.atleast_2d(np.asarray(samples, dtype=float))
    N, n = U.shape
    lp, idx = worst_case_lp(schedule, U, support, costs, epsilon)
    sol = solve_lp(lp, backend=backend)
    if not sol.optimal:
        raise InfeasibleModel(f"worst-case LP returned {sol.status.value}")
    x = np.where(np.abs(sol.x) < SNAP, 0.0, sol.x)
    I, L = idx["pairs"]
    K = I.size
    pos = -np.ones((n, n + 1), dtype=np.int64)
    pos[I, L] = np.arange(K)
    pv, qv, rv = x[idx["p"]], x[idx["q"]], x[idx["r"]]
    M = idx["M"]
    uL, uU = support.uL, support.uU
    atoms, weights, source = [], [], []
    for j in range(N):
        # P_{ilj} and the shifted coordinate for each (i, l)
        Pj = np.zeros(K)
        for kk in range(K):
            i, l = I[kk], L[kk]
            Pj[kk] = pv[j, pos[np.arange(i + 1), l]].sum()
        with np.errstate(invalid="ignore", divide="ignore"):
            shift = np.where(Pj > 0, (qv[j] * (uL[I] - M[j, I]) + rv[j] * (uU[I] - M[j, I])) / Pj, 0.0)
        coord = np.clip(M[j, I] + shift, uL[I], uU[I])
        merged: dict[bytes, int] = {}
        for w, path in peel_partitions(pv[j], I, L, n):
            u = np.empty(n)
            for kk in path:
                k, l = I[kk], L[kk]
                for i in range(k, min(l, n - 1) + 1):
                    u[i] = coord[pos[i, l]]
            key = u.tobytes()
            if key in merged:
                weights[merged[key]] += w / N
            else:
                merged[key] = len(atoms)
                atoms.append(u)
                weights.append(w / N)
                source.append(j)
    weights = np.asarray(weights)
    weights /= weights.sum()
    return WorstCaseDistribution(np.asarray(atoms), weights, np.asarray(source), float(sol.objective))


def transport_distance(atoms_a, weights_a, atoms_b, weights_b, backend: str = "auto") -> float:
    """1-Wasserstein distance with the l1 ground metric between two atom sets."""
    A = np.atleast_2d(atoms_a)
    B = np.atleast_2d(atoms_b)
    cost = np.abs(A[:, None, :] - B[None, :, :]).sum(axis=2)
    return solve_transport(weights_a, weights_b, cost, backend=backend)
