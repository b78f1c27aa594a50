"""Multi-cut Kelley method shared by the duration and no-show models.

Both models minimize ``eps_p * rho + (1/N) sum_j omega_j(rho, s)`` over
``rho >= 0`` and ``s`` in the scheduling simplex, where each ``omega_j`` is
convex and comes with an exact separation oracle. The master LP keeps one
epigraph variable per sample and accumulates supporting hyperplanes

    theta_j >= a + g_rho * rho + g_s . s

Cuts depend on the sample only, never on the radius, so a :class:`CutPool`
may be shared between solves with different radii or different subsets of
the same samples. A :class:`Master` goes one step further and keeps the LP
itself alive between such solves: switching the radius or the active subset
only changes objective coefficients, so the previous basis stays primal
feasible and the dual simplex restarts from it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import InfeasibleModel, NonConvergence
from .lp import LinearProgram, solve_lp

try:  # the HiGHS bindings that ship with scipy; private, so guarded
    from scipy.optimize._highspy import _core as _hc

    _hc._Highs  # noqa: B018
except Exception:  # pragma: no cover - depends on the scipy build
    _hc = None

CUT_TOL = 1e-6
MAX_ITER = 500

# oracle(rho, s, local_idx) -> (values, g_rho, g_s) for the requested samples
Oracle = Callable[[float, np.ndarray, np.ndarray], tuple]


def persistent_available() -> bool:
    """Whether warm-started masters can be used in this environment."""
    return _hc is not None


@dataclass
class CutPool:
    """Supporting hyperplanes keyed by global sample id."""

    n: int
    ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    g_rho: np.ndarray = field(default_factory=lambda: np.zeros(0))
    g_s: np.ndarray | None = None

    def __post_init__(self):
        if self.g_s is None:
            self.g_s = np.zeros((0, self.n))

    def __len__(self) -> int:
        return self.ids.size

    def add(self, ids, a, g_rho, g_s) -> None:
        self.ids = np.concatenate([self.ids, np.asarray(ids, dtype=np.int64)])
        self.a = np.concatenate([self.a, a])
        self.g_rho = np.concatenate([self.g_rho, g_rho])
        self.g_s = np.vstack([self.g_s, g_s])

    def select(self, global_ids: np.ndarray):
        """Cuts belonging to ``global_ids``, with their positions in that array."""
        global_ids = np.asarray(global_ids, dtype=np.int64)
        size = int(max(global_ids.max(initial=-1), self.ids.max(initial=-1))) + 1
        pos = np.full(size, -1, dtype=np.int64)
        pos[global_ids] = np.arange(global_ids.size)
        local = pos[self.ids]
        keep = local >= 0
        return local[keep], self.a[keep], self.g_rho[keep], self.g_s[keep]


class Master:
    """Master LP over ``[rho, s, theta_0 .. theta_{M-1}]`` for every global sample.

    All cuts of ``pool`` are rows of the model. A solve restricted to a subset
    of samples puts weight ``1/|subset|`` on their epigraph variables and zero
    on the rest; since every ``theta`` is bounded below, rows of excluded
    samples can always be satisfied and never bind.
    """

    def __init__(self, pool: CutPool, n_samples: int, T: float, rho_max: float,
                 theta_lb: float = 0.0, persistent: bool | None = None):
        self.pool = pool
        self.n = pool.n
        self.M = int(n_samples)
        self.T = float(T)
        self.rho_max = float(rho_max)
        self.theta_lb = float(theta_lb)
        if persistent is None:
            persistent = persistent_available()
        self.persistent = bool(persistent) and persistent_available()
        self.loaded = 0
        self.cost = np.zeros(1 + self.n + self.M)
        self._h = None
        if self.persistent:
            self._init_highs()

    @property
    def nv(self) -> int:
        return 1 + self.n + self.M

    def _init_highs(self) -> None:
        h = _hc._Highs()
        h.setOptionValue("output_flag", False)
        inf = _hc.kHighsInf
        up = np.full(self.nv, inf)
        up[0] = self.rho_max if np.isfinite(self.rho_max) else inf
        lo = np.zeros(self.nv)
        lo[1 + self.n:] = self.theta_lb
        h.addVars(self.nv, lo, up)
        h.addRow(-inf, self.T, self.n, np.arange(1, self.n + 1, dtype=np.int32), np.ones(self.n))
        self._h = h

    def sync(self) -> None:
        """Append pool cuts that are not rows of the model yet."""
        m = len(self.pool) - self.loaded
        if m <= 0 or not self.persistent:
            self.loaded = len(self.pool)
            return
        sl = slice(self.loaded, len(self.pool))
        ids = self.pool.ids[sl]
        n = self.n
        idx = np.concatenate(
            [np.zeros((m, 1), dtype=np.int64), np.tile(np.arange(1, n + 1), (m, 1)), (1 + n + ids)[:, None]], axis=1
        ).astype(np.int32)
        val = np.concatenate([-self.pool.g_rho[sl][:, None], -self.pool.g_s[sl], np.ones((m, 1))], axis=1)
        starts = (np.arange(m) * (n + 2)).astype(np.int32)
        self._h.addRows(m, self.pool.a[sl], np.full(m, _hc.kHighsInf), idx.size, starts, idx.ravel(), val.ravel())
        self.loaded = len(self.pool)

    def set_rho_max(self, rho_max: float) -> None:
        rho_max = float(rho_max)
        if rho_max != self.rho_max and self.persistent:
            up = rho_max if np.isfinite(rho_max) else _hc.kHighsInf
            self._h.changeColBounds(0, 0.0, up)
        self.rho_max = rho_max

    def set_objective(self, eps_p: float, global_ids: np.ndarray) -> None:
        c = np.zeros(self.nv)
        c[0] = eps_p
        c[1 + self.n + np.asarray(global_ids)] = 1.0 / len(global_ids)
        if self.persistent and not np.array_equal(c, self.cost):
            self._h.changeColsCost(c.size, np.arange(c.size, dtype=np.int32), c)
        self.cost = c

    def solve(self):
        """Return ``(rho, s, theta_all, value)`` for the current objective."""
        self.sync()
        if self.persistent:
            self._h.run()
            if self._h.getModelStatus() == _hc.HighsModelStatus.kOptimal:
                x = np.asarray(self._h.getSolution().col_value)
                return self._unpack(x, float(self._h.getInfo().objective_function_value))
            # numerical trouble in the warm start; fall through to a cold solve
        return self._cold()

    def _unpack(self, x, value):
        n = self.n
        return float(max(x[0], 0.0)), np.clip(x[1:1 + n], 0.0, None), x[1 + n:], value

    def _cold(self):
        n, nv, p = self.n, self.nv, self.pool
        m = len(p)
        rows = np.concatenate([np.arange(m), np.repeat(np.arange(m), n), np.arange(m)])
        cols = np.concatenate([np.zeros(m, dtype=np.int64), np.tile(np.arange(1, n + 1), m), 1 + n + p.ids])
        vals = np.concatenate([-p.g_rho, -p.g_s.ravel(), np.ones(m)])
        A_cut = sp.csr_matrix((vals, (rows, cols)), shape=(m, nv))
        A_T = sp.csr_matrix((np.ones(n), (np.zeros(n, dtype=np.int64), np.arange(1, n + 1))), shape=(1, nv))
        A = sp.vstack([A_T, A_cut], format="csr")
        rel = np.concatenate([[-1], np.ones(m, dtype=np.int64)])
        rhs = np.concatenate([[self.T], p.a])
        lo = np.concatenate([[0.0], np.zeros(n), np.full(self.M, self.theta_lb)])
        up = np.concatenate([[self.rho_max], np.full(n, np.inf), np.full(self.M, np.inf)])
        sol = solve_lp(LinearProgram(self.cost, A, rel, rhs, lo, up, "min"), backend="highs")
        if not sol.optimal:
            raise InfeasibleModel(f"cutting-plane master returned {sol.status.value}")
        return self._unpack(sol.x, sol.objective)


@dataclass
class KelleyResult:
    rho: float
    s: np.ndarray
    theta: np.ndarray  # exact omega_j at the returned point
    objective: float  # eps_p * rho + mean(theta)
    lower_bound: float  # last master value
    iterations: int
    n_cuts: int


def kelley(
    oracle: Oracle,
    N: int,
    n: int,
    T: float,
    eps_p: float,
    rho_max: float,
    *,
    pool: CutPool | None = None,
    global_ids: np.ndarray | None = None,
    master: Master | None = None,
    theta_lb: float = 0.0,
    cut_tol: float = CUT_TOL,
    max_iter: int = MAX_ITER,
    start: tuple[float, np.ndarray] | None = None,
) -> KelleyResult:
    """Minimize ``eps_p * rho + mean_j omega_j(rho, s)`` by adding cuts until none is violated.

    ``oracle`` is indexed by position in ``global_ids``; cuts are stored under
    the global ids. Passing the same ``master`` (and its pool) to repeated
    calls reuses both the cuts and the simplex basis. Termination is certified
    against the exact oracle, so reuse only affects speed.
    """
    if global_ids is None:
        global_ids = np.arange(N)
    global_ids = np.asarray(global_ids, dtype=np.int64)
    if master is not None:
        if pool is not None and pool is not master.pool:
            raise ValueError("pool and master.pool differ")
        pool = master.pool
    elif pool is None:
        pool = CutPool(n)
    if master is None:
        size = int(max(global_ids.max(initial=-1), pool.ids.max(initial=-1))) + 1
        master = Master(pool, size, T, rho_max, theta_lb)
    all_local = np.arange(N)
    if start is None:
        start = (0.5 * rho_max if np.isfinite(rho_max) else 1.0, np.full(n, T / n))
    rho0, s0 = float(start[0]), np.asarray(start[1], dtype=float)

    def push(which, vals, gr, gs, rho, s):
        pool.add(global_ids[which], vals - gr * rho - gs @ s, gr, gs)

    # seed every sample with at least one cut so the master is bounded
    have = np.zeros(master.M, dtype=bool)
    have[pool.ids] = True
    missing = np.flatnonzero(~have[global_ids])
    if missing.size:
        vals, gr, gs = oracle(rho0, s0, missing)
        push(missing, vals, gr, gs, rho0, s0)

    master.set_rho_max(rho_max)
    master.set_objective(eps_p, global_ids)
    for it in range(1, max_iter + 1):
        rho, s, theta_all, lower = master.solve()
        theta = theta_all[global_ids]
        vals, g_r, g_S = oracle(rho, s, all_local)
        viol = vals - theta
        bad = viol > cut_tol
        if not bad.any():
            return KelleyResult(rho, s, vals, float(eps_p * rho + vals.mean()), lower, it, len(pool))
        which = np.flatnonzero(bad)
        push(which, vals[bad], g_r[bad], g_S[bad], rho, s)
    raise NonConvergence(
        f"no convergence after {max_iter} cutting-plane iterations (max violation {viol.max():.3g} > {cut_tol:g})"
    )
