"""Two-phase bounded-variable revised primal simplex.

Works on ``min c^T x  s.t.  A x (rel) b,  lo <= x <= up``. One slack column is
appended per row; rows whose slack cannot absorb the initial residual get an
artificial column that phase 1 drives to zero.

Pricing is Dantzig with a Harris two-pass ratio test. After ``stall_threshold``
consecutive degenerate pivots the phase switches to Bland's rule (smallest
eligible index for entering and leaving) and stays there, which guarantees
termination. The basis is held as a dense LU factorization plus a product-form
eta file, refactorized every ``refactor_every`` pivots.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..errors import NumericalBreakdown
from .model import EQ, GE, LE, Status

_PIVOT_TOL = 1e-9
_DEGENERATE_STEP = 1e-12


@dataclass
class SimplexResult:
    status: Status
    x: np.ndarray | None
    y: np.ndarray | None
    iterations: int


class _Factor:
    def __init__(self, cols: sp.csc_matrix, refactor_every: int):
        self.cols = cols
        self.refactor_every = refactor_every
        self.lu = None
        self.etas: list[tuple[int, np.ndarray]] = []

    def refactor(self, basis: np.ndarray) -> None:
        B = self.cols[:, basis].toarray()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(B, check_finite=False)
        diag = np.abs(np.diag(lu))
        scale = max(1.0, np.abs(B).max(initial=0.0))
        if diag.size and diag.min() <= 1e-11 * scale:
            raise NumericalBreakdown("basis matrix is singular; input is ill-conditioned")
        self.lu = (lu, piv)
        self.etas = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        x = sla.lu_solve(self.lu, a, check_finite=False)
        for r, col in self.etas:
            xr = x[r] / col[r]
            x -= col * xr
            x[r] = xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        v = c.astype(float, copy=True)
        for r, col in reversed(self.etas):
            vr = v[r]
            v[r] = (vr - (v @ col - vr * col[r])) / col[r]
        return sla.lu_solve(self.lu, v, trans=1, check_finite=False)

    def push(self, r: int, col: np.ndarray) -> bool:
        self.etas.append((r, col))
        return len(self.etas) >= self.refactor_every


def _initial_point(lo: np.ndarray, up: np.ndarray) -> np.ndarray:
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0))
    return x


def revised_simplex(
    c: np.ndarray,
    A: sp.spmatrix,
    relations: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    up: np.ndarray,
    feas_tol: float = 1e-8,
    opt_tol: float = 1e-7,
    max_iter: int | None = None,
    refactor_every: int = 100,
    stall_threshold: int = 50,
) -> SimplexResult:
    A = sp.csc_matrix(A, dtype=float)
    m, n = A.shape
    b = np.asarray(b, dtype=float)
    if m == 0:
        # only bounds: each variable sits at its cheapest bound
        x = _initial_point(lo, up)
        x = np.where(c > 0, lo, np.where(c < 0, up, x))
        if not np.all(np.isfinite(x)):
            return SimplexResult(Status.UNBOUNDED, None, None, 0)
        return SimplexResult(Status.OPTIMAL, x, np.zeros(0), 0)

    slo = np.where(relations == GE, -np.inf, 0.0)
    sup = np.where(relations == LE, np.inf, 0.0)

    x = np.empty(n + m)
    x[:n] = _initial_point(lo, up)
    resid = b - A @ x[:n]
    tol_b = feas_tol * (1.0 + np.abs(b))
    fits = (resid >= slo - tol_b) & (resid <= sup + tol_b)
    x[n:] = np.clip(resid, slo, sup)
    art_rows = np.flatnonzero(~fits)
    art_val = resid[art_rows] - x[n + art_rows]
    k = art_rows.size

    art_cols = sp.csc_matrix((np.sign(art_val), (art_rows, np.arange(k))), shape=(m, k))
    cols = sp.hstack([A, sp.identity(m, format="csc"), art_cols], format="csc")
    colsT = cols.T.tocsr()
    total = n + m + k
    lo_all = np.concatenate([lo, slo, np.zeros(k)])
    up_all = np.concatenate([up, sup, np.full(k, np.inf)])
    x = np.concatenate([x, np.abs(art_val)])

    basis = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(k)
    is_basic = np.zeros(total, dtype=bool)
    is_basic[basis] = True

    factor = _Factor(cols, refactor_every)
    factor.refactor(basis)
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    iters = 0

    def recompute_basics():
        nb = ~is_basic
        rhs = b - cols[:, nb] @ x[nb]
        x[basis] = factor.ftran(rhs)

    def run_phase(cost: np.ndarray, phase: int) -> Status:
        nonlocal iters
        price_tol = 1e-9 * max(1.0, np.abs(cost).max(initial=0.0))
        degenerate = 0
        bland = False
        while True:
            if iters >= max_iter:
                raise NumericalBreakdown(f"simplex iteration limit {max_iter} reached")
            y = factor.btran(cost[basis])
            d = cost - colsT @ y
            can_up = (~is_basic) & (x < up_all) & (d < -price_tol)
            can_dn = (~is_basic) & (x > lo_all) & (d > price_tol)
            eligible = can_up | can_dn
            if not eligible.any():
                return Status.OPTIMAL
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = factor.ftran(cols[:, q].toarray().ravel())
            da = direction * alpha
            xb = x[basis]
            lb = lo_all[basis]
            ub = up_all[basis]
            dec = (da > _PIVOT_TOL) & np.isfinite(lb)
            inc = (da < -_PIVOT_TOL) & np.isfinite(ub)
            ratios = np.full(m, np.inf)
            ratios[dec] = (xb[dec] - lb[dec]) / da[dec]
            ratios[inc] = (ub[inc] - xb[inc]) / (-da[inc])
            ratios = np.maximum(ratios, 0.0)
            flip = up_all[q] - lo_all[q]

            if bland:
                theta = ratios.min(initial=np.inf)
                r = -1
                if np.isfinite(theta):
                    ties = np.flatnonzero(ratios <= theta + _DEGENERATE_STEP)
                    r = int(ties[np.argmin(basis[ties])])
            else:
                relaxed = np.full(m, np.inf)
                relaxed[dec] = (xb[dec] - lb[dec] + feas_tol) / da[dec]
                relaxed[inc] = (ub[inc] - xb[inc] + feas_tol) / (-da[inc])
                theta_max = relaxed.min(initial=np.inf)
                r = -1
                theta = np.inf
                if np.isfinite(theta_max):
                    cand = np.flatnonzero(ratios <= theta_max)
                    r = int(cand[np.argmax(np.abs(da[cand]))])
                    theta = ratios[r]

            if flip <= theta:
                theta = flip
                r = -1
            if not np.isfinite(theta):
                if phase == 1:
                    raise NumericalBreakdown("phase 1 reported an unbounded ray")
                return Status.UNBOUNDED

            iters += 1
            x[q] += direction * theta
            x[basis] = xb - theta * da
            if r < 0:
                x[q] = up_all[q] if direction > 0 else lo_all[q]
                degenerate = 0
                continue
            leaving = basis[r]
            x[leaving] = lo_all[leaving] if da[r] > 0 else up_all[leaving]
            basis[r] = q
            is_basic[leaving] = False
            is_basic[q] = True
            if factor.push(r, alpha):
                factor.refactor(basis)
                recompute_basics()
            if theta <= _DEGENERATE_STEP:
                degenerate += 1
                if degenerate > stall_threshold:
                    bland = True
            else:
                degenerate = 0

    if k:
        cost1 = np.zeros(total)
        cost1[n + m:] = 1.0
        run_phase(cost1, 1)
        factor.refactor(basis)
        recompute_basics()
        infeas = x[n + m:].sum()
        if infeas > 10 * feas_tol * (1.0 + np.abs(b).max()):
            return SimplexResult(Status.INFEASIBLE, None, None, iters)
        up_all[n + m:] = 0.0
        nb_art = np.flatnonzero(~is_basic[n + m:]) + n + m
        x[nb_art] = 0.0

    cost2 = np.concatenate([c, np.zeros(m + k)])
    status = run_phase(cost2, 2)
    if status is not Status.OPTIMAL:
        return SimplexResult(status, None, None, iters)
    factor.refactor(basis)
    recompute_basics()
    y = factor.btran(cost2[basis])
    return SimplexResult(Status.OPTIMAL, x[:n].copy(), y, iters)
