"""Front door for LP solves: presolve, backend dispatch and certificates."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import NumericalBreakdown
from .model import EQ, GE, LE, LinearProgram, LpSolution, Status
from .simplex import revised_simplex

FEAS_TOL = 1e-8
OPT_TOL = 1e-7

# native simplex handles anything up to this many rows under "auto"
AUTO_SIMPLEX_MAX_ROWS = 300

_BACKENDS = ("auto", "simplex", "highs")


def solve_lp(
    lp: LinearProgram,
    feas_tol: float = FEAS_TOL,
    opt_tol: float = OPT_TOL,
    backend: str = "auto",
) -> LpSolution:
    """Solve ``lp`` and attach primal/dual certificates.

    ``backend="simplex"`` runs the in-house revised simplex, ``"highs"`` the
    HiGHS dual simplex shipped with SciPy, ``"auto"`` picks the former for
    small models. Duals are reported as sensitivities d(objective)/d(rhs) in
    the LP's own sense, so they are sense-independent.
    """
    if backend not in _BACKENDS:
        raise ValueError(f"backend must be one of {_BACKENDS}")
    if backend == "auto":
        backend = "simplex" if lp.n_rows <= AUTO_SIMPLEX_MAX_ROWS else "highs"

    sign = 1.0 if lp.sense == "min" else -1.0
    c = sign * lp.objective
    A = lp.A.tocsr()

    # empty-row / empty-column removal
    row_nnz = np.diff(A.indptr)
    empty_rows = row_nnz == 0
    if empty_rows.any():
        b0 = lp.rhs[empty_rows]
        rel0 = lp.relations[empty_rows]
        tol = feas_tol * (1 + np.abs(b0))
        bad = ((rel0 == LE) & (b0 < -tol)) | ((rel0 == GE) & (b0 > tol)) | ((rel0 == EQ) & (np.abs(b0) > tol))
        if bad.any():
            return LpSolution(Status.INFEASIBLE, backend=backend)
    keep_rows = ~empty_rows
    col_nnz = np.bincount(A.indices, minlength=lp.n_vars)
    empty_cols = col_nnz == 0
    x_fixed = np.where(c > 0, lp.lower, np.where(c < 0, lp.upper,
                       np.clip(0.0, lp.lower, lp.upper)))
    ray = empty_cols & ~np.isfinite(x_fixed)
    keep_cols = ~empty_cols

    Ar = A[keep_rows][:, keep_cols]
    rel = lp.relations[keep_rows]
    b = lp.rhs[keep_rows]
    cr = c[keep_cols]
    lo = lp.lower[keep_cols]
    up = lp.upper[keep_cols]

    if cr.size == 0:
        # every row was empty and already checked
        status, xr, yr, iters = Status.OPTIMAL, np.zeros(0), np.zeros(b.size), 0
    elif backend == "simplex":
        res = revised_simplex(cr, Ar, rel, b, lo, up, feas_tol=feas_tol, opt_tol=opt_tol)
        status, xr, yr, iters = res.status, res.x, res.y, res.iterations
    else:
        status, xr, yr, iters = _solve_highs(cr, Ar, rel, b, lo, up, feas_tol, opt_tol)

    if status is Status.OPTIMAL and ray.any():
        status = Status.UNBOUNDED
    if status is not Status.OPTIMAL:
        return LpSolution(status, iterations=iters, backend=backend)

    x = np.where(empty_cols, x_fixed, 0.0)
    x[keep_cols] = xr
    y_min = np.zeros(lp.n_rows)
    y_min[keep_rows] = yr
    sol = LpSolution(
        Status.OPTIMAL,
        x=x,
        duals=sign * y_min,
        objective=float(lp.objective @ x),
        iterations=iters,
        backend=backend,
    )
    _attach_certificates(lp, sol, c, y_min)
    return sol


def _solve_highs(c, A, rel, b, lo, up, feas_tol, opt_tol):
    A = sp.csr_matrix(A)
    le = rel == LE
    ge = rel == GE
    eq = rel == EQ
    ub_rows = le | ge
    flip = np.where(ge, -1.0, 1.0)
    A_ub = sp.diags(flip[ub_rows]) @ A[ub_rows] if ub_rows.any() else None
    b_ub = (flip * b)[ub_rows] if ub_rows.any() else None
    A_eq = A[eq] if eq.any() else None
    b_eq = b[eq] if eq.any() else None
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=np.column_stack([lo, up]),
        method="highs-ds",
        options={
            "primal_feasibility_tolerance": min(feas_tol, 1e-7),
            "dual_feasibility_tolerance": min(opt_tol, 1e-7) * 1e-2,
        },
    )
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return Status.INFEASIBLE, None, None, iters
    if res.status == 3:
        return Status.UNBOUNDED, None, None, iters
    if res.status != 0:
        raise NumericalBreakdown(f"HiGHS failed: {res.message}")
    y = np.zeros(A.shape[0])
    if ub_rows.any():
        y[ub_rows] = flip[ub_rows] * res.ineqlin.marginals
    if eq.any():
        y[eq] = res.eqlin.marginals
    return Status.OPTIMAL, np.asarray(res.x, dtype=float), y, iters


def _attach_certificates(lp: LinearProgram, sol: LpSolution, c_min: np.ndarray, y_min: np.ndarray) -> None:
    x = sol.x
    act = lp.A @ x
    b = lp.rhs
    rel = lp.relations
    row_viol = np.where(rel == LE, np.maximum(act - b, 0.0),
                        np.where(rel == GE, np.maximum(b - act, 0.0), np.abs(act - b)))
    bound_viol = np.maximum(np.maximum(lp.lower - x, x - lp.upper), 0.0)
    sol.primal_residual = float(max(row_viol.max(initial=0.0), bound_viol.max(initial=0.0)))

    d = c_min - lp.A.T @ y_min
    row_cs = np.abs(y_min) * np.abs(act - b)
    dist = np.where(d > 0, x - lp.lower, lp.upper - x)
    finite = np.isfinite(dist)
    var_cs = np.abs(d)
    var_cs[finite] *= np.abs(dist[finite])
    sol.slackness_residual = float(max(row_cs.max(initial=0.0), var_cs.max(initial=0.0)))

    # dual objective of the min-form problem with bounded variables
    with np.errstate(invalid="ignore"):
        bound_term = np.where(d > 0, d * lp.lower, d * lp.upper)
    bound_term = np.where(np.abs(d) <= 1e-12, 0.0, bound_term)
    dual_min = float(b @ y_min + bound_term.sum())
    sol.dual_objective = dual_min if lp.sense == "min" else -dual_min


def duality_gap(sol: LpSolution) -> float:
    return abs(sol.objective - sol.dual_objective)
