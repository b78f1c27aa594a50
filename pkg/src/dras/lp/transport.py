"""Discrete optimal transport as a transportation LP."""
from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch
from .model import EQ, LpBuilder
from .solve import solve_lp

_MASS_TOL = 1e-9


def solve_transport(a, b, cost, backend: str = "auto") -> float:
    """Minimum cost of moving distribution ``a`` onto ``b`` under ``cost``.

    With ``cost[i, k]`` the ground distance between atom i of ``a`` and atom k
    of ``b`` this is the 1-Wasserstein distance of the two discrete laws.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    cost = np.atleast_2d(np.asarray(cost, dtype=float))
    if cost.shape != (a.size, b.size):
        raise DimensionMismatch(f"cost has shape {cost.shape}, expected {(a.size, b.size)}")
    if (a < 0).any() or (b < 0).any():
        raise ValueError("transport weights must be nonnegative")
    if abs(a.sum() - 1.0) > _MASS_TOL or abs(b.sum() - 1.0) > _MASS_TOL:
        raise ValueError("transport weights must each sum to 1")
    if (cost < 0).any():
        raise ValueError("ground distances must be nonnegative")

    # drop zero-mass atoms, they cannot carry flow
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    a, b, cost = a[ia], b[ib], cost[np.ix_(ia, ib)]
    m, k = cost.shape
    if m == 1 or k == 1:
        # the coupling is forced
        return float((a[:, None] * b[None, :] * cost).sum())

    lb = LpBuilder("min")
    pi = lb.add_var_block((m, k), cost=cost, name="plan")
    rows_a = np.repeat(np.arange(m), k)
    lb.add_rows(rows_a, pi.ravel(), 1.0, EQ, a)
    rows_b = np.tile(np.arange(k), m)
    lb.add_rows(rows_b, pi.ravel(), 1.0, EQ, b)
    sol = solve_lp(lb.build(), backend=backend)
    if not sol.optimal:
        raise RuntimeError(f"transportation LP returned {sol.status}")
    return max(sol.objective, 0.0)
