"""LP container types.

Rows are kept in sparse (CSR) form. Relations are encoded as small ints so
that large blocks of constraints can be appended without Python loops.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = -1, 0, 1
_REL_CODES = {"<=": LE, "le": LE, "=": EQ, "==": EQ, "eq": EQ, ">=": GE, "ge": GE}
REL_SYMBOLS = {LE: "<=", EQ: "=", GE: ">="}


def relation_code(rel) -> int:
    if isinstance(rel, (int, np.integer)) and int(rel) in REL_SYMBOLS:
        return int(rel)
    try:
        return _REL_CODES[str(rel).lower()]
    except KeyError:
        raise ValueError(f"unknown relation {rel!r}") from None


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LinearProgram:
    """``sense`` c^T x  s.t.  A x (rel) b,  lower <= x <= upper."""

    objective: np.ndarray
    A: sp.csr_matrix
    relations: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: str = "min"
    names: list[str] | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.size
        self.A = sp.csr_matrix(self.A, dtype=float)
        if self.A.shape[1] != n:
            if self.A.shape[0] == 0:
                self.A = sp.csr_matrix((0, n))
            else:
                raise ValueError(
                    f"row coefficients reference {self.A.shape[1]} columns but {n} variables are declared"
                )
        rel = np.atleast_1d(np.asarray(self.relations))
        if rel.dtype.kind not in "iu":
            rel = np.array([relation_code(r) for r in rel])
        elif rel.size and not np.isin(rel, (LE, EQ, GE)).all():
            raise ValueError("relation codes must be LE, EQ or GE")
        self.relations = rel.astype(np.int8).ravel()
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        m = self.A.shape[0]
        if self.relations.size != m or self.rhs.size != m:
            raise ValueError("relations/rhs length must match the number of rows")
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(self.lower > self.upper):
            bad = int(np.flatnonzero(self.lower > self.upper)[0])
            raise ValueError(f"variable {bad}: lower bound {self.lower[bad]} exceeds upper {self.upper[bad]}")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("NaN variable bound")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective @ x)


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    backend: str = ""
    # certificate residuals, filled for optimal solutions
    primal_residual: float = float("nan")
    slackness_residual: float = float("nan")
    dual_objective: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class LpBuilder:
    """Accumulates variables and constraint blocks, then emits a LinearProgram.

    Variables are allocated in named blocks; ``add_var_block`` returns the
    index array of the new variables so callers can reference them by shape.
    """

    sense: str = "min"
    _obj: list = field(default_factory=list)
    _lo: list = field(default_factory=list)
    _up: list = field(default_factory=list)
    _names: list = field(default_factory=list)
    _rows: list = field(default_factory=list)
    _cols: list = field(default_factory=list)
    _vals: list = field(default_factory=list)
    _rel: list = field(default_factory=list)
    _rhs: list = field(default_factory=list)
    n_vars: int = 0
    n_rows: int = 0

    def add_var_block(self, shape, *, lower=0.0, upper=np.inf, cost=0.0, name: str = "x") -> np.ndarray:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        size = int(np.prod(shape)) if shape else 1
        idx = np.arange(self.n_vars, self.n_vars + size).reshape(shape)
        self._obj.append(np.broadcast_to(np.asarray(cost, dtype=float), shape).ravel())
        self._lo.append(np.broadcast_to(np.asarray(lower, dtype=float), shape).ravel())
        self._up.append(np.broadcast_to(np.asarray(upper, dtype=float), shape).ravel())
        self._names.append((name, self.n_vars, size))
        self.n_vars += size
        return idx

    def add_rows(self, row_local, cols, vals, relation, rhs) -> np.ndarray:
        """Append a block of rows given COO triplets with local row numbers 0..k-1."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        k = rhs.size
        row_local = np.asarray(row_local, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.broadcast_to(np.asarray(vals, dtype=float), row_local.shape).ravel()
        if row_local.size and (row_local.min() < 0 or row_local.max() >= k):
            raise ValueError("local row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise ValueError("row coefficient references an undeclared variable")
        self._rows.append(row_local + self.n_rows)
        self._cols.append(cols)
        self._vals.append(vals)
        self._rel.append(np.full(k, relation_code(relation), dtype=np.int8))
        self._rhs.append(rhs)
        first = self.n_rows
        self.n_rows += k
        return np.arange(first, first + k)

    def add_row(self, coefs: dict, relation, rhs: float) -> int:
        cols = np.fromiter(coefs.keys(), dtype=np.int64, count=len(coefs))
        vals = np.fromiter(coefs.values(), dtype=float, count=len(coefs))
        return int(self.add_rows(np.zeros(len(coefs), dtype=np.int64), cols, vals, relation, [rhs])[0])

    def build(self) -> LinearProgram:
        n = self.n_vars
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
            A = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, n))
            rel = np.concatenate(self._rel)
            rhs = np.concatenate(self._rhs)
        else:
            A = sp.csr_matrix((0, n))
            rel = np.zeros(0, dtype=np.int8)
            rhs = np.zeros(0)
        cat = (lambda parts: np.concatenate(parts) if parts else np.zeros(0))
        names = []
        for base, _, size in self._names:
            names.extend([base] * size)
        return LinearProgram(cat(self._obj), A, rel, rhs, cat(self._lo), cat(self._up), self.sense, names)
