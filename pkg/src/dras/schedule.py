"""Appointment-system semantics.

A schedule assigns time allowances ``s_i`` to ``n`` appointments served in a
fixed order. Given realized durations the waiting, idleness and overtime of
the day follow a Lindley-type recursion; the resulting cost is also the
value of a small LP whose dual vertices are indexed by partitions of
``{1, ..., n+1}`` into intervals. Both views are implemented here, together
with the data containers used throughout the package.

Indexing is 0-based in code. ``pi_table(costs)[i, l]`` for ``l = n`` stands
for the overtime column (interval ending at ``n+1`` in 1-based terms).
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptySampleSet,
    IndexOutOfRange,
    InvalidCosts,
    InvalidSupport,
    LengthMismatch,
    ScenarioInfeasible,
    TooLarge,
)

SUPPORT_PAD_ABS = 1e-9
SUPPORT_PAD_REL = 1e-12
SCHEDULE_TOL = 1e-7
PARTITION_ORACLE_MAX_N = 12


def _vector(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CostParams:
    """Unit waiting costs ``c``, idleness costs ``d`` and overtime cost ``C``."""

    c: np.ndarray
    d: np.ndarray
    C: float

    def __post_init__(self):
        c = _vector(self.c, "c")
        d = _vector(self.d, "d")
        if c.size != d.size:
            raise LengthMismatch(f"c has length {c.size} but d has length {d.size}")
        if c.size == 0:
            raise InvalidCosts("at least one appointment is required")
        C = float(self.C)
        if np.any(c < 0) or np.any(d < 0) or C < 0 or not np.isfinite(C):
            raise InvalidCosts("unit costs must be nonnegative and finite")
        # idling on purpose must never be cheaper than letting the next patient wait
        gap = np.diff(d) - c[1:]
        if np.any(gap > 1e-12):
            i = int(np.argmax(gap))
            raise InvalidCosts(
                f"d[{i + 1}] - d[{i}] = {d[i + 1] - d[i]:g} exceeds c[{i + 1}] = {c[i + 1]:g}"
            )
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "C", C)

    @classmethod
    def uniform(cls, n: int, c: float, d: float, C: float) -> "CostParams":
        return cls(np.full(n, float(c)), np.full(n, float(d)), C)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def homogeneous(self) -> bool:
        return bool(np.all(self.c == self.c[0]) and np.all(self.d == self.d[0]))


@dataclass(frozen=True)
class Schedule:
    """Time allowances ``s`` with the day's horizon ``T``."""

    s: np.ndarray
    T: float

    def __post_init__(self):
        s = np.array(self.s, dtype=float, ndmin=1)
        T = float(self.T)
        tol = SCHEDULE_TOL * (1.0 + abs(T))
        if s.ndim != 1 or not np.all(np.isfinite(s)):
            raise ValueError("schedule must be a finite vector")
        if np.any(s < -tol):
            raise ValueError("time allowances must be nonnegative")
        if s.sum() > T + tol * max(1, s.size):
            raise ValueError(f"allowances sum to {s.sum():g}, above the horizon {T:g}")
        s = np.maximum(s, 0.0)
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "T", T)

    @property
    def n(self) -> int:
        return self.s.size

    @classmethod
    def equal_spacing(cls, n: int, T: float) -> "Schedule":
        return cls(np.full(n, T / n), T)


@dataclass(frozen=True)
class DurationSupport:
    """Rectangular support ``[uL, uU]`` for service durations."""

    uL: np.ndarray
    uU: np.ndarray

    def __post_init__(self):
        uL = _vector(self.uL, "uL")
        uU = _vector(self.uU, "uU")
        if uL.size != uU.size:
            raise LengthMismatch("uL and uU differ in length")
        if np.any(uL < 0):
            raise InvalidSupport("lower duration bounds must be nonnegative")
        if np.any(uL >= uU):
            i = int(np.flatnonzero(uL >= uU)[0])
            raise InvalidSupport(f"need uL < uU, got [{uL[i]:g}, {uU[i]:g}] at index {i}")
        object.__setattr__(self, "uL", uL)
        object.__setattr__(self, "uU", uU)

    @property
    def n(self) -> int:
        return self.uL.size

    def contains(self, U: np.ndarray, tol: float = 0.0) -> np.ndarray:
        U = np.atleast_2d(U)
        return np.all((U >= self.uL - tol) & (U <= self.uU + tol), axis=1)


@dataclass(frozen=True)
class NoShowSupport(DurationSupport):
    """Duration box plus the no-show budget ``K``."""

    K: int = 0

    def __post_init__(self):
        super().__post_init__()
        K = int(self.K)
        if K != self.K or not 0 <= K <= self.n:
            raise InvalidSupport(f"no-show budget must be an integer in [0, {self.n}], got {self.K}")
        object.__setattr__(self, "K", K)

    def contains_noshow(self, mu: np.ndarray, lam: np.ndarray, tol: float = 0.0) -> np.ndarray:
        mu = np.atleast_2d(mu)
        lam = np.atleast_2d(lam)
        binary = np.all((lam == 0) | (lam == 1), axis=1)
        budget = (1 - lam).sum(axis=1) <= self.K
        box = np.all((mu >= self.uL * lam - tol) & (mu <= self.uU * lam + tol), axis=1)
        return binary & budget & box


@dataclass(frozen=True)
class Instance:
    """Deterministic problem data: size, horizon, costs, support and budget."""

    T: float
    costs: CostParams
    uL: np.ndarray | None = None
    uU: np.ndarray | None = None
    K: int | None = None

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("horizon must be nonnegative")
        for name in ("uL", "uU"):
            v = getattr(self, name)
            if v is not None:
                v = _vector(v, name)
                if v.size != self.n:
                    raise LengthMismatch(f"{name} has length {v.size}, expected {self.n}")
                object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.costs.n

    @property
    def has_support(self) -> bool:
        return self.uL is not None and self.uU is not None

    def duration_support(self) -> DurationSupport:
        return DurationSupport(self.uL, self.uU)

    def noshow_support(self) -> NoShowSupport:
        return NoShowSupport(self.uL, self.uU, self.K)

    def with_support(self, support: DurationSupport, K: int | None = None) -> "Instance":
        if K is None:
            K = getattr(support, "K", self.K)
        return Instance(self.T, self.costs, support.uL, support.uU, K)

    def to_dict(self) -> dict:
        lst = lambda v: None if v is None else [float(x) for x in v]
        return {
            "n": self.n,
            "T": self.T,
            "c": lst(self.costs.c),
            "d": lst(self.costs.d),
            "C": self.costs.C,
            "uL": lst(self.uL),
            "uU": lst(self.uU),
            "K": self.K,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        n = int(data["n"])
        costs = CostParams(data["c"], data["d"], data["C"])
        if costs.n != n:
            raise LengthMismatch(f"cost vectors have length {costs.n} but n = {n}")
        K = data.get("K")
        return cls(float(data["T"]), costs, data.get("uL"), data.get("uU"), None if K is None else int(K))

    @classmethod
    def load(cls, path) -> "Instance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass(frozen=True)
class SampleSet:
    """N observed scenarios.

    ``values`` holds durations (N x n). For no-show data ``shows`` holds the
    0/1 show-up indicators and ``values`` the realized durations ``mu``,
    which are zero for no-shows.
    """

    values: np.ndarray
    shows: np.ndarray | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, ndmin=2)
        if vals.ndim != 2:
            raise ValueError("samples must form an N x n array")
        if vals.shape[0] == 0:
            raise EmptySampleSet("no samples given")
        if not np.all(np.isfinite(vals)):
            raise ValueError("samples must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.shows is not None:
            lam = np.array(self.shows, dtype=float, ndmin=2)
            if lam.shape != vals.shape:
                raise LengthMismatch("show indicators must match the duration array")
            if not np.all((lam == 0) | (lam == 1)):
                raise ScenarioInfeasible("show indicators must be 0 or 1")
            if np.any(vals[lam == 0] != 0):
                raise ScenarioInfeasible("a no-show must have zero realized duration")
            lam.setflags(write=False)
            object.__setattr__(self, "shows", lam)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def is_noshow(self) -> bool:
        return self.shows is not None

    def subset(self, idx) -> "SampleSet":
        return SampleSet(self.values[idx], None if self.shows is None else self.shows[idx])

    def as_matrix(self) -> np.ndarray:
        """Scenario vectors as rows; no-show data is laid out as ``[mu, lambda]``."""
        if self.shows is None:
            return np.array(self.values)
        return np.hstack([self.values, self.shows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.as_matrix():
                writer.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path, n: int | None = None, noshow: bool | None = None) -> "SampleSet":
        """Read one scenario per row. No-show files carry ``2n`` columns."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or all(not x.strip() for x in row):
                    continue
                try:
                    rows.append([float(x) for x in row])
                except ValueError:
                    if rows:
                        raise
                    continue  # header line
        if not rows:
            raise EmptySampleSet(f"{path} holds no samples")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise LengthMismatch(f"{path}: rows have differing lengths {sorted(widths)}")
        M = np.array(rows)
        width = M.shape[1]
        if noshow is None:
            noshow = n is not None and width == 2 * n and n != width
        if noshow:
            if width % 2:
                raise LengthMismatch("no-show sample rows need an even number of columns")
            h = width // 2
            if n is not None and h != n:
                raise LengthMismatch(f"expected {2 * n} columns, found {width}")
            return cls(M[:, :h], M[:, h:])
        if n is not None and width != n:
            raise LengthMismatch(f"expected {n} columns, found {width}")
        return cls(M)


# ---------------------------------------------------------------- cost evaluation


def _as_s(schedule) -> np.ndarray:
    return schedule.s if isinstance(schedule, Schedule) else np.asarray(schedule, dtype=float)


def recursion(s: np.ndarray, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Waiting times ``w`` (N x n+1, last column is overtime) and idleness ``v`` (N x n)."""
    s = np.asarray(s, dtype=float)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != s.size:
        raise LengthMismatch(f"schedule has {s.size} entries but durations have {U.shape[1]}")
    N, n = U.shape
    w = np.zeros((N, n + 1))
    v = np.zeros((N, n))
    for i in range(n):
        t = U[:, i] + w[:, i] - s[i]
        w[:, i + 1] = np.maximum(t, 0.0)
        v[:, i] = np.maximum(-t, 0.0)
    return w, v


def duration_costs(schedule, U: np.ndarray, costs: CostParams) -> np.ndarray:
    """Vector of f(s, u) over the rows of ``U``."""
    s = _as_s(schedule)
    if costs.n != s.size:
        raise LengthMismatch("cost vectors and schedule differ in length")
    w, v = recursion(s, U)
    return w[:, :-1] @ costs.c + v @ costs.d + costs.C * w[:, -1]


def total_cost_duration(schedule, u, costs: CostParams, return_parts: bool = False):
    """Total waiting, idleness and overtime cost for one duration scenario."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise LengthMismatch("expected a single duration vector")
    s = _as_s(schedule)
    if u.size != s.size or costs.n != s.size:
        raise LengthMismatch("schedule, durations and costs must share their length")
    w, v = recursion(s, u[None, :])
    val = float(w[0, :-1] @ costs.c + v[0] @ costs.d + costs.C * w[0, -1])
    if return_parts:
        return val, w[0], v[0]
    return val


def recursion_exact_for(costs: CostParams, lam: np.ndarray) -> np.ndarray:
    """Rows of ``lam`` for which the recursion solves the no-show cost LP.

    Greedy waiting is optimal as long as ``d_i - d_{i-1} <= c_i * lambda_i``
    for every i >= 1; with a waived waiting cost this can fail for
    non-homogeneous idleness costs.
    """
    lam = np.atleast_2d(lam)
    return np.all(np.diff(costs.d)[None, :] <= costs.c[1:] * lam[:, 1:] + 1e-12, axis=1)


def noshow_costs(schedule, mu: np.ndarray, lam: np.ndarray, costs: CostParams) -> np.ndarray:
    """Vector of g(s, (mu, lambda)) over the rows of ``mu``/``lam``."""
    s = _as_s(schedule)
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    if mu.shape != lam.shape or mu.shape[1] != s.size or costs.n != s.size:
        raise LengthMismatch("schedule, durations, show indicators and costs must share their length")
    w, v = recursion(s, mu)
    out = (w[:, :-1] * lam) @ costs.c + v @ costs.d + costs.C * w[:, -1]
    bad = np.flatnonzero(~recursion_exact_for(costs, lam))
    for k in bad:
        out[k] = noshow_cost_lp(s, mu[k], lam[k], costs)
    return out


def _check_noshow_scenario(mu, lam, support: NoShowSupport | None):
    if not np.all((lam == 0) | (lam == 1)):
        raise ScenarioInfeasible("show indicators must be 0 or 1")
    if np.any(mu < 0) or np.any(mu[lam == 0] != 0):
        raise ScenarioInfeasible("durations must be nonnegative and zero for no-shows")
    if support is not None and not support.contains_noshow(mu, lam, tol=1e-12)[0]:
        raise ScenarioInfeasible("scenario lies outside the support set")


def total_cost_noshow(schedule, mu, lam, costs: CostParams, support: NoShowSupport | None = None,
                      return_parts: bool = False):
    """Total cost for one (mu, lambda) scenario; waiting of a no-show is not charged."""
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    s = _as_s(schedule)
    if mu.ndim != 1 or mu.shape != lam.shape or mu.size != s.size or costs.n != s.size:
        raise LengthMismatch("schedule, durations, show indicators and costs must share their length")
    _check_noshow_scenario(mu, lam, support)
    val = float(noshow_costs(s, mu, lam, costs)[0])
    if return_parts:
        w, v = recursion(s, mu[None, :])
        return val, w[0], v[0]
    return val


def noshow_cost_lp(s, mu, lam, costs: CostParams) -> float:
    """g(s, xi) by solving its defining LP directly (reference implementation)."""
    from .lp import LpBuilder, solve_lp

    s = np.asarray(s, dtype=float)
    n = s.size
    b = LpBuilder("min")
    w = b.add_var_block(n + 1, cost=np.concatenate([costs.c * lam, [costs.C]]), name="w")
    v = b.add_var_block(n, cost=costs.d, name="v")
    b.add_row({int(w[0]): 1.0}, "=", 0.0)
    for i in range(1, n + 1):
        b.add_row({int(w[i]): 1.0, int(v[i - 1]): -1.0, int(w[i - 1]): -1.0}, "=", float(mu[i - 1] - s[i - 1]))
    sol = solve_lp(b.build())
    return float(sol.objective)


def duration_cost_lp(s, u, costs: CostParams) -> float:
    """f(s, u) by solving its defining LP directly (reference implementation)."""
    return noshow_cost_lp(s, u, np.ones(len(u)), costs)


# ---------------------------------------------------------------- dual structure


def pi_table(costs: CostParams) -> np.ndarray:
    """Dual coefficients as an n x (n+1) array, NaN below the diagonal.

    Entry ``[i, l]`` with ``l < n`` equals ``-d_l + sum_{q=i+1}^{l} c_q``;
    column ``n`` equals ``C + sum_{q=i+1}^{n-1} c_q``.
    """
    n = costs.n
    csum = np.concatenate([[0.0], np.cumsum(costs.c)])  # csum[k] = c_0 + ... + c_{k-1}
    P = np.full((n, n + 1), np.nan)
    for i in range(n):
        for l in range(i, n):
            P[i, l] = -costs.d[l] + csum[l + 1] - csum[i + 1]
        P[i, n] = costs.C + csum[n] - csum[i + 1]
    return P


def pi_coefficient(i: int, l: int, costs: CostParams) -> float:
    """Dual coefficient for appointment ``i`` in an interval ending at ``l`` (1-based)."""
    n = costs.n
    if not (1 <= i <= n and i <= l <= n + 1):
        raise IndexOutOfRange(f"need 1 <= i <= {n} and i <= l <= {n + 1}, got i={i}, l={l}")
    c, d = costs.c, costs.d
    if l <= n:
        return float(-d[l - 1] + c[i:l].sum())
    return float(costs.C + c[i:n].sum())


def interval_partitions(n: int):
    """All partitions of ``{0, ..., n}`` into consecutive intervals, as lists of (k, l)."""
    for cuts in itertools.product((False, True), repeat=n):
        parts, start = [], 0
        for pos, cut in enumerate(cuts):
            if cut:
                parts.append((start, pos))
                start = pos + 1
        parts.append((start, n))
        yield parts


def cost_via_partition_oracle(schedule, u, costs: CostParams) -> float:
    """max over interval partitions of sum_i pi_{i, l(i)} (u_i - s_i); test oracle."""
    s = _as_s(schedule)
    u = np.asarray(u, dtype=float)
    n = s.size
    if u.size != n or costs.n != n:
        raise LengthMismatch("schedule, durations and costs must share their length")
    if n > PARTITION_ORACLE_MAX_N:
        raise TooLarge(f"partition enumeration is limited to n <= {PARTITION_ORACLE_MAX_N}")
    P = pi_table(costs)
    diff = u - s
    best = -np.inf
    for parts in interval_partitions(n):
        total = 0.0
        for k, l in parts:
            for i in range(k, min(l, n - 1) + 1):
                total += P[i, l] * diff[i]
        best = max(best, total)
    return float(best)


# ---------------------------------------------------------------- data-driven support


def pad_degenerate(uL: np.ndarray, uU: np.ndarray) -> np.ndarray:
    pad = np.maximum(SUPPORT_PAD_ABS, SUPPORT_PAD_REL * np.abs(uU))
    return np.where(uU <= uL, uL + pad, uU)


def infer_support(samples: SampleSet) -> DurationSupport:
    """Componentwise min/max box around the observed durations.

    For no-show data only the shows enter the box. A column in which nobody
    showed up carries no duration information and gets ``[0, pad]``.
    """
    if samples.N == 0:
        raise EmptySampleSet("no samples given")
    V = samples.values
    if samples.shows is None:
        uL = V.min(axis=0)
        uU = V.max(axis=0)
    else:
        shown = samples.shows == 1
        uL = np.where(shown, V, np.inf).min(axis=0)
        uU = np.where(shown, V, -np.inf).max(axis=0)
        empty = ~shown.any(axis=0)
        uL = np.where(empty, 0.0, uL)
        uU = np.where(empty, 0.0, uU)
    uL = np.maximum(uL, 0.0)
    uU = pad_degenerate(uL, uU)
    return DurationSupport(uL, uU)


def infer_budget(samples: SampleSet) -> int:
    """Largest number of no-shows observed in a single sample."""
    if samples.N == 0:
        raise EmptySampleSet("no samples given")
    if samples.shows is None:
        return 0
    return int((1 - samples.shows).sum(axis=1).max())


def infer_noshow_support(samples: SampleSet) -> NoShowSupport:
    box = infer_support(samples)
    return NoShowSupport(box.uL, box.uU, infer_budget(samples))
