"""Plain-text LP dump for debugging.

Format (one record per line, fields separated by single spaces)::

    LP <sense> <n_vars> <n_rows>
    OBJ <j> <coef>                 # nonzero objective entries
    ROW <i> <rel> <rhs>            # rel is one of <= = >=
    COEF <i> <j> <value>           # nonzero matrix entries, row-major
    BOUND <j> <lower> <upper>      # only bounds other than [0, inf]
    END

Numbers are written with ``repr`` so a dump round-trips exactly; infinities
appear as ``inf``/``-inf``.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import REL_SYMBOLS, LinearProgram, relation_code


def write_lp_dump(lp: LinearProgram, path) -> None:
    A = lp.A.tocsr()
    lines = [f"LP {lp.sense} {lp.n_vars} {lp.n_rows}"]
    for j in np.flatnonzero(lp.objective):
        lines.append(f"OBJ {j} {float(lp.objective[j])!r}")
    for i in range(lp.n_rows):
        lines.append(f"ROW {i} {REL_SYMBOLS[int(lp.relations[i])]} {float(lp.rhs[i])!r}")
    for i in range(lp.n_rows):
        for p in range(A.indptr[i], A.indptr[i + 1]):
            lines.append(f"COEF {i} {A.indices[p]} {float(A.data[p])!r}")
    for j in range(lp.n_vars):
        lo, up = float(lp.lower[j]), float(lp.upper[j])
        if lo != 0.0 or up != np.inf:
            lines.append(f"BOUND {j} {lo!r} {up!r}")
    lines.append("END")
    Path(path).write_text("\n".join(lines) + "\n")


def read_lp_dump(path) -> LinearProgram:
    tokens = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = tokens[0]
    if head[0] != "LP":
        raise ValueError("not an LP dump")
    sense, n, m = head[1], int(head[2]), int(head[3])
    c = np.zeros(n)
    rel = np.zeros(m, dtype=np.int8)
    rhs = np.zeros(m)
    lo = np.zeros(n)
    up = np.full(n, np.inf)
    rows, cols, vals = [], [], []
    for t in tokens[1:]:
        kind = t[0]
        if kind == "OBJ":
            c[int(t[1])] = float(t[2])
        elif kind == "ROW":
            rel[int(t[1])] = relation_code(t[2])
            rhs[int(t[1])] = float(t[3])
        elif kind == "COEF":
            rows.append(int(t[1]))
            cols.append(int(t[2]))
            vals.append(float(t[3]))
        elif kind == "BOUND":
            lo[int(t[1])] = float(t[2])
            up[int(t[1])] = float(t[3])
        elif kind == "END":
            break
        else:
            raise ValueError(f"unknown record {kind!r}")
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    return LinearProgram(c, A, rel, rhs, lo, up, sense)
