"""Linear programming kernel: revised simplex, HiGHS backend, transport."""
from .dump import read_lp_dump, write_lp_dump
from .model import EQ, GE, LE, LinearProgram, LpBuilder, LpSolution, Status
from .solve import FEAS_TOL, OPT_TOL, duality_gap, solve_lp
from .transport import solve_transport

__all__ = [
    "EQ", "GE", "LE", "FEAS_TOL", "OPT_TOL",
    "LinearProgram", "LpBuilder", "LpSolution", "Status",
    "duality_gap", "read_lp_dump", "solve_lp", "solve_transport", "write_lp_dump",
]
