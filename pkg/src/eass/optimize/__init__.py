"""Nominal and robust storage scheduling programs and their solvers."""

from .eass import (
    EassInstance,
    InstanceTooLargeError,
    brute_force_oracle,
    build_eass,
    build_eass_ro,
    deviation_margin,
    inner_budget_allocation,
    slot_bounds,
    solve_eass,
    solve_per_unit,
)
from .lp import HighsSession, LinearProgram, Solution, SolverError, solve_lp

__all__ = [
    "EassInstance",
    "HighsSession",
    "InstanceTooLargeError",
    "LinearProgram",
    "Solution",
    "SolverError",
    "brute_force_oracle",
    "build_eass",
    "build_eass_ro",
    "deviation_margin",
    "inner_budget_allocation",
    "slot_bounds",
    "solve_eass",
    "solve_lp",
    "solve_per_unit",
]
