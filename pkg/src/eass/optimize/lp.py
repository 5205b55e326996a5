"""Linear program container and solver entry point."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import sparse

FEAS_TOL = 1e-9


class SolverError(RuntimeError):
    """The solver failed numerically; distinct from a proven infeasibility."""


@dataclass(frozen=True)
class LinearProgram:
    """min c @ v + constant  s.t.  row_lower <= A @ v <= row_upper,  lb <= v <= ub.

    Rows are ranged; an equality row has ``row_lower == row_upper`` and a
    one-sided row carries an infinite bound on the other side.
    """

    c: np.ndarray
    A: sparse.csr_matrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: tuple[str, ...]
    row_names: tuple[str, ...]
    constant: float = 0.0
    layout: Any = field(default=None, compare=False)

    def __post_init__(self):
        m, n = self.A.shape
        if not (len(self.c) == len(self.lb) == len(self.ub) == len(self.names) == n):
            raise ValueError("column data disagree with the constraint matrix")
        if not (len(self.row_lower) == len(self.row_upper) == len(self.row_names) == m):
            raise ValueError("row data disagree with the constraint matrix")
        for arr in (self.c, self.A.data, self.lb, self.ub):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError("objective, coefficients and variable bounds must be finite")

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def rows(self):
        """Yield (coefficients, comparator, rhs) with ranged rows split in two."""
        A = self.A.tocsr()
        for k in range(self.n_rows):
            lo, hi = self.row_lower[k], self.row_upper[k]
            cols = A.indices[A.indptr[k]:A.indptr[k + 1]]
            vals = A.data[A.indptr[k]:A.indptr[k + 1]]
            coeffs = {self.names[j]: float(v) for j, v in zip(cols, vals)}
            if lo == hi:
                yield coeffs, "==", float(lo)
                continue
            if np.isfinite(lo):
                yield coeffs, ">=", float(lo)
            if np.isfinite(hi):
                yield coeffs, "<=", float(hi)

    def same_structure(self, other: "LinearProgram") -> bool:
        """Exact equality of every row, bound and objective coefficient."""
        if self.A.shape != other.A.shape or self.names != other.names or self.row_names != other.row_names:
            return False
        diff = (self.A - other.A).tocsr()
        diff.eliminate_zeros()
        return (
            diff.nnz == 0
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.row_lower, other.row_lower)
            and np.array_equal(self.row_upper, other.row_upper)
            and np.array_equal(self.lb, other.lb)
            and np.array_equal(self.ub, other.ub)
            and self.constant == other.constant
        )

    def max_violation(self, v) -> float:
        v = np.asarray(v, dtype=float)
        act = self.A @ v
        parts = [
            np.maximum(self.row_lower - act, 0.0),
            np.maximum(act - self.row_upper, 0.0),
            np.maximum(self.lb - v, 0.0),
            np.maximum(v - self.ub, 0.0),
        ]
        return float(max((p.max() for p in parts if p.size), default=0.0))

    def dump(self) -> str:
        """Plain fixed-format listing for cross-checking with other tools."""
        lines = ["OBJECTIVE", f"  {'constant':<16}{self.constant: .12e}"]
        lines += [f"  {nm:<16}{cv: .12e}" for nm, cv in zip(self.names, self.c)]
        lines.append("ROWS")
        A = self.A.tocsr()
        for k, rn in enumerate(self.row_names):
            cols = A.indices[A.indptr[k]:A.indptr[k + 1]]
            vals = A.data[A.indptr[k]:A.indptr[k + 1]]
            expr = " ".join(f"{v:+.6g}*{self.names[j]}" for j, v in zip(cols, vals)) or "0"
            lines.append(f"  {rn:<16}{self.row_lower[k]: .12e} <= {expr} <= {self.row_upper[k]: .12e}")
        lines.append("BOUNDS")
        lines += [f"  {nm:<16}{lo: .12e} {hi: .12e}" for nm, lo, hi in zip(self.names, self.lb, self.ub)]
        return "\n".join(lines) + "\n"


@dataclass
class Solution:
    status: str
    objective: float = float("nan")
    values: np.ndarray | None = None
    x: np.ndarray | None = None
    soc: np.ndarray | None = None
    relaxed: np.ndarray | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _certificate(lp: LinearProgram) -> str:
    bad = [lp.names[j] for j in np.nonzero(lp.lb > lp.ub + FEAS_TOL)[0]]
    if bad:
        return "empty variable bounds: " + ", ".join(bad[:5])
    A = lp.A.tocsr()
    pos, neg = A.maximum(0), A.minimum(0)
    amax = pos @ lp.ub + neg @ lp.lb
    amin = pos @ lp.lb + neg @ lp.ub
    rows = np.nonzero((amax < lp.row_lower - FEAS_TOL) | (amin > lp.row_upper + FEAS_TOL))[0]
    if rows.size:
        return "row range unreachable within variable bounds: " + ", ".join(lp.row_names[k] for k in rows[:5])
    return "no point satisfies all rows simultaneously (phase-one infeasibility)"


def _solve_empty(lp: LinearProgram) -> Solution:
    ok = np.all(lp.row_lower <= FEAS_TOL) and np.all(lp.row_upper >= -FEAS_TOL)
    if not ok:
        return Solution("infeasible", message=_certificate(lp))
    return Solution("optimal", float(lp.constant), np.zeros(0))


def _highs_model(lp: LinearProgram):
    import highspy

    model = highspy.HighsLp()
    model.num_col_ = lp.n_vars
    model.num_row_ = lp.n_rows
    model.col_cost_ = np.asarray(lp.c, dtype=float)
    model.col_lower_ = np.asarray(lp.lb, dtype=float)
    model.col_upper_ = np.asarray(lp.ub, dtype=float)
    model.row_lower_ = np.where(np.isfinite(lp.row_lower), lp.row_lower, -highspy.kHighsInf)
    model.row_upper_ = np.where(np.isfinite(lp.row_upper), lp.row_upper, highspy.kHighsInf)
    A = lp.A.tocsc()
    model.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    model.a_matrix_.start_ = A.indptr
    model.a_matrix_.index_ = A.indices
    model.a_matrix_.value_ = A.data
    return model


class HighsSession:
    """A HiGHS instance reused across programs that share one constraint matrix.

    When the next program has the same matrix object (or an equal one) only
    costs and bounds are replaced and the dual simplex restarts from the
    previous basis. A fixed sequence of programs always yields the same
    sequence of solutions.
    """

    def __init__(self):
        import highspy

        self._highspy = highspy
        self._h = highspy.Highs()
        for key, value in (("output_flag", False), ("presolve", "off"), ("random_seed", 0),
                           ("primal_feasibility_tolerance", 1e-9), ("dual_feasibility_tolerance", 1e-9)):
            self._h.setOptionValue(key, value)
        self._A = None

    def _matches(self, lp: LinearProgram) -> bool:
        A = self._A
        if A is None or A.shape != lp.A.shape:
            return False
        if A is lp.A:
            return True
        return (A.nnz == lp.A.nnz and np.array_equal(A.indptr, lp.A.indptr)
                and np.array_equal(A.indices, lp.A.indices) and np.array_equal(A.data, lp.A.data))

    def solve(self, lp: LinearProgram) -> Solution:
        hs, h = self._highspy, self._h
        if self._matches(lp):
            n, m = lp.n_vars, lp.n_rows
            cols, rows = np.arange(n, dtype=np.int32), np.arange(m, dtype=np.int32)
            h.changeColsCost(n, cols, np.asarray(lp.c, dtype=float))
            h.changeColsBounds(n, cols, np.asarray(lp.lb, dtype=float), np.asarray(lp.ub, dtype=float))
            h.changeRowsBounds(m, rows, np.where(np.isfinite(lp.row_lower), lp.row_lower, -hs.kHighsInf),
                               np.where(np.isfinite(lp.row_upper), lp.row_upper, hs.kHighsInf))
        else:
            h.clearModel()
            h.passModel(_highs_model(lp))
            self._A = lp.A
        h.run()
        status = h.getModelStatus()
        if status == hs.HighsModelStatus.kOptimal:
            v = np.array(h.getSolution().col_value)
            return Solution("optimal", float(lp.c @ v + lp.constant), v)
        # an infeasible basis is a poor starting point for the next program
        self._A = None
        if status in (hs.HighsModelStatus.kInfeasible, hs.HighsModelStatus.kUnboundedOrInfeasible):
            return Solution("infeasible", message=_certificate(lp))
        raise SolverError(f"HiGHS stopped with status {h.modelStatusToString(status)}")


def solve_lp(lp: LinearProgram, method: str = "highs", session: HighsSession | None = None) -> Solution:
    """Solve ``lp`` to optimality or prove it infeasible.

    ``method`` is ``"highs"`` (dual simplex, deterministic settings) or
    ``"simplex"`` (the dense bounded-variable simplex in this package, with
    least-index pivoting). When ``lp.layout`` is set, the schedule is
    recovered into ``x`` and ``soc``. Passing a :class:`HighsSession`
    warm-starts from the basis of the previous program solved in it.
    """
    if lp.n_vars == 0:
        sol = _solve_empty(lp)
    elif method == "highs":
        sol = (session or HighsSession()).solve(lp)
    elif method == "simplex":
        from .simplex import bounded_simplex

        sol = bounded_simplex(lp)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    if sol.optimal and lp.layout is not None:
        lp.layout.fill(sol)
    return sol
