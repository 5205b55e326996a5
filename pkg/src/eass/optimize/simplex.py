"""Dense bounded-variable primal simplex with least-index (Bland) pivoting.

Meant for small programs and for cross-checking the HiGHS backend. Every
row ``lo <= a @ v <= hi`` becomes ``a @ v - r = 0`` with a slack ``r``
bounded by ``[lo, hi]``; phase one drives one artificial per row to zero.
"""

from __future__ import annotations

import numpy as np

from .lp import LinearProgram, Solution, SolverError, _certificate

TOL = 1e-9
MAX_PIVOTS = 50_000


class _Tableau:
    def __init__(self, M, lb, ub, x, basis):
        self.M = M  # B^-1 [A | -I | S], kept up to date by pivoting
        self.lb, self.ub, self.x = lb, ub, x
        self.basis = basis

    def pivot(self, row, col):
        M = self.M
        M[row] /= M[row, col]
        others = np.abs(M[:, col]) > 0
        others[row] = False
        M[others] -= np.outer(M[others, col], M[row])
        self.basis[row] = col

    def run(self, cost) -> str:
        lb, ub, x, M = self.lb, self.ub, self.x, self.M
        for _ in range(MAX_PIVOTS):
            y = cost[self.basis]
            d = cost - y @ M
            d[self.basis] = 0.0
            at_lb = x <= lb + TOL
            at_ub = x >= ub - TOL
            can_up = (d < -TOL) & ~at_ub
            can_down = (d > TOL) & ~at_lb
            candidates = np.nonzero(can_up | can_down)[0]
            if candidates.size == 0:
                return "optimal"
            j = int(candidates[0])
            direction = 1.0 if can_up[j] else -1.0
            alpha = M[:, j] * direction
            xb = x[self.basis]
            step = np.full(len(alpha), np.inf)
            dec = alpha > TOL
            inc = alpha < -TOL
            step[dec] = (xb[dec] - lb[self.basis][dec]) / alpha[dec]
            step[inc] = (ub[self.basis][inc] - xb[inc]) / -alpha[inc]
            step = np.maximum(step, 0.0)
            flip = ub[j] - lb[j]
            theta = min(step.min(initial=np.inf), flip)
            if not np.isfinite(theta):
                return "unbounded"
            x[self.basis] = xb - theta * alpha
            x[j] += direction * theta
            if flip <= step.min(initial=np.inf):
                continue
            ties = np.nonzero(step <= theta + TOL)[0]
            row = int(ties[np.argmin(self.basis[ties])])
            leaving = self.basis[row]
            # snap the leaving variable onto the bound it reached
            x[leaving] = lb[leaving] if alpha[row] > 0 else ub[leaving]
            self.pivot(row, j)
        raise SolverError("simplex pivot limit reached")


def bounded_simplex(lp: LinearProgram) -> Solution:
    A = lp.A.toarray()
    m, n = A.shape
    lb = np.concatenate([lp.lb, lp.row_lower, np.zeros(m)])
    ub = np.concatenate([lp.ub, lp.row_upper, np.full(m, np.inf)])
    if np.any(lb > ub + TOL):
        return Solution("infeasible", message=_certificate(lp))
    x = np.zeros(n + 2 * m)
    start = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    x[: n + m] = start[: n + m]
    residual = -(A @ x[:n] - x[n:n + m])
    sign = np.where(residual >= 0, 1.0, -1.0)
    x[n + m:] = np.abs(residual)
    M = np.hstack([A, -np.eye(m), np.diag(sign)])
    # basis starts on the artificials; B = diag(sign) so B^-1 = diag(sign)
    M = sign[:, None] * M
    tab = _Tableau(M, lb, ub, x, np.arange(n + m, n + 2 * m))

    phase1 = np.concatenate([np.zeros(n + m), np.ones(m)])
    if tab.run(phase1) != "optimal":
        raise SolverError("phase one did not terminate at an optimum")
    finite = np.concatenate([b[np.isfinite(b)] for b in (lb, ub)])
    if x[n + m:].sum() > 1e-7 * (1.0 + np.abs(finite).max(initial=0.0)):
        return Solution("infeasible", message=_certificate(lp))

    ub[n + m:] = 0.0
    x[n + m:] = 0.0
    phase2 = np.concatenate([lp.c, np.zeros(2 * m)])
    status = tab.run(phase2)
    if status != "optimal":
        raise SolverError(f"phase two ended {status}")
    v = x[:n].copy()
    return Solution("optimal", float(lp.c @ v + lp.constant), v)
