"""Dense-tableau two-phase primal simplex.

Works on the bounded form ``min c@x  s.t.  A_le x <= b_le, A_eq x = b_eq,
lo <= x <= hi``. Variables are shifted/split into non-negative columns,
finite upper bounds become explicit rows. Pivoting is Dantzig's rule until
a run of degenerate pivots is seen, after which Bland's rule takes over for
the rest of the phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
DEGENERATE_RUN = 50


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "failed"
    x: np.ndarray | None
    objective: float
    iterations: int
    message: str = ""


class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray, max_iter: int):
        self.T = T
        self.basis = basis
        self.max_iter = max_iter
        self.iterations = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j

    def run(self, allowed: np.ndarray) -> str:
        """Optimise the objective in the last row over columns flagged ``allowed``."""
        T = self.T
        m = T.shape[0] - 1
        bland = False
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                return "failed"
            red = T[-1, :-1]
            candidates = np.flatnonzero((red < -PIVOT_TOL) & allowed)
            if candidates.size == 0:
                return "optimal"
            if bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmin(red[candidates])])
            col = T[:m, j]
            pos = np.flatnonzero(col > PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = T[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            # lowest basic-variable index on ties keeps pivoting deterministic
            r = int(ties[np.argmin(self.basis[ties])])
            if best <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, j)
            self.iterations += 1


def simplex_solve(c, A_le, b_le, A_eq, b_eq, lo, hi, max_iter: int | None = None) -> LpResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_le = _dense(A_le, n)
    A_eq = _dense(A_eq, n)
    b_le = np.asarray(b_le, dtype=float).reshape(-1)
    b_eq = np.asarray(b_eq, dtype=float).reshape(-1)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    # x = offset + S @ y with y >= 0
    cols = []  # (var index, sign)
    offset = np.zeros(n)
    ub_rows = []  # (column index, bound)
    for i in range(n):
        if math.isfinite(lo[i]):
            offset[i] = lo[i]
            cols.append((i, 1.0))
            if math.isfinite(hi[i]):
                ub_rows.append((len(cols) - 1, hi[i] - lo[i]))
        elif math.isfinite(hi[i]):
            offset[i] = hi[i]
            cols.append((i, -1.0))
        else:
            cols.append((i, 1.0))
            cols.append((i, -1.0))
    ny = len(cols)
    S = np.zeros((n, ny))
    for k, (i, s) in enumerate(cols):
        S[i, k] = s

    rows_le = A_le @ S
    rhs_le = b_le - A_le @ offset
    ub_block = np.zeros((len(ub_rows), ny))
    ub_rhs = np.zeros(len(ub_rows))
    for k, (j, bound) in enumerate(ub_rows):
        ub_block[k, j] = 1.0
        ub_rhs[k] = bound
    rows_le = np.vstack([rows_le, ub_block])
    rhs_le = np.concatenate([rhs_le, ub_rhs])
    rows_eq = A_eq @ S
    rhs_eq = b_eq - A_eq @ offset

    m_le, m_eq = rows_le.shape[0], rows_eq.shape[0]
    m = m_le + m_eq
    cost = c @ S
    const = float(c @ offset)
    if m == 0:
        if np.any(cost < -PIVOT_TOL):
            return LpResult("unbounded", None, -math.inf, 0)
        return LpResult("optimal", offset.copy(), const, 0)

    # columns: y | slacks (m_le) | artificials (m)
    A = np.zeros((m, ny + m_le))
    A[:m_le, :ny] = rows_le
    A[:m_le, ny:] = np.eye(m_le)
    A[m_le:, :ny] = rows_eq
    b = np.concatenate([rhs_le, rhs_eq])
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    basis = np.empty(m, dtype=int)
    need_art = []
    for r in range(m):
        if r < m_le and not flip[r]:
            basis[r] = ny + r
        else:
            need_art.append(r)
    n_art = len(need_art)
    ncol = ny + m_le + n_art
    T = np.zeros((m + 1, ncol + 1))
    T[:m, :ny + m_le] = A
    T[:m, -1] = b
    for k, r in enumerate(need_art):
        T[r, ny + m_le + k] = 1.0
        basis[r] = ny + m_le + k
    if max_iter is None:
        max_iter = 50 * (m + ncol) + 1000
    tab = _Tableau(T, basis, max_iter)
    allowed = np.ones(ncol, dtype=bool)

    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        T[-1, ny + m_le:ncol] = 1.0
        for r in need_art:
            T[-1] -= T[r]
        status = tab.run(allowed)
        if status == "failed":
            return LpResult("failed", None, math.nan, tab.iterations, "iteration limit in phase 1")
        infeas = -T[-1, -1]
        if infeas > 1e-7 * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpResult("infeasible", None, math.nan, tab.iterations)
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= ny + m_le:
                row = T[r, :ny + m_le]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                else:
                    keep[r] = False
        T = T[keep][:, list(range(ny + m_le)) + [ncol]]
        tab.T = T
        tab.basis = tab.basis[keep[:m]]
        m = T.shape[0] - 1
        allowed = np.ones(ny + m_le, dtype=bool)

    # phase 2
    T[-1, :] = 0.0
    T[-1, :ny] = cost
    for r in range(m):
        j = tab.basis[r]
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status = tab.run(allowed)
    if status == "failed":
        return LpResult("failed", None, math.nan, tab.iterations, "iteration limit in phase 2")
    if status == "unbounded":
        return LpResult("unbounded", None, -math.inf, tab.iterations)
    y = np.zeros(T.shape[1] - 1)
    y[tab.basis] = T[:m, -1]
    y = np.maximum(y[:ny], 0.0)
    x = offset + S @ y
    return LpResult("optimal", x, float(c @ x), tab.iterations)


def _dense(A, n: int) -> np.ndarray:
    if A is None:
        return np.zeros((0, n))
    if hasattr(A, "toarray"):
        return A.toarray()
    A = np.asarray(A, dtype=float)
    return A.reshape(-1, n)
