"""LP dispatch and best-bound branch-and-bound."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

try:  # persistent HiGHS instance keeps the basis between node LPs
    import highspy
except ImportError:  # pragma: no cover - exercised only without highspy
    highspy = None

from .model import MilpModel, StandardArrays
from .simplex import simplex_solve

log = logging.getLogger(__name__)

# dense tableau cells above which "auto" hands node LPs to HiGHS
AUTO_DENSE_LIMIT = 60_000


class Status(str, Enum):
    OPTIMAL = "optimal-within-gap"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit-reached"


@dataclass
class SolverOptions:
    gap: float = 1e-3
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    node_limit: int = 1_000_000
    time_limit: float = math.inf
    branching: str = "most-fractional"
    node_selection: str = "best-bound"
    # "simplex" (built-in dense tableau), "highs" (scipy), or "auto" by size
    lp_backend: str = "auto"
    # rounding dive from the root and from every ``dive_every``-th node
    dive: bool = True
    dive_every: int = 100
    # uninitialised candidates strong-branched per node under "pseudocost"
    strong_candidates: int = 8
    # node cap for each RINS sub-tree run alongside the dives
    rins_nodes: int = 200

    def __post_init__(self):
        if self.gap < 0:
            raise ValueError("gap must be >= 0")
        if self.feas_tol <= 0 or self.int_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.branching not in ("most-fractional", "pseudocost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_selection not in ("best-bound", "depth-first"):
            raise ValueError(f"unknown node selection {self.node_selection!r}")
        if self.lp_backend not in ("auto", "simplex", "highs"):
            raise ValueError(f"unknown LP backend {self.lp_backend!r}")


@dataclass
class MilpSolution:
    status: Status
    objective: float
    x: np.ndarray | None
    best_bound: float
    nodes: int = 0
    wall_time: float = 0.0
    lp_solves: int = 0
    message: str = ""
    names: list[str] = field(default_factory=list, repr=False)

    @property
    def values(self) -> dict[int, float]:
        return {} if self.x is None else dict(enumerate(self.x.tolist()))

    def value(self, vid: int) -> float:
        return float(self.x[vid])

    def by_name(self) -> dict[str, float]:
        if self.x is None:
            return {}
        return dict(zip(self.names, self.x.tolist()))

    @property
    def gap(self) -> float:
        if self.x is None or not math.isfinite(self.best_bound):
            return math.inf
        return (self.objective - self.best_bound) / max(1.0, abs(self.objective))


class _Lp:
    """Solves the relaxation of ``arr`` under per-node bounds."""

    def __init__(self, arr: StandardArrays, opts: SolverOptions):
        self.arr = arr
        self.opts = opts
        backend = opts.lp_backend
        if backend == "auto":
            m = arr.A_le.shape[0] + arr.A_eq.shape[0] + int(np.isfinite(arr.hi).sum())
            n = arr.c.size
            backend = "simplex" if m * (n + m) <= AUTO_DENSE_LIMIT else "highs"
        self.backend = backend
        self.solves = 0
        self._h = None
        if backend == "simplex":
            self._A_le = arr.A_le.toarray()
            self._A_eq = arr.A_eq.toarray()
        elif highspy is not None:
            self._h = self._highs_model(arr, opts)
            self._cols = np.arange(arr.c.size, dtype=np.int32)

    @staticmethod
    def _highs_model(arr: StandardArrays, opts: SolverOptions):
        A = sp.vstack([arr.A_le, arr.A_eq]).tocsc()
        lp = highspy.HighsLp()
        lp.num_col_, lp.num_row_ = A.shape[1], A.shape[0]
        lp.col_cost_ = arr.c
        lp.col_lower_, lp.col_upper_ = arr.lo, arr.hi
        lp.row_lower_ = np.r_[np.full(arr.A_le.shape[0], -np.inf), arr.b_eq]
        lp.row_upper_ = np.r_[arr.b_le, arr.b_eq]
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("primal_feasibility_tolerance", opts.feas_tol)
        h.setOptionValue("dual_feasibility_tolerance", opts.feas_tol)
        h.passModel(lp)
        return h

    def _solve_highspy(self, lo: np.ndarray, hi: np.ndarray):
        h = self._h
        h.changeColsBounds(self._cols.size, self._cols, lo, hi)
        h.run()
        ms = h.getModelStatus()
        if ms == highspy.HighsModelStatus.kOptimal:
            x = np.array(h.getSolution().col_value)
            return "optimal", x, float(self.arr.c @ x) + self.arr.c0
        if ms == highspy.HighsModelStatus.kInfeasible:
            return "infeasible", None, math.inf
        if ms in (highspy.HighsModelStatus.kUnbounded, highspy.HighsModelStatus.kUnboundedOrInfeasible):
            # a cold restart separates the two cases
            h.clearSolver()
            h.run()
            ms = h.getModelStatus()
            if ms == highspy.HighsModelStatus.kInfeasible:
                return "infeasible", None, math.inf
            if ms == highspy.HighsModelStatus.kUnbounded:
                return "unbounded", None, -math.inf
        return "failed", None, math.nan

    def solve(self, lo: np.ndarray, hi: np.ndarray):
        """Return (status, x, objective) with status in optimal/infeasible/unbounded/failed."""
        self.solves += 1
        arr = self.arr
        if np.any(lo > hi + 1e-12):
            return "infeasible", None, math.inf
        if self.backend == "simplex":
            res = simplex_solve(arr.c, self._A_le, arr.b_le, self._A_eq, arr.b_eq, lo, hi)
            obj = res.objective + arr.c0 if res.x is not None else res.objective
            return res.status, res.x, obj
        if self._h is not None:
            return self._solve_highspy(lo, hi)
        res = linprog(
            arr.c,
            A_ub=arr.A_le if arr.A_le.shape[0] else None,
            b_ub=arr.b_le if arr.A_le.shape[0] else None,
            A_eq=arr.A_eq if arr.A_eq.shape[0] else None,
            b_eq=arr.b_eq if arr.A_eq.shape[0] else None,
            bounds=np.column_stack([lo, hi]),
            method="highs",
            options={"primal_feasibility_tolerance": self.opts.feas_tol,
                     "dual_feasibility_tolerance": self.opts.feas_tol,
                     "presolve": True},
        )
        if res.status == 0:
            return "optimal", np.asarray(res.x), float(res.fun) + arr.c0
        if res.status == 2:
            return "infeasible", None, math.inf
        if res.status == 3:
            return "unbounded", None, -math.inf
        return "failed", None, math.nan


def solve_lp(m: MilpModel, opts: SolverOptions | None = None) -> MilpSolution:
    """Solve the continuous relaxation of ``m`` (integrality ignored)."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    arr = m.arrays()
    names = [v.name for v in m.variables]
    if arr.empty_infeasible:
        return MilpSolution(Status.INFEASIBLE, math.inf, None, math.inf, 0,
                            time.perf_counter() - t0, 0, "vacuous constraint violated", names)
    lp = _Lp(arr, opts)
    status, x, obj = lp.solve(arr.lo.copy(), arr.hi.copy())
    dt = time.perf_counter() - t0
    if status == "optimal":
        return MilpSolution(Status.OPTIMAL, obj, x, obj, 0, dt, 1, names=names)
    if status == "infeasible":
        return MilpSolution(Status.INFEASIBLE, math.inf, None, math.inf, 0, dt, 1, names=names)
    if status == "unbounded":
        return MilpSolution(Status.UNBOUNDED, -math.inf, None, -math.inf, 0, dt, 1, names=names)
    return MilpSolution(Status.LIMIT, math.nan, None, -math.inf, 0, dt, 1,
                        "LP numerical failure after anti-cycling", names)


def _fractional(x: np.ndarray, int_idx: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    xi = x[int_idx]
    frac = np.abs(xi - np.round(xi))
    mask = frac > tol
    return int_idx[mask], frac[mask]


class _Search:
    """Branch-and-bound state shared by the main tree and heuristic sub-trees."""

    def __init__(self, arr: StandardArrays, lp: _Lp, opts: SolverOptions, t0: float):
        self.arr, self.lp, self.opts, self.t0 = arr, lp, opts, t0
        self.int_idx = np.flatnonzero(arr.integral)
        self.incumbent = math.inf
        self.incumbent_x: np.ndarray | None = None
        n = arr.c.size
        # per-variable objective gain per unit change, down and up
        self.pc_sum = np.zeros((2, n))
        self.pc_cnt = np.zeros((2, n))

    def pick(self, cand: np.ndarray, frac: np.ndarray, xs: np.ndarray,
             lo: np.ndarray, hi: np.ndarray, bound: float) -> int:
        """Branching variable among fractional ``cand`` (lowest id on ties).

        Only candidates of the highest priority present are considered.
        """
        pri = self.arr.priority[cand] if self.arr.priority.size else None
        if pri is not None and pri.size and pri.min() != pri.max():
            keep = pri == pri.max()
            cand, frac = cand[keep], frac[keep]
        score = np.minimum(frac, 1.0 - frac)
        if self.opts.branching == "most-fractional":
            return int(cand[np.argmax(score)])
        # strong-branch a few uninitialised candidates to seed their pseudocosts
        fresh = cand[(self.pc_cnt[:, cand].min(axis=0) == 0)]
        if fresh.size:
            order = np.argsort(-np.minimum(xs[fresh] - np.floor(xs[fresh]), np.ceil(xs[fresh]) - xs[fresh]),
                               kind="stable")
            for j in fresh[order[: self.opts.strong_candidates]]:
                v = xs[j]
                for direction in (0, 1):
                    clo, chi = lo.copy(), hi.copy()
                    if direction == 0:
                        chi[j] = math.floor(v)
                    else:
                        clo[j] = math.ceil(v)
                    st, _, oc = self.lp.solve(clo, chi)
                    gain = oc - bound if st == "optimal" else 10.0 * max(1.0, abs(bound))
                    delta = v - math.floor(v) if direction == 0 else math.ceil(v) - v
                    self.record(int(j), direction, delta, gain)
        f = xs[cand] - np.floor(xs[cand])
        seen = self.pc_cnt > 0
        psi = np.ones(2)
        for d in (0, 1):
            if seen[d].any():
                psi[d] = (self.pc_sum[d][seen[d]] / self.pc_cnt[d][seen[d]]).mean()
        est = np.where(seen[:, cand], self.pc_sum[:, cand] / np.maximum(self.pc_cnt[:, cand], 1), psi[:, None])
        score = np.maximum(est[0] * f, 1e-6) * np.maximum(est[1] * (1.0 - f), 1e-6)
        return int(cand[np.argmax(score)])

    def record(self, j: int, direction: int, delta: float, gain: float) -> None:
        if math.isfinite(gain) and delta > 0:
            self.pc_sum[direction, j] += max(gain, 0.0) / delta
            self.pc_cnt[direction, j] += 1

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def out_of_time(self) -> bool:
        return self.elapsed() > self.opts.time_limit

    def fractional(self, x: np.ndarray):
        return _fractional(x, self.int_idx, self.opts.int_tol)

    def offer(self, x: np.ndarray, obj: float) -> None:
        if obj < self.incumbent - 1e-12:
            self.incumbent, self.incumbent_x = obj, x.copy()

    def within_gap(self, bound: float, gap: float) -> bool:
        inc = self.incumbent
        return inc - bound <= gap * max(1.0, abs(inc)) + 1e-9

    def dive(self, lo: np.ndarray, hi: np.ndarray, xs: np.ndarray) -> None:
        """Round the least fractional integer, fixing near-integral ones, until integral or stuck."""
        lp, int_idx = self.lp, self.int_idx
        lo, hi = lo.copy(), hi.copy()
        for _ in range(2 * int_idx.size + 1):
            if self.out_of_time():
                return
            cand, frac = self.fractional(xs)
            if cand.size == 0:
                self.offer(xs, float(self.arr.c @ xs) + self.arr.c0)
                return
            j = int(cand[np.argmin(frac)])
            target = float(np.round(xs[j]))
            near = np.setdiff1d(int_idx, cand)
            other = math.floor(xs[j]) if target > xs[j] else math.ceil(xs[j])
            for fix_all, val in ((True, target), (False, target), (False, other)):
                lo2, hi2 = lo.copy(), hi.copy()
                if fix_all:
                    r = np.round(xs[near])
                    lo2[near] = np.maximum(lo2[near], r)
                    hi2[near] = np.minimum(hi2[near], r)
                lo2[j] = hi2[j] = val
                st, xn, on = lp.solve(lo2, hi2)
                if st == "optimal" and on < self.incumbent:
                    lo, hi, xs = lo2, hi2, xn
                    break
            else:
                return

    def rins(self, lo: np.ndarray, hi: np.ndarray, xs: np.ndarray) -> None:
        """Sub-tree over the integers where the node LP disagrees with the incumbent."""
        if self.incumbent_x is None:
            return
        idx = self.int_idx
        inc = np.round(self.incumbent_x[idx])
        agree = idx[np.abs(xs[idx] - inc) <= self.opts.int_tol]
        free = idx.size - agree.size
        if free == 0 or agree.size < idx.size // 2:
            return
        lo, hi = lo.copy(), hi.copy()
        val = np.round(self.incumbent_x[agree])
        lo[agree] = np.maximum(lo[agree], val)
        hi[agree] = np.minimum(hi[agree], val)
        st, x, obj = self.lp.solve(lo, hi)
        if st == "optimal" and obj < self.incumbent - 1e-9:
            self.tree(lo, hi, x, obj, node_limit=self.opts.rins_nodes, heuristics=False, gap=0.0)

    def tree(self, lo0: np.ndarray, hi0: np.ndarray, x0: np.ndarray, obj0: float,
             node_limit: float, heuristics: bool, gap: float) -> tuple[str, float, int]:
        """Explore the subtree below (lo0, hi0); returns (outcome, best bound, nodes)."""
        opts, lp = self.opts, self.lp
        counter = itertools.count()
        heap: list = []
        nodes = 0

        def push(bound: float, changes: dict[int, tuple[float, float]], xs, depth: int):
            key = bound if opts.node_selection == "best-bound" else -depth
            heapq.heappush(heap, (key, next(counter), bound, changes, xs))

        push(obj0, {}, x0, 0)
        while heap:
            if nodes >= node_limit or self.out_of_time():
                return "limit", min(min(e[2] for e in heap), self.incumbent), nodes
            _, _, bound, changes, xs = heapq.heappop(heap)
            if opts.node_selection == "best-bound" and self.incumbent_x is not None and self.within_gap(bound, gap):
                return "gap", min(bound, self.incumbent), nodes
            if bound >= self.incumbent - 1e-9:
                continue
            nodes += 1
            lo, hi = lo0.copy(), hi0.copy()
            for j, (a, b) in changes.items():
                lo[j], hi[j] = a, b
            cand, frac = self.fractional(xs)
            if cand.size == 0:
                self.offer(xs, bound)
                continue
            if heuristics and opts.dive and nodes % opts.dive_every == 0:
                self.dive(lo, hi, xs)
                self.rins(lo, hi, xs)
            j = self.pick(cand, frac, xs, lo, hi, bound)
            v = xs[j]
            down = dict(changes)
            down[j] = (lo[j], math.floor(v))
            up = dict(changes)
            up[j] = (math.ceil(v), hi[j])
            for direction, ch in enumerate((down, up)):
                clo, chi = lo.copy(), hi.copy()
                for jj, (a, b) in ch.items():
                    clo[jj], chi[jj] = a, b
                st, xc, oc = lp.solve(clo, chi)
                delta = v - math.floor(v) if direction == 0 else math.ceil(v) - v
                self.record(j, direction, delta, oc - bound if st == "optimal" else math.nan)
                if st != "optimal" or oc >= self.incumbent - 1e-9:
                    continue
                if self.fractional(xc)[0].size == 0:
                    self.offer(xc, oc)
                    continue
                push(oc, ch, xc, len(ch))
        return "exhausted", self.incumbent, nodes


def solve_milp(m: MilpModel, opts: SolverOptions | None = None) -> MilpSolution:
    """Best-bound branch and bound over LP relaxations.

    Stops once ``(incumbent - best_bound) / max(1, |incumbent|) <= opts.gap``
    or a node/time limit fires. Branches on the most fractional integer
    variable, lowest id on ties. Rounding dives and RINS sub-trees supply
    incumbents; they never affect the bound.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    arr = m.arrays()
    names = [v.name for v in m.variables]
    if arr.empty_infeasible:
        return MilpSolution(Status.INFEASIBLE, math.inf, None, math.inf, 0, 0.0, 0,
                            "vacuous constraint violated", names)
    lp = _Lp(arr, opts)
    search = _Search(arr, lp, opts, t0)
    int_idx = search.int_idx
    root_lo, root_hi = arr.lo.copy(), arr.hi.copy()

    def done(status, best_bound, nodes, msg=""):
        x = search.incumbent_x
        if x is not None:
            x = x.copy()
            x[int_idx] = np.round(x[int_idx])
            if int_idx.size and int_idx.size < x.size:
                # polish: continuous part re-solved with the integers fixed
                lo, hi = root_lo.copy(), root_hi.copy()
                lo[int_idx] = hi[int_idx] = x[int_idx]
                st, xp, _ = lp.solve(lo, hi)
                if st == "optimal":
                    xp[int_idx] = x[int_idx]
                    x = xp
        obj = math.inf if status is Status.INFEASIBLE else math.nan
        if x is not None:
            obj = float(arr.c @ x) + arr.c0
            best_bound = min(best_bound, obj)
        return MilpSolution(status, obj, x, best_bound, nodes, search.elapsed(), lp.solves, msg, names)

    status, x, obj = lp.solve(root_lo, root_hi)
    if status == "infeasible":
        return done(Status.INFEASIBLE, math.inf, 1)
    if status == "unbounded":
        return done(Status.UNBOUNDED, -math.inf, 1)
    if status == "failed":
        return done(Status.LIMIT, -math.inf, 1, "root LP numerical failure")

    if opts.dive and int_idx.size and search.fractional(x)[0].size:
        search.dive(root_lo, root_hi, x)
        if not search.within_gap(obj, opts.gap):
            search.rins(root_lo, root_hi, x)
    outcome, bound, nodes = search.tree(root_lo, root_hi, x, obj, opts.node_limit,
                                      heuristics=True, gap=opts.gap)
    if outcome == "limit":
        return done(Status.LIMIT, bound, nodes, "node or time limit reached")
    if search.incumbent_x is None:
        return done(Status.INFEASIBLE, math.inf, nodes)
    return done(Status.OPTIMAL, bound, nodes)
