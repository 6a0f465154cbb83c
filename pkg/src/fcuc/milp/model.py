"""Generic MILP container: variables, sparse linear constraints, linear objective."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp


class ModelError(ValueError):
    pass


class Sense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="

    @classmethod
    def parse(cls, s: "Sense | str") -> "Sense":
        if isinstance(s, Sense):
            return s
        aliases = {"<=": cls.LE, "le": cls.LE, "=": cls.EQ, "==": cls.EQ, "eq": cls.EQ,
                   ">=": cls.GE, "ge": cls.GE}
        try:
            return aliases[s]
        except KeyError:
            raise ModelError(f"unknown constraint sense {s!r}") from None


@dataclass
class Variable:
    id: int
    lo: float
    hi: float
    integral: bool
    name: str
    priority: int = 0  # branching preference; higher goes first


@dataclass
class Constraint:
    id: int
    terms: dict[int, float]
    sense: Sense
    rhs: float
    name: str = ""


@dataclass
class StandardArrays:
    """Row-wise matrix form of a model: ``A_le x <= b_le``, ``A_eq x = b_eq``."""

    c: np.ndarray
    c0: float
    A_le: sp.csr_matrix
    b_le: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    integral: np.ndarray
    priority: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    # rows of the original model that were dropped as empty; kept for diagnosis
    empty_rows: list[int] = field(default_factory=list)
    empty_infeasible: bool = False


class MilpModel:
    """A minimisation MILP built incrementally.

    Variables get sequential ids starting at 0. Terms are given as
    ``[(var_id, coef), ...]`` or a ``{var_id: coef}`` mapping; repeated ids
    are summed.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.obj_constant = 0.0
        self._arrays: StandardArrays | None = None

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def num_integer(self) -> int:
        return sum(v.integral for v in self.variables)

    def add_variable(self, lo: float = 0.0, hi: float = math.inf, integral: bool = False,
                     name: str = "") -> int:
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ModelError(f"NaN bound on variable {name!r}")
        if lo > hi:
            raise ModelError(f"inverted bounds [{lo}, {hi}] on variable {name!r}")
        if integral:
            lo = math.ceil(lo - 1e-9) if math.isfinite(lo) else lo
            hi = math.floor(hi + 1e-9) if math.isfinite(hi) else hi
            if lo > hi:
                raise ModelError(f"integer variable {name!r} has no integral point in its bounds")
        vid = len(self.variables)
        self.variables.append(Variable(vid, lo, hi, bool(integral), name or f"x{vid}"))
        self._arrays = None
        return vid

    def add_binary(self, name: str = "", priority: int = 0) -> int:
        vid = self.add_variable(0.0, 1.0, True, name)
        self.variables[vid].priority = int(priority)
        return vid

    def set_priority(self, vid: int, priority: int) -> None:
        """Branch on ``vid`` before fractional variables of lower priority."""
        self.variables[vid].priority = int(priority)
        self._arrays = None

    def _merge(self, terms) -> dict[int, float]:
        items = terms.items() if isinstance(terms, dict) else terms
        merged: dict[int, float] = {}
        n = len(self.variables)
        for vid, coef in items:
            vid = int(vid)
            if not 0 <= vid < n:
                raise ModelError(f"constraint references unknown variable id {vid}")
            merged[vid] = merged.get(vid, 0.0) + float(coef)
        return merged

    def add_constraint(self, terms, sense: Sense | str, rhs: float, name: str = "") -> int:
        merged = self._merge(terms)
        cid = len(self.constraints)
        self.constraints.append(Constraint(cid, merged, Sense.parse(sense), float(rhs), name))
        self._arrays = None
        return cid

    def set_objective(self, terms, constant: float = 0.0) -> None:
        self.objective = self._merge(terms)
        self.obj_constant = float(constant)
        self._arrays = None

    def add_objective_terms(self, terms) -> None:
        for vid, coef in self._merge(terms).items():
            self.objective[vid] = self.objective.get(vid, 0.0) + coef
        self._arrays = None

    def set_bounds(self, vid: int, lo: float | None = None, hi: float | None = None) -> None:
        v = self.variables[vid]
        new_lo = v.lo if lo is None else float(lo)
        new_hi = v.hi if hi is None else float(hi)
        if new_lo > new_hi:
            raise ModelError(f"inverted bounds [{new_lo}, {new_hi}] on variable {v.name!r}")
        v.lo, v.hi = new_lo, new_hi
        self._arrays = None

    def fix(self, vid: int, value: float) -> None:
        self.set_bounds(vid, value, value)

    def var_by_name(self, name: str) -> int:
        for v in self.variables:
            if v.name == name:
                return v.id
        raise KeyError(name)

    def objective_value(self, x) -> float:
        return self.obj_constant + sum(c * x[i] for i, c in self.objective.items())

    def nonzeros(self, constraint_ids=None) -> int:
        rows = self.constraints if constraint_ids is None else (self.constraints[i] for i in constraint_ids)
        return sum(sum(1 for c in r.terms.values() if c != 0.0) for r in rows)

    def max_violation(self, x, integrality: bool = True) -> float:
        """Largest bound, row or integrality violation of point ``x``."""
        x = np.asarray(x, dtype=float)
        arr = self.arrays()
        viol = 0.0
        if x.size:
            viol = max(viol, float(np.max(np.maximum(arr.lo - x, x - arr.hi), initial=0.0)))
        for r in self.constraints:
            lhs = sum(c * x[i] for i, c in r.terms.items())
            if r.sense is Sense.LE:
                viol = max(viol, lhs - r.rhs)
            elif r.sense is Sense.GE:
                viol = max(viol, r.rhs - lhs)
            else:
                viol = max(viol, abs(lhs - r.rhs))
        if integrality and x.size:
            xi = x[arr.integral]
            if xi.size:
                viol = max(viol, float(np.max(np.abs(xi - np.round(xi)))))
        return viol

    def arrays(self) -> StandardArrays:
        """Matrix form with empty constraints removed (cached until the model changes)."""
        if self._arrays is not None:
            return self._arrays
        n = self.num_vars
        c = np.zeros(n)
        for i, coef in self.objective.items():
            c[i] = coef
        le_rows, le_cols, le_vals, b_le = [], [], [], []
        eq_rows, eq_cols, eq_vals, b_eq = [], [], [], []
        empty, empty_bad = [], False
        for r in self.constraints:
            items = [(i, a) for i, a in r.terms.items() if a != 0.0]
            if not items:
                empty.append(r.id)
                if ((r.sense is Sense.LE and r.rhs < 0) or (r.sense is Sense.GE and r.rhs > 0)
                        or (r.sense is Sense.EQ and r.rhs != 0)):
                    empty_bad = True
                continue
            if r.sense is Sense.EQ:
                k = len(b_eq)
                for i, a in items:
                    eq_rows.append(k); eq_cols.append(i); eq_vals.append(a)
                b_eq.append(r.rhs)
            else:
                sign = 1.0 if r.sense is Sense.LE else -1.0
                k = len(b_le)
                for i, a in items:
                    le_rows.append(k); le_cols.append(i); le_vals.append(sign * a)
                b_le.append(sign * r.rhs)
        A_le = sp.csr_matrix((le_vals, (le_rows, le_cols)), shape=(len(b_le), n))
        A_eq = sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(len(b_eq), n))
        self._arrays = StandardArrays(
            c=c, c0=self.obj_constant,
            A_le=A_le, b_le=np.asarray(b_le, dtype=float),
            A_eq=A_eq, b_eq=np.asarray(b_eq, dtype=float),
            lo=np.array([v.lo for v in self.variables], dtype=float),
            hi=np.array([v.hi for v in self.variables], dtype=float),
            integral=np.array([v.integral for v in self.variables], dtype=bool),
            priority=np.array([v.priority for v in self.variables], dtype=int),
            empty_rows=empty, empty_infeasible=empty_bad,
        )
        return self._arrays

    def copy(self) -> "MilpModel":
        m = MilpModel(self.name)
        m.variables = [Variable(v.id, v.lo, v.hi, v.integral, v.name, v.priority) for v in self.variables]
        m.constraints = [Constraint(r.id, dict(r.terms), r.sense, r.rhs, r.name) for r in self.constraints]
        m.objective = dict(self.objective)
        m.obj_constant = self.obj_constant
        return m


def add_variable(m: MilpModel, lo: float, hi: float, integral: bool = False, name: str = "") -> int:
    return m.add_variable(lo, hi, integral, name)


def add_constraint(m: MilpModel, terms, sense: Sense | str, rhs: float, name: str = "") -> int:
    return m.add_constraint(terms, sense, rhs, name)
