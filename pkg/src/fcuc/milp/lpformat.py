"""Export to the CPLEX-style LP text format for cross-checking with external solvers."""

from __future__ import annotations

import math
import re

from .model import MilpModel, Sense

_BAD = re.compile(r"[^A-Za-z0-9_.\[\]]")


def _name(m: MilpModel, vid: int) -> str:
    raw = m.variables[vid].name
    clean = _BAD.sub("_", raw)
    if not clean or clean[0].isdigit() or clean[0] in ".e" or clean.lower() in ("e", "inf", "infinity"):
        clean = "v_" + clean
    return f"{clean}_{vid}"


def _expr(m: MilpModel, terms: dict[int, float]) -> str:
    parts = []
    for vid, coef in terms.items():
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(coef):.17g} {_name(m, vid)}")
    if not parts:
        return "0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def to_lp_string(m: MilpModel) -> str:
    lines = ["\\ " + m.name, "Minimize", " obj: " + _expr(m, m.objective)]
    if m.obj_constant:
        # LP format has no objective constant; carry it on a fixed dummy column
        lines[-1] += f" + {m.obj_constant:.17g} obj_const"
    lines.append("Subject To")
    op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
    for r in m.constraints:
        if not any(c != 0.0 for c in r.terms.values()):
            continue
        lines.append(f" c{r.id}: {_expr(m, r.terms)} {op[r.sense]} {r.rhs:.17g}")
    lines.append("Bounds")
    for v in m.variables:
        n = _name(m, v.id)
        lo = "-inf" if v.lo == -math.inf else f"{v.lo:.17g}"
        hi = "+inf" if v.hi == math.inf else f"{v.hi:.17g}"
        lines.append(f" {lo} <= {n} <= {hi}")
    if m.obj_constant:
        lines.append(" obj_const = 1")
    ints = [v for v in m.variables if v.integral]
    bins = [v for v in ints if v.lo >= 0 and v.hi <= 1]
    gens = [v for v in ints if not (v.lo >= 0 and v.hi <= 1)]
    if bins:
        lines.append("Binary")
        lines.extend(" " + _name(m, v.id) for v in bins)
    if gens:
        lines.append("General")
        lines.extend(" " + _name(m, v.id) for v in gens)
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(m: MilpModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_lp_string(m))
