"""Unit-commitment MILP: T-SCUC core, largest-unit encoding, equivalent-model RoCoF cut."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridModel, Scenario, validate_grid
from .milp import MilpModel, MilpSolution, SolverOptions, Status, solve_lp, solve_milp

MODES = ("none", "erc", "dnn-exact", "dnn-active")


class UcError(RuntimeError):
    pass


@dataclass
class UcInstance:
    grid: GridModel
    scenario: Scenario
    reserve: bool = True
    u0: np.ndarray | None = None
    p0: np.ndarray | None = None

    def __post_init__(self):
        g = self.grid
        if self.scenario.demand.shape[0] != g.num_buses:
            raise ValueError("scenario bus count differs from grid bus count")
        if self.u0 is None:
            self.u0 = np.array([gen.initial_status for gen in g.generators], dtype=float)
        if self.p0 is None:
            self.p0 = np.array([gen.initial_output for gen in g.generators], dtype=float)
        self.u0 = np.asarray(self.u0, dtype=float)
        self.p0 = np.asarray(self.p0, dtype=float)

    @property
    def horizon(self) -> int:
        return self.scenario.horizon


@dataclass
class FcucOptions:
    periods: tuple[int, ...] = (9, 10, 11, 12)  # 1-based hours carrying frequency constraints
    rocof_lim: float = 0.5  # Hz/s
    f_lim: float = 59.5  # Hz
    f_nom: float = 60.0  # Hz
    big_m: float | None = None  # MW; None -> 1.05 * max p_max
    gamma_select: float = 0.25
    mode: str = "none"
    # MW a lower-index unit must trail the marked unit by; 0 lets mu pick any tied maximum
    tie_margin: float = 0.01

    def __post_init__(self):
        if self.rocof_lim <= 0:
            raise ValueError("rocof_lim must be > 0")
        if self.f_lim >= self.f_nom:
            raise ValueError("f_lim must be below f_nom")
        if self.tie_margin < 0:
            raise ValueError("tie_margin must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.periods = tuple(sorted(int(t) for t in self.periods))

    @property
    def deviation_limit(self) -> float:
        return self.f_nom - self.f_lim

    def resolve_big_m(self, grid: GridModel) -> float:
        pmax = max(gen.p_max for gen in grid.generators)
        a = 1.05 * pmax if self.big_m is None else float(self.big_m)
        if a <= pmax:
            raise UcError(f"big-M {a} must exceed the largest capacity {pmax}")
        return a


@dataclass
class UcModel:
    """A UC MILP together with the variable ids of its schedule quantities."""

    milp: MilpModel
    inst: UcInstance
    u: np.ndarray  # (G, T) variable ids
    v: np.ndarray
    p: np.ndarray
    r: np.ndarray
    flow: np.ndarray  # (K, T)
    theta: np.ndarray  # (N, T)
    mu: dict[int, np.ndarray] = field(default_factory=dict)  # period index -> (G,) ids
    rho: dict[int, np.ndarray] = field(default_factory=dict)
    pcon: dict[int, int] = field(default_factory=dict)
    erc_rows: list[int] = field(default_factory=list)
    nn_rows: list[int] = field(default_factory=list)
    extras: dict = field(default_factory=dict)


@dataclass
class UcSolution:
    u: np.ndarray  # (G, T)
    v: np.ndarray
    p: np.ndarray
    r: np.ndarray
    flow: np.ndarray
    theta: np.ndarray
    mu: dict[int, np.ndarray]
    rho: dict[int, np.ndarray]
    objective: float
    status: Status
    stats: dict = field(default_factory=dict)
    raw: MilpSolution | None = field(default=None, repr=False)

    def largest_unit(self, t: int) -> int:
        """Position of the highest-output committed unit in period index ``t`` (lowest on ties)."""
        out = np.where(self.u[:, t] > 0.5, self.p[:, t], -np.inf)
        return int(np.argmax(out))


def _idx(ids) -> np.ndarray:
    return np.asarray(ids, dtype=int)


def build_tscuc(inst: UcInstance) -> UcModel:
    """Cost-minimising SCUC with DC flows, reserve, ramping and min up/down logic."""
    g = inst.grid
    problems = validate_grid(g)
    if problems:
        raise UcError("invalid grid: " + "; ".join(problems))
    G, N, K, T = g.num_generators, g.num_buses, len(g.lines), inst.horizon
    gens = g.generators
    m = MilpModel("tscuc")
    u = np.zeros((G, T), dtype=int)
    v = np.zeros((G, T), dtype=int)
    p = np.zeros((G, T), dtype=int)
    r = np.zeros((G, T), dtype=int)
    for t in range(T):
        for k, gen in enumerate(gens):
            u[k, t] = m.add_binary(f"u[{gen.id},{t + 1}]")
            v[k, t] = m.add_binary(f"v[{gen.id},{t + 1}]")
            p[k, t] = m.add_variable(0.0, gen.p_max, name=f"p[{gen.id},{t + 1}]")
            r_hi = gen.p_max if inst.reserve else 0.0
            r[k, t] = m.add_variable(0.0, r_hi, name=f"r[{gen.id},{t + 1}]")
    theta = np.zeros((N, T), dtype=int)
    flow = np.zeros((K, T), dtype=int)
    for t in range(T):
        for i, b in enumerate(g.buses):
            # lowest-index bus is the angle reference
            lim = 0.0 if i == 0 else math.pi
            theta[i, t] = m.add_variable(-lim, lim, name=f"theta[{b.id},{t + 1}]")
        for j, ln in enumerate(g.lines):
            flow[j, t] = m.add_variable(-ln.p_max, ln.p_max, name=f"flow[{ln.id},{t + 1}]")

    obj = {}
    for t in range(T):
        for k, gen in enumerate(gens):
            obj[p[k, t]] = gen.cost
            obj[u[k, t]] = gen.no_load_cost
            obj[v[k, t]] = gen.startup_cost
            obj[r[k, t]] = gen.reserve_cost
    m.set_objective(obj)

    D, E = inst.scenario.demand, inst.scenario.res
    for t in range(T):
        _period_rows(m, g, inst.reserve, D[:, t] - E[:, t], u[:, t], p[:, t], r[:, t], flow[:, t], theta[:, t],
                     t + 1)

    for k, gen in enumerate(gens):
        for t in range(T):
            if t == 0:
                m.add_constraint([(p[k, 0], 1.0)], "<=", gen.ramp + inst.p0[k], f"rampup[{gen.id},1]")
                m.add_constraint([(p[k, 0], -1.0)], "<=", gen.ramp - inst.p0[k], f"rampdn[{gen.id},1]")
                m.add_constraint([(v[k, 0], 1.0), (u[k, 0], -1.0)], ">=", -inst.u0[k], f"startup[{gen.id},1]")
                if inst.u0[k] > 0.5:
                    m.add_constraint([(v[k, 0], 1.0)], "<=", 0.0, f"nostart[{gen.id},1]")
            else:
                m.add_constraint([(p[k, t], 1.0), (p[k, t - 1], -1.0)], "<=", gen.ramp, f"rampup[{gen.id},{t + 1}]")
                m.add_constraint([(p[k, t - 1], 1.0), (p[k, t], -1.0)], "<=", gen.ramp, f"rampdn[{gen.id},{t + 1}]")
                m.add_constraint([(v[k, t], 1.0), (u[k, t], -1.0), (u[k, t - 1], 1.0)], ">=", 0.0,
                                 f"startup[{gen.id},{t + 1}]")
                m.add_constraint([(v[k, t], 1.0), (u[k, t - 1], 1.0)], "<=", 1.0, f"nostart[{gen.id},{t + 1}]")
            m.add_constraint([(v[k, t], 1.0), (u[k, t], -1.0)], "<=", 0.0, f"vleu[{gen.id},{t + 1}]")
            # minimum up: a start within the last UT periods keeps the unit on
            lo = max(0, t - gen.min_up + 1)
            if t - lo >= 1:
                terms = [(v[k, s], 1.0) for s in range(lo, t + 1)] + [(u[k, t], -1.0)]
                m.add_constraint(terms, "<=", 0.0, f"minup[{gen.id},{t + 1}]")
            # minimum down: no start within DT periods of being on at t-DT
            tau = t - gen.min_down
            lo = max(0, tau + 1)
            if tau >= -1 and gen.min_down >= 2:
                terms = [(v[k, s], 1.0) for s in range(lo, t + 1)]
                if tau >= 0:
                    m.add_constraint(terms + [(u[k, tau], 1.0)], "<=", 1.0, f"mindn[{gen.id},{t + 1}]")
                else:
                    m.add_constraint(terms, "<=", 1.0 - inst.u0[k], f"mindn[{gen.id},{t + 1}]")
    return UcModel(m, inst, u, v, p, r, flow, theta)


def _period_rows(m: MilpModel, g: GridModel, reserve: bool, net_load, u, p, r, flow, theta, period: int) -> None:
    """Balance, DC flow, capacity and reserve rows of one period."""
    gens = g.generators
    bidx = g.bus_index()
    for i, b in enumerate(g.buses):
        # nodal balance: generation + inflow - outflow = demand - RES
        terms = [(p[k], 1.0) for k, gen in enumerate(gens) if bidx[gen.bus] == i]
        for j, ln in enumerate(g.lines):
            if bidx[ln.to_bus] == i:
                terms.append((flow[j], 1.0))
            if bidx[ln.from_bus] == i:
                terms.append((flow[j], -1.0))
        m.add_constraint(terms, "=", net_load[i], f"balance[{b.id},{period}]")
    for j, ln in enumerate(g.lines):
        bk = ln.susceptance * g.s_base_mva
        m.add_constraint([(flow[j], 1.0), (theta[bidx[ln.from_bus]], -bk), (theta[bidx[ln.to_bus]], bk)],
                         "=", 0.0, f"dcflow[{ln.id},{period}]")
    for k, gen in enumerate(gens):
        m.add_constraint([(p[k], 1.0), (u[k], -gen.p_min)], ">=", 0.0, f"pmin[{gen.id},{period}]")
        m.add_constraint([(p[k], 1.0), (r[k], 1.0), (u[k], -gen.p_max)], "<=", 0.0, f"pmax[{gen.id},{period}]")
        if reserve:
            m.add_constraint([(r[k], 1.0), (u[k], -gen.reserve_ramp)], "<=", 0.0, f"rramp[{gen.id},{period}]")
    if reserve:
        # literal form: sum_j r_j >= P_g + r_g for every g
        G = len(gens)
        for k, gen in enumerate(gens):
            terms = [(r[j], 1.0) for j in range(G)] + [(p[k], -1.0), (r[k], -1.0)]
            m.add_constraint(terms, ">=", 0.0, f"reserve[{gen.id},{period}]")


def redispatch(g: GridModel, net_load, commitment, reserve: bool = True, costs=None) -> np.ndarray | None:
    """Least-cost single-hour dispatch for a fixed commitment; None when infeasible.

    ``costs`` overrides the per-unit energy prices ($/MWh).
    """
    m = MilpModel("redispatch")
    gens = g.generators
    u = np.array([m.add_variable(c, c) for c in np.asarray(commitment, dtype=float)])
    p = np.array([m.add_variable(0.0, gen.p_max) for gen in gens])
    r = np.array([m.add_variable(0.0, gen.p_max if reserve else 0.0) for gen in gens])
    theta = np.array([m.add_variable(0.0 if i == 0 else -math.pi, 0.0 if i == 0 else math.pi)
                      for i in range(g.num_buses)])
    flow = np.array([m.add_variable(-ln.p_max, ln.p_max) for ln in g.lines])
    price = [gen.cost for gen in gens] if costs is None else np.asarray(costs, dtype=float)
    m.set_objective([(p[k], price[k]) for k in range(len(gens))]
                    + [(r[k], gen.reserve_cost) for k, gen in enumerate(gens)])
    _period_rows(m, g, reserve, np.asarray(net_load, dtype=float), u, p, r, flow, theta, 1)
    res = solve_lp(m)
    if res.x is None:
        return None
    return np.clip(res.x[p], 0.0, None)


def _period_indices(uc: UcModel, opts: FcucOptions) -> list[int]:
    T = uc.inst.horizon
    out = []
    for t in opts.periods:
        if not 1 <= t <= T:
            raise UcError(f"constrained period {t} outside horizon 1..{T}")
        out.append(t - 1)
    return out


def add_largest_unit_encoding(uc: UcModel, opts: FcucOptions) -> tuple[dict, dict]:
    """Binaries ``mu`` marking the highest-output unit and ``rho = P * mu`` per constrained period."""
    g = uc.inst.grid
    A = opts.resolve_big_m(g)
    m = uc.milp
    pmax = max(gen.p_max for gen in g.generators)
    for t in _period_indices(uc, opts):
        if t in uc.mu:
            continue
        mu = np.zeros(g.num_generators, dtype=int)
        rho = np.zeros(g.num_generators, dtype=int)
        pc = m.add_variable(0.0, pmax, name=f"pcon[{t + 1}]")
        for k, gen in enumerate(g.generators):
            mu[k] = m.add_binary(f"mu[{gen.id},{t + 1}]", priority=2)
            rho[k] = m.add_variable(0.0, gen.p_max, name=f"rho[{gen.id},{t + 1}]")
        for k, gen in enumerate(g.generators):
            P, M, R = uc.p[k, t], mu[k], rho[k]
            tag = f"[{gen.id},{t + 1}]"
            m.add_constraint([(pc, 1.0), (P, -1.0)], ">=", 0.0, "pconmax" + tag)
            m.add_constraint([(pc, 1.0), (P, -1.0), (M, A)], "<=", A, "lu_a" + tag)
            m.add_constraint([(R, 1.0), (P, -1.0), (M, -A)], ">=", -A, "lu_d" + tag)
            m.add_constraint([(R, 1.0), (P, -1.0), (M, A)], "<=", A, "lu_e" + tag)
            m.add_constraint([(R, 1.0), (M, -A)], "<=", 0.0, "lu_f" + tag)
            m.add_constraint([(M, 1.0), (uc.u[k, t], -1.0)], "<=", 0.0, "lu_on" + tag)
            # implied by the rows above; tightens the relaxation
            m.add_constraint([(R, 1.0), (M, -gen.p_max)], "<=", 0.0, "lu_cap" + tag)
            m.add_constraint([(R, 1.0), (P, -1.0)], "<=", 0.0, "lu_out" + tag)
        if opts.tie_margin > 0:
            # ties go to the lowest index, as in the predictor's feature vector
            for k in range(g.num_generators):
                for j in range(k):
                    m.add_constraint([(uc.p[j, t], 1.0), (uc.p[k, t], -1.0), (int(mu[k]), A)], "<=",
                                     A - opts.tie_margin, f"lu_tie[{j + 1},{k + 1},{t + 1}]")
        # one marked unit whenever any unit is on; none (and rho = 0) in an all-off hour
        m.add_constraint([(int(i), 1.0) for i in mu], "<=", 1.0, f"lu_b[{t + 1}]")
        for k in range(g.num_generators):
            m.add_constraint([(int(i), 1.0) for i in mu] + [(uc.u[k, t], -1.0)], ">=", 0.0,
                             f"lu_any[{k + 1},{t + 1}]")
        # exactly one rho equals its unit's output, which is the maximum
        m.add_constraint([(int(i), 1.0) for i in rho] + [(pc, -1.0)], "=", 0.0, f"lu_sum[{t + 1}]")
        uc.mu[t], uc.rho[t], uc.pcon[t] = mu, rho, pc
    return uc.mu, uc.rho


def add_erc_constraint(uc: UcModel, opts: FcucOptions) -> list[int]:
    """Surviving kinetic energy must carry the largest loss at the RoCoF limit."""
    g = uc.inst.grid
    rows = []
    coef = opts.f_nom / opts.rocof_lim
    for t in _period_indices(uc, opts):
        if t not in uc.mu:
            raise UcError("largest-unit encoding must be added before the RoCoF constraint")
        terms = []
        for k, gen in enumerate(g.generators):
            terms.append((uc.u[k, t], gen.kinetic_mws))
            terms.append((uc.mu[t][k], -gen.kinetic_mws))
            terms.append((uc.rho[t][k], -coef))
        rows.append(uc.milp.add_constraint(terms, ">=", 0.0, f"erc[{t + 1}]"))
    uc.erc_rows.extend(rows)
    return rows


def required_kinetic(rho_mw: float, opts: FcucOptions) -> float:
    return opts.f_nom * rho_mw / opts.rocof_lim


def solve_and_extract(uc: UcModel, opts: SolverOptions | None = None, verify: bool = True) -> UcSolution:
    opts = opts or SolverOptions()
    res = solve_milp(uc.milp, opts)
    if res.x is None:
        raise UcError(f"UC solve ended with status {res.status.value}: {res.message}")
    sol = extract(uc, res)
    if verify:
        problems = verify_schedule(uc.inst, sol)
        if problems:
            raise UcError("rounded schedule fails verification: " + "; ".join(problems[:5]))
    return sol


def extract(uc: UcModel, res: MilpSolution) -> UcSolution:
    x = res.x
    get = lambda ids: x[ids]  # noqa: E731
    return UcSolution(
        u=np.round(get(uc.u)), v=np.round(get(uc.v)), p=get(uc.p), r=get(uc.r),
        flow=get(uc.flow), theta=get(uc.theta),
        mu={t: np.round(x[ids]) for t, ids in uc.mu.items()},
        rho={t: x[ids] for t, ids in uc.rho.items()},
        objective=res.objective, status=res.status,
        stats={"nodes": res.nodes, "wall_time": res.wall_time, "lp_solves": res.lp_solves,
               "best_bound": res.best_bound, "gap": res.gap,
               "variables": uc.milp.num_vars, "constraints": uc.milp.num_constraints,
               "binaries": uc.milp.num_integer},
        raw=res,
    )


def schedule_cost(inst: UcInstance, sol: UcSolution) -> float:
    total = 0.0
    for k, gen in enumerate(inst.grid.generators):
        total += (gen.cost * sol.p[k].sum() + gen.no_load_cost * sol.u[k].sum()
                  + gen.startup_cost * sol.v[k].sum() + gen.reserve_cost * sol.r[k].sum())
    return float(total)


def verify_schedule(inst: UcInstance, sol: UcSolution, tol: float = 1e-6) -> list[str]:
    """Re-check a schedule against the UC rules directly from grid data.

    Deliberately independent of ``build_tscuc``: rules are evaluated on
    arrays, never through the MILP rows.
    """
    g = inst.grid
    gens = g.generators
    G, T = sol.u.shape
    u, v, P, r = sol.u, sol.v, sol.p, sol.r
    out = []

    def tolf(scale):
        return tol * max(1.0, abs(scale))

    if not (np.all(np.isin(u, (0.0, 1.0))) and np.all(np.isin(v, (0.0, 1.0)))):
        out.append("non-binary commitment or start-up value")
    bidx = g.bus_index()
    inj = np.zeros((g.num_buses, T))
    for k, gen in enumerate(gens):
        inj[bidx[gen.bus]] += P[k]
    for j, ln in enumerate(g.lines):
        inj[bidx[ln.from_bus]] -= sol.flow[j]
        inj[bidx[ln.to_bus]] += sol.flow[j]
    resid = inj - inst.scenario.demand + inst.scenario.res
    if np.abs(resid).max(initial=0.0) > tol:
        out.append(f"power balance residual {np.abs(resid).max():.3g} MW")
    for j, ln in enumerate(g.lines):
        dth = sol.theta[bidx[ln.from_bus]] - sol.theta[bidx[ln.to_bus]]
        if np.abs(sol.flow[j] - ln.susceptance * g.s_base_mva * dth).max() > tolf(ln.p_max):
            out.append(f"line {ln.id}: flow inconsistent with angles")
        if np.abs(sol.flow[j]).max() > ln.p_max + tolf(ln.p_max):
            out.append(f"line {ln.id}: thermal limit exceeded")
    for k, gen in enumerate(gens):
        s = tolf(gen.p_max)
        if np.any(P[k] < gen.p_min * u[k] - s):
            out.append(f"gen {gen.id}: below minimum output")
        if np.any(P[k] + r[k] > gen.p_max * u[k] + s):
            out.append(f"gen {gen.id}: output plus reserve above capacity")
        if np.any(r[k] < -s) or (inst.reserve and np.any(r[k] > gen.reserve_ramp * u[k] + s)):
            out.append(f"gen {gen.id}: reserve outside [0, reserve ramp]")
        prev_p = np.concatenate([[inst.p0[k]], P[k, :-1]])
        if np.any(np.abs(P[k] - prev_p) > gen.ramp + s):
            out.append(f"gen {gen.id}: ramp limit exceeded")
        prev_u = np.concatenate([[inst.u0[k]], u[k, :-1]])
        if np.any(v[k] < u[k] - prev_u - tol) or np.any(v[k] > u[k] + tol) or np.any(v[k] > 1 - prev_u + tol):
            out.append(f"gen {gen.id}: start-up logic violated")
        # brute-force scan of on/off runs
        status = [int(round(x)) for x in u[k]]
        for t in range(1, T):
            if status[t] == 1 and status[t - 1] == 0:
                run_end = min(T, t + gen.min_up)
                if any(status[s] == 0 for s in range(t, run_end)):
                    out.append(f"gen {gen.id}: minimum up time violated at {t + 1}")
            if status[t] == 0 and status[t - 1] == 1:
                run_end = min(T, t + gen.min_down)
                if any(status[s] == 1 for s in range(t, run_end)):
                    out.append(f"gen {gen.id}: minimum down time violated at {t + 1}")
        if status and status[0] == 1 and inst.u0[k] < 0.5:
            if any(status[s] == 0 for s in range(0, min(T, gen.min_up))):
                out.append(f"gen {gen.id}: minimum up time violated at 1")
        if status and status[0] == 0 and inst.u0[k] > 0.5:
            if any(status[s] == 1 for s in range(0, min(T, gen.min_down))):
                out.append(f"gen {gen.id}: minimum down time violated at 1")
    if inst.reserve:
        for t in range(T):
            total = r[:, t].sum()
            for k in range(G):
                if total + tol * 10 < P[k, t] + r[k, t]:
                    out.append(f"period {t + 1}: reserve does not cover loss of gen {gens[k].id}")
                    break
    return out


def write_schedule_csv(sol: UcSolution, grid: GridModel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gen", "period", "u", "v", "p_mw", "r_mw"])
        for k, gen in enumerate(grid.generators):
            for t in range(sol.u.shape[1]):
                w.writerow([gen.id, t + 1, int(sol.u[k, t]), int(sol.v[k, t]),
                            f"{sol.p[k, t]:.6f}", f"{sol.r[k, t]:.6f}"])


def read_schedule_csv(path, grid: GridModel) -> dict[str, np.ndarray]:
    pos = {gen.id: k for k, gen in enumerate(grid.generators)}
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["gen", "period", "u", "v", "p_mw", "r_mw"]:
            raise UcError("schedule header must be gen,period,u,v,p_mw,r_mw")
        for rec in reader:
            gid = int(rec["gen"])
            if gid not in pos:
                raise UcError(f"schedule references unknown generator {gid}")
            rows.append((pos[gid], int(rec["period"]), int(rec["u"]), int(rec["v"]),
                         float(rec["p_mw"]), float(rec["r_mw"])))
    T = max(r[1] for r in rows)
    G = grid.num_generators
    out = {k: np.zeros((G, T)) for k in ("u", "v", "p", "r")}
    for k, t, uu, vv, pp, rr in rows:
        out["u"][k, t - 1], out["v"][k, t - 1], out["p"][k, t - 1], out["r"][k, t - 1] = uu, vv, pp, rr
    return out
