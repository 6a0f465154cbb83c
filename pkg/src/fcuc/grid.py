"""Static grid data, validation, and load/RES scenario sampling."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class GridSchemaError(ValueError):
    pass


@dataclass
class Bus:
    id: int
    v_pu: float = 1.0
    name: str = ""


@dataclass
class Generator:
    id: int
    bus: int
    cost: float  # $/MWh
    no_load_cost: float  # $/h
    startup_cost: float  # $
    reserve_cost: float  # $/MWh
    p_min: float  # MW
    p_max: float  # MW
    ramp: float  # MW/h
    reserve_ramp: float  # MW
    min_up: int  # h
    min_down: int  # h
    inertia_h: float  # s, machine base
    rating_mva: float
    initial_status: int = 0
    initial_output: float = 0.0

    @property
    def kinetic_mws(self) -> float:
        """Stored kinetic energy 2*H*S_B at rated speed (MW*s)."""
        return 2.0 * self.inertia_h * self.rating_mva


@dataclass
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float  # pu on S_base
    p_max: float  # MW


@dataclass
class GridModel:
    buses: list[Bus]
    lines: list[Line]
    generators: list[Generator]
    s_base_mva: float = 100.0
    f_nom_hz: float = 60.0

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def num_buses(self) -> int:
        return len(self.buses)

    @property
    def num_generators(self) -> int:
        return len(self.generators)

    def counts(self) -> tuple[int, int, int]:
        return len(self.buses), len(self.lines), len(self.generators)

    def voltages(self) -> np.ndarray:
        return np.array([b.v_pu for b in self.buses], dtype=float)


@dataclass
class Scenario:
    """Hourly demand and RES injection, shape (num buses, horizon)."""

    demand: np.ndarray
    res: np.ndarray
    seed: int | None = None
    # per-bus relative mean shifts the scenario was drawn with (None for base profiles)
    demand_shift: np.ndarray | None = field(default=None, repr=False)
    res_shift: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=float)
        self.res = np.asarray(self.res, dtype=float)
        if self.demand.ndim != 2 or self.demand.shape != self.res.shape:
            raise ValueError("demand and res must be equal-shape (bus x period) matrices")
        if np.any(self.demand < 0) or np.any(self.res < 0):
            raise ValueError("demand and res must be non-negative")

    @property
    def horizon(self) -> int:
        return self.demand.shape[1]

    def net_load(self) -> np.ndarray:
        return (self.demand - self.res).sum(axis=0)


_REQUIRED = {
    "buses": ("id",),
    "lines": ("id", "from_bus", "to_bus", "susceptance", "p_max"),
    "generators": tuple(f.name for f in fields(Generator) if f.name not in ("initial_status", "initial_output")),
}


def _build(cls, raw: dict, kind: str, idx: int):
    if not isinstance(raw, dict):
        raise GridSchemaError(f"{kind}[{idx}] must be an object")
    missing = [k for k in _REQUIRED[kind] if k not in raw]
    if missing:
        raise GridSchemaError(f"{kind}[{idx}] missing required field(s): {', '.join(missing)}")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise GridSchemaError(f"{kind}[{idx}] has unknown field(s): {', '.join(sorted(unknown))}")
    return cls(**raw)


def grid_from_dict(data: dict) -> GridModel:
    if not isinstance(data, dict):
        raise GridSchemaError("grid file must hold a JSON object")
    for key in ("buses", "lines", "generators"):
        if key not in data:
            raise GridSchemaError(f"missing top-level key {key!r}")
    buses = [_build(Bus, b, "buses", i) for i, b in enumerate(data["buses"])]
    lines = [_build(Line, ln, "lines", i) for i, ln in enumerate(data["lines"])]
    gens = [_build(Generator, g, "generators", i) for i, g in enumerate(data["generators"])]
    return GridModel(
        buses=buses, lines=lines, generators=gens,
        s_base_mva=float(data.get("s_base_mva", 100.0)),
        f_nom_hz=float(data.get("f_nom_hz", 60.0)),
    )


def grid_to_dict(g: GridModel) -> dict:
    return {
        "s_base_mva": g.s_base_mva,
        "f_nom_hz": g.f_nom_hz,
        "buses": [asdict(b) for b in g.buses],
        "lines": [asdict(ln) for ln in g.lines],
        "generators": [asdict(gen) for gen in g.generators],
    }


def load_grid(path) -> GridModel:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GridSchemaError(f"cannot parse grid file {path}: {exc}") from exc
    return grid_from_dict(data)


def save_grid(g: GridModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(grid_to_dict(g), fh, indent=2)
        fh.write("\n")


def validate_grid(g: GridModel) -> list[str]:
    """Return a list of problems; an empty list means the grid is usable."""
    report: list[str] = []
    ids = g.bus_ids
    known = set(ids)
    if len(known) != len(ids):
        report.append("duplicate bus id")
    if g.f_nom_hz <= 0:
        report.append("nominal frequency must be positive")
    if g.s_base_mva <= 0:
        report.append("system base must be positive")
    for b in g.buses:
        if b.v_pu <= 0:
            report.append(f"bus {b.id}: non-positive voltage magnitude")
    for ln in g.lines:
        if ln.from_bus not in known or ln.to_bus not in known:
            report.append(f"line {ln.id}: dangling bus reference")
        if ln.from_bus == ln.to_bus:
            report.append(f"line {ln.id}: self loop")
        if ln.susceptance <= 0:
            report.append(f"line {ln.id}: non-positive susceptance")
        if ln.p_max <= 0:
            report.append(f"line {ln.id}: non-positive thermal limit")
    for gen in g.generators:
        if gen.bus not in known:
            report.append(f"generator {gen.id}: dangling bus reference")
        if gen.p_min < 0:
            report.append(f"generator {gen.id}: negative minimum output")
        if gen.p_min > gen.p_max:
            report.append(f"generator {gen.id}: inverted capacity bounds")
        if gen.inertia_h <= 0:
            report.append(f"generator {gen.id}: non-positive inertia constant")
        if gen.rating_mva <= 0:
            report.append(f"generator {gen.id}: non-positive rating")
        if gen.min_up < 1 or gen.min_down < 1:
            report.append(f"generator {gen.id}: minimum up/down time below 1 h")
        if min(gen.cost, gen.no_load_cost, gen.startup_cost, gen.reserve_cost) < 0:
            report.append(f"generator {gen.id}: negative cost")
        if gen.ramp < 0 or gen.reserve_ramp < 0:
            report.append(f"generator {gen.id}: negative ramp limit")
    if g.buses and not any("dangling" in r for r in report) and not is_connected(g):
        report.append("network is not connected")
    return report


def is_connected(g: GridModel) -> bool:
    n = g.num_buses
    if n <= 1:
        return True
    idx = g.bus_index()
    rows = [idx[ln.from_bus] for ln in g.lines]
    cols = [idx[ln.to_bus] for ln in g.lines]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


def load_scenario(path, g: GridModel) -> Scenario:
    """Read a ``bus,period,demand_mw,res_mw`` CSV (periods numbered from 1)."""
    idx = g.bus_index()
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["bus", "period", "demand_mw", "res_mw"]
        if reader.fieldnames != expected:
            raise GridSchemaError(f"scenario header must be {','.join(expected)}")
        for r in reader:
            rows.append((int(r["bus"]), int(r["period"]), float(r["demand_mw"]), float(r["res_mw"])))
    horizon = max((p for _, p, _, _ in rows), default=0)
    demand = np.zeros((g.num_buses, horizon))
    res = np.zeros((g.num_buses, horizon))
    for bus, p, d, e in rows:
        if bus not in idx:
            raise GridSchemaError(f"scenario references unknown bus {bus}")
        if p < 1:
            raise GridSchemaError("periods are numbered from 1")
        demand[idx[bus], p - 1] = d
        res[idx[bus], p - 1] = e
    return Scenario(demand, res)


def save_scenario(s: Scenario, g: GridModel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bus", "period", "demand_mw", "res_mw"])
        for i, b in enumerate(g.buses):
            for t in range(s.horizon):
                w.writerow([b.id, t + 1, repr(float(s.demand[i, t])), repr(float(s.res[i, t]))])


def sample_scenarios(g: GridModel, base: Scenario, count: int,
                     mean_shift_range: tuple[float, float] = (-0.2, 0.2),
                     sigma: float = 0.05, seed: int = 0) -> list[Scenario]:
    """Gaussian load/RES scenarios around per-bus shifted means.

    Each scenario draws a relative mean shift per bus (separately for demand
    and RES) uniformly from ``mean_shift_range``; hourly values are then
    Gaussian around ``base * (1 + shift)`` with standard deviation
    ``sigma * base`` and clipped at zero.
    """
    lo, hi = mean_shift_range
    if lo > hi:
        raise ValueError(f"invalid mean shift range ({lo}, {hi})")
    if lo < -0.5 or hi > 0.5:
        raise ValueError("mean shift range must lie within [-0.5, 0.5]")
    if count < 0 or sigma < 0:
        raise ValueError("count and sigma must be non-negative")
    if base.demand.shape[0] != g.num_buses:
        raise ValueError("base scenario bus count differs from grid")
    rng = np.random.default_rng(seed)
    out = []
    n, T = base.demand.shape
    for k in range(count):
        d_shift = rng.uniform(lo, hi, size=n)
        e_shift = rng.uniform(lo, hi, size=n)
        d_mean = base.demand * (1.0 + d_shift)[:, None]
        e_mean = base.res * (1.0 + e_shift)[:, None]
        demand = np.maximum(d_mean + sigma * base.demand * rng.standard_normal((n, T)), 0.0)
        res = np.maximum(e_mean + sigma * base.res * rng.standard_normal((n, T)), 0.0)
        out.append(Scenario(demand, res, seed=seed * 1_000_003 + k, demand_shift=d_shift, res_shift=e_shift))
    return out
