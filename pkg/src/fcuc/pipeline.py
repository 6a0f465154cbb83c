"""Study orchestration: data generation, training, FCUC solves, validation, benchmark."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import predictor as P
from .grid import GridModel, Scenario, load_grid, load_scenario, sample_scenarios, validate_grid
from .milp import SolverOptions
from .nnembed import build_fcuc
from .swingdyn import DynamicsParams, batch_metrics, measure_metrics, simulate_outage, write_trace_csv
from .uc import (FcucOptions, UcError, UcInstance, read_schedule_csv, redispatch, solve_and_extract,
                 verify_schedule, write_schedule_csv)

log = logging.getLogger("fcuc")

DATA = Path(__file__).resolve().parent / "data"
MODE_ALIASES = {"tscuc": "none", "none": "none", "erc": "erc", "dnn-exact": "dnn-exact", "dnn-active": "dnn-active"}
MODE_LABELS = {"tscuc": "T-SCUC", "erc": "ERC-SCUC", "dnn-exact": "DNN-FCUC", "dnn-active": "ALSNN-FCUC"}
BENCH_MODES = ("tscuc", "erc", "dnn-exact", "dnn-active")


@dataclass
class RunConfig:
    grid: str = str(DATA / "desk_grid.json")
    scenario: str = str(DATA / "desk_scenario.csv")
    out: str = "runs/desk"
    seed: int = 0
    # data generation
    n_samples: int = 3000
    pool_size: int = 3000
    tscuc_share: float = 0.5
    perturb_fraction: float = 0.3
    mean_shift_range: tuple[float, float] = (-0.2, 0.2)
    sigma: float = 0.05
    datagen_gap: float = 0.01
    datagen_node_limit: int = 300
    # ERC schedules in datagen constrain every hour, each with a limit drawn from this range
    datagen_rocof_range: tuple[float, float] = (0.25, 0.6)
    # active sampling and training
    k_sec: int = 250
    k_insec: int = 250
    holdout: float = 0.2
    hidden: tuple[int, ...] = (32, 32)
    # non-negative weights after layer 1: relaxed ReLUs can then never lower a predicted metric
    monotone: bool = True
    train: P.TrainConfig = field(default_factory=P.TrainConfig)
    prune: P.PruneSchedule = field(default_factory=P.PruneSchedule)
    positivity_rule: str = "fraction"
    # solving and validation
    fcuc: FcucOptions = field(default_factory=FcucOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    validation_margin: float = 0.1
    hours_sweep: tuple[int, ...] = (4, 8)
    # wall-clock cap (s) for each extra solve in the hours sweep; capped runs report their status
    sweep_time_limit: float = 180.0

    def __post_init__(self):
        for name in ("n_samples", "pool_size", "k_sec", "k_insec"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.tscuc_share <= 1.0 or not 0.0 <= self.perturb_fraction <= 1.0:
            raise ValueError("shares must lie in [0, 1]")
        lo, hi = self.datagen_rocof_range
        if not 0.0 < lo <= hi:
            raise ValueError("datagen_rocof_range must satisfy 0 < lo <= hi")
        if not 0.0 < self.holdout < 1.0:
            raise ValueError("holdout must lie in (0, 1)")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


_NESTED = {"train": P.TrainConfig, "prune": P.PruneSchedule, "fcuc": FcucOptions,
           "solver": SolverOptions, "dynamics": DynamicsParams}


def config_from_dict(d: dict, base_dir: Path | None = None) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    kw = {}
    for k, v in d.items():
        if k in _NESTED:
            kw[k] = _NESTED[k](**v)
        elif k in ("mean_shift_range", "hidden", "hours_sweep", "datagen_rocof_range"):
            kw[k] = tuple(v)
        elif k in ("grid", "scenario", "out") and base_dir is not None and not Path(v).is_absolute():
            kw[k] = str((base_dir / v).resolve()) if k != "out" else v
        else:
            kw[k] = v
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path) as fh:
        return config_from_dict(json.load(fh), path.parent)


def config_to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["fcuc"]["periods"] = list(cfg.fcuc.periods)
    return d


# ---------------------------------------------------------------- shared helpers


def _load_instance(cfg: RunConfig) -> tuple[GridModel, Scenario]:
    for p in (cfg.grid, cfg.scenario):
        if not Path(p).exists():
            raise FileNotFoundError(p)
    g = load_grid(cfg.grid)
    problems = validate_grid(g)
    if problems:
        raise ValueError("invalid grid: " + "; ".join(problems))
    return g, load_scenario(cfg.scenario, g)


def _update_report(cfg: RunConfig, key: str, value) -> None:
    path = cfg.out_dir / "run_report.json"
    report = {}
    if path.exists():
        with open(path) as fh:
            report = json.load(fh)
    report[key] = value
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _p_max(g: GridModel) -> np.ndarray:
    return np.array([gen.p_max for gen in g.generators])


def label_features(g: GridModel, X: np.ndarray, dyn: DynamicsParams) -> tuple[np.ndarray, np.ndarray]:
    """Oracle labels for feature rows: trip the unit named by the disturbance block."""
    n = g.num_generators
    U, D, Pw = X[:, :n], X[:, n:2 * n], X[:, 2 * n:3 * n]
    outages = [int(np.argmax(d)) for d in D]
    return batch_metrics(g, Pw, U, outages, dyn)


def _samples(X, dev, rcf, opts: FcucOptions) -> list[P.LabeledSample]:
    return [P.LabeledSample(x, float(a), float(b), P.security_flag(a, b, opts.deviation_limit, opts.rocof_lim))
            for x, a, b in zip(X, dev, rcf)]


def _perturb(g: GridModel, net_load, u, rng, tries: int = 5):
    """Flip up to three commitments and redispatch, half the time at randomly scaled prices.

    Returns None if no feasible variant is found.
    """
    n = u.size
    base = np.array([gen.cost for gen in g.generators])
    for _ in range(tries):
        v = u.copy()
        n_flip = int(rng.integers(0, 4))
        flips = rng.choice(n, size=n_flip, replace=False)
        v[flips] = 1.0 - v[flips]
        if v.sum() == 0:
            continue
        costs = base * np.exp(rng.normal(0.0, 0.5, n)) if n_flip == 0 or rng.random() < 0.5 else None
        p = redispatch(g, net_load, v, costs=costs)
        if p is not None and np.any(p[v > 0.5] > 0):
            return v, p
    return None


def _hour_states(g: GridModel, scenarios, cfg: RunConfig, rng, stats: dict) -> list[np.ndarray]:
    """Feature rows from T-SCUC / ERC-SCUC schedules of the given scenarios."""
    opts = replace(cfg.solver, gap=cfg.datagen_gap, node_limit=cfg.datagen_node_limit)
    rows = []
    for k, sc in enumerate(scenarios):
        mode = "none" if rng.random() < cfg.tscuc_share else "erc"
        lo, hi = cfg.datagen_rocof_range
        fo = replace(cfg.fcuc, mode=mode, periods=tuple(range(1, sc.horizon + 1)),
                     rocof_lim=float(rng.uniform(lo, hi)))
        try:
            sol = solve_and_extract(build_fcuc(UcInstance(g, sc), fo), opts)
        except UcError as exc:
            log.warning("scenario %d (%s) skipped: %s", k, mode, exc)
            stats["skipped"] += 1
            continue
        stats[mode] += 1
        net = sc.demand - sc.res
        for t in range(sc.horizon):
            u, p = sol.u[:, t], sol.p[:, t]
            if rng.random() < cfg.perturb_fraction:
                alt = _perturb(g, net[:, t], u, rng)
                if alt is not None:
                    u, p = alt
                    stats["perturbed"] += 1
            rows.append(P.feature_vector(u, np.where(u > 0.5, p, 0.0)))
    return rows


def _collect(g, base, cfg: RunConfig, count: int, seed: int, stats: dict) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rows: list[np.ndarray] = []
    batch = 0
    while len(rows) < count:
        need = -(-(count - len(rows)) // base.horizon)
        scen = sample_scenarios(g, base, need, cfg.mean_shift_range, cfg.sigma, seed=seed * 7919 + batch)
        rows.extend(_hour_states(g, scen, cfg, rng, stats))
        batch += 1
        if batch > 50:
            raise RuntimeError("could not collect enough feasible scenario states")
    return np.array(rows[:count])


# ---------------------------------------------------------------- commands


def cmd_datagen(cfg: RunConfig) -> dict:
    """Labeled dataset plus an unlabeled pool for active sampling."""
    g, base = _load_instance(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    stats = {"none": 0, "erc": 0, "skipped": 0, "perturbed": 0}
    X = _collect(g, base, cfg, cfg.n_samples, cfg.seed, stats)
    dev, rcf = label_features(g, X, cfg.dynamics)
    samples = _samples(X, dev, rcf, cfg.fcuc)
    P.save_dataset(samples, cfg.out_dir / "dataset.jsonl")
    pool = _collect(g, base, cfg, cfg.pool_size, cfg.seed + 1, stats) if cfg.pool_size else np.zeros((0, X.shape[1]))
    with open(cfg.out_dir / "pool.jsonl", "w") as fh:
        for x in pool:
            fh.write(json.dumps({"x": [float(v) for v in x]}) + "\n")
    summary = {
        "samples": len(samples), "pool": int(pool.shape[0]),
        "secure": int(sum(s.f_sec for s in samples)),
        "tscuc_schedules": stats["none"], "erc_schedules": stats["erc"],
        "skipped_scenarios": stats["skipped"], "perturbed_states": stats["perturbed"],
    }
    _update_report(cfg, "datagen", summary)
    log.info("datagen: %s in %.1f s", summary, time.perf_counter() - t0)
    return summary


def _load_pool(path) -> np.ndarray:
    with open(path) as fh:
        rows = [json.loads(line)["x"] for line in fh if line.strip()]
    return np.array(rows, dtype=float)


def cmd_train(cfg: RunConfig) -> dict:
    """Discriminator, active selection, dense then sparse training, bounds and activity."""
    g, _ = _load_instance(cfg)
    out = cfg.out_dir
    data_path = out / "dataset.jsonl"
    if not data_path.exists():
        raise FileNotFoundError(f"{data_path} (run datagen first)")
    samples = P.load_dataset(data_path)
    X, Y, sec = P.dataset_arrays(samples)
    tr_idx, ho_idx = P.split_indices(len(samples), cfg.holdout, cfg.seed)
    Xtr, Ytr, sec_tr = X[tr_idx], Y[tr_idx], sec[tr_idx]

    disc = P.train_discriminator(Xtr, sec_tr, seed=cfg.seed)
    added = 0
    pool_path = out / "pool.jsonl"
    if cfg.k_sec + cfg.k_insec > 0:
        pool = _load_pool(pool_path)
        hi, lo = P.select_samples(disc, pool, cfg.k_sec, cfg.k_insec)
        chosen = pool[np.concatenate([hi, lo])]
        dev, rcf = label_features(g, chosen, cfg.dynamics)
        new = _samples(chosen, dev, rcf, cfg.fcuc)
        P.save_dataset(new, out / "selected.jsonl")
        Xn, Yn, _ = P.dataset_arrays(new)
        Xtr, Ytr = np.vstack([Xtr, Xn]), np.vstack([Ytr, Yn])
        added = len(new)

    box = P.feature_box(_p_max(g))
    m = P.init_predictor(X.shape[1], cfg.hidden, seed=cfg.seed, monotone=cfg.monotone)
    P.fit_scaling(m, Xtr, box)
    m.head_b = Ytr.mean(axis=0)
    dense_losses = P.train_dense(m, Xtr, Ytr, cfg.train, seed=cfg.seed)
    dense = P.predictor_from_dict(P.predictor_to_dict(m))
    _finish_predictor(dense, box, Xtr, cfg)
    P.save_predictor(dense, out / "model_dense.json")

    sparse_losses = P.train_sparse(m, Xtr, Ytr, cfg.prune, seed=cfg.seed + 1, momentum=cfg.train.momentum)
    _finish_predictor(m, box, Xtr, cfg)
    P.save_predictor(m, out / "model.json")

    sweep = P.tolerance_sweep(m, X[ho_idx], Y[ho_idx])
    with open(out / "accuracy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tolerance", "rocof_pct", "deviation_pct", "dense_rocof_pct", "dense_deviation_pct"])
        for row, drow in zip(sweep, P.tolerance_sweep(dense, X[ho_idx], Y[ho_idx])):
            w.writerow([f"{row['tolerance']:.2f}", f"{row['rocof_pct']:.2f}", f"{row['deviation_pct']:.2f}",
                        f"{drow['rocof_pct']:.2f}", f"{drow['deviation_pct']:.2f}"])
    summary = {
        "train_samples": int(Xtr.shape[0]), "holdout_samples": int(ho_idx.size), "selected": added,
        "dense_final_loss": dense_losses[-1] if dense_losses else None,
        "sparse_final_loss": sparse_losses[-1] if sparse_losses else None,
        "layer_sparsity": m.layer_sparsity(),
        "active_neurons": [int(a.sum()) for a in m.active],
        "holdout_accuracy": sweep,
        "fingerprint": m.fingerprint,
    }
    _update_report(cfg, "train", summary)
    return summary


def _finish_predictor(m: P.MlpPredictor, box, X, cfg: RunConfig) -> None:
    m.lb, m.ub = P.compute_neuron_bounds(m, *box)
    m.eps = P.positivity_index(m, X, cfg.positivity_rule)
    m.active = P.select_active_neurons(m.eps, cfg.fcuc.gamma_select)
    m.fingerprint = P.config_fingerprint(P.train_config_dict(cfg.train, cfg.prune, cfg.hidden, cfg.seed))


def _solve_mode(cfg: RunConfig, g: GridModel, sc: Scenario, mode: str, pred=None, periods=None):
    key = MODE_ALIASES[mode]
    fo = replace(cfg.fcuc, mode=key, periods=periods or cfg.fcuc.periods)
    t0 = time.perf_counter()
    uc = build_fcuc(UcInstance(g, sc), fo, pred)
    sol = solve_and_extract(uc, cfg.solver)
    wall = time.perf_counter() - t0
    info = {
        "mode": mode, "objective": sol.objective, "status": sol.status.value, "wall_time_s": wall,
        "gap": sol.stats["gap"], "nodes": sol.stats["nodes"], "binaries": sol.stats["binaries"],
        "variables": sol.stats["variables"], "constraints": sol.stats["constraints"],
        "nonzeros": uc.milp.nonzeros(),
    }
    emb = uc.extras.get("embedding")
    if emb is not None:
        info["encoding"] = emb.report(uc.milp)
    return sol, info


def _load_model(cfg: RunConfig, mode: str):
    if mode not in ("dnn-exact", "dnn-active"):
        return None
    path = cfg.out_dir / "model.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} (run train first)")
    return P.load_predictor(path)


def cmd_solve(cfg: RunConfig, mode: str) -> dict:
    if mode not in MODE_LABELS:
        raise ValueError(f"mode must be one of {tuple(MODE_LABELS)}")
    g, sc = _load_instance(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    sol, info = _solve_mode(cfg, g, sc, mode, _load_model(cfg, mode))
    write_schedule_csv(sol, g, cfg.out_dir / f"schedule_{mode}.csv")
    _update_report(cfg, f"solve_{mode}", info)
    return info


def worst_outage(g: GridModel, u, p, dyn: DynamicsParams, tol: float = 1e-6):
    """Trip the highest-output committed unit; among near-ties keep the worst trace."""
    u = np.asarray(u, float)
    p = np.where(u > 0.5, np.asarray(p, float), -np.inf)
    top = p.max()
    best = None
    for k in np.flatnonzero(p >= top - tol):
        tr = simulate_outage(g, np.where(u > 0.5, p, 0.0), u, int(k), dyn)
        dev, rcf, _ = measure_metrics(tr, dyn.window)
        if best is None or (rcf, dev) > (best[2], best[1]):
            best = (tr, dev, rcf)
    return best


def validate_schedule(cfg: RunConfig, g: GridModel, u, p, periods, trace_dir: Path | None = None) -> dict:
    """Re-simulate the worst outage at each constrained hour and apply the tolerance band."""
    dev_lim = cfg.fcuc.deviation_limit * (1 + cfg.validation_margin)
    rcf_lim = cfg.fcuc.rocof_lim * (1 + cfg.validation_margin)
    hours = []
    for t in periods:
        tr, dev, rcf = worst_outage(g, u[:, t - 1], p[:, t - 1], cfg.dynamics)
        ok = dev <= dev_lim and rcf <= rcf_lim
        hours.append({"hour": t, "tripped": tr.tripped, "lost_mw": tr.lost_mw, "delta_f_max_hz": dev,
                      "rocof_max_hz_s": rcf, "pass": bool(ok)})
        if trace_dir is not None:
            write_trace_csv(tr, trace_dir / f"trace_{t}.csv", every=10)
    return {
        "hours": hours,
        "rocof_max_hz_s": max(h["rocof_max_hz_s"] for h in hours),
        "delta_f_max_hz": max(h["delta_f_max_hz"] for h in hours),
        "all_pass": all(h["pass"] for h in hours),
    }


def cmd_validate(cfg: RunConfig, schedule) -> dict:
    g, sc = _load_instance(cfg)
    sched = read_schedule_csv(schedule, g)
    if sched["u"].shape[1] != sc.horizon:
        raise ValueError("schedule horizon differs from the scenario")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rep = validate_schedule(cfg, g, sched["u"], sched["p"], cfg.fcuc.periods, cfg.out_dir)
    rep["schedule"] = str(schedule)
    _update_report(cfg, f"validate_{Path(schedule).stem}", rep)
    return rep


def _sweep_periods(base: tuple[int, ...], n: int, horizon: int) -> tuple[int, ...]:
    """``n`` consecutive hours grown symmetrically around the configured window."""
    lo, hi = min(base), max(base)
    while hi - lo + 1 < n:
        if lo > 1:
            lo -= 1
        if hi - lo + 1 < n and hi < horizon:
            hi += 1
        if lo == 1 and hi == horizon:
            break
    return tuple(range(lo, hi + 1))


def cmd_benchmark(cfg: RunConfig) -> dict:
    """All four modes on one instance, validated, plus a constrained-hours timing sweep."""
    g, sc = _load_instance(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    times, statuses = {}, {}
    for mode in BENCH_MODES:
        pred = _load_model(cfg, mode)
        try:
            sol, info = _solve_mode(cfg, g, sc, mode, pred)
        except UcError as exc:
            rows.append({"model": MODE_LABELS[mode], "mode": mode, "status": f"failed: {exc}"})
            continue
        write_schedule_csv(sol, g, cfg.out_dir / f"schedule_{mode}.csv")
        times[mode], statuses[mode] = info["wall_time_s"], info["status"]
        val = validate_schedule(cfg, g, sol.u, sol.p, cfg.fcuc.periods)
        rows.append({"model": MODE_LABELS[mode], "mode": mode, "status": info["status"],
                     "cost": info["objective"], "time_s": info["wall_time_s"], "gap": info["gap"],
                     "binaries": info["binaries"], "nn_nonzeros": info.get("encoding", {}).get("nn_nonzeros", 0),
                     "rocof_max_hz_s": val["rocof_max_hz_s"], "delta_f_max_hz": val["delta_f_max_hz"],
                     "hours_pass": "".join("P" if h["pass"] else "F" for h in val["hours"]),
                     "all_pass": val["all_pass"]})
    with open(cfg.out_dir / "benchmark.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["model", "status", "cost", "time_s", "rocof_max_hz_s", "delta_f_max_hz", "hours_pass",
                "binaries", "nn_nonzeros"]
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])

    sweep = []
    sweep_cfg = replace(cfg, solver=replace(cfg.solver, time_limit=min(cfg.solver.time_limit, cfg.sweep_time_limit)))
    for n in cfg.hours_sweep:
        periods = _sweep_periods(cfg.fcuc.periods, n, sc.horizon)
        entry = {"hours": len(periods), "periods": list(periods)}
        for mode in ("dnn-exact", "dnn-active"):
            if periods == cfg.fcuc.periods and mode in times:
                entry[mode] = times[mode]  # same model as the main table
                entry[f"{mode}_status"] = statuses[mode]
                continue
            try:
                _, info = _solve_mode(sweep_cfg, g, sc, mode, _load_model(cfg, mode), periods)
                entry[mode], entry[f"{mode}_status"] = info["wall_time_s"], info["status"]
            except UcError as exc:
                # a capped run without an incumbent still spent the full budget
                entry[mode], entry[f"{mode}_status"] = sweep_cfg.solver.time_limit, f"failed: {exc}"
        sweep.append(entry)
    with open(cfg.out_dir / "benchmark_hours.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["hours", "dnn_exact_time_s", "dnn_exact_status", "dnn_active_time_s", "dnn_active_status"])
        for e in sweep:
            w.writerow([e["hours"], _fmt(e["dnn-exact"]), e["dnn-exact_status"],
                        _fmt(e["dnn-active"]), e["dnn-active_status"]])
    report = {"rows": rows, "hours_sweep": sweep}
    _update_report(cfg, "benchmark", report)
    return report


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}" if abs(v) < 100 else f"{v:.2f}"
    return str(v)


# ---------------------------------------------------------------- CLI


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fcuc", description="Frequency-constrained unit commitment study runner")
    ap.add_argument("command", choices=["datagen", "train", "solve", "validate", "benchmark"])
    ap.add_argument("--config", type=Path, default=DATA / "desk_config.json")
    ap.add_argument("--mode", choices=list(MODE_LABELS), default="dnn-active")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", type=Path, default=None)
    ap.add_argument("--schedule", type=Path, default=None, help="schedule CSV for validate")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=str(args.out))
    if args.command == "datagen":
        res = cmd_datagen(cfg)
    elif args.command == "train":
        res = cmd_train(cfg)
    elif args.command == "solve":
        res = cmd_solve(cfg, args.mode)
    elif args.command == "validate":
        sched = args.schedule or cfg.out_dir / f"schedule_{args.mode}.csv"
        res = cmd_validate(cfg, sched)
    else:
        res = cmd_benchmark(cfg)
    json.dump(res, sys.stdout, indent=2, default=str)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
