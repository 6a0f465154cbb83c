"""Network-reduced swing dynamics: Laplacian, Kron reduction, outage simulation, RoCoF.

State convention: ``theta`` in rad, ``omega`` the per-unit speed deviation,
``theta' = 2*pi*f_nom*omega`` and ``m * omega' + gamma * m * omega = P - L @ theta``
with ``m`` in seconds on S_base and ``P``, ``L`` in per unit. Frequency
deviation in Hz is ``f_nom * omega``. All reported metrics are magnitudes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridModel, validate_grid


class DynamicsError(ValueError):
    pass


@dataclass
class DynamicsParams:
    gamma: float = 1.0  # damping-to-inertia ratio d_i/m_i (1/s)
    step: float = 1e-3  # s
    horizon: float = 10.0  # s
    window: float = 0.1  # RoCoF averaging window (s)
    t0: float = 0.0  # measuring time for the analytic RoCoF (s)

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.step <= 0 or self.window <= 0:
            raise ValueError("step and window must be > 0")
        if self.horizon < self.window:
            raise ValueError("horizon must be at least one RoCoF window")

    @property
    def window_steps(self) -> int:
        return max(1, int(round(self.window / self.step)))

    @property
    def num_steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass
class ReducedNetwork:
    gen_buses: list[int]  # indices into grid.buses
    L: np.ndarray
    m: np.ndarray  # per generator bus, s on S_base
    eigvals: np.ndarray = field(init=False)
    eigvecs: np.ndarray = field(init=False)  # columns are modes

    def __post_init__(self):
        lam, vec = np.linalg.eigh(self.L)
        lam[np.abs(lam) < 1e-10] = 0.0
        self.eigvals, self.eigvecs = lam, vec

    @property
    def mean_inertia(self) -> float:
        return float(np.mean(self.m))


@dataclass
class FrequencyTrace:
    t: np.ndarray  # (K,)
    bus_ids: list[int]
    delta_f: np.ndarray  # (K, buses) Hz
    rocof: np.ndarray  # (K, buses) Hz/s, trailing-window average
    tripped: int | None = None
    lost_mw: float = 0.0

    @property
    def horizon(self) -> float:
        return float(self.t[-1] - self.t[0]) if self.t.size else 0.0


def build_laplacian(g: GridModel) -> np.ndarray:
    """Susceptance Laplacian over all buses: off-diagonals ``-b_ij V_i V_j``."""
    report = [r for r in validate_grid(g) if "connected" in r or "dangling" in r]
    if report:
        raise DynamicsError("; ".join(report))
    idx = g.bus_index()
    v = g.voltages()
    n = g.num_buses
    L = np.zeros((n, n))
    for ln in g.lines:
        i, j = idx[ln.from_bus], idx[ln.to_bus]
        w = ln.susceptance * v[i] * v[j]
        L[i, j] -= w
        L[j, i] -= w
    L[np.diag_indices(n)] = -L.sum(axis=1)
    return L


def kron_reduce(L: np.ndarray, keep) -> np.ndarray:
    """Schur complement ``L_gg - L_gl L_ll^-1 L_lg`` onto the ``keep`` indices."""
    keep = list(keep)
    n = L.shape[0]
    drop = [i for i in range(n) if i not in set(keep)]
    if not drop:
        return L[np.ix_(keep, keep)].copy()
    Lgg = L[np.ix_(keep, keep)]
    Lgl = L[np.ix_(keep, drop)]
    Lll = L[np.ix_(drop, drop)]
    try:
        red = Lgg - Lgl @ np.linalg.solve(Lll, Lgl.T)
    except np.linalg.LinAlgError as exc:
        raise DynamicsError("load-bus block of the Laplacian is singular") from exc
    if not np.all(np.isfinite(red)):
        raise DynamicsError("load-bus block of the Laplacian is singular")
    return 0.5 * (red + red.T)


def reduce_injection(L: np.ndarray, keep, P: np.ndarray) -> np.ndarray:
    """Map a full-network injection onto the kept buses (load injections redistributed)."""
    keep = list(keep)
    drop = [i for i in range(L.shape[0]) if i not in set(keep)]
    out = P[keep].astype(float).copy()
    if drop and np.any(P[drop] != 0):
        Lgl = L[np.ix_(keep, drop)]
        Lll = L[np.ix_(drop, drop)]
        out -= Lgl @ np.linalg.solve(Lll, P[drop])
    return out


def aggregate_inertia(g: GridModel, commitment) -> tuple[np.ndarray, float]:
    """Per-bus inertia ``m_n`` (s on S_base) and system kinetic energy (MW*s)."""
    u = np.asarray(commitment, dtype=float)
    if u.shape != (g.num_generators,):
        raise ValueError("commitment length must equal generator count")
    idx = g.bus_index()
    m = np.zeros(g.num_buses)
    e_sys = 0.0
    for k, gen in enumerate(g.generators):
        if u[k] > 0.5:
            m[idx[gen.bus]] += gen.kinetic_mws / g.s_base_mva
            e_sys += gen.kinetic_mws
    return m, e_sys


def uniform_rocof(delta_p_mw: float, kinetic_mws: float, f_nom: float) -> float:
    """Initial RoCoF magnitude of the single-bus equivalent, Hz/s."""
    if kinetic_mws <= 0:
        raise DynamicsError("zero kinetic energy")
    return abs(delta_p_mw) * f_nom / kinetic_mws


def _rk4_maps(A: np.ndarray, b: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One classical RK4 step on ``x' = A x + b`` written as ``x -> Phi x + psi``.

    For a linear autonomous system the four stages collapse exactly to the
    degree-4 Taylor polynomial of ``h*A``; stepping with the maps is the same
    arithmetic as evaluating k1..k4 each step.
    """
    n = A.shape[0]
    hA = h * A
    I = np.eye(n)
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = I + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    psi = h * (I + hA / 2 + hA2 / 6 + hA3 / 24) @ b
    return Phi, psi


def _state_matrices(L: np.ndarray, m: np.ndarray, P: np.ndarray, gamma: float, f_nom: float):
    n = L.shape[0]
    ws = 2 * math.pi * f_nom
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = ws * np.eye(n)
    A[n:, :n] = -L / m[:, None]
    A[n:, n:] = -gamma * np.eye(n)
    b = np.concatenate([np.zeros(n), P / m])
    return A, b


def integrate_swing(L: np.ndarray, m: np.ndarray, P: np.ndarray, params: DynamicsParams,
                    f_nom: float) -> tuple[np.ndarray, np.ndarray]:
    """RK4 response to a step injection ``P`` (pu) from equilibrium.

    Returns ``(t, delta_f)`` with ``delta_f`` in Hz, shape (steps+1, buses).
    """
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0):
        raise DynamicsError("every integrated bus needs positive inertia")
    n = L.shape[0]
    A, b = _state_matrices(L, m, np.asarray(P, dtype=float), params.gamma, f_nom)
    Phi, psi = _rk4_maps(A, b, params.step)
    K = params.num_steps
    x = np.zeros(2 * n)
    out = np.empty((K + 1, n))
    out[0] = 0.0
    for k in range(1, K + 1):
        x = Phi @ x + psi
        out[k] = x[n:]
    t = np.arange(K + 1) * params.step
    return t, out * f_nom


def trailing_rocof(delta_f: np.ndarray, w: int, window: float) -> np.ndarray:
    """Window-averaged RoCoF ``(f[k] - f[k-w]) / window`` with equilibrium before t=0."""
    prev = np.zeros_like(delta_f)
    prev[w:] = delta_f[:-w]
    return (delta_f - prev) / window


def reduced_outage_system(g: GridModel, dispatch, commitment, outage: int):
    """Post-trip reduced network and step injection for tripping generator ``outage``.

    ``outage`` is the position of the generator in ``g.generators``.
    """
    u = np.asarray(commitment, dtype=float).copy()
    p = np.asarray(dispatch, dtype=float)
    if u[outage] < 0.5:
        raise DynamicsError(f"generator {g.generators[outage].id} is not committed")
    u[outage] = 0.0
    m_bus, _ = aggregate_inertia(g, u)
    keep = [i for i in range(g.num_buses) if m_bus[i] > 0]
    if not keep:
        raise DynamicsError("no inertia left on any bus after the trip")
    L = build_laplacian(g)
    Lr = kron_reduce(L, keep)
    idx = g.bus_index()
    P = np.zeros(g.num_buses)
    lost = float(p[outage])
    P[idx[g.generators[outage].bus]] = -lost / g.s_base_mva
    Pr = reduce_injection(L, keep, P)
    return ReducedNetwork(keep, Lr, m_bus[keep]), Pr, lost


def simulate_outage(g: GridModel, dispatch, commitment, outage: int,
                    p: DynamicsParams | None = None) -> FrequencyTrace:
    """Trip generator ``outage`` at t=0 and integrate the reduced swing equations."""
    p = p or DynamicsParams()
    rn, Pr, lost = reduced_outage_system(g, dispatch, commitment, outage)
    t, df = integrate_swing(rn.L, rn.m, Pr, p, g.f_nom_hz)
    rocof = trailing_rocof(df, p.window_steps, p.window)
    ids = [g.buses[i].id for i in rn.gen_buses]
    return FrequencyTrace(t, ids, df, rocof, g.generators[outage].id, lost)


def flat_trace(g: GridModel, commitment, p: DynamicsParams | None = None) -> FrequencyTrace:
    """Trace with no disturbance applied (all zeros)."""
    p = p or DynamicsParams()
    m_bus, _ = aggregate_inertia(g, commitment)
    keep = [i for i in range(g.num_buses) if m_bus[i] > 0]
    if not keep:
        raise DynamicsError("no committed inertia")
    L = kron_reduce(build_laplacian(g), keep)
    t, df = integrate_swing(L, m_bus[keep], np.zeros(len(keep)), p, g.f_nom_hz)
    return FrequencyTrace(t, [g.buses[i].id for i in keep], df,
                          trailing_rocof(df, p.window_steps, p.window))


def measure_metrics(tr: FrequencyTrace, window: float) -> tuple[float, float, tuple[int, int]]:
    """``(max |delta f|, max window-averaged |RoCoF|, (bus of first, bus of second))``."""
    if tr.t.size == 0 or tr.delta_f.size == 0:
        raise DynamicsError("empty trace")
    if window > tr.horizon + 1e-12:
        raise DynamicsError("RoCoF window longer than the trace")
    dt = float(tr.t[1] - tr.t[0])
    w = max(1, int(round(window / dt)))
    df = tr.delta_f
    dev = np.abs(df)
    k_dev = np.unravel_index(int(np.argmax(dev)), dev.shape)
    rates = np.abs(df[w:] - df[:-w]) / window
    k_rate = np.unravel_index(int(np.argmax(rates)), rates.shape)
    return (float(dev[k_dev]), float(rates[k_rate]),
            (tr.bus_ids[k_dev[1]], tr.bus_ids[k_rate[1]]))


def analytic_rocof(rn: ReducedNetwork, bus: int, delta_p: float, p: DynamicsParams,
                   f_nom: float = 60.0) -> np.ndarray:
    """Damped modal expansion of the windowed RoCoF at every generator bus.

    Assumes uniform inertia (the network's mean) and uniform damping ratio.
    ``bus`` indexes ``rn.gen_buses``; ``delta_p`` is the lost power in pu.
    Returns magnitudes in Hz/s averaged over ``[t0, t0 + window]``.
    """
    return analytic_rocof_injection(rn, _unit(len(rn.gen_buses), bus) * -abs(delta_p), p, f_nom)


def _unit(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def analytic_rocof_injection(rn: ReducedNetwork, P: np.ndarray, p: DynamicsParams,
                             f_nom: float = 60.0) -> np.ndarray:
    m = rn.mean_inertia
    ws = 2 * math.pi * f_nom
    g = p.gamma
    t0, dt = p.t0, p.window
    proj = rn.eigvecs.T @ P  # modal injections
    df0 = np.zeros(len(P))
    df1 = np.zeros(len(P))
    for a, lam in enumerate(rn.eigvals):
        if proj[a] == 0.0:
            continue
        if lam == 0.0:
            def rate(t):
                return ws * proj[a] / (m * g) * (1 - math.exp(-g * t)) if g > 0 else ws * proj[a] * t / m
        else:
            w2 = lam * ws / m - g * g / 4
            if w2 <= 0:
                raise DynamicsError(f"overdamped mode (lambda={lam:.4g}); expansion needs underdamping")
            om = math.sqrt(w2)

            def rate(t, om=om):
                return ws * proj[a] / (m * om) * math.exp(-g * t / 2) * math.sin(om * t)
        df0 += rn.eigvecs[:, a] * rate(t0) / (2 * math.pi)
        df1 += rn.eigvecs[:, a] * rate(t0 + dt) / (2 * math.pi)
    return np.abs(df1 - df0) / dt


def write_trace_csv(tr: FrequencyTrace, path, every: int = 1) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "bus", "delta_f_hz", "rocof_hz_s"])
        for k in range(0, tr.t.size, every):
            for j, bus in enumerate(tr.bus_ids):
                w.writerow([f"{tr.t[k]:.6g}", bus, f"{tr.delta_f[k, j]:.9g}", f"{tr.rocof[k, j]:.9g}"])


def batch_metrics(g: GridModel, dispatches, commitments, outages, p: DynamicsParams | None = None,
                  chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """``(delta_f_max, rocof_max)`` for many outage cases at once.

    Same RK4 maps and the same metric definitions as ``simulate_outage`` +
    ``measure_metrics``; systems are zero-padded to a common size and stepped
    together.
    """
    p = p or DynamicsParams()
    n_cases = len(outages)
    dev_out = np.zeros(n_cases)
    rcf_out = np.zeros(n_cases)
    nb = g.num_buses
    w = p.window_steps
    for s in range(0, n_cases, chunk):
        idx = range(s, min(n_cases, s + chunk))
        B = len(idx)
        Phi = np.zeros((B, 2 * nb, 2 * nb))
        psi = np.zeros((B, 2 * nb))
        for r, k in enumerate(idx):
            rn, Pr, _ = reduced_outage_system(g, dispatches[k], commitments[k], outages[k])
            A, b = _state_matrices(rn.L, rn.m, Pr, p.gamma, g.f_nom_hz)
            F, f = _rk4_maps(A, b, p.step)
            n = len(rn.gen_buses)
            sel = np.r_[0:n, nb:nb + n]
            Phi[r][np.ix_(sel, sel)] = F
            psi[r][sel] = f
        x = np.zeros((B, 2 * nb))
        hist = np.zeros((w + 1, B, nb))  # ring buffer of frequency (pu)
        dev = np.zeros(B)
        rcf = np.zeros(B)
        for k in range(1, p.num_steps + 1):
            x = np.einsum("bij,bj->bi", Phi, x) + psi
            om = x[:, nb:]
            dev = np.maximum(dev, np.abs(om).max(axis=1))
            if k >= w:
                rcf = np.maximum(rcf, np.abs(om - hist[(k - w) % (w + 1)]).max(axis=1))
            hist[k % (w + 1)] = om
        dev_out[s:s + B] = dev * g.f_nom_hz
        rcf_out[s:s + B] = rcf * g.f_nom_hz / p.window
    return dev_out, rcf_out
