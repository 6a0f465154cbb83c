import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factories import gen, grid, line, six_bus_grid
from fcuc.swingdyn import (DynamicsError, DynamicsParams, FrequencyTrace, ReducedNetwork, aggregate_inertia,
                           analytic_rocof, analytic_rocof_injection, batch_metrics, build_laplacian, flat_trace,
                           integrate_swing, kron_reduce, measure_metrics, reduced_outage_system, simulate_outage,
                           uniform_rocof, write_trace_csv)


def three_gen_grid():
    """Three equal machines meshed through two load buses, plus a unit to trip at bus 1."""
    lines = [line(1, 1, 4, 8.0), line(2, 2, 4, 6.0), line(3, 3, 5, 7.0), line(4, 4, 5, 5.0), line(5, 1, 2, 4.0)]
    gens = [gen(1, 1, h=5.0), gen(2, 2, h=5.0), gen(3, 3, h=5.0), gen(4, 1, h=3.0, mva=50.0)]
    return grid(5, lines, gens)


# ---------------------------------------------------------------- network


def test_two_bus_laplacian():
    g = grid(2, [line(1, 1, 2, 5.0)], [gen(1, 1)])
    np.testing.assert_array_equal(build_laplacian(g), [[5.0, -5.0], [-5.0, 5.0]])


def test_laplacian_rows_sum_to_zero():
    L = build_laplacian(six_bus_grid())
    np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-12)


def test_unit_voltages_leave_laplacian_unchanged():
    g = six_bus_grid()
    L = build_laplacian(g)
    for b in g.buses:
        b.v_pu = 1.0
    np.testing.assert_array_equal(build_laplacian(g), L)


def test_voltage_profile_scales_weights():
    g = grid(2, [line(1, 1, 2, 5.0)], [gen(1, 1)])
    g.buses[0].v_pu, g.buses[1].v_pu = 1.1, 0.9
    assert build_laplacian(g)[0, 1] == pytest.approx(-5.0 * 0.99)


def test_chain_kron_reduction():
    g = grid(3, [line(1, 1, 2, 1.0), line(2, 2, 3, 1.0)], [gen(1, 1)])
    red = kron_reduce(build_laplacian(g), [0, 2])
    np.testing.assert_allclose(red, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)


def test_kron_without_load_buses_is_identity():
    L = build_laplacian(six_bus_grid())
    np.testing.assert_array_equal(kron_reduce(L, range(6)), L)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), keep_n=st.integers(1, 5))
def test_kron_rows_sum_to_zero(seed, keep_n):
    rng = np.random.default_rng(seed)
    n = 6
    W = np.triu(rng.uniform(0.1, 5.0, (n, n)) * (rng.random((n, n)) < 0.6), 1)
    W[np.arange(n - 1), np.arange(1, n)] += 1.0  # chain keeps it connected
    W = W + W.T
    L = np.diag(W.sum(axis=1)) - W
    keep = sorted(rng.choice(n, size=keep_n, replace=False))
    red = kron_reduce(L, keep)
    np.testing.assert_allclose(red.sum(axis=1), 0.0, atol=1e-9)
    np.testing.assert_allclose(red, red.T, atol=1e-12)


# ---------------------------------------------------------------- inertia


def test_single_unit_inertia():
    g = grid(1, [], [gen(1, 1, h=5.0, mva=100.0)])
    m, e = aggregate_inertia(g, [1])
    assert e == pytest.approx(1000.0)
    assert m[0] == pytest.approx(10.0)


def test_all_off_has_no_energy():
    _, e = aggregate_inertia(six_bus_grid(), [0, 0, 0])
    assert e == 0.0


def test_identical_units_add():
    g = grid(1, [], [gen(1, 1), gen(2, 1)])
    one, _ = aggregate_inertia(g, [1, 0])
    two, _ = aggregate_inertia(g, [1, 1])
    assert two[0] == pytest.approx(2 * one[0])


def test_uniform_rocof_values():
    assert uniform_rocof(100.0, 2000.0, 60.0) == pytest.approx(3.0)
    assert uniform_rocof(0.0, 2000.0, 60.0) == 0.0
    assert uniform_rocof(100.0, 4000.0, 60.0) == pytest.approx(1.5)
    with pytest.raises(DynamicsError):
        uniform_rocof(1.0, 0.0, 60.0)


# ---------------------------------------------------------------- simulation


def test_flat_trace_without_trip():
    tr = flat_trace(six_bus_grid(), [1, 1, 1], DynamicsParams(horizon=1.0))
    assert np.all(tr.delta_f == 0.0)
    assert measure_metrics(tr, 0.1)[:2] == (0.0, 0.0)


def test_single_machine_closed_form():
    # surviving unit: H=5 s on 100 MVA -> M = 10 s; tripped unit carries 1 pu
    g = grid(1, [], [gen(1, 1, h=5.0), gen(2, 1, h=2.0)])
    p = DynamicsParams(gamma=0.1, horizon=5.0)
    tr = simulate_outage(g, [20.0, 100.0], [1, 1], 1, p)
    M, D = 10.0, 0.1 * 10.0
    closed = -(1.0 / D) * (1 - np.exp(-D * tr.t / M))
    assert np.max(np.abs(tr.delta_f[:, 0] / 60.0 - closed)) < 1e-4
    # one RK4 step resolves the initial slope 1*60/10 = 6 Hz/s
    slope = -(tr.delta_f[1, 0] - tr.delta_f[0, 0]) / p.step
    assert slope == pytest.approx(6.0, rel=1e-3)


def test_symmetric_pair_traces_identical():
    # gen - tripped unit - gen on a symmetric chain
    g = grid(3, [line(1, 1, 2, 4.0), line(2, 2, 3, 4.0)], [gen(1, 1), gen(2, 3), gen(3, 2, h=2.0)])
    tr = simulate_outage(g, [30.0, 30.0, 50.0], [1, 1, 1], 2, DynamicsParams(horizon=2.0))
    assert tr.bus_ids == [1, 3]
    np.testing.assert_allclose(tr.delta_f[:, 0], tr.delta_f[:, 1], atol=1e-12)
    rn, P, _ = reduced_outage_system(g, [30.0, 30.0, 50.0], [1, 1, 1], 2)
    an = analytic_rocof_injection(rn, P, DynamicsParams(horizon=2.0))
    assert an[0] == pytest.approx(an[1])


def test_tripping_uncommitted_unit_is_error():
    with pytest.raises(DynamicsError):
        simulate_outage(six_bus_grid(), [50.0, 0.0, 0.0], [1, 0, 0], 1)


def test_undamped_coi_conservation():
    g = three_gen_grid()
    p = DynamicsParams(gamma=0.0, horizon=2.0)
    rn, P, _ = reduced_outage_system(g, [50.0, 60.0, 40.0, 80.0], np.ones(4), 3)
    t, df = integrate_swing(rn.L, rn.m, P, p, 60.0)
    coi = (df / 60.0) @ rn.m
    np.testing.assert_allclose(coi, P.sum() * t, atol=1e-6)


# ---------------------------------------------------------------- metrics


def _ramp(rate=-0.5, horizon=1.0, dt=1e-3):
    t = np.arange(int(round(horizon / dt)) + 1) * dt
    df = (rate * t)[:, None]
    return FrequencyTrace(t, [1], df, np.full_like(df, rate))


def test_constant_trace_metrics():
    tr = _ramp(rate=0.0)
    assert measure_metrics(tr, 0.1)[:2] == (0.0, 0.0)


def test_linear_ramp_metrics():
    dev, rate, buses = measure_metrics(_ramp(), 0.1)
    assert dev == pytest.approx(0.5)
    assert rate == pytest.approx(0.5)
    assert buses == (1, 1)


def test_window_longer_than_trace():
    with pytest.raises(DynamicsError):
        measure_metrics(_ramp(), 5.0)


def test_trace_csv_columns(tmp_path):
    path = tmp_path / "tr.csv"
    write_trace_csv(_ramp(), path, every=100)
    assert path.read_text().splitlines()[0] == "t_s,bus,delta_f_hz,rocof_hz_s"


# ---------------------------------------------------------------- analytic RoCoF


def test_analytic_zero_disturbance():
    rn = ReducedNetwork([0, 1], np.array([[1.0, -1.0], [-1.0, 1.0]]), np.array([10.0, 10.0]))
    np.testing.assert_array_equal(analytic_rocof(rn, 0, 0.0, DynamicsParams()), [0.0, 0.0])


@pytest.mark.parametrize("gamma", [0.5, 1.0])
def test_analytic_matches_ode_first_window(gamma):
    g = three_gen_grid()
    p = DynamicsParams(gamma=gamma, horizon=2.0)
    dispatch, u = [50.0, 60.0, 40.0, 80.0], np.ones(4)
    rn, P, lost = reduced_outage_system(g, dispatch, u, 3)
    tr = simulate_outage(g, dispatch, u, 3, p)
    ode = np.abs(tr.rocof[p.window_steps])
    an = analytic_rocof(rn, 0, lost / g.s_base_mva, p)
    np.testing.assert_allclose(an, ode, rtol=0.02)


def test_analytic_max_over_windows_matches_measured():
    g = three_gen_grid()
    p = DynamicsParams(gamma=1.0, horizon=2.0)
    dispatch, u = [50.0, 60.0, 40.0, 80.0], np.ones(4)
    rn, P, _ = reduced_outage_system(g, dispatch, u, 3)
    _, rate, _ = measure_metrics(simulate_outage(g, dispatch, u, 3, p), p.window)
    starts = np.arange(0, p.horizon - p.window + 1e-9, p.step)
    best = max(analytic_rocof_injection(rn, P, replace(p, t0=float(s))).max() for s in starts)
    assert best == pytest.approx(rate, rel=0.02)


def test_analytic_small_window_tends_to_uniform():
    rn = ReducedNetwork([0], np.zeros((1, 1)), np.array([10.0]))
    p = DynamicsParams(gamma=0.1, step=1e-5, window=1e-4, horizon=1e-3)
    # 100 MW on S_base 100 against 2HS = 1000 MW*s
    target = uniform_rocof(100.0, 1000.0, 60.0)
    assert analytic_rocof(rn, 0, 1.0, p)[0] == pytest.approx(target, rel=1e-3)


def test_batch_matches_single_runs():
    g = six_bus_grid()
    p = DynamicsParams(horizon=2.0)
    cases = [([100.0, 60.0, 20.0], [1, 1, 1], 0), ([0.0, 80.0, 50.0], [0, 1, 1], 1),
             ([90.0, 0.0, 40.0], [1, 0, 1], 2)]
    dev, rcf = batch_metrics(g, [c[0] for c in cases], [c[1] for c in cases], [c[2] for c in cases], p)
    for k, (d, u, out) in enumerate(cases):
        a, b, _ = measure_metrics(simulate_outage(g, d, u, out, p), p.window)
        assert dev[k] == pytest.approx(a, rel=1e-9)
        assert rcf[k] == pytest.approx(b, rel=1e-9)


def test_params_validation():
    with pytest.raises(ValueError):
        DynamicsParams(gamma=-1.0)
    with pytest.raises(ValueError):
        DynamicsParams(horizon=0.05, window=0.1)
