import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factories import gen, grid, line, six_bus_grid
from fcuc.grid import (GridSchemaError, Scenario, grid_to_dict, load_grid, load_scenario, sample_scenarios,
                       save_grid, save_scenario, validate_grid)


def _write(tmp_path, data, name="grid.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_load_two_bus_counts(tmp_path):
    g = grid(2, [line(1, 1, 2)], [gen(1, 1), gen(2, 2)])
    path = tmp_path / "g.json"
    save_grid(g, path)
    assert load_grid(path).counts() == (2, 1, 2)


def test_missing_susceptance_is_schema_error(tmp_path):
    data = grid_to_dict(grid(2, [line(1, 1, 2)], [gen(1, 1)]))
    del data["lines"][0]["susceptance"]
    with pytest.raises(GridSchemaError, match="susceptance"):
        load_grid(_write(tmp_path, data))


def test_unknown_field_rejected(tmp_path):
    data = grid_to_dict(grid(1, [], [gen(1, 1)]))
    data["generators"][0]["colour"] = "red"
    with pytest.raises(GridSchemaError, match="unknown"):
        load_grid(_write(tmp_path, data))


def test_unparseable_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(GridSchemaError):
        load_grid(path)


def test_rts_sized_instance_round_trips(tmp_path):
    rng = np.random.default_rng(3)
    lines = [line(k + 1, k + 1, k + 2) for k in range(23)]
    extra = set()
    while len(extra) < 15:
        a, b = sorted(rng.choice(24, size=2, replace=False) + 1)
        if b - a > 1:
            extra.add((int(a), int(b)))
    lines += [line(24 + k, a, b) for k, (a, b) in enumerate(sorted(extra))]
    gens = [gen(k + 1, int(rng.integers(1, 25)), p_max=50.0 + k) for k in range(33)]
    path = tmp_path / "rts.json"
    save_grid(grid(24, lines, gens), path)
    g = load_grid(path)
    assert (g.num_buses, g.num_generators, len(g.lines)) == (24, 33, 38)
    assert validate_grid(g) == []


def test_dangling_generator_bus():
    g = grid(3, [line(1, 1, 2), line(2, 2, 3)], [gen(1, 99)])
    assert any("dangling bus reference" in r for r in validate_grid(g))


def test_inverted_capacity():
    g = grid(1, [], [gen(1, 1, p_min=80.0, p_max=50.0)])
    assert any("inverted capacity bounds" in r for r in validate_grid(g))


def test_six_bus_grid_is_clean():
    assert validate_grid(six_bus_grid()) == []


def test_disconnected_network_reported():
    g = grid(4, [line(1, 1, 2), line(2, 3, 4)], [gen(1, 1)])
    assert "network is not connected" in validate_grid(g)


def test_scenario_csv_round_trip(tmp_path):
    g = six_bus_grid()
    rng = np.random.default_rng(0)
    s = Scenario(rng.uniform(0, 50, (6, 5)), rng.uniform(0, 10, (6, 5)))
    path = tmp_path / "s.csv"
    save_scenario(s, g, path)
    back = load_scenario(path, g)
    np.testing.assert_array_equal(back.demand, s.demand)
    np.testing.assert_array_equal(back.res, s.res)


def test_scenario_rejects_negative():
    with pytest.raises(ValueError):
        Scenario(np.array([[-1.0]]), np.array([[0.0]]))


@pytest.fixture
def base():
    rng = np.random.default_rng(1)
    return Scenario(rng.uniform(20, 60, (6, 24)), rng.uniform(0, 20, (6, 24)))


def test_zero_count(base):
    assert sample_scenarios(six_bus_grid(), base, 0) == []


def test_mean_shift_within_range(base):
    out = sample_scenarios(six_bus_grid(), base, 100, (-0.2, 0.2), 0.05, seed=4)
    assert len(out) == 100
    for s in out:
        assert np.all(np.abs(s.demand_shift) <= 0.2) and np.all(np.abs(s.res_shift) <= 0.2)
    # sample means over many scenarios stay within the shifted band
    mean = np.mean([s.demand for s in out], axis=0)
    assert np.all(mean <= 1.2 * base.demand + 1e-9) and np.all(mean >= 0.8 * base.demand - 1e-9)


def test_same_seed_same_scenarios(base):
    a = sample_scenarios(six_bus_grid(), base, 5, seed=9)
    b = sample_scenarios(six_bus_grid(), base, 5, seed=9)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.demand, y.demand)
        np.testing.assert_array_equal(x.res, y.res)


def test_bad_range(base):
    with pytest.raises(ValueError):
        sample_scenarios(six_bus_grid(), base, 1, (0.2, -0.2))


@settings(max_examples=30, deadline=None)
@given(lo=st.floats(-0.5, 0.0), width=st.floats(0.0, 0.5), seed=st.integers(0, 10_000))
def test_samples_non_negative_and_shaped(lo, width, seed):
    base = Scenario(np.full((6, 3), 10.0), np.full((6, 3), 2.0))
    hi = min(lo + width, 0.5)
    for s in sample_scenarios(six_bus_grid(), base, 3, (lo, hi), 0.3, seed=seed):
        assert s.demand.shape == (6, 3)
        assert np.all(s.demand >= 0) and np.all(s.res >= 0)
        assert np.all(s.demand_shift >= lo) and np.all(s.demand_shift <= hi)
