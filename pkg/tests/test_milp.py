import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factories import enumerate_milp, random_milp
from fcuc.milp import MilpModel, ModelError, SolverOptions, Status, add_constraint, add_variable, solve_lp, solve_milp
from fcuc.milp.lpformat import to_lp_string
from fcuc.milp.simplex import simplex_solve


# ---------------------------------------------------------------- model building


def test_ids_are_sequential():
    m = MilpModel()
    assert add_variable(m, 0, 1) == 0
    assert add_variable(m, 0, 1) == 1


def test_inverted_bounds():
    with pytest.raises(ModelError):
        add_variable(MilpModel(), 2, 1)


def test_integral_unit_box_is_binary():
    m = MilpModel()
    x = add_variable(m, 0, 1, integral=True)
    v = m.variables[x]
    assert v.integral and (v.lo, v.hi) == (0, 1)
    assert m.num_integer == 1


def test_repeated_terms_merge():
    m = MilpModel()
    x = m.add_variable(0, 10)
    cid = add_constraint(m, [(x, 1), (x, 2)], "<=", 3)
    assert m.constraints[cid].terms == {x: 3.0}


def test_unknown_variable_in_constraint():
    m = MilpModel()
    m.add_variable()
    with pytest.raises(ModelError):
        m.add_constraint([(5, 1.0)], "<=", 1)


def test_empty_false_row_makes_model_infeasible():
    m = MilpModel()
    x = m.add_variable(0, 1)
    m.set_objective([(x, 1.0)])
    m.add_constraint([], "<=", -1.0)
    assert len(m.constraints) == 1
    assert solve_lp(m).status is Status.INFEASIBLE
    assert solve_milp(m).status is Status.INFEASIBLE


def test_copy_keeps_priority_and_is_independent():
    m = MilpModel()
    b = m.add_binary("b", priority=3)
    c = m.copy()
    assert c.variables[b].priority == 3
    c.set_bounds(b, 1, 1)
    assert m.variables[b].lo == 0


def test_nonzeros_and_violation():
    m = MilpModel()
    x, y = m.add_variable(0, 5), m.add_binary()
    m.add_constraint([(x, 1.0), (y, 2.0)], "<=", 4)
    m.add_constraint([(x, 1.0), (y, 0.0)], ">=", 1)
    assert m.nonzeros() == 3
    assert m.max_violation([1.0, 0.0]) == 0.0
    assert m.max_violation([0.0, 0.0]) == pytest.approx(1.0)
    assert m.max_violation([1.0, 0.5]) == pytest.approx(0.5)
    assert m.max_violation([1.0, 0.5], integrality=False) == 0.0


def test_lp_format_lists_sections():
    m = MilpModel("demo")
    x = m.add_variable(0, math.inf, name="x")
    b = m.add_binary("flag")
    m.set_objective([(x, 1.0), (b, -2.0)], 4.0)
    m.add_constraint([(x, 1.0), (b, 3.0)], ">=", 2.0)
    text = to_lp_string(m)
    for part in ("Minimize", "Subject To", "Bounds", "Binary", "End", "obj_const = 1", "+inf"):
        assert part in text
    assert ">= 2" in text


# ---------------------------------------------------------------- LP


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_lp_single_bound(backend):
    m = MilpModel()
    x = m.add_variable(0, 10)
    m.set_objective([(x, 1.0)])
    m.add_constraint([(x, 1.0)], ">=", 3)
    res = solve_lp(m, SolverOptions(lp_backend=backend))
    assert res.objective == pytest.approx(3.0)


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_lp_two_variable_vertex(backend):
    # vertices of {x+2y>=4, 3x+y>=6, x,y>=0}: (0,6), (8/5,6/5), (4,0); x+y is 6, 2.8, 4
    m = MilpModel()
    x, y = m.add_variable(0), m.add_variable(0)
    m.set_objective([(x, 1.0), (y, 1.0)])
    m.add_constraint([(x, 1.0), (y, 2.0)], ">=", 4)
    m.add_constraint([(x, 3.0), (y, 1.0)], ">=", 6)
    res = solve_lp(m, SolverOptions(lp_backend=backend))
    assert res.objective == pytest.approx(2.8)
    np.testing.assert_allclose(res.x, [1.6, 1.2], atol=1e-9)


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_lp_infeasible(backend):
    m = MilpModel()
    x = m.add_variable(-5, 5)
    m.add_constraint([(x, 1.0)], ">=", 1)
    m.add_constraint([(x, 1.0)], "<=", 0)
    assert solve_lp(m, SolverOptions(lp_backend=backend)).status is Status.INFEASIBLE


def test_lp_unbounded():
    m = MilpModel()
    x = m.add_variable(0, math.inf)
    m.set_objective([(x, -1.0)])
    assert solve_lp(m, SolverOptions(lp_backend="simplex")).status is Status.UNBOUNDED


def test_simplex_free_and_equality():
    # min x - y  s.t. x + y = 2, x free, y in [0, 1]  ->  x = 1, y = 1
    res = simplex_solve(c=[1.0, -1.0], A_le=np.zeros((0, 2)), b_le=[], A_eq=[[1.0, 1.0]], b_eq=[2.0],
                        lo=[-math.inf, 0.0], hi=[math.inf, 1.0])
    assert res.status == "optimal"
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-9)


# ---------------------------------------------------------------- MILP


def test_knapsack_pair():
    # 4 points: (0,0)->0, (1,0)->5, (0,1)->4, (1,1) infeasible (5 > 4)
    m = MilpModel()
    x1, x2 = m.add_binary(), m.add_binary()
    m.set_objective([(x1, -5.0), (x2, -4.0)])
    m.add_constraint([(x1, 3.0), (x2, 2.0)], "<=", 4)
    res = solve_milp(m)
    assert res.status is Status.OPTIMAL
    assert -res.objective == pytest.approx(5.0)
    np.testing.assert_allclose(res.x, [1.0, 0.0])


def test_integral_relaxation_needs_no_branching():
    m = MilpModel()
    x, y = m.add_binary(), m.add_binary()
    m.set_objective([(x, 1.0), (y, 2.0)])
    m.add_constraint([(x, 1.0), (y, 1.0)], ">=", 1)
    res = solve_milp(m)
    lp = solve_lp(m)
    assert res.nodes <= 1
    assert res.objective == pytest.approx(lp.objective)
    np.testing.assert_allclose(res.x, lp.x)


def test_gap_is_respected():
    rng = np.random.default_rng(7)
    m = MilpModel()
    xs = [m.add_binary() for _ in range(25)]
    w = rng.integers(5, 40, 25)
    m.set_objective([(x, -float(v)) for x, v in zip(xs, rng.integers(5, 60, 25))])
    m.add_constraint([(x, float(a)) for x, a in zip(xs, w)], "<=", float(w.sum() // 3))
    res = solve_milp(m, SolverOptions(gap=0.001))
    assert res.status is Status.OPTIMAL
    assert (res.objective - res.best_bound) / abs(res.objective) <= 0.001 + 1e-12


def test_node_limit_reports_limit():
    rng = np.random.default_rng(2)
    m = MilpModel()
    xs = [m.add_binary() for _ in range(30)]
    w = rng.integers(10, 50, 30)
    m.set_objective([(x, -float(v) - 0.37) for x, v in zip(xs, w + rng.integers(0, 3, 30))])
    m.add_constraint([(x, float(a)) for x, a in zip(xs, w)], "<=", float(w.sum() / 2 + 0.5))
    res = solve_milp(m, SolverOptions(gap=0.0, node_limit=2, dive=False))
    assert res.status in (Status.LIMIT, Status.OPTIMAL)
    if res.status is Status.LIMIT:
        assert res.nodes <= 3


def test_priority_branching_still_optimal():
    rng = np.random.default_rng(5)
    m = random_milp(rng, n_bin=8, n_cont=3)
    for v in m.variables[:4]:
        m.set_priority(v.id, 2)
    ref = enumerate_milp(m)
    res = solve_milp(m, SolverOptions(gap=0.0, branching="pseudocost"))
    if ref is None:
        assert res.status is Status.INFEASIBLE
    else:
        assert res.objective == pytest.approx(ref, abs=1e-6)


def test_general_integer():
    m = MilpModel()
    x = m.add_variable(0, 10, integral=True)
    y = m.add_variable(0, 10, integral=True)
    m.set_objective([(x, -1.0), (y, -1.0)])
    m.add_constraint([(x, 2.0), (y, 2.0)], "<=", 7)
    res = solve_milp(m)
    assert res.objective == pytest.approx(-3.0)


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(gap=-1)
    with pytest.raises(ValueError):
        SolverOptions(branching="random")
    with pytest.raises(ValueError):
        SolverOptions(lp_backend="cplex")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       branching=st.sampled_from(["most-fractional", "pseudocost"]),
       selection=st.sampled_from(["best-bound", "depth-first"]))
def test_random_milps_match_enumeration(seed, branching, selection):
    m = random_milp(np.random.default_rng(seed), max_bin=6, max_cont=3)
    ref = enumerate_milp(m)
    res = solve_milp(m, SolverOptions(gap=0.0, branching=branching, node_selection=selection))
    if ref is None:
        assert res.status is Status.INFEASIBLE
    else:
        assert res.status is Status.OPTIMAL
        assert res.objective == pytest.approx(ref, abs=1e-6)
        assert m.max_violation(res.x) <= 1e-6
