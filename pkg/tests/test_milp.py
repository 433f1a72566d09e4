import numpy as np
import pytest

from gencobid import milp
from gencobid.milp import (
    GE,
    LE,
    MAX,
    MIN,
    ModelBuilder,
    ModelError,
    read_lp,
    solve,
    solve_lp_relaxation,
    write_lp,
)

from oracles import enumerate_milp, random_milp

ENGINES = ["highs", "bb"]


def test_add_variable_ids_and_bounds():
    b = ModelBuilder()
    assert b.add_variable(0.0, 1.0, binary=True) == 0
    assert b.build().num_variables == 1
    with pytest.raises(ModelError):
        b.add_variable(5.0, 3.0)
    with pytest.raises(ModelError):
        b.add_variable(0.0, np.inf)
    with pytest.raises(ModelError):
        b.add_variable(0.0, 2.0, binary=True)


def test_constraint_references_must_exist():
    b = ModelBuilder()
    b.add_variable(0, 1)
    with pytest.raises(ModelError):
        b.add_constraint([(3, 1.0)], LE, 1.0)
    with pytest.raises(ModelError):
        b.set_objective([(1, 1.0)], MIN)


@pytest.mark.parametrize("engine", ENGINES)
def test_single_bound_lp(engine):
    b = ModelBuilder()
    x = b.add_variable(0, 10)
    b.add_constraint([(x, 1.0)], LE, 7.0)
    b.set_objective([(x, 1.0)], MAX)
    sol = solve(b.build(), engine=engine)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(7.0, abs=1e-9)


@pytest.mark.parametrize("engine", ENGINES)
def test_counting_milp(engine):
    b = ModelBuilder()
    xs = [b.add_binary() for _ in range(5)]
    b.add_constraint([(x, 1.0) for x in xs], GE, 3.0)
    b.set_objective([(x, 1.0) for x in xs], MIN)
    sol = solve(b.build(), engine=engine)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(3.0, abs=1e-9)


@pytest.mark.parametrize("engine", ENGINES)
def test_infeasible_model(engine):
    b = ModelBuilder()
    x = b.add_binary()
    b.add_constraint([(x, 1.0)], GE, 2.0)
    b.set_objective([(x, 1.0)], MIN)
    sol = solve(b.build(), engine=engine)
    assert sol.status == "infeasible"
    assert sol.values is None


@pytest.mark.parametrize("engine", ENGINES)
def test_matches_enumeration_oracle_random(engine):
    rng = np.random.default_rng(20240611)
    checked = 0
    n = 40 if engine == "bb" else 100
    for _ in range(n):
        model = random_milp(rng)
        expected = enumerate_milp(model)
        sol = solve(model, engine=engine)
        if expected is None:
            assert sol.status == "infeasible"
            continue
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(expected, abs=1e-6)
        assert milp.constraint_violation(model, sol.values) <= 1e-6
        checked += 1
    assert checked > 10


def test_lp_relaxation_bounds_milp_objective():
    rng = np.random.default_rng(7)
    for _ in range(30):
        model = random_milp(rng)
        sol = solve(model)
        if sol.status != "optimal":
            continue
        relax = solve_lp_relaxation(model)
        assert relax.status == "optimal"
        if model.sense == MAX:
            assert relax.objective >= sol.objective - 1e-7
        else:
            assert relax.objective <= sol.objective + 1e-7


@pytest.mark.parametrize("engine", ENGINES)
def test_resolve_is_deterministic(engine):
    model = random_milp(np.random.default_rng(99))
    a = solve(model, engine=engine)
    b = solve(model, engine=engine)
    assert a.status == b.status
    if a.objective is not None:
        assert a.objective == b.objective
        np.testing.assert_array_equal(a.values, b.values)


def test_engines_agree():
    rng = np.random.default_rng(5150)
    for _ in range(25):
        model = random_milp(rng)
        sa = solve(model, engine="highs")
        sb = solve(model, engine="bb")
        assert sa.status == sb.status
        if sa.status == "optimal":
            assert sa.objective == pytest.approx(sb.objective, abs=1e-6)


def test_reported_objective_consistent_with_values():
    rng = np.random.default_rng(31)
    for _ in range(20):
        model = random_milp(rng)
        sol = solve(model)
        if sol.status != "optimal":
            continue
        direct = model.objective_value(sol.values)
        assert sol.objective == pytest.approx(direct, rel=1e-6, abs=1e-12)


def test_bb_node_limit_reports_gap_limit():
    b = ModelBuilder()
    xs = [b.add_binary() for _ in range(12)]
    rng = np.random.default_rng(2)
    w = rng.uniform(1, 5, size=12)
    b.add_constraint([(x, float(wi)) for x, wi in zip(xs, w)], LE, float(w.sum() / 2))
    b.set_objective([(x, float(wi + rng.uniform(0, 0.2))) for x, wi in zip(xs, w)], MAX)
    sol = solve(b.build(), engine="bb", node_limit=3)
    assert sol.status in ("gap_limit", "time_limit")
    assert sol.gap > 0


def test_lp_dump_round_trip(tmp_path):
    model = random_milp(np.random.default_rng(12))
    path = tmp_path / "model.lp"
    write_lp(model, path)
    back = read_lp(path)
    assert back.num_variables == model.num_variables
    assert back.num_binaries == model.num_binaries
    assert len(back.constraints) == len(model.constraints)
    assert back.sense == model.sense
    sol_a, sol_b = solve(model), solve(back)
    assert sol_a.status == sol_b.status
    if sol_a.status == "optimal":
        assert sol_a.objective == pytest.approx(sol_b.objective, abs=1e-9)
