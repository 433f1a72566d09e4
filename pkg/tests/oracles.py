"""Independent reference implementations used to check production code.

Everything here is deliberately brute force (enumeration, direct LP calls,
prefix sums) and never routes through the modules it is meant to verify.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from gencobid.milp import EQ, GE, LE, MAX, ModelSpec


def enumerate_milp(model: ModelSpec) -> float | None:
    """Optimal objective by trying every binary pattern with a direct LP solve.

    Returns None when every pattern is infeasible.
    """
    n = model.num_variables
    binaries = [j for j, v in enumerate(model.variables) if v.binary]
    c = np.zeros(n)
    for j, v in model.objective:
        c[j] += v
    sign = -1.0 if model.sense == MAX else 1.0

    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for con in model.constraints:
        row = np.zeros(n)
        for j, v in con.coeffs:
            row[j] += v
        if con.sense == LE:
            a_ub.append(row)
            b_ub.append(con.rhs)
        elif con.sense == GE:
            a_ub.append(-row)
            b_ub.append(-con.rhs)
        elif con.sense == EQ:
            a_eq.append(row)
            b_eq.append(con.rhs)

    best = None
    for pattern in itertools.product((0.0, 1.0), repeat=len(binaries)):
        bounds = [[v.lower, v.upper] for v in model.variables]
        for j, val in zip(binaries, pattern):
            bounds[j] = [val, val]
        res = linprog(
            sign * c,
            A_ub=np.array(a_ub) if a_ub else None,
            b_ub=np.array(b_ub) if b_ub else None,
            A_eq=np.array(a_eq) if a_eq else None,
            b_eq=np.array(b_eq) if b_eq else None,
            bounds=bounds,
            method="highs",
        )
        if res.status == 2 or not res.success:
            continue
        obj = float(np.dot(c, res.x))
        if best is None:
            best = obj
        elif model.sense == MAX:
            best = max(best, obj)
        else:
            best = min(best, obj)
    return best


def random_milp(rng: np.random.Generator, n_vars: int = 8, n_cons: int = 6) -> ModelSpec:
    """A random bounded MILP with a mix of binary and continuous variables.

    Constraints are anchored at a random integral point inside the bounds so
    that most instances are feasible (a minority stays infeasible on purpose).
    """
    from gencobid.milp import ModelBuilder

    b = ModelBuilder()
    kinds = rng.random(n_vars) < 0.6
    anchor = np.empty(n_vars)
    for j, bin_flag in enumerate(kinds):
        if bin_flag:
            b.add_binary()
            anchor[j] = float(rng.integers(0, 2))
        else:
            lo = float(rng.uniform(-5, 0))
            hi = lo + float(rng.uniform(0.5, 8))
            b.add_variable(lo, hi)
            anchor[j] = float(rng.uniform(lo, hi))
    for _ in range(n_cons):
        idx = rng.choice(n_vars, size=rng.integers(2, min(5, n_vars) + 1), replace=False)
        coeffs = [(int(j), float(rng.uniform(-4, 4))) for j in idx]
        at_anchor = sum(c * anchor[j] for j, c in coeffs)
        sense = (LE, GE, EQ)[int(rng.integers(0, 3))] if rng.random() < 0.2 else (LE, GE)[int(rng.integers(0, 2))]
        if sense == LE:
            rhs = at_anchor + float(rng.uniform(0, 4))
        elif sense == GE:
            rhs = at_anchor - float(rng.uniform(0, 4))
        else:
            rhs = at_anchor
        if rng.random() < 0.05:
            rhs += float(rng.uniform(-8, 8))  # occasional unanchored constraint
        b.add_constraint(coeffs, sense, rhs)
    obj = [(j, float(rng.uniform(-3, 3))) for j in range(n_vars)]
    b.set_objective(obj, MAX if rng.random() < 0.5 else "min")
    return b.build()


def segment_l1_cost(prices: np.ndarray, quantities: np.ndarray) -> tuple[float, float]:
    """(best constant price, weighted L1 cost) for one contiguous segment,
    scanning candidate prices directly instead of using prefix-sum tricks."""
    best_price, best_cost = None, np.inf
    for cand in prices:
        cost = float(np.sum(np.abs(prices - cand) * quantities))
        if cost < best_cost - 1e-15:
            best_price, best_cost = float(cand), cost
    return best_price, best_cost


def best_partition_cost(prices, quantities, groups: int) -> float:
    """Exhaustive minimum over all contiguous partitions into ``groups`` parts.

    Only usable for small curves; complements the DP implementation.
    """
    prices = np.asarray(prices, dtype=float)
    quantities = np.asarray(quantities, dtype=float)
    n = len(prices)
    best = np.inf
    for cuts in itertools.combinations(range(1, n), groups - 1):
        edges = (0, *cuts, n)
        cost = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            cost += segment_l1_cost(prices[a:b], quantities[a:b])[1]
        best = min(best, cost)
    return best
