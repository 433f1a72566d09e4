"""Exact mixed-integer linear programming on immutable model specs.

Two interchangeable engines sit behind :func:`solve`: a branch-and-bound
search over HiGHS LP relaxations (``engine="bb"``) and the HiGHS MILP
solver itself (``engine="highs"``, the default). Both prove optimality to
the configured relative gap and are deterministic for a fixed model.
"""

from __future__ import annotations

import heapq
import re
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.optimize import Bounds, LinearConstraint, linprog
from scipy.optimize import milp as _highs_milp

LE = "<="
EQ = "="
GE = ">="

MIN = "min"
MAX = "max"

FEASIBILITY_TOL = 1e-6
DEFAULT_GAP = 1e-6
DEFAULT_TIME_LIMIT = 1800.0

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_GAP_LIMIT = "gap_limit"
STATUS_TIME_LIMIT = "time_limit"


class ModelError(ValueError):
    """Raised for malformed variables, constraints or objectives."""


@dataclass(frozen=True)
class Variable:
    lower: float
    upper: float
    binary: bool


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    name: str = ""


@dataclass(frozen=True)
class ModelSpec:
    """Immutable MILP instance: variables, linear constraints, objective."""

    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[int, float], ...]
    sense: str

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_binaries(self) -> int:
        return sum(1 for v in self.variables if v.binary)

    def objective_value(self, values: np.ndarray) -> float:
        return float(sum(c * values[j] for j, c in self.objective))


@dataclass(frozen=True)
class MilpSolution:
    """Solver outcome. ``objective`` is evaluated on ``values`` directly,
    so the reported number is always consistent with the returned point."""

    status: str
    values: np.ndarray | None
    objective: float | None
    gap: float
    bound: float | None
    nodes: int


class ModelBuilder:
    """Accumulates variables/constraints and freezes them into a ModelSpec."""

    def __init__(self) -> None:
        self._variables: list[Variable] = []
        self._constraints: list[Constraint] = []
        self._objective: tuple[tuple[int, float], ...] = ()
        self._sense = MIN

    def add_variable(self, lower: float, upper: float, binary: bool = False) -> int:
        if not (np.isfinite(lower) and np.isfinite(upper)):
            raise ModelError(f"variable bounds must be finite, got [{lower}, {upper}]")
        if lower > upper:
            raise ModelError(f"inverted variable bounds [{lower}, {upper}]")
        if binary and (lower, upper) != (0.0, 1.0):
            raise ModelError("binary variables must be declared with bounds [0, 1]")
        self._variables.append(Variable(float(lower), float(upper), binary))
        return len(self._variables) - 1

    def add_binary(self) -> int:
        return self.add_variable(0.0, 1.0, binary=True)

    def _check_coeffs(self, coeffs) -> tuple[tuple[int, float], ...]:
        out = []
        for j, c in coeffs:
            if not 0 <= j < len(self._variables):
                raise ModelError(f"coefficient references undeclared variable {j}")
            out.append((int(j), float(c)))
        return tuple(out)

    def add_constraint(self, coeffs, sense: str, rhs: float, name: str = "") -> None:
        if sense not in (LE, EQ, GE):
            raise ModelError(f"unknown constraint sense {sense!r}")
        self._constraints.append(
            Constraint(self._check_coeffs(coeffs), sense, float(rhs), name)
        )

    def set_objective(self, coeffs, sense: str) -> None:
        if sense not in (MIN, MAX):
            raise ModelError(f"objective sense must be 'min' or 'max', got {sense!r}")
        self._objective = self._check_coeffs(coeffs)
        self._sense = sense

    def build(self) -> ModelSpec:
        return ModelSpec(
            variables=tuple(self._variables),
            constraints=tuple(self._constraints),
            objective=self._objective,
            sense=self._sense,
        )


def _matrices(model: ModelSpec):
    """Dense objective vector plus sparse <=/== constraint matrices
    (>= rows are negated into <=). Objective is in native sense."""
    n = model.num_variables
    c = np.zeros(n)
    for j, v in model.objective:
        c[j] += v

    ub_rows, ub_cols, ub_vals, ub_rhs = [], [], [], []
    eq_rows, eq_cols, eq_vals, eq_rhs = [], [], [], []
    for con in model.constraints:
        if con.sense == EQ:
            r = len(eq_rhs)
            for j, v in con.coeffs:
                eq_rows.append(r)
                eq_cols.append(j)
                eq_vals.append(v)
            eq_rhs.append(con.rhs)
        else:
            flip = -1.0 if con.sense == GE else 1.0
            r = len(ub_rhs)
            for j, v in con.coeffs:
                ub_rows.append(r)
                ub_cols.append(j)
                ub_vals.append(flip * v)
            ub_rhs.append(flip * con.rhs)

    a_ub = sparse.csr_matrix(
        (ub_vals, (ub_rows, ub_cols)), shape=(len(ub_rhs), n)
    ) if ub_rhs else None
    a_eq = sparse.csr_matrix(
        (eq_vals, (eq_rows, eq_cols)), shape=(len(eq_rhs), n)
    ) if eq_rhs else None
    lower = np.array([v.lower for v in model.variables])
    upper = np.array([v.upper for v in model.variables])
    return c, a_ub, np.array(ub_rhs), a_eq, np.array(eq_rhs), lower, upper


def constraint_violation(model: ModelSpec, values: np.ndarray) -> float:
    """Largest constraint/bound violation of ``values`` (0 when feasible)."""
    worst = 0.0
    for v, x in zip(model.variables, values):
        worst = max(worst, v.lower - x, x - v.upper)
    for con in model.constraints:
        lhs = sum(c * values[j] for j, c in con.coeffs)
        if con.sense == LE:
            worst = max(worst, lhs - con.rhs)
        elif con.sense == GE:
            worst = max(worst, con.rhs - lhs)
        else:
            worst = max(worst, abs(lhs - con.rhs))
    return float(worst)


def solve_lp_relaxation(model: ModelSpec) -> MilpSolution:
    """Solve the model with integrality dropped (used for bounding checks)."""
    c, a_ub, b_ub, a_eq, b_eq, lower, upper = _matrices(model)
    sign = -1.0 if model.sense == MAX else 1.0
    res = linprog(
        sign * c,
        A_ub=a_ub,
        b_ub=b_ub if a_ub is not None else None,
        A_eq=a_eq,
        b_eq=b_eq if a_eq is not None else None,
        bounds=np.column_stack([lower, upper]),
        method="highs",
    )
    if res.status == 2:
        return MilpSolution(STATUS_INFEASIBLE, None, None, np.inf, None, 0)
    if not res.success:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    obj = model.objective_value(res.x)
    return MilpSolution(STATUS_OPTIMAL, res.x, obj, 0.0, obj, 0)


def solve(
    model: ModelSpec,
    gap_tolerance: float = DEFAULT_GAP,
    time_limit: float = DEFAULT_TIME_LIMIT,
    engine: str = "highs",
    node_limit: int | None = None,
) -> MilpSolution:
    """Solve a ModelSpec to proven global optimality within ``gap_tolerance``.

    ``engine="highs"`` delegates to the HiGHS branch-and-cut solver;
    ``engine="bb"`` runs the built-in best-bound branch-and-bound over LP
    relaxations (most-fractional branching, lowest variable id on ties).
    """
    if engine == "highs":
        return _solve_highs(model, gap_tolerance, time_limit)
    if engine == "bb":
        return _solve_bb(model, gap_tolerance, time_limit, node_limit)
    raise ValueError(f"unknown engine {engine!r}")


def _solve_highs(model: ModelSpec, gap_tolerance: float, time_limit: float) -> MilpSolution:
    c, a_ub, b_ub, a_eq, b_eq, lower, upper = _matrices(model)
    sign = -1.0 if model.sense == MAX else 1.0
    constraints = []
    if a_ub is not None:
        constraints.append(LinearConstraint(a_ub, -np.inf, b_ub))
    if a_eq is not None:
        constraints.append(LinearConstraint(a_eq, b_eq, b_eq))
    integrality = np.array([1 if v.binary else 0 for v in model.variables])
    res = _highs_milp(
        c=sign * c,
        constraints=constraints,
        integrality=integrality,
        bounds=Bounds(lower, upper),
        options={
            "mip_rel_gap": gap_tolerance,
            "time_limit": time_limit,
            "presolve": True,
        },
    )
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return MilpSolution(STATUS_INFEASIBLE, None, None, np.inf, None, nodes)
    if res.x is None:
        if res.status == 1:
            return MilpSolution(STATUS_TIME_LIMIT, None, None, np.inf, None, nodes)
        raise RuntimeError(f"HiGHS failed: status={res.status} {res.message}")
    values = np.asarray(res.x, dtype=float)
    # snap binaries to exact integers before evaluating the objective
    for j, v in enumerate(model.variables):
        if v.binary:
            values[j] = round(values[j])
    obj = model.objective_value(values)
    gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
    bound = getattr(res, "mip_dual_bound", None)
    if bound is not None:
        bound = float(sign * bound)
    if res.status == 0:
        return MilpSolution(STATUS_OPTIMAL, values, obj, gap, bound, nodes)
    return MilpSolution(STATUS_TIME_LIMIT, values, obj, gap, bound, nodes)


def _solve_bb(
    model: ModelSpec,
    gap_tolerance: float,
    time_limit: float,
    node_limit: int | None,
) -> MilpSolution:
    c, a_ub, b_ub, a_eq, b_eq, lower, upper = _matrices(model)
    sign = -1.0 if model.sense == MAX else 1.0
    c_min = sign * c
    binaries = [j for j, v in enumerate(model.variables) if v.binary]
    start = time.monotonic()

    def lp(lo, hi):
        res = linprog(
            c_min,
            A_ub=a_ub,
            b_ub=b_ub if a_ub is not None else None,
            A_eq=a_eq,
            b_eq=b_eq if a_eq is not None else None,
            bounds=np.column_stack([lo, hi]),
            method="highs",
        )
        if res.status == 2:
            return None
        if not res.success:
            raise RuntimeError(f"node LP failed: {res.message}")
        return res.x, float(res.fun)

    incumbent = None
    incumbent_obj = np.inf  # min sense
    counter = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = []
    heapq.heappush(heap, (-np.inf, counter, lower.copy(), upper.copy()))
    nodes = 0
    best_bound = -np.inf
    stop = None  # None = heap exhausted, else "gap" | "time" | "nodes"

    def rel_gap(inc, bnd):
        if not np.isfinite(inc):
            return np.inf
        return abs(inc - bnd) / max(abs(inc), 1e-9)

    while heap:
        parent_bound, _, lo, hi = heapq.heappop(heap)
        best_bound = parent_bound
        if incumbent is not None and rel_gap(incumbent_obj, best_bound) <= gap_tolerance:
            stop = "gap"
            break
        if node_limit is not None and nodes >= node_limit:
            stop = "nodes"
            break
        if time.monotonic() - start > time_limit:
            stop = "time"
            break
        sol = lp(lo, hi)
        nodes += 1
        if sol is None:
            continue
        x, obj = sol
        if obj >= incumbent_obj - 1e-12:
            continue
        frac_j, frac_dist = -1, FEASIBILITY_TOL
        for j in binaries:
            if lo[j] == hi[j]:
                continue
            d = abs(x[j] - round(x[j]))
            if d > frac_dist:
                frac_j, frac_dist = j, d
        if frac_j < 0:
            x = x.copy()
            for j in binaries:
                x[j] = round(x[j])
            incumbent, incumbent_obj = x, obj
            continue
        for fixed in (0.0, 1.0):
            counter += 1
            clo, chi = lo.copy(), hi.copy()
            clo[frac_j] = chi[frac_j] = fixed
            heapq.heappush(heap, (obj, counter, clo, chi))

    if incumbent is None:
        if stop in ("time", "nodes"):
            status = STATUS_TIME_LIMIT if stop == "time" else STATUS_GAP_LIMIT
            return MilpSolution(status, None, None, np.inf, None, nodes)
        return MilpSolution(STATUS_INFEASIBLE, None, None, np.inf, None, nodes)

    if stop == "time":
        status = STATUS_TIME_LIMIT
    elif stop == "nodes":
        status = STATUS_GAP_LIMIT
    else:
        status = STATUS_OPTIMAL
        if stop is None:
            best_bound = incumbent_obj
    gap = rel_gap(incumbent_obj, min(best_bound, incumbent_obj))
    obj = model.objective_value(incumbent)
    bound = float(sign * min(best_bound, incumbent_obj))
    return MilpSolution(status, incumbent, obj, gap, bound, nodes)


# ---------------------------------------------------------------------------
# LP-format dump / parse, for external cross-checking of built models.

def write_lp(model: ModelSpec, path) -> None:
    """Dump the model as a CPLEX-style LP file with variables named x<i>."""
    lines = []
    lines.append("Minimize" if model.sense == MIN else "Maximize")
    terms = " ".join(_term(c, j) for j, c in model.objective) or "0 x0"
    lines.append(f" obj: {terms.lstrip('+ ')}")
    lines.append("Subject To")
    for k, con in enumerate(model.constraints):
        terms = " ".join(_term(c, j) for j, c in con.coeffs)
        name = con.name or f"c{k}"
        lines.append(f" {name}: {terms.lstrip('+ ')} {con.sense} {con.rhs!r}")
    lines.append("Bounds")
    for j, v in enumerate(model.variables):
        lines.append(f" {v.lower!r} <= x{j} <= {v.upper!r}")
    binaries = [f"x{j}" for j, v in enumerate(model.variables) if v.binary]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _term(coef: float, j: int) -> str:
    sign = "-" if coef < 0 else "+"
    return f"{sign} {abs(coef)!r} x{j}"


_TERM_RE = re.compile(r"([+-])\s*([0-9.eE+-]+)\s*x(\d+)")
_BOUND_RE = re.compile(r"(\S+)\s*<=\s*x(\d+)\s*<=\s*(\S+)")


def read_lp(path) -> ModelSpec:
    """Parse a file produced by :func:`write_lp` back into a ModelSpec."""
    with open(path, encoding="utf-8") as fh:
        raw = [ln.rstrip() for ln in fh if ln.strip() and not ln.startswith("\\")]
    sense = MIN
    section = None
    objective: list[tuple[int, float]] = []
    constraints: list[Constraint] = []
    bounds: dict[int, tuple[float, float]] = {}
    binaries: set[int] = set()
    for line in raw:
        word = line.strip().lower()
        if word in ("minimize", "maximize", "subject to", "bounds", "binaries", "end"):
            if word in ("minimize", "maximize"):
                sense = MIN if word == "minimize" else MAX
                section = "objective"
            else:
                section = word
            continue
        body = line.split(":", 1)[-1] if ":" in line else line
        if section == "objective":
            objective.extend(_parse_terms(body))
        elif section == "subject to":
            m = re.search(r"(<=|>=|=)\s*(\S+)\s*$", body)
            if not m:
                raise ValueError(f"unparseable constraint line: {line!r}")
            sense_c, rhs = m.group(1), float(m.group(2))
            name = line.split(":", 1)[0].strip() if ":" in line else ""
            constraints.append(
                Constraint(tuple(_parse_terms(body[: m.start()])), sense_c, rhs, name)
            )
        elif section == "bounds":
            m = _BOUND_RE.search(body)
            if not m:
                raise ValueError(f"unparseable bound line: {line!r}")
            bounds[int(m.group(2))] = (float(m.group(1)), float(m.group(3)))
        elif section == "binaries":
            binaries.update(int(tok[1:]) for tok in body.split())
    n = max(bounds) + 1 if bounds else 0
    variables = tuple(
        Variable(bounds[j][0], bounds[j][1], j in binaries) for j in range(n)
    )
    return ModelSpec(variables, tuple(constraints), tuple(objective), sense)


def _parse_terms(text: str) -> list[tuple[int, float]]:
    if not text.strip().startswith(("+", "-")):
        text = "+ " + text.strip()
    return [(int(j), float(s + v)) for s, v, j in _TERM_RE.findall(text)]
