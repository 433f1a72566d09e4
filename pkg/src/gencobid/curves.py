"""Step-wise supply curves and optimal fixed-count block discretization.

A curve is a price-ordered list of offer blocks with cumulative quantities.
Discretization groups contiguous blocks into a target number of price levels
minimizing the quantity-weighted absolute price error; it is available both
as a MILP (built on :mod:`gencobid.milp`) and as an exact dynamic program
over contiguous partitions, which is the fast production path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import milp

GENCO = "genco"
COMPETITOR = "competitor"
OWNERS = (GENCO, COMPETITOR)

_OWNER_RANK = {GENCO: 0, COMPETITOR: 1}


@dataclass(frozen=True)
class OfferBlock:
    """One production block: a price for a strictly positive quantity."""

    price: float
    quantity: float
    owner: str
    unit_id: str = ""
    timestamp: object = None

    def __post_init__(self):
        if self.owner not in OWNERS:
            raise ValueError(f"owner must be one of {OWNERS}, got {self.owner!r}")
        if not self.quantity > 0:
            raise ValueError(f"block quantity must be > 0, got {self.quantity}")
        if self.price < 0 or not np.isfinite(self.price):
            raise ValueError(f"block price must be finite and >= 0, got {self.price}")


@dataclass(frozen=True)
class SteppedSupplyCurve:
    """Blocks in non-decreasing price order with strictly increasing
    cumulative quantities; the last cumulative value is the total supply."""

    blocks: tuple[OfferBlock, ...]
    cumulative: tuple[float, ...]

    def __post_init__(self):
        prices = self.prices
        if np.any(np.diff(prices) < 0):
            raise ValueError("curve prices must be non-decreasing")
        if np.any(np.diff(self.cumulative) <= 0) or (self.cumulative and self.cumulative[0] <= 0):
            raise ValueError("cumulative quantities must be strictly increasing and positive")

    @property
    def prices(self) -> np.ndarray:
        return np.array([b.price for b in self.blocks])

    @property
    def quantities(self) -> np.ndarray:
        return np.array([b.quantity for b in self.blocks])

    @property
    def total_quantity(self) -> float:
        return self.cumulative[-1]

    def __len__(self) -> int:
        return len(self.blocks)


def build_curve(offers) -> SteppedSupplyCurve:
    """Sort offers into a supply curve and accumulate quantities.

    Equal-price blocks stay separate; the tie order is genco first, then
    input order, so owner attribution survives aggregation.
    """
    offers = list(offers)
    if not offers:
        raise ValueError("cannot build a supply curve from no offers")
    ordered = sorted(offers, key=lambda b: (b.price, _OWNER_RANK[b.owner]))
    cumulative = tuple(np.cumsum([b.quantity for b in ordered]).tolist())
    return SteppedSupplyCurve(tuple(ordered), cumulative)


def aggregate(curves) -> SteppedSupplyCurve:
    """Merge several curves into one market curve, keeping per-block owners."""
    curves = list(curves)
    if not curves:
        raise ValueError("cannot aggregate an empty list of curves")
    blocks = [b for c in curves for b in c.blocks]
    return build_curve(blocks)


def quantity_at_price(curve: SteppedSupplyCurve, price: float) -> float:
    """Total quantity the curve offers at or below ``price`` (0 if none)."""
    prices = curve.prices
    idx = int(np.searchsorted(prices, price, side="right"))
    return float(curve.cumulative[idx - 1]) if idx > 0 else 0.0


@dataclass(frozen=True)
class DiscretizationResult:
    """Contiguous grouping of a curve's blocks into ``len(prices)`` levels.

    ``boundaries`` are end-exclusive block indices: group g covers blocks
    ``boundaries[g-1]:boundaries[g]`` (with an implicit leading 0), and the
    last entry equals the block count.
    """

    boundaries: tuple[int, ...]
    prices: tuple[float, ...]
    quantities: tuple[float, ...]
    error: float

    @property
    def num_groups(self) -> int:
        return len(self.prices)

    def to_offer_blocks(self, owner: str, timestamp=None, unit_prefix: str = "grp"):
        return [
            OfferBlock(p, q, owner, unit_id=f"{unit_prefix}{g}", timestamp=timestamp)
            for g, (p, q) in enumerate(zip(self.prices, self.quantities))
        ]


def weighted_lower_median(prices, weights) -> float:
    """Smallest price whose cumulative weight reaches half the total."""
    prices = np.asarray(prices, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(prices, kind="stable")
    cum = np.cumsum(weights[order])
    idx = int(np.searchsorted(cum, cum[-1] / 2.0, side="left"))
    return float(prices[order][idx])


def _prefix_arrays(curve: SteppedSupplyCurve):
    p = curve.prices
    q = curve.quantities
    w = np.concatenate([[0.0], np.cumsum(q)])
    s = np.concatenate([[0.0], np.cumsum(p * q)])
    return p, q, w, s


def _segment_cost(p, w, s, a: int, b: int) -> tuple[float, float]:
    """(lower weighted median, L1 cost) for blocks [a, b); prices sorted."""
    if p[a] == p[b - 1]:  # constant-price segment: exactly representable
        return float(p[a]), 0.0
    half = w[a] + (w[b] - w[a]) / 2.0
    m = int(np.searchsorted(w[a + 1 : b + 1], half, side="left")) + a
    pm = p[m]
    cost = (
        pm * (w[m + 1] - w[a])
        - (s[m + 1] - s[a])
        + (s[b] - s[m + 1])
        - pm * (w[b] - w[m + 1])
    )
    return float(pm), max(float(cost), 0.0)


def _check_group_count(curve: SteppedSupplyCurve, groups: int) -> None:
    if len(curve) == 0:
        raise ValueError("cannot discretize an empty curve")
    if not 1 <= groups <= len(curve):
        raise ValueError(
            f"group count must be in [1, {len(curve)}], got {groups}"
        )


def _result_from_boundaries(curve: SteppedSupplyCurve, edges) -> DiscretizationResult:
    p, q, w, s = _prefix_arrays(curve)
    prices, quantities = [], []
    total = 0.0
    prev = 0
    for e in edges:
        pm, cost = _segment_cost(p, w, s, prev, e)
        prices.append(pm)
        quantities.append(float(w[e] - w[prev]))
        total += cost
        prev = e
    return DiscretizationResult(tuple(int(e) for e in edges), tuple(prices), tuple(quantities), total)


def discretize_dp_oracle(curve: SteppedSupplyCurve, groups: int) -> DiscretizationResult:
    """Exact optimum by dynamic programming over contiguous partitions.

    Each segment is priced at its quantity-weighted lower median, the L1
    optimum. O(B^2 * groups). Ties broken toward the earliest cut.
    """
    _check_group_count(curve, groups)
    n = len(curve)
    p, q, w, s = _prefix_arrays(curve)
    seg = np.full((n + 1, n + 1), np.inf)
    for a in range(n):
        for b in range(a + 1, n + 1):
            seg[a, b] = _segment_cost(p, w, s, a, b)[1]

    best = np.full((groups + 1, n + 1), np.inf)
    arg = np.zeros((groups + 1, n + 1), dtype=int)
    best[0, 0] = 0.0
    for g in range(1, groups + 1):
        for b in range(g, n + 1):
            # groups g-1 cover at least g-1 blocks; keep first argmin
            for a in range(g - 1, b):
                val = best[g - 1, a] + seg[a, b]
                if val < best[g, b]:
                    best[g, b] = val
                    arg[g, b] = a
    edges = [n]
    b = n
    for g in range(groups, 0, -1):
        b = arg[g, b]
        if g > 1:
            edges.append(b)
    return _result_from_boundaries(curve, sorted(edges))


def discretize(
    curve: SteppedSupplyCurve,
    groups: int,
    gap_tolerance: float = 1e-9,
    time_limit: float = milp.DEFAULT_TIME_LIMIT,
    engine: str = "highs",
) -> DiscretizationResult:
    """Globally optimal discretization via the cut-placement MILP.

    One binary per block marks where the price level may step up; exactly
    ``groups - 1`` such cuts are allowed, the first-block comparison price is
    a free anchor variable, and each block pays its quantity-weighted
    absolute deviation from its group level.
    """
    _check_group_count(curve, groups)
    n = len(curve)
    p = curve.prices
    q = curve.quantities
    p_min, p_max = float(p.min()), float(p.max())
    big_m = p_max - p_min

    b = milp.ModelBuilder()
    c_vars = [b.add_variable(p_min, p_max) for _ in range(n)]
    anchor = b.add_variable(p_min, p_max)
    e_vars = [b.add_variable(0.0, max(big_m, 0.0)) for _ in range(n)]
    d_vars = [b.add_binary() for _ in range(n)]

    for i in range(n):
        prev = anchor if i == 0 else c_vars[i - 1]
        b.add_constraint([(c_vars[i], 1.0), (prev, -1.0)], milp.GE, 0.0)
        b.add_constraint(
            [(c_vars[i], 1.0), (prev, -1.0), (d_vars[i], -big_m)], milp.LE, 0.0
        )
        b.add_constraint([(e_vars[i], 1.0), (c_vars[i], -1.0)], milp.GE, -p[i])
        b.add_constraint([(e_vars[i], 1.0), (c_vars[i], 1.0)], milp.GE, p[i])
    b.add_constraint([(d, 1.0) for d in d_vars], milp.EQ, float(groups - 1))

    # Redundant for integer solutions but much tighter than the raw big-M in
    # the relaxation: blocks i < j in a cut-free window share one level, so
    # their errors must cover the price gap. Windowed to keep the LP small.
    window = 8
    for i in range(n):
        for j in range(i + 1, min(n, i + 1 + window)):
            gap = float(p[j] - p[i])
            if gap <= 0.0:
                continue
            coeffs = [(e_vars[i], 1.0), (e_vars[j], 1.0)]
            coeffs += [(d_vars[k], gap) for k in range(i + 1, j + 1)]
            b.add_constraint(coeffs, milp.GE, gap)

    b.set_objective([(e, float(qi)) for e, qi in zip(e_vars, q)], milp.MIN)

    sol = milp.solve(b.build(), gap_tolerance=gap_tolerance, time_limit=time_limit, engine=engine)
    if sol.status != "optimal":
        raise RuntimeError(f"discretization MILP ended with status {sol.status}")

    levels = np.array([sol.values[v] for v in c_vars])
    step_tol = max(1e-6, 1e-9 * max(big_m, 1.0))
    cuts = {i for i in range(1, n) if levels[i] - levels[i - 1] > step_tol}
    if len(cuts) > groups - 1:
        raise AssertionError("more price steps than allowed cuts in MILP solution")
    # degenerate optima can use fewer steps than cuts; pad deterministically
    for i in range(1, n):
        if len(cuts) == groups - 1:
            break
        cuts.add(i)
    edges = sorted(cuts) + [n]
    result = _result_from_boundaries(curve, edges)
    if result.error > sol.objective + 1e-6:
        raise AssertionError(
            f"recovered partition cost {result.error} exceeds MILP objective {sol.objective}"
        )
    return result
