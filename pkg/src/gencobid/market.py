"""Uniform-price clearing against inelastic demand, plus the statistical
displacement proxy for the system operator's ex-post technical adjustments.

Clearing rule: the first block whose cumulative quantity reaches demand is
marginal and sets the price; cheaper blocks dispatch fully, the marginal
block dispatches partially so that dispatched energy equals demand exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .curves import GENCO, COMPETITOR, OfferBlock, SteppedSupplyCurve

DEFAULT_SYSTEM_CEILING = 1e6  # MWh, sanity bound for a single hour


class ScarcityError(ValueError):
    """Demand exceeds total offered supply."""

    def __init__(self, demand: float, total_supply: float):
        self.demand = demand
        self.total_supply = total_supply
        super().__init__(
            f"demand {demand} MWh exceeds total offered supply {total_supply} MWh"
        )


@dataclass(frozen=True)
class InelasticDemand:
    quantity: float
    timestamp: object = None
    ceiling: float = DEFAULT_SYSTEM_CEILING

    def __post_init__(self):
        if not self.quantity > 0:
            raise ValueError(f"demand must be positive, got {self.quantity}")
        if self.quantity > self.ceiling:
            raise ValueError(
                f"demand {self.quantity} exceeds system ceiling {self.ceiling}"
            )


@dataclass(frozen=True)
class ClearingResult:
    price: float
    dispatched_energy: float
    marginal_owner: str
    marginal_index: int
    dispatch_by_owner: dict[str, float]
    block_dispatch: tuple[float, ...]


def _marginal_index_bisect(cumulative: np.ndarray, demand: float) -> int:
    return int(np.searchsorted(cumulative, demand, side="left"))


def _marginal_index_scan(cumulative: np.ndarray, demand: float) -> int:
    for i, c in enumerate(cumulative):
        if c >= demand:
            return i
    raise AssertionError("scan past end of curve; scarcity should be caught earlier")


def clear(
    curve: SteppedSupplyCurve,
    demand: InelasticDemand | float,
    method: str = "bisect",
) -> ClearingResult:
    """Clear ``curve`` against an inelastic demand at uniform marginal price."""
    quantity = demand.quantity if isinstance(demand, InelasticDemand) else float(demand)
    if quantity <= 0:
        raise ValueError(f"demand must be positive, got {quantity}")
    cumulative = np.asarray(curve.cumulative)
    if quantity > cumulative[-1]:
        raise ScarcityError(quantity, float(cumulative[-1]))
    if method == "bisect":
        idx = _marginal_index_bisect(cumulative, quantity)
    elif method == "scan":
        idx = _marginal_index_scan(cumulative, quantity)
    else:
        raise ValueError(f"unknown clearing method {method!r}")

    dispatch = np.zeros(len(curve))
    for i in range(idx):
        dispatch[i] = curve.blocks[i].quantity
    prev_cum = cumulative[idx - 1] if idx > 0 else 0.0
    dispatch[idx] = quantity - prev_cum

    by_owner = {GENCO: 0.0, COMPETITOR: 0.0}
    for block, d in zip(curve.blocks, dispatch):
        by_owner[block.owner] += float(d)
    marginal = curve.blocks[idx]
    return ClearingResult(
        price=float(marginal.price),
        dispatched_energy=float(quantity),
        marginal_owner=marginal.owner,
        marginal_index=idx,
        dispatch_by_owner=by_owner,
        block_dispatch=tuple(float(d) for d in dispatch),
    )


def apply_displacement(curve: SteppedSupplyCurve, shift: float) -> SteppedSupplyCurve:
    """Translate the curve's cumulative quantities by ``-shift``.

    Positive shift withdraws supply (curve moves left, prices rise for a
    given demand); fully withdrawn cheap blocks are dropped and the first
    surviving block keeps its positive remainder. Negative shift adds
    supply to the first block. The price ladder never changes.
    """
    if not np.isfinite(shift):
        raise ValueError("displacement shift must be finite")
    if shift == 0.0:
        return curve
    total = curve.total_quantity
    if shift >= total:
        raise ValueError(
            f"displacement {shift} MWh would withdraw the whole curve ({total} MWh)"
        )
    new_cum = np.asarray(curve.cumulative) - shift
    blocks: list[OfferBlock] = []
    kept_cum: list[float] = []
    prev = 0.0
    for block, c in zip(curve.blocks, new_cum):
        if c <= 0:
            continue
        width = c - prev
        blocks.append(
            OfferBlock(block.price, float(width), block.owner, block.unit_id, block.timestamp)
        )
        kept_cum.append(float(c))
        prev = c
    return SteppedSupplyCurve(tuple(blocks), tuple(kept_cum))


@dataclass(frozen=True)
class DisplacementObservation:
    """One historical hour: where the offered curve attains the realized
    price, against the quantity actually matched in the market."""

    when: datetime
    offered_quantity: float
    matched_quantity: float


@dataclass(frozen=True)
class DisplacementProfile:
    shifts: tuple[float, ...]
    window_days: int

    def __post_init__(self):
        if len(self.shifts) != 24:
            raise ValueError(f"profile needs 24 hourly shifts, got {len(self.shifts)}")
        if not all(np.isfinite(s) for s in self.shifts):
            raise ValueError("displacement shifts must be finite")

    def for_hour(self, hour: int) -> float:
        return self.shifts[hour]


def estimate_displacement(
    history,
    window_days: int,
    as_of: datetime | None = None,
) -> DisplacementProfile:
    """Mean offered-minus-matched quantity gap per hour of day over the
    trailing ``window_days`` before ``as_of`` (exclusive).

    ``as_of`` defaults to the start of the day after the last observation.
    """
    observations = list(history)
    if window_days <= 0:
        raise ValueError(f"window must be positive, got {window_days}")
    if not observations:
        raise ValueError("no displacement observations supplied")
    if as_of is None:
        last = max(o.when for o in observations)
        as_of = last.replace(hour=0, minute=0, second=0, microsecond=0) + timedelta(days=1)
    start = as_of - timedelta(days=window_days)

    buckets: list[list[float]] = [[] for _ in range(24)]
    for obs in observations:
        if start <= obs.when < as_of:
            buckets[obs.when.hour].append(obs.offered_quantity - obs.matched_quantity)
    empty = [h for h, vals in enumerate(buckets) if not vals]
    if empty:
        raise ValueError(
            f"no displacement observations for hour(s) {empty} in the "
            f"{window_days}-day window ending {as_of}"
        )
    shifts = tuple(float(np.mean(vals)) for vals in buckets)
    return DisplacementProfile(shifts, window_days)
