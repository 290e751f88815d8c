"""Stage-1 admission quotas: min-max congestion control per epoch.

Each station's delay is its Little's-law sojourn ``x / lambda`` where
``lambda`` is a moving average of admitted inflow over ``window`` epochs.
Raising a station's inflow lowers its sojourn, so the bound ``W_i <= z``
inverts to a per-station minimum inflow; the stability margin caps each
inflow from above. Bisection on ``z`` finds the smallest bound whose
interval system admits the epoch demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .queueing import StationQueueParams, saturating_outflow, sojourn_time


@dataclass(frozen=True)
class StationFlowState:
    in_station: float
    inflow_history: tuple[float, ...]
    params: StationQueueParams

    def __post_init__(self):
        if self.in_station < 0:
            raise ValueError(f"in_station must be nonnegative, got {self.in_station}")
        if any(h < 0 for h in self.inflow_history):
            raise ValueError("inflow history entries must be nonnegative")

    @classmethod
    def empty(cls, params: StationQueueParams, window: int) -> "StationFlowState":
        return cls(0.0, (0.0,) * (window - 1), params)

    @property
    def past_inflow(self) -> float:
        return math.fsum(self.inflow_history)


@dataclass
class QuotaPlan:
    flows: np.ndarray
    integer_quotas: np.ndarray
    z_star: float
    stability_relaxed: bool = False
    upper_bounds: np.ndarray = field(default=None, repr=False)


def smoothed_rate(state: StationFlowState, new_inflow: float, window: int) -> float:
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    return (new_inflow + state.past_inflow) / window


def flow_lower_bound(state: StationFlowState, z: float, window: int) -> float:
    """Smallest inflow that brings the station's sojourn down to ``z``."""
    if not z > 0:
        raise ValueError(f"z must be positive, got {z}")
    return max(0.0, window * state.in_station / z - state.past_inflow)


def flow_upper_bound(state: StationFlowState, window: int, safety: float = 0.05) -> float:
    """Largest inflow keeping the smoothed rate within ``(1 - safety) c mu``."""
    if not 0 <= safety < 1:
        raise ValueError(f"safety must lie in [0, 1), got {safety}")
    return max(0.0, (1.0 - safety) * window * state.params.capacity - state.past_inflow)


def _lower_bounds(states, z, window):
    return np.array([flow_lower_bound(s, z, window) for s in states])


def is_feasible(states, z, demand, window, upper) -> bool:
    """Whether some split of ``demand`` meets ``W_i <= z`` within the caps."""
    lower = _lower_bounds(states, z, window)
    return bool(np.all(lower <= upper) and lower.sum() <= demand <= upper.sum())


def largest_remainder(values, total: int) -> np.ndarray:
    """Round nonnegative reals to integers summing to ``total`` (Hamilton).

    Ties in the fractional part go to the lower index.
    """
    values = np.asarray(values, dtype=float)
    base = np.floor(values + 1e-12).astype(int)
    base = np.maximum(base, 0)
    short = total - int(base.sum())
    if short > 0:
        frac = values - base
        order = sorted(range(len(values)), key=lambda i: (-frac[i], i))
        for i in order[:short]:
            base[i] += 1
        # More seats than stations can only come from float drift; spread the rest.
        short -= min(short, len(values))
        i = 0
        while short > 0:
            base[order[i % len(order)]] += 1
            short -= 1
            i += 1
    elif short < 0:
        frac = values - base
        order = sorted(range(len(values)), key=lambda i: (frac[i], -i))
        k = 0
        while short < 0:
            i = order[k % len(order)]
            if base[i] > 0:
                base[i] -= 1
                short += 1
            k += 1
    return base


def _clip_to_caps(quotas: np.ndarray, upper: np.ndarray) -> np.ndarray:
    caps = np.floor(upper + 1e-9).astype(int)
    quotas = quotas.copy()
    excess = 0
    for i in range(len(quotas)):
        if quotas[i] > caps[i]:
            excess += quotas[i] - caps[i]
            quotas[i] = caps[i]
    while excess > 0:
        room = [(upper[i] - quotas[i], -i) for i in range(len(quotas)) if quotas[i] < caps[i]]
        if not room:
            # Integer caps cannot hold the demand; overshoot the loosest station.
            room = [(upper[i] - quotas[i], -i) for i in range(len(quotas))]
        _, neg_i = max(room)
        quotas[-neg_i] += 1
        excess -= 1
    return quotas


def _proportional(weights: np.ndarray, demand: float) -> np.ndarray:
    return demand * weights / weights.sum()


def realized_max_sojourn(states, flows, window, rate_floor) -> float:
    return max(
        sojourn_time(s.in_station, smoothed_rate(s, f, window), rate_floor)
        for s, f in zip(states, flows)
    )


def solve_quota(
    states: list[StationFlowState],
    demand: float,
    window: int,
    safety: float = 0.05,
    rate_floor: float = 1e-6,
    tol: float = 1e-9,
) -> QuotaPlan:
    """Minimize the worst-station sojourn over splits of ``demand``.

    Returns continuous flows, integer quotas (largest remainder, clipped to
    the stability caps) and the achieved worst-station sojourn. When demand
    exceeds what the caps can absorb, flows follow station capacity and the
    plan is flagged ``stability_relaxed``.
    """
    if not states:
        raise ValueError("solve_quota needs at least one station")
    if demand < 0:
        raise ValueError(f"demand must be nonnegative, got {demand}")
    total = int(round(demand))
    upper = np.array([flow_upper_bound(s, window, safety) for s in states])

    if demand == 0:
        flows = np.zeros(len(states))
        z = realized_max_sojourn(states, flows, window, rate_floor)
        return QuotaPlan(flows, np.zeros(len(states), dtype=int), z, False, upper)

    if upper.sum() < demand:
        capacity = np.array([s.params.capacity for s in states])
        flows = _proportional(capacity, demand)
        quotas = largest_remainder(flows, total)
        z = realized_max_sojourn(states, flows, window, rate_floor)
        return QuotaPlan(flows, quotas, z, True, upper)

    def feasible(z):
        return is_feasible(states, z, demand, window, upper)

    lo = tol
    hi = max(s.in_station for s in states) / rate_floor + 1.0
    while not feasible(hi):
        hi *= 2.0
    if feasible(lo):
        hi = lo
    else:
        while hi - lo > tol * hi:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                hi = mid
            else:
                lo = mid
    z_bound = hi

    # Water-fill: lower the level below z_bound until capped minimum inflows
    # absorb the demand; the high side always satisfies phi(w) <= demand.
    def phi(w):
        return float(np.minimum(upper, _lower_bounds(states, w, window)).sum())

    w_hi = z_bound
    if phi(w_hi) < demand:
        w_lo = tol * z_bound
        if phi(w_lo) >= demand:
            while w_hi - w_lo > tol * w_hi:
                mid = 0.5 * (w_lo + w_hi)
                if phi(mid) >= demand:
                    w_lo = mid
                else:
                    w_hi = mid
    flows = np.minimum(upper, _lower_bounds(states, w_hi, window))
    residual = demand - flows.sum()
    if residual > 0:
        headroom = upper - flows
        flows = flows + residual * headroom / headroom.sum()
    flows = np.minimum(flows, upper)
    # Absorb rounding dust so the flows conserve demand. Spreading it by
    # headroom keeps identical stations bit-identical.
    drift = demand - flows.sum()
    if drift != 0:
        headroom = upper - flows
        flows = flows + drift * (headroom / headroom.sum() if headroom.sum() > 0 else 1.0 / len(flows))

    quotas = _clip_to_caps(largest_remainder(flows, total), upper)
    z = realized_max_sojourn(states, flows, window, rate_floor)
    return QuotaPlan(flows, quotas, z, False, upper)


def proportional_plan(
    states: list[StationFlowState], demand: float, window: int, rate_floor: float = 1e-6
) -> QuotaPlan:
    """Cold-start plan: flows in proportion to station capacity ``c mu``."""
    capacity = np.array([s.params.capacity for s in states])
    flows = _proportional(capacity, demand) if demand > 0 else np.zeros(len(states))
    quotas = largest_remainder(flows, int(round(demand)))
    z = realized_max_sojourn(states, flows, window, rate_floor)
    return QuotaPlan(flows, quotas, z, False)


def advance_state(state: StationFlowState, inflow: float) -> StationFlowState:
    """One epoch of queue dynamics under the saturating outflow closure."""
    if inflow < 0:
        raise ValueError(f"inflow must be nonnegative, got {inflow}")
    x = state.in_station
    new_x = max(0.0, x + inflow - saturating_outflow(state.params, x))
    history = (float(inflow),) + state.inflow_history[:-1] if state.inflow_history else ()
    return replace(state, in_station=new_x, inflow_history=history)
