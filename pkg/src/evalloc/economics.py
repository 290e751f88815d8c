"""Per-pair charging decisions and the Stage-2 utility matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .queueing import StationQueueParams


@dataclass(frozen=True)
class EvRequest:
    soc: float
    wtp_cap: float
    position: float
    base_curvature: float
    anxiety: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.soc <= 1.0:
            raise ValueError(f"soc must lie in [0, 1], got {self.soc}")
        if self.wtp_cap < 0:
            raise ValueError(f"wtp_cap must be nonnegative, got {self.wtp_cap}")
        if not self.base_curvature > 0:
            raise ValueError(f"base_curvature must be positive, got {self.base_curvature}")
        if self.anxiety < 0:
            raise ValueError(f"anxiety must be nonnegative, got {self.anxiety}")


@dataclass(frozen=True)
class Station:
    index: int
    chargers: int
    service_rate: float
    price: float
    location: float

    def __post_init__(self):
        if int(self.chargers) != self.chargers or self.chargers < 1:
            raise ValueError(f"chargers must be a positive integer, got {self.chargers}")
        if not self.service_rate > 0:
            raise ValueError(f"service_rate must be positive, got {self.service_rate}")
        if self.price < 0:
            raise ValueError(f"price must be nonnegative, got {self.price}")

    @property
    def queue_params(self) -> StationQueueParams:
        return StationQueueParams(self.chargers, self.service_rate)


def effective_curvature(ev: EvRequest) -> float:
    """Charging-preference curvature, steeper for low state of charge."""
    return ev.base_curvature * (1.0 + ev.anxiety * (1.0 - ev.soc))


def charging_benefit(ev: EvRequest, station: Station, amount: float) -> float:
    s = effective_curvature(ev)
    return -0.5 * s * amount * amount + (ev.wtp_cap - station.price) * amount


def optimal_charge(ev: EvRequest, station: Station) -> tuple[float, float]:
    """Benefit-maximizing charge amount within the battery headroom.

    Returns ``(amount, benefit)``. The benefit is concave in the amount, so
    the unconstrained optimum clipped to ``[0, 1 - soc]`` is exact.
    """
    s = effective_curvature(ev)
    margin = ev.wtp_cap - station.price
    amount = min(max(margin / s, 0.0), 1.0 - ev.soc)
    return amount, -0.5 * s * amount * amount + margin * amount


@dataclass
class UtilityMatrix:
    utility: np.ndarray  # (n_evs, n_stations)
    charge: np.ndarray
    benefit: np.ndarray
    distance: np.ndarray
    feasible: np.ndarray  # bool; includes the fallback arc for unreachable EVs
    fallback: np.ndarray  # bool per EV: reachability set was empty
    distance_weight: float = 1.0
    delay_weight: float = 0.0
    range_per_soc: float = 25.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.utility.shape

    def feasible_stations(self, n: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.feasible[n])]


def line_distance(ev: EvRequest, station: Station) -> float:
    return abs(ev.position - station.location)


def build_utility_matrix(
    evs: Sequence[EvRequest],
    stations: Sequence[Station],
    sojourns: Sequence[float],
    distance_weight: float = 1.0,
    delay_weight: float = 0.0,
    range_per_soc: float = 25.0,
    distance: Optional[Callable[[EvRequest, Station], float]] = None,
) -> UtilityMatrix:
    """Utility of every EV-station pair, with reachability flags.

    An EV that can reach no station keeps a single arc to its nearest
    station (lowest index on ties) and is flagged in ``fallback``.
    """
    if len(sojourns) != len(stations):
        raise ValueError("need one sojourn value per station")
    if distance_weight < 0 or delay_weight < 0:
        raise ValueError("distance and delay weights must be nonnegative")
    if not range_per_soc > 0:
        raise ValueError(f"range_per_soc must be positive, got {range_per_soc}")
    distance = distance or line_distance
    n, m = len(evs), len(stations)
    util = np.zeros((n, m))
    charge = np.zeros((n, m))
    benefit = np.zeros((n, m))
    dist = np.zeros((n, m))
    feasible = np.zeros((n, m), dtype=bool)
    fallback = np.zeros(n, dtype=bool)
    w = np.asarray(sojourns, dtype=float)
    for a, ev in enumerate(evs):
        reach = range_per_soc * ev.soc
        for b, st in enumerate(stations):
            d = distance(ev, st)
            e, phi = optimal_charge(ev, st)
            dist[a, b] = d
            charge[a, b] = e
            benefit[a, b] = phi
            util[a, b] = phi - distance_weight * d - delay_weight * w[b]
            feasible[a, b] = d <= reach
        if m and not feasible[a].any():
            fallback[a] = True
            feasible[a, int(np.argmin(dist[a]))] = True
    return UtilityMatrix(
        util, charge, benefit, dist, feasible, fallback,
        distance_weight, delay_weight, range_per_soc,
    )
