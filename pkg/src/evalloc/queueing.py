"""Queueing kernels for a single charging station.

Steady-state M/M/c quantities (Erlang-C), the saturating outflow closure used
by the epoch dynamics, Little's-law sojourn time, and a discrete-event M/M/c
simulator kept as an independent check on the closed forms.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np


class UnstableLoadError(ValueError):
    """Arrival rate at or beyond the station's service capacity."""


@dataclass(frozen=True)
class StationQueueParams:
    servers: int
    service_rate: float

    def __post_init__(self):
        if int(self.servers) != self.servers or self.servers < 1:
            raise ValueError(f"servers must be a positive integer, got {self.servers!r}")
        if not self.service_rate > 0:
            raise ValueError(f"service_rate must be positive, got {self.service_rate!r}")

    @property
    def capacity(self) -> float:
        return self.servers * self.service_rate


@dataclass(frozen=True)
class LoadPoint:
    arrival_rate: float
    offered_load: float
    utilization: float


def load_point(params: StationQueueParams, arrival_rate: float) -> LoadPoint:
    if arrival_rate < 0:
        raise ValueError(f"arrival_rate must be nonnegative, got {arrival_rate!r}")
    rho = arrival_rate / params.service_rate
    return LoadPoint(arrival_rate, rho, rho / params.servers)


def _check_stable(params: StationQueueParams, arrival_rate: float) -> None:
    if arrival_rate < 0:
        raise ValueError(f"arrival_rate must be nonnegative, got {arrival_rate!r}")
    if arrival_rate >= params.capacity:
        raise UnstableLoadError(
            f"arrival_rate {arrival_rate} >= capacity {params.capacity} "
            f"({params.servers} x {params.service_rate})"
        )


def _erlang_terms(params: StationQueueParams, arrival_rate: float):
    # t_n = rho^n / n!, built by running product so nothing overflows for c <= 64
    rho = arrival_rate / params.service_rate
    c = params.servers
    terms = [1.0]
    for n in range(c):
        terms.append(terms[-1] * rho / (n + 1))
    return rho, terms


def erlang_p0(params: StationQueueParams, arrival_rate: float) -> float:
    """Probability that the station is empty in steady state."""
    _check_stable(params, arrival_rate)
    rho, terms = _erlang_terms(params, arrival_rate)
    c = params.servers
    tail = terms[c] / (1.0 - rho / c)
    return 1.0 / math.fsum(terms[:c] + [tail])


def expected_in_system(params: StationQueueParams, arrival_rate: float) -> float:
    """Mean number of EVs at the station (waiting plus in service)."""
    _check_stable(params, arrival_rate)
    rho, terms = _erlang_terms(params, arrival_rate)
    c = params.servers
    one_minus_u = 1.0 - rho / c
    p0 = 1.0 / math.fsum(terms[:c] + [terms[c] / one_minus_u])
    queue = terms[c] * rho / (c * one_minus_u**2) * p0
    return queue + rho


def saturating_outflow(params: StationQueueParams, in_station: float) -> float:
    """Departures per interval from a station holding ``in_station`` EVs."""
    if in_station < 0:
        raise ValueError(f"in_station must be nonnegative, got {in_station!r}")
    return params.capacity * in_station / (1.0 + in_station)


def sojourn_time(in_station: float, arrival_rate: float, rate_floor: float = 1e-6) -> float:
    """Little's-law time in system, with the rate floored to stay finite."""
    if in_station < 0:
        raise ValueError(f"in_station must be nonnegative, got {in_station!r}")
    if not rate_floor > 0:
        raise ValueError(f"rate_floor must be positive, got {rate_floor!r}")
    if in_station == 0:
        return 0.0
    return in_station / max(arrival_rate, rate_floor)


def dev_mmc_simulate(
    params: StationQueueParams,
    arrival_rate: float,
    horizon: float,
    seed: int,
) -> tuple[float, float]:
    """Simulate a FIFO M/M/c queue over ``[0, horizon]``.

    Returns the time-averaged number in system and the mean sojourn of
    customers arriving after the warm-up (first 10% of the horizon, discarded).
    """
    _check_stable(params, arrival_rate)
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    if arrival_rate == 0:
        return 0.0, 0.0

    rng = np.random.default_rng(seed)
    # Overdraw so one batch nearly always covers the horizon.
    expected = arrival_rate * horizon
    n = int(expected + 8 * math.sqrt(expected) + 16)
    gaps = rng.exponential(1.0 / arrival_rate, size=n)
    arrivals = np.cumsum(gaps)
    while arrivals[-1] < horizon:
        more = np.cumsum(rng.exponential(1.0 / arrival_rate, size=n)) + arrivals[-1]
        arrivals = np.concatenate([arrivals, more])
    arrivals = arrivals[arrivals <= horizon]
    services = rng.exponential(1.0 / params.service_rate, size=arrivals.size)

    # Next-free times of the c servers; FIFO means each arrival takes the
    # earliest-free server as soon as both it and that server are ready.
    free_at = [0.0] * params.servers
    heapq.heapify(free_at)
    departures = np.empty_like(arrivals)
    arr_list = arrivals.tolist()
    svc_list = services.tolist()
    for k in range(len(arr_list)):
        a = arr_list[k]
        earliest = free_at[0]
        start = a if a > earliest else earliest
        done = start + svc_list[k]
        heapq.heapreplace(free_at, done)
        departures[k] = done

    warm = 0.1 * horizon
    window = horizon - warm
    overlap = np.clip(np.minimum(departures, horizon) - np.maximum(arrivals, warm), 0.0, None)
    mean_in_system = float(overlap.sum() / window)
    counted = arrivals >= warm
    mean_sojourn = float((departures[counted] - arrivals[counted]).mean()) if counted.any() else 0.0
    return mean_in_system, mean_sojourn
