"""Discrete-epoch simulation of the two-stage mechanism and its baselines.

Per epoch: EVs arrive, the policy picks per-station inflows and an
assignment, metrics are recorded, then queues advance under the saturating
outflow closure. The first epoch of the two-stage policy has no inflow
history, so quotas follow station capacity and only Stage 2 runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .assignment import Assignment, AssignmentProblem, solve_assignment
from .baselines import deferred_acceptance, nearest_feasible
from .economics import EvRequest, Station, build_utility_matrix
from .quota import (
    StationFlowState,
    advance_state,
    proportional_plan,
    smoothed_rate,
    solve_quota,
)
from .queueing import sojourn_time

POLICIES = ("two_stage", "nearest", "matching")
STATE_UPDATES = ("quota", "assigned")

# Substream labels: each purpose draws from its own child of the seed, so
# adding a consumer never shifts another stream.
STREAM_ARRIVALS = 0
STREAM_EV_ATTRIBUTES = 1
STREAM_STATIONS = 2

DEFAULT_SERVICE_RATE = 6.0


def default_stations(service_rate: float = DEFAULT_SERVICE_RATE) -> list[Station]:
    """The three-station example network (chargers, location, price)."""
    return [
        Station(0, 2, service_rate, 62.0, 8.0),
        Station(1, 1, service_rate, 60.0, 12.0),
        Station(2, 3, service_rate, 58.0, 20.0),
    ]


@dataclass(frozen=True)
class EvType:
    base_curvature: float
    anxiety: float
    weight: float = 1.0


def default_ev_types() -> tuple[EvType, ...]:
    return (EvType(50.0, 0.0, 1.0), EvType(50.0, 1.0, 1.0))


@dataclass
class ScenarioConfig:
    stations: list[Station] = field(default_factory=default_stations)
    arrival_intensity: float = 30.0
    epochs: int = 100
    window: int = 4
    distance_weight: float = 1.0
    delay_weight: float = 0.0
    range_per_soc: float = 25.0
    safety: float = 0.05
    rate_floor: float = 1e-6
    seed: int = 0
    wtp_range: tuple[float, float] = (80.0, 120.0)
    position_range: tuple[float, float] = (0.0, 20.0)
    soc_range: tuple[float, float] = (0.1, 0.9)
    ev_types: tuple[EvType, ...] = field(default_factory=default_ev_types)
    state_update: str = "quota"
    policy: str = "two_stage"
    overflow_penalty: Optional[float] = None
    tol: float = 1e-9

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.stations:
            raise ValueError("stations: at least one station is required")
        if not self.arrival_intensity > 0:
            raise ValueError("arrival_intensity: must be positive")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs: must be a positive integer")
        if int(self.window) != self.window or self.window < 1:
            raise ValueError("window: must be a positive integer")
        for name in ("wtp_range", "position_range", "soc_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound exceeds upper bound")
        lo, hi = self.soc_range
        if lo < 0 or hi > 1:
            raise ValueError("soc_range: must lie within [0, 1]")
        if self.wtp_range[0] < 0:
            raise ValueError("wtp_range: must be nonnegative")
        if not self.ev_types or sum(t.weight for t in self.ev_types) <= 0:
            raise ValueError("ev_types: need at least one type with positive weight")
        for t in self.ev_types:
            if not t.base_curvature > 0 or t.anxiety < 0 or t.weight < 0:
                raise ValueError("ev_types: base_curvature > 0, anxiety >= 0, weight >= 0")
        if self.distance_weight < 0 or self.delay_weight < 0:
            raise ValueError("weights: distance_weight and delay_weight must be nonnegative")
        if not self.range_per_soc > 0:
            raise ValueError("range_per_soc: must be positive")
        if not 0 <= self.safety < 1:
            raise ValueError("safety: must lie in [0, 1)")
        if not self.rate_floor > 0:
            raise ValueError("rate_floor: must be positive")
        if self.state_update not in STATE_UPDATES:
            raise ValueError(f"state_update: must be one of {STATE_UPDATES}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy: must be one of {POLICIES}")


@dataclass
class EpochReport:
    epoch: int
    demand: int
    max_queue: float
    max_sojourn: float
    mean_utility: float
    overflow_count: int
    fallback_count: int
    stability_relaxed: bool
    quotas: list[int]


class ScenarioStreams:
    """Per-purpose random generators derived from one seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self.arrivals = self._child(STREAM_ARRIVALS)
        self.ev_attributes = self._child(STREAM_EV_ATTRIBUTES)

    def _child(self, label: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(label,)))

    def stations(self) -> np.random.Generator:
        return self._child(STREAM_STATIONS)


def generate_epoch_evs(config: ScenarioConfig, streams: ScenarioStreams) -> list[EvRequest]:
    n = int(streams.arrivals.poisson(config.arrival_intensity))
    rng = streams.ev_attributes
    wtp = rng.uniform(*config.wtp_range, size=n)
    pos = rng.uniform(*config.position_range, size=n)
    soc = rng.uniform(*config.soc_range, size=n)
    weights = np.array([t.weight for t in config.ev_types], dtype=float)
    kinds = rng.choice(len(config.ev_types), size=n, p=weights / weights.sum())
    return [
        EvRequest(
            soc=float(soc[a]),
            wtp_cap=float(wtp[a]),
            position=float(pos[a]),
            base_curvature=config.ev_types[kinds[a]].base_curvature,
            anxiety=config.ev_types[kinds[a]].anxiety,
        )
        for a in range(n)
    ]


@dataclass
class NetworkState:
    stations: list[StationFlowState]
    epoch: int = 0  # epochs completed so far

    @classmethod
    def initial(cls, config: ScenarioConfig) -> "NetworkState":
        return cls([StationFlowState.empty(s.queue_params, config.window) for s in config.stations])

    @property
    def queues(self) -> np.ndarray:
        return np.array([s.in_station for s in self.stations])


def _sojourns(state: NetworkState, inflows, config: ScenarioConfig) -> np.ndarray:
    return np.array([
        sojourn_time(s.in_station, smoothed_rate(s, float(f), config.window), config.rate_floor)
        for s, f in zip(state.stations, inflows)
    ])


def run_epoch(
    state: NetworkState, evs: Sequence[EvRequest], config: ScenarioConfig
) -> tuple[NetworkState, EpochReport, Assignment]:
    stations = config.stations
    m = len(stations)
    demand = len(evs)
    epoch = state.epoch + 1
    relaxed = False

    if config.policy == "two_stage":
        try:
            if state.epoch == 0:
                plan = proportional_plan(state.stations, demand, config.window, config.rate_floor)
            else:
                plan = solve_quota(
                    state.stations, demand, config.window,
                    config.safety, config.rate_floor, config.tol,
                )
        except Exception as exc:
            raise RuntimeError(f"epoch {epoch}: stage-1 solve failed: {exc}") from exc
        relaxed = plan.stability_relaxed
        sojourns = _sojourns(state, plan.flows, config)
        um = build_utility_matrix(
            evs, stations, sojourns,
            config.distance_weight, config.delay_weight, config.range_per_soc,
        )
        try:
            assignment = solve_assignment(AssignmentProblem(um, plan.integer_quotas, config.overflow_penalty))
        except Exception as exc:
            raise RuntimeError(f"epoch {epoch}: stage-2 solve failed: {exc}") from exc
        counts = assignment.counts(m)
        inflows = plan.flows if config.state_update == "quota" else counts.astype(float)
        quotas = [int(q) for q in plan.integer_quotas]
        max_sojourn = float(sojourns.max())
    else:
        # Baselines route by their own rule; the congestion signal they see
        # (for scoring only) uses realized counts, filled in below.
        provisional = _sojourns(state, np.zeros(m), config)
        um = build_utility_matrix(
            evs, stations, provisional,
            config.distance_weight, config.delay_weight, config.range_per_soc,
        )
        if config.policy == "nearest":
            assignment = nearest_feasible(evs, stations, um)
        else:
            caps = [s.chargers for s in stations]
            assignment = deferred_acceptance(evs, stations, caps, um, state.queues).assignment
        counts = assignment.counts(m)
        inflows = counts.astype(float)
        sojourns = _sojourns(state, inflows, config)
        if config.delay_weight and demand:
            idx = np.arange(demand)
            um.utility += config.delay_weight * (provisional - sojourns)[None, :]
            assignment.objective = float(um.utility[idx, assignment.station_of].sum())
            assignment.penalized_objective = assignment.objective
        quotas = [int(c) for c in counts]
        max_sojourn = float(sojourns.max())

    new_state = NetworkState(
        [advance_state(s, float(f)) for s, f in zip(state.stations, inflows)], epoch
    )
    fallback = len(assignment.fallback_evs)
    overflow = len(set(assignment.overflow_evs) - set(assignment.fallback_evs))
    report = EpochReport(
        epoch=epoch,
        demand=demand,
        max_queue=float(new_state.queues.max()),
        max_sojourn=max_sojourn,
        mean_utility=assignment.objective / demand if demand else 0.0,
        overflow_count=overflow,
        fallback_count=fallback,
        stability_relaxed=relaxed,
        quotas=quotas,
    )
    return new_state, report, assignment


def simulate(config: ScenarioConfig):
    """Yield ``(report, state_after, assignment)`` for each epoch."""
    streams = ScenarioStreams(config.seed)
    state = NetworkState.initial(config)
    for _ in range(config.epochs):
        evs = generate_epoch_evs(config, streams)
        state, report, assignment = run_epoch(state, evs, config)
        yield report, state, assignment


def run_scenario(config: ScenarioConfig) -> list[EpochReport]:
    return [report for report, _, _ in simulate(config)]


@dataclass
class RunSummary:
    seed: int
    policy: str
    mean_max_queue: float
    mean_max_sojourn: float
    mean_utility: float
    epochs: int
    total_demand: int
    overflow: int
    fallback: int
    relaxed_epochs: int


def summarize(reports: Sequence[EpochReport], seed: int, policy: str) -> RunSummary:
    demand = sum(r.demand for r in reports)
    utility = math.fsum(r.mean_utility * r.demand for r in reports)
    return RunSummary(
        seed=seed,
        policy=policy,
        mean_max_queue=float(np.mean([r.max_queue for r in reports])),
        mean_max_sojourn=float(np.mean([r.max_sojourn for r in reports])),
        mean_utility=utility / demand if demand else 0.0,
        epochs=len(reports),
        total_demand=demand,
        overflow=sum(r.overflow_count for r in reports),
        fallback=sum(r.fallback_count for r in reports),
        relaxed_epochs=sum(r.stability_relaxed for r in reports),
    )


def time_saving(baseline: Sequence[EpochReport], optimized: Sequence[EpochReport]) -> np.ndarray:
    """Per-epoch reduction in worst-station sojourn achieved by ``optimized``."""
    return np.array([b.max_sojourn - o.max_sojourn for b, o in zip(baseline, optimized)])


def random_stations(
    count: int,
    seed: int,
    service_rate: float = DEFAULT_SERVICE_RATE,
    location_range: tuple[float, float] = (0.0, 20.0),
    price_range: tuple[float, float] = (55.0, 65.0),
    chargers: Sequence[int] = (1, 2, 3),
) -> list[Station]:
    """Draw ``count`` stations; smaller counts are prefixes of larger ones."""
    rng = ScenarioStreams(seed).stations()
    out = []
    for i in range(count):
        loc = float(rng.uniform(*location_range))
        c = int(rng.choice(chargers))
        price = float(rng.uniform(*price_range))
        out.append(Station(i, c, service_rate, price, loc))
    return out


@dataclass
class ScalingRow:
    stations: int
    policy: str
    seed: int
    mean_utility: float
    mean_max_sojourn: float
    mean_max_queue: float


def run_scaling_experiment(
    base: ScenarioConfig,
    station_counts: Sequence[int],
    policies: Sequence[str] = POLICIES,
    seeds: Sequence[int] = (0,),
    service_rate: Optional[float] = None,
) -> list[ScalingRow]:
    """Mean utility per EV for each station count, policy and seed.

    Stations are drawn per seed; smaller networks are prefixes of larger
    ones, so every policy and count sees the same stations and arrivals.
    """
    if not station_counts:
        raise ValueError("station_counts must be nonempty")
    if service_rate is None:
        service_rate = base.stations[0].service_rate
    rows = []
    for seed in seeds:
        pool = random_stations(max(station_counts), seed, service_rate)
        for count in station_counts:
            for policy in policies:
                cfg = replace(base, stations=pool[:count], seed=seed, policy=policy)
                s = summarize(run_scenario(cfg), seed, policy)
                rows.append(ScalingRow(count, policy, seed, s.mean_utility, s.mean_max_sojourn, s.mean_max_queue))
    return rows
