"""Comparison policies: nearest-station free choice and a matching stand-in.

``deferred_acceptance`` is a generic EV-proposing deferred-acceptance
procedure with charger-count capacities. It is a stand-in for a cited
matching-based scheduler whose internals are not available, not a
reimplementation of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .assignment import Assignment
from .economics import EvRequest, Station, UtilityMatrix

MATCHING_LABEL = "deferred-acceptance stand-in (not the cited algorithm)"


def _assignment(um: UtilityMatrix, station_of: np.ndarray, extra_flags=()) -> Assignment:
    n = len(station_of)
    idx = np.arange(n)
    fallback = [int(a) for a in np.flatnonzero(um.fallback)]
    objective = float(um.utility[idx, station_of].sum()) if n else 0.0
    return Assignment(
        station_of=station_of,
        charge_of=um.charge[idx, station_of] if n else np.zeros(0),
        objective=objective,
        overflow_evs=sorted(set(fallback) | set(extra_flags)),
        penalized_objective=objective,
        fallback_evs=fallback,
    )


def nearest_feasible(
    evs: Sequence[EvRequest], stations: Sequence[Station], utilities: UtilityMatrix
) -> Assignment:
    """Each EV drives to the closest station it can reach; lower index on ties.

    ``utilities`` supplies distances, reachability and the utility used for
    scoring; the choice itself reads distances only.
    """
    n = len(evs)
    station_of = np.zeros(n, dtype=int)
    for a in range(n):
        options = utilities.feasible_stations(a)
        # Stable min over ascending indices keeps the lower index on ties.
        station_of[a] = min(options, key=lambda i: utilities.distance[a, i])
    return _assignment(utilities, station_of)


@dataclass
class MatchingResult:
    assignment: Assignment
    matched: np.ndarray  # bool per EV: held by a station when DA stopped
    proposals: int
    station_rank: np.ndarray  # (n, m) station-side score, higher is preferred


def deferred_acceptance(
    evs: Sequence[EvRequest],
    stations: Sequence[Station],
    capacities: Sequence[int],
    utilities: UtilityMatrix,
    queue_levels: Optional[Sequence[float]] = None,
) -> MatchingResult:
    """EV-proposing deferred acceptance with station-side rejection.

    EVs rank feasible stations by utility. A station holds at most
    ``capacities[i]`` proposals, preferring higher revenue ``E* x price``
    (lower EV index on ties). EVs rejected everywhere fall back to the
    feasible station with the shortest queue.
    """
    n, m = utilities.shape
    caps = [int(c) for c in capacities]
    prices = np.array([s.price for s in stations])
    score = utilities.charge * prices[None, :]
    prefs = []
    for a in range(n):
        opts = utilities.feasible_stations(a)
        opts.sort(key=lambda i: (-utilities.utility[a, i], i))
        prefs.append(opts)

    next_choice = [0] * n
    held: list[list[int]] = [[] for _ in range(m)]
    free = list(range(n))
    proposals = 0
    while free:
        a = free.pop(0)
        if next_choice[a] >= len(prefs[a]):
            continue
        i = prefs[a][next_choice[a]]
        next_choice[a] += 1
        proposals += 1
        held[i].append(a)
        held[i].sort(key=lambda b: (-score[b, i], b))
        if len(held[i]) > caps[i]:
            rejected = held[i].pop()
            free.append(rejected)

    station_of = np.full(n, -1, dtype=int)
    matched = np.zeros(n, dtype=bool)
    for i in range(m):
        for a in held[i]:
            station_of[a] = i
            matched[a] = True
    levels = np.zeros(m) if queue_levels is None else np.asarray(queue_levels, dtype=float)
    unmatched = []
    for a in range(n):
        if not matched[a]:
            opts = utilities.feasible_stations(a)
            station_of[a] = min(opts, key=lambda i: (levels[i], i))
            unmatched.append(a)
    return MatchingResult(_assignment(utilities, station_of, unmatched), matched, proposals, score)


def blocking_pairs(result: MatchingResult, utilities: UtilityMatrix, capacities) -> list[tuple[int, int]]:
    """Feasible (EV, station) pairs that would both rather be matched together."""
    n, m = utilities.shape
    station_of = result.assignment.station_of
    held = [[a for a in range(n) if result.matched[a] and station_of[a] == i] for i in range(m)]
    pairs = []
    for a in range(n):
        for i in utilities.feasible_stations(a):
            if result.matched[a]:
                j = station_of[a]
                if j == i or not utilities.utility[a, i] > utilities.utility[a, j]:
                    continue
            if len(held[i]) < capacities[i]:
                pairs.append((a, i))
                continue
            rank = lambda b: (-result.station_rank[b, i], b)
            if any(rank(a) < rank(b) for b in held[i]):
                pairs.append((a, i))
    return pairs
