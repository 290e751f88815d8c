"""Stage-2 capacitated assignment of EVs to stations under quotas.

The integer program is a transportation problem, solved exactly as a
min-cost flow:

    source -> EV (cap 1) -> station (feasible pairs, cost -u)
           -> sink (cap quota, cost 0)  +  (cap n, cost overflow_penalty)

The overflow arc keeps the problem feasible when reachability piles EVs onto
a station beyond its quota; its price makes it a last resort.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .economics import UtilityMatrix


class InfeasibleEVError(RuntimeError):
    """An EV has no station it may be assigned to."""


@dataclass
class AssignmentProblem:
    utilities: UtilityMatrix
    quotas: np.ndarray
    overflow_penalty: Optional[float] = None

    def __post_init__(self):
        self.quotas = np.asarray(self.quotas, dtype=int)
        n, m = self.utilities.shape
        if self.quotas.shape != (m,):
            raise ValueError(f"need {m} quotas, got shape {self.quotas.shape}")
        if np.any(self.quotas < 0):
            raise ValueError("quotas must be nonnegative")
        if self.overflow_penalty is None:
            self.overflow_penalty = default_overflow_penalty(self.utilities)
        elif not self.overflow_penalty > 0:
            raise ValueError("overflow_penalty must be positive")


def default_overflow_penalty(utilities: UtilityMatrix) -> float:
    # One extra unit of station capacity can shift the total utility by at
    # most n * (max u - min u) <= 2 n max|u|; pricing above that makes
    # overflow strictly lexicographic.
    n = utilities.shape[0]
    mask = utilities.feasible
    umax = float(np.abs(utilities.utility[mask]).max()) if mask.any() else 0.0
    return max(10.0, 2.0 * n) * umax + 1.0


@dataclass
class Assignment:
    station_of: np.ndarray
    charge_of: np.ndarray
    objective: float
    overflow_evs: list[int] = field(default_factory=list)
    penalized_objective: float = 0.0
    fallback_evs: list[int] = field(default_factory=list)

    def counts(self, n_stations: int) -> np.ndarray:
        return np.bincount(self.station_of, minlength=n_stations) if len(self.station_of) else np.zeros(n_stations, dtype=int)


class _MinCostFlow:
    """Successive shortest paths with Johnson potentials (nonnegative costs)."""

    def __init__(self, n_nodes: int):
        self.graph: list[list[int]] = [[] for _ in range(n_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []

    def add_edge(self, u: int, v: int, cap: int, cost: float) -> int:
        e = len(self.to)
        self.graph[u].append(e)
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.graph[v].append(e + 1)
        self.to.append(u)
        self.cap.append(0)
        self.cost.append(-cost)
        return e

    def flow(self, s: int, t: int, amount: int) -> tuple[int, float]:
        n = len(self.graph)
        potential = [0.0] * n
        sent, total = 0, 0.0
        inf = float("inf")
        while sent < amount:
            dist = [inf] * n
            prev_edge = [-1] * n
            dist[s] = 0.0
            heap = [(0.0, s)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                for e in self.graph[u]:
                    if self.cap[e] <= 0:
                        continue
                    v = self.to[e]
                    # Clamp float dust in reduced costs; they are >= 0 in exact arithmetic.
                    rc = max(self.cost[e] + potential[u] - potential[v], 0.0)
                    nd = d + rc
                    if nd < dist[v]:
                        dist[v] = nd
                        prev_edge[v] = e
                        heapq.heappush(heap, (nd, v))
            if dist[t] == inf:
                break
            for v in range(n):
                if dist[v] < inf:
                    potential[v] += dist[v]
            push = amount - sent
            v = t
            while v != s:
                e = prev_edge[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = t
            while v != s:
                e = prev_edge[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                total += push * self.cost[e]
                v = self.to[e ^ 1]
            sent += push
        return sent, total


def _finish(problem: AssignmentProblem, station_of: np.ndarray) -> Assignment:
    um = problem.utilities
    n, m = um.shape
    idx = np.arange(n)
    objective = float(um.utility[idx, station_of].sum()) if n else 0.0
    charge = um.charge[idx, station_of] if n else np.zeros(0)
    counts = np.bincount(station_of, minlength=m) if n else np.zeros(m, dtype=int)
    overflow = []
    n_over = 0
    for i in range(m):
        extra = int(counts[i] - problem.quotas[i])
        if extra > 0:
            n_over += extra
            members = [a for a in range(n) if station_of[a] == i]
            # Lowest-utility members are the ones riding the overflow arc.
            members.sort(key=lambda a: (um.utility[a, i], -a))
            overflow.extend(members[:extra])
    fallback = [int(a) for a in np.flatnonzero(um.fallback)]
    flagged = sorted(set(overflow) | set(fallback))
    return Assignment(
        station_of=station_of,
        charge_of=charge,
        objective=objective,
        overflow_evs=flagged,
        penalized_objective=objective - problem.overflow_penalty * n_over,
        fallback_evs=fallback,
    )


def solve_assignment(problem: AssignmentProblem) -> Assignment:
    """Exact utility-maximizing assignment with quota overflow as last resort."""
    um = problem.utilities
    n, m = um.shape
    if n == 0:
        return _finish(problem, np.zeros(0, dtype=int))
    for a in range(n):
        if not um.feasible[a].any():
            raise InfeasibleEVError(f"EV {a} has no admissible station")

    # Shift pair costs by a constant so every arc cost is nonnegative; each
    # EV uses exactly one pair arc, so the optimum is unchanged.
    shift = float(um.utility[um.feasible].max())
    source, sink = n + m, n + m + 1
    mcf = _MinCostFlow(n + m + 2)
    pair_edges = {}
    for a in range(n):
        mcf.add_edge(source, a, 1, 0.0)
    for a in range(n):
        for i in range(m):
            if um.feasible[a, i]:
                pair_edges[(a, i)] = mcf.add_edge(a, n + i, 1, shift - um.utility[a, i])
    for i in range(m):
        if problem.quotas[i] > 0:
            mcf.add_edge(n + i, sink, int(problem.quotas[i]), 0.0)
        mcf.add_edge(n + i, sink, n, float(problem.overflow_penalty))
    sent, _ = mcf.flow(source, sink, n)
    if sent != n:
        raise InfeasibleEVError(f"only {sent} of {n} EVs could be routed")

    station_of = np.full(n, -1, dtype=int)
    for (a, i), e in pair_edges.items():
        if mcf.cap[e] == 0:
            station_of[a] = i
    return _finish(problem, station_of)


def brute_force_assignment(problem: AssignmentProblem) -> Assignment:
    """Enumerate every station choice per EV; test oracle for small instances."""
    um = problem.utilities
    n, m = um.shape
    if n > 8 or m > 4:
        raise ValueError(f"brute force limited to 8 EVs x 4 stations, got {n} x {m}")
    if n == 0:
        return _finish(problem, np.zeros(0, dtype=int))
    choices = [um.feasible_stations(a) for a in range(n)]
    if any(not c for c in choices):
        raise InfeasibleEVError("an EV has no admissible station")
    best, best_val = None, -np.inf
    for combo in itertools.product(*choices):
        counts = np.bincount(combo, minlength=m)
        over = np.maximum(counts - problem.quotas, 0).sum()
        val = sum(um.utility[a, i] for a, i in enumerate(combo)) - problem.overflow_penalty * over
        if val > best_val:
            best, best_val = combo, val
    return _finish(problem, np.array(best, dtype=int))
