"""Reduced-form platform adoption: join payoffs, thresholds, fixed points."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class InvalidCdfError(ValueError):
    pass


@dataclass(frozen=True)
class ParticipationParams:
    network_benefit: float  # A
    spillover: float  # G
    overhead: float  # B
    join_cost: float  # c

    def __post_init__(self):
        a, g, b, c = self.network_benefit, self.spillover, self.overhead, self.join_cost
        if not a > 0:
            raise ValueError(f"network benefit A must be positive, got {a}")
        if not 0 <= g < a:
            raise ValueError(f"spillover G must lie in [0, A), got G={g}, A={a}")
        if not b > 0:
            raise ValueError(f"overhead B must be positive, got {b}")
        if c < 0:
            raise ValueError(f"join cost c must be nonnegative, got {c}")

    @property
    def net_benefit(self) -> float:
        return self.network_benefit - self.spillover


@dataclass(frozen=True)
class ParticipationOutcome:
    discriminant: float
    roots: Optional[tuple[float, float]]
    sustainable_interval: Optional[tuple[float, float]]

    @property
    def empty(self) -> bool:
        return self.sustainable_interval is None


def payoffs(params: ParticipationParams, m: float) -> tuple[float, float]:
    """Expected payoff of joining and of staying out at participation ``m``."""
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"participation rate must lie in [0, 1], got {m}")
    join = params.network_benefit * m - params.overhead * m * m - params.join_cost
    return join, params.spillover * m


def join_margin(params: ParticipationParams, m: float) -> float:
    """Gain from joining over staying out; joining is rational when >= 0."""
    return params.net_benefit * m - params.overhead * m * m - params.join_cost


def sustainable_interval(params: ParticipationParams) -> ParticipationOutcome:
    k, b, c = params.net_benefit, params.overhead, params.join_cost
    disc = k * k - 4.0 * b * c
    if disc < 0:
        return ParticipationOutcome(disc, None, None)
    sq = math.sqrt(disc)
    # Citardauq form for the small root avoids cancellation when 4Bc << k^2.
    m2 = (k + sq) / (2.0 * b)
    m1 = (2.0 * c) / (k + sq) if k + sq > 0 else 0.0
    lo, hi = max(m1, 0.0), min(m2, 1.0)
    interval = (lo, hi) if lo <= hi else None
    return ParticipationOutcome(disc, (m1, m2), interval)


def uniform_cdf(lo: float, hi: float) -> Callable[[float], float]:
    if not hi > lo:
        raise ValueError(f"uniform cost range needs hi > lo, got ({lo}, {hi})")

    def cdf(v):
        return min(max((v - lo) / (hi - lo), 0.0), 1.0)

    return cdf


def point_cdf(c0: float) -> Callable[[float], float]:
    return lambda v: 1.0 if v >= c0 else 0.0


def empirical_cdf(costs) -> Callable[[float], float]:
    xs = np.sort(np.asarray(costs, dtype=float))
    if xs.size == 0:
        raise ValueError("empirical cost table is empty")
    return lambda v: float(np.searchsorted(xs, v, side="right")) / xs.size


def _check_cdf(cost_cdf, lo: float, hi: float, points: int = 257) -> None:
    probe = np.linspace(lo - 1.0, hi + 1.0, points)
    vals = np.array([cost_cdf(float(v)) for v in probe])
    if np.any(vals < 0) or np.any(vals > 1):
        raise InvalidCdfError("cost CDF must map into [0, 1]")
    if np.any(np.diff(vals) < -1e-12):
        raise InvalidCdfError("cost CDF must be nondecreasing")


def heterogeneous_fixed_points(
    net_benefit: float,
    overhead: float,
    cost_cdf: Callable[[float], float],
    grid: int = 10_000,
    tol: float = 1e-10,
) -> list[tuple[float, bool]]:
    """Participation rates solving ``m = F((A - G) m - B m^2)``.

    Scans a uniform grid on [0, 1] for zeros and sign changes of the gap
    ``m - F(...)`` and refines each bracket by bisection. A fixed point is
    flagged stable when the response map's slope there is below 1, i.e.
    under the adjustment ``dm/dt = F(...) - m``.
    Jump points of a discontinuous CDF show up as brackets too.
    """
    def benefit(m):
        return net_benefit * m - overhead * m * m

    peak = max(benefit(0.0), benefit(1.0), benefit(min(max(net_benefit / (2 * overhead), 0.0), 1.0)))
    _check_cdf(cost_cdf, min(0.0, benefit(1.0)), peak)

    def response(m):
        return cost_cdf(benefit(m))

    def gap(m):
        return m - response(m)

    ms = np.linspace(0.0, 1.0, grid + 1)
    gaps = np.array([gap(float(m)) for m in ms])
    found: list[float] = []
    for k in range(grid + 1):
        if gaps[k] == 0.0:
            found.append(float(ms[k]))
        elif k < grid and gaps[k] * gaps[k + 1] < 0:
            lo, hi = float(ms[k]), float(ms[k + 1])
            glo = gaps[k]
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                g = gap(mid)
                if g == 0.0:
                    lo = hi = mid
                    break
                if (g < 0) == (glo < 0):
                    lo, glo = mid, g
                else:
                    hi = mid
            found.append(0.5 * (lo + hi))

    h = 1e-5
    out = []
    for m in found:
        a, b = max(m - h, 0.0), min(m + h, 1.0)
        slope = (response(b) - response(a)) / (b - a)
        out.append((m, bool(slope < 1.0)))
    return out
