"""Small builders shared by the test modules."""

import numpy as np

from evalloc.economics import EvRequest, Station, UtilityMatrix


def matrix(utility, feasible=None):
    """UtilityMatrix straight from a utility table; charge and distance are zero."""
    u = np.asarray(utility, dtype=float)
    if u.ndim == 1:
        u = u.reshape(0, 0) if u.size == 0 else u[None, :]
    feas = np.ones(u.shape, dtype=bool) if feasible is None else np.asarray(feasible, dtype=bool)
    z = np.zeros(u.shape)
    return UtilityMatrix(u, z.copy(), z.copy(), z.copy(), feas, np.zeros(u.shape[0], dtype=bool))


def random_matrix(rng, n, m, p_infeasible=0.3):
    u = np.round(rng.uniform(-20, 40, size=(n, m)), 3)
    feas = rng.random((n, m)) > p_infeasible
    for a in range(n):
        if not feas[a].any():
            feas[a, rng.integers(m)] = True
    return matrix(u, feas)


def default_stations(mu=6.0):
    return [
        Station(0, 2, mu, 62.0, 8.0),
        Station(1, 1, mu, 60.0, 12.0),
        Station(2, 3, mu, 58.0, 20.0),
    ]


def ev(soc=0.5, wtp=100.0, pos=10.0, s=50.0, alpha=0.0):
    return EvRequest(soc, wtp, pos, s, alpha)
