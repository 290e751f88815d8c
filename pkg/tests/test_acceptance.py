"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines print even
under output capture. Tolerances, sample sizes and seeds are fixed here and
must not be tuned toward a result.
"""

import time

import numpy as np
import pytest

from evalloc.assignment import AssignmentProblem, brute_force_assignment, solve_assignment
from evalloc.economics import EvRequest, Station, effective_curvature, optimal_charge
from evalloc.participation import (
    ParticipationParams,
    heterogeneous_fixed_points,
    sustainable_interval,
    uniform_cdf,
)
from evalloc.queueing import StationQueueParams, dev_mmc_simulate, expected_in_system
from evalloc.quota import StationFlowState, flow_upper_bound, is_feasible, solve_quota
from evalloc.reporting import write_epochs_csv
from evalloc.simulation import ScenarioConfig, run_scaling_experiment, run_scenario, simulate, summarize
from helpers import matrix, random_matrix
from oracles import charge_grid, quota_grid_search


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}")
        assert ok, f"criterion {number} failed: {detail}"
    return emit


def test_c1_erlang(verdict):
    t0 = time.perf_counter()
    errs = [abs(expected_in_system(StationQueueParams(2, 1.0), 1.0) - 4 / 3)]
    ok = errs[0] <= 1e-9
    worst = 0.0
    for rho in np.arange(1, 10) / 10:
        worst = max(worst, abs(expected_in_system(StationQueueParams(1, 1.0), rho) - rho / (1 - rho)))
    ok = ok and worst <= 1e-12
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1.0
    verdict(1, "Erlang-C correctness", ok,
            f"|L(2,1,1)-4/3|={errs[0]:.2e}, worst M/M/1 error {worst:.2e}, {elapsed:.3f}s")


def test_c2_queue_oracle(verdict):
    t0 = time.perf_counter()
    worst, where = 0.0, None
    for c in (1, 2, 4):
        for util in (0.5, 0.7, 0.9):
            params = StationQueueParams(c, 1.0)
            lam = util * c
            sim_l, _ = dev_mmc_simulate(params, lam, 1e6, 0)
            rel = abs(sim_l - expected_in_system(params, lam)) / expected_in_system(params, lam)
            if rel > worst:
                worst, where = rel, (c, util)
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.02 and elapsed < 30
    verdict(2, "queueing oracle", ok,
            f"worst relative error {worst:.2%} at (c, utilization)={where}, {elapsed:.1f}s")


def _quota_instance(rng):
    n = int(rng.integers(1, 4))
    window = int(rng.integers(1, 5))
    states = []
    for _ in range(n):
        c, mu = int(rng.integers(1, 4)), float(rng.uniform(1.0, 6.0))
        x = float(rng.uniform(0, 10)) if rng.random() < 0.8 else 0.0
        hist = tuple(float(v) for v in rng.uniform(0, 0.8 * c * mu, size=window - 1))
        states.append(StationFlowState(x, hist, StationQueueParams(c, mu)))
    return states, float(rng.integers(1, 11)), window


def test_c3_stage1_optimality(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, done, skipped = 0.0, 0, 0
    while done < 100:
        states, demand, window = _quota_instance(rng)
        caps = [flow_upper_bound(s, window) for s in states]
        if sum(caps) < demand:
            skipped += 1  # no split keeps every station stable; nothing to optimize
            continue
        plan = solve_quota(states, demand, window)
        oracle = quota_grid_search(
            [s.in_station for s in states], [s.past_inflow for s in states], caps, window, demand, shares=1000,
        )
        worst = max(worst, abs(plan.z_star - oracle))
        done += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-2 and elapsed < 60
    verdict(3, "stage-1 optimality", ok,
            f"worst |z* - grid| = {worst:.2e} over {done} instances ({skipped} overloaded draws redrawn), {elapsed:.1f}s")


def test_c4_monotone_feasibility(verdict):
    rng = np.random.default_rng(7)
    violations, feasible_cases = 0, 0
    for _ in range(1000):
        states, demand, window = _quota_instance(rng)
        upper = np.array([flow_upper_bound(s, window) for s in states])
        z = float(rng.uniform(1e-3, 20))
        zs = z + rng.exponential(5.0, size=10) + 1e-12
        base = is_feasible(states, z, demand, window, upper)
        feasible_cases += base
        if base:
            violations += sum(not is_feasible(states, float(zp), demand, window, upper) for zp in zs)
    verdict(4, "monotone feasibility", violations == 0,
            f"{violations} violations, {feasible_cases} feasible base points x 10 larger z")


def test_c5_stage2_exactness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(500):
        n, m = int(rng.integers(0, 7)), int(rng.integers(1, 4))
        um = random_matrix(rng, n, m) if n else matrix(np.zeros((0, m)))
        p = AssignmentProblem(um, rng.integers(0, 4, size=m))
        a, b = solve_assignment(p), brute_force_assignment(p)
        worst = max(worst, abs(a.penalized_objective - b.penalized_objective), abs(a.objective - b.objective))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 30
    verdict(5, "stage-2 exactness", ok, f"worst objective gap {worst:.2e} on 500 instances, {elapsed:.1f}s")


def test_c6_closed_form_charge(verdict):
    rng = np.random.default_rng(3)
    worst = -np.inf
    for _ in range(1000):
        ev = EvRequest(float(rng.uniform(0, 1)), float(rng.uniform(0, 150)), 0.0,
                       float(rng.uniform(1, 200)), float(rng.uniform(0, 2)))
        st = Station(0, 1, 1.0, float(rng.uniform(0, 100)), 0.0)
        _, phi = optimal_charge(ev, st)
        _, gphi = charge_grid(ev.soc, ev.wtp_cap, st.price, effective_curvature(ev), step=1e-5)
        worst = max(worst, gphi - phi)
    verdict(6, "closed-form charge", worst <= 1e-6, f"largest grid excess over closed form {worst:.2e}")


def test_c7_headline_comparison(verdict):
    t0 = time.perf_counter()
    queue_wins = sojourn_wins = utility_ok = 0
    ratios = []
    for seed in range(20):
        base = ScenarioConfig(arrival_intensity=30, window=4, epochs=100, seed=seed)
        two = summarize(run_scenario(base), seed, "two_stage")
        near = summarize(run_scenario(ScenarioConfig(**{**base.__dict__, "policy": "nearest"})), seed, "nearest")
        queue_wins += two.mean_max_queue < near.mean_max_queue
        sojourn_wins += two.mean_max_sojourn < near.mean_max_sojourn
        gap = abs(two.mean_utility - near.mean_utility) / abs(near.mean_utility)
        ratios.append(gap)
        utility_ok += gap <= 0.10
    elapsed = time.perf_counter() - t0
    ok = queue_wins >= 18 and sojourn_wins >= 18 and utility_ok >= 18 and elapsed < 300
    verdict(7, "headline comparison", ok,
            f"two_stage lower max queue in {queue_wins}/20, lower max sojourn in {sojourn_wins}/20, "
            f"utility within 10% in {utility_ok}/20 (gap {min(ratios):.1%}..{max(ratios):.1%}), {elapsed:.0f}s")


def test_c8_scaling_shape(verdict):
    t0 = time.perf_counter()
    counts = [3, 5, 8, 12]
    rows = run_scaling_experiment(ScenarioConfig(), counts, ("two_stage", "nearest"), seeds=range(20))
    medians = []
    for s in counts:
        adv = [
            two.mean_utility - near.mean_utility
            for two in rows if two.stations == s and two.policy == "two_stage"
            for near in rows if near.stations == s and near.policy == "nearest" and near.seed == two.seed
        ]
        medians.append(round(float(np.median(adv)), 3))
    steps = [b >= a for a, b in zip(medians, medians[1:])]
    # Four station counts give three consecutive comparisons; all must hold.
    elapsed = time.perf_counter() - t0
    ok = sum(steps) >= min(3, len(steps)) and elapsed < 600
    verdict(8, "scaling shape", ok,
            f"median advantage by S {dict(zip(counts, medians))}, "
            f"{sum(steps)}/{len(steps)} nondecreasing steps, {elapsed:.0f}s")


def test_c9_participation(verdict):
    out = sustainable_interval(ParticipationParams(2.0, 0.0, 1.0, 0.75))
    lo, hi = out.sustainable_interval
    ok_interval = abs(out.roots[0] - 0.5) <= 1e-12 and abs(out.roots[1] - 1.5) <= 1e-12 and (lo, hi) == (out.roots[0], 1.0)

    rng = np.random.default_rng(9)
    worst, empties_ok = 0.0, True
    for _ in range(1000):
        A = float(rng.uniform(0.01, 10))
        G = float(rng.uniform(0, 0.999 * A))
        B = float(rng.uniform(0.01, 10))
        c = float(rng.uniform(0, 0.5 * (A - G) ** 2 / B))
        p = ParticipationParams(A, G, B, c)
        res = sustainable_interval(p)
        if res.discriminant < 0:
            empties_ok &= res.empty and res.roots is None
            continue
        for r in res.roots:
            worst = max(worst, abs((A - G) * r - B * r * r - c))
    neg = sustainable_interval(ParticipationParams(2.0, 1.0, 1.0, 1.0))
    empties_ok &= neg.discriminant < 0 and neg.empty

    fps = sorted(m for m, _ in heterogeneous_fixed_points(2.0, 1.0, uniform_cdf(0.0, 1.0)))
    ok_fp = len(fps) == 2 and abs(fps[0]) <= 1e-8 and abs(fps[1] - 1) <= 1e-8
    ok = ok_interval and worst < 1e-10 and empties_ok and ok_fp
    verdict(9, "participation thresholds", ok,
            f"interval [{lo:.15g}, {hi:.15g}], worst residual {worst:.1e}, "
            f"negative discriminant empty={empties_ok}, fixed points {[round(m, 10) for m in fps]}")


def _csv_bytes(reports, tmp_path, name):
    path = tmp_path / name
    write_epochs_csv(path, reports)
    return path.read_bytes()


def test_c10_determinism_conservation(verdict, tmp_path):
    mismatches = conservation = negative = 0
    for policy in ("two_stage", "nearest", "matching"):
        for seed in range(10):
            cfg = ScenarioConfig(epochs=200, seed=seed, policy=policy)
            reports = []
            for report, state, assignment in simulate(cfg):
                reports.append(report)
                m = len(cfg.stations)
                placed = np.bincount(assignment.station_of, minlength=m).sum() if report.demand else 0
                conservation += placed != report.demand or len(assignment.station_of) != report.demand
                negative += int(np.any(state.queues < 0))
            mismatches += _csv_bytes(reports, tmp_path, "a.csv") != _csv_bytes(run_scenario(cfg), tmp_path, "b.csv")
    ok = mismatches == conservation == negative == 0
    verdict(10, "determinism and conservation", ok,
            f"{mismatches} CSV mismatches, {conservation} conservation and {negative} negativity violations "
            f"over 3 policies x 10 seeds x 200 epochs")
