"""Command-line entry point: ``evalloc {simulate,compare,scaling,participation}``.

Exit codes: 0 success, 2 configuration or argument error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load, scenario_to_dict
from .participation import (
    ParticipationParams,
    empirical_cdf,
    heterogeneous_fixed_points,
    point_cdf,
    sustainable_interval,
    uniform_cdf,
)
from .reporting import (
    SERIES_COLUMNS,
    epoch_series,
    saving_series,
    write_epochs_csv,
    write_json,
    write_table,
)
from .simulation import POLICIES, run_scaling_experiment, run_scenario, summarize

log = logging.getLogger("evalloc")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(ValueError):
    pass


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file (or a summary.json from a previous run)")
    parser.add_argument("--seed", type=int, help="base random seed")
    parser.add_argument("--out", default="results", help="output directory (default: results)")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, repeatable (e.g. weights.delay=0.5)")
    parser.add_argument("--policy", choices=POLICIES, help="policy for simulate")
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evalloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario, write epochs.csv and summary.json")
    _common(p)

    p = sub.add_parser("compare", help="run policies on shared seeds")
    _common(p)
    p.add_argument("--policies", help="comma-separated subset of " + ",".join(POLICIES))
    p.add_argument("--seeds", type=int, help="number of seeds (base seed, base+1, ...)")

    p = sub.add_parser("scaling", help="mean utility against number of stations")
    _common(p)
    p.add_argument("--stations", help="comma-separated station counts, e.g. 3,5,8,12")
    p.add_argument("--policies", help="comma-separated subset of " + ",".join(POLICIES))
    p.add_argument("--seeds", type=int, help="number of seeds")

    p = sub.add_parser("participation", help="adoption thresholds and fixed points")
    p.add_argument("--A", type=float, required=True, dest="A", help="network benefit")
    p.add_argument("--G", type=float, required=True, dest="G", help="spillover to non-joiners")
    p.add_argument("--B", type=float, required=True, dest="B", help="convex overhead")
    p.add_argument("--c", type=float, dest="c", help="homogeneous join cost")
    p.add_argument("--cdf", help="join-cost distribution: uniform(lo,hi) | point(c) | path to a cost table")
    p.add_argument("--grid", type=int, default=10_000, help="fixed-point scan resolution")
    p.add_argument("--out", help="directory for participation.json")
    return parser


def _policies(text, default) -> list[str]:
    items = [p.strip() for p in text.split(",")] if text else list(default)
    bad = [p for p in items if p not in POLICIES]
    if bad or not items:
        raise UsageError(f"unknown policy {bad}; choose from {', '.join(POLICIES)}")
    return items


def _int_list(text) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise UsageError("station counts must be positive integers")
    return values


def _positive(value, name) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise UsageError(f"{name} must be a positive integer, got {value!r}")
    return value


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run(cfg):
    return run_scenario(cfg)


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def cmd_simulate(args) -> int:
    cfg, data = load(args.config, args.override, args.seed, args.policy)
    out = _outdir(args.out)
    reports = run_scenario(cfg)
    write_epochs_csv(out / "epochs.csv", reports)
    resolved = scenario_to_dict(cfg, {"compare": data["compare"], "scaling": data["scaling"]})
    write_json(out / "summary.json", {
        "artifact_version": __version__,
        "seed": cfg.seed,
        "policy": cfg.policy,
        "aggregates": asdict(summarize(reports, cfg.seed, cfg.policy)),
        "config": resolved,
    })
    if not args.no_figures:
        from .plotting import plot_epochs
        plot_epochs(reports, out / "epochs.png")
    log.info("wrote %s", out / "epochs.csv")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, data = load(args.config, args.override, args.seed)
    policies = _policies(args.policies, data["compare"]["policies"])
    n_seeds = _positive(args.seeds if args.seeds is not None else data["compare"]["seeds"], "compare.seeds")
    seeds = [cfg.seed + k for k in range(n_seeds)]
    jobs = [replace(cfg, seed=s, policy=p) for s in seeds for p in policies]
    results = _map(_run, jobs, args.jobs)
    runs: dict[str, list] = {p: [] for p in policies}
    for job, reports in zip(jobs, results):
        runs[job.policy].append(reports)

    out = _outdir(args.out)
    rows, summaries = [], {p: [] for p in policies}
    for k, seed in enumerate(seeds):
        for p in policies:
            s = summarize(runs[p][k], seed, p)
            summaries[p].append(s)
            if "two_stage" in runs:
                ref = runs["two_stage"][k]
                saving = float(np.mean([b.max_sojourn - o.max_sojourn for b, o in zip(runs[p][k], ref)]))
            else:
                saving = ""
            rows.append([seed, p, s.mean_max_queue, s.mean_max_sojourn, s.mean_utility, saving])
    write_table(out / "compare.csv",
                ["seed", "policy", "mean_max_queue", "mean_max_sojourn", "mean_utility", "time_saving"], rows)

    figures = []
    def series(name, metric, subset, ylabel, title):
        present = [p for p in subset if p in runs]
        if len(present) < len(subset):
            return
        data_rows = epoch_series({p: runs[p] for p in present}, metric)
        write_table(out / f"{name}.csv", SERIES_COLUMNS, data_rows)
        figures.append((name, data_rows, ylabel, title))

    series("utility_series", "mean_utility", ["two_stage", "nearest"], "mean utility", "Utility: free vs optimization")
    series("queue_series", "max_queue", ["two_stage", "nearest"], "max queue length", "Queue length: free vs optimization")
    series("matching_queue_series", "max_queue", ["two_stage", "matching"], "max queue length",
           "Queue length: matching vs optimization")
    series("matching_delay_series", "max_sojourn", ["two_stage", "matching"], "max sojourn",
           "Max delay: matching vs optimization")
    if "two_stage" in runs and "nearest" in runs:
        saving_rows = saving_series({p: runs[p] for p in ("two_stage", "nearest")})
        write_table(out / "time_saving_series.csv", SERIES_COLUMNS + ["cumulative"], saving_rows)
        figures.append(("time_saving_series", saving_rows, "sojourn saved", "Time saving: free vs optimization"))

    aggregates = {}
    for p in policies:
        ss = summaries[p]
        aggregates[p] = {
            "mean_max_queue": float(np.mean([s.mean_max_queue for s in ss])),
            "mean_max_sojourn": float(np.mean([s.mean_max_sojourn for s in ss])),
            "mean_utility": float(np.mean([s.mean_utility for s in ss])),
        }
        if "two_stage" in summaries and p != "two_stage":
            ref = summaries["two_stage"]
            aggregates[p]["two_stage_wins_max_queue"] = sum(a.mean_max_queue < b.mean_max_queue for a, b in zip(ref, ss))
            aggregates[p]["two_stage_wins_max_sojourn"] = sum(a.mean_max_sojourn < b.mean_max_sojourn for a, b in zip(ref, ss))
    write_json(out / "summary.json", {
        "artifact_version": __version__,
        "seeds": seeds,
        "policies": policies,
        "aggregates": aggregates,
        "matching_note": "matching = deferred-acceptance stand-in, not the cited algorithm",
        "config": scenario_to_dict(cfg, {"compare": data["compare"], "scaling": data["scaling"]}),
    })
    if not args.no_figures:
        from .plotting import plot_series
        for name, data_rows, ylabel, title in figures:
            plot_series(data_rows, out / f"{name}.png", ylabel, title)
    return EXIT_OK


def _scaling_one(job):
    base, counts, policies, seed, service_rate = job
    return run_scaling_experiment(base, counts, policies, [seed], service_rate)


def cmd_scaling(args) -> int:
    cfg, data = load(args.config, args.override, args.seed)
    sc = data["scaling"]
    counts = _int_list(args.stations) if args.stations else _int_list(",".join(map(str, sc["station_counts"])))
    policies = _policies(args.policies, sc["policies"])
    n_seeds = _positive(args.seeds if args.seeds is not None else sc["seeds"], "scaling.seeds")
    service_rate = float(sc["service_rate"])
    seeds = [cfg.seed + k for k in range(n_seeds)]
    results = _map(_scaling_one, [(cfg, counts, policies, s, service_rate) for s in seeds], args.jobs)
    rows = [r for chunk in results for r in chunk]

    out = _outdir(args.out)
    write_table(out / "scaling_runs.csv",
                ["stations", "policy", "seed", "mean_utility", "mean_max_sojourn", "mean_max_queue"],
                [[r.stations, r.policy, r.seed, r.mean_utility, r.mean_max_sojourn, r.mean_max_queue] for r in rows])
    agg, plot_rows = [], []
    for count in counts:
        for p in policies:
            sel = [r for r in rows if r.stations == count and r.policy == p]
            u = np.array([r.mean_utility for r in sel])
            w = np.array([r.mean_max_sojourn for r in sel])
            agg.append([count, p, len(sel), u.mean(), float(np.median(u)), w.mean(), float(np.median(w)), w.max()])
            plot_rows.append((count, p, u.mean(), np.percentile(u, 10), np.percentile(u, 90)))
    write_table(out / "scaling.csv",
                ["stations", "policy", "seeds", "mean_utility", "median_utility",
                 "mean_max_sojourn", "median_max_sojourn", "max_max_sojourn"], agg)
    if not args.no_figures:
        from .plotting import plot_scaling
        plot_scaling(plot_rows, out / "scaling.png")
    return EXIT_OK


_CDF_RE = re.compile(r"^\s*(uniform|point)\s*\(([^)]*)\)\s*$")


def parse_cdf(spec: str):
    m = _CDF_RE.match(spec)
    if m:
        try:
            args = [float(v) for v in m.group(2).split(",")]
        except ValueError:
            raise UsageError(f"bad CDF arguments in {spec!r}") from None
        if m.group(1) == "uniform":
            if len(args) != 2:
                raise UsageError("uniform(lo,hi) takes two numbers")
            return uniform_cdf(*args)
        if len(args) != 1:
            raise UsageError("point(c) takes one number")
        return point_cdf(args[0])
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"{spec}: not uniform(lo,hi), point(c), or an existing cost table")
    costs = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            costs.append(float(line.split(",")[0]))
        except ValueError:
            raise UsageError(f"{path}:{lineno}: not a number: {line!r}") from None
    return empirical_cdf(costs)


def cmd_participation(args) -> int:
    if args.c is None and args.cdf is None:
        raise UsageError("give --c (homogeneous cost) and/or --cdf (cost distribution)")
    # Validate A, G, B even when only the heterogeneous map is requested.
    params = ParticipationParams(args.A, args.G, args.B, args.c if args.c is not None else 0.0)
    payload = {"A": args.A, "G": args.G, "B": args.B}
    if args.c is not None:
        res = sustainable_interval(params)
        payload.update(c=args.c, discriminant=res.discriminant,
                       roots=list(res.roots) if res.roots else None,
                       sustainable_interval=list(res.sustainable_interval) if res.sustainable_interval else None)
        print(f"discriminant: {res.discriminant:.12g}")
        if res.roots:
            print(f"roots: m1={res.roots[0]:.12g} m2={res.roots[1]:.12g}")
        else:
            print("roots: none (discriminant < 0)")
        if res.sustainable_interval:
            lo, hi = res.sustainable_interval
            print(f"sustainable interval: [{lo:.12g}, {hi:.12g}]")
        else:
            print("sustainable interval: empty")
    if args.cdf is not None:
        cdf = parse_cdf(args.cdf)
        points = heterogeneous_fixed_points(params.net_benefit, params.overhead, cdf, args.grid)
        payload["cdf"] = args.cdf
        payload["fixed_points"] = [{"m": m, "stable": stable} for m, stable in points]
        for m, stable in points:
            print(f"fixed point: m={m:.10f} ({'stable' if stable else 'unstable'})")
    if args.out:
        write_json(_outdir(args.out) / "participation.json", payload)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "scaling": cmd_scaling,
    "participation": cmd_participation,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        if args.command == "participation":
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # solver or I/O failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
