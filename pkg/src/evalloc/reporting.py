"""Delimited and JSON outputs: per-epoch CSV, compare/scaling tables, series."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .simulation import EpochReport

EPOCH_COLUMNS = [
    "epoch", "demand", "max_queue", "max_sojourn", "mean_utility",
    "overflow", "fallback", "stability_relaxed",
]


def fmt(value) -> str:
    """Locale-free text for one cell; reals carry 12 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _parse_bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError(f"expected true/false, got {text!r}")
    return text == "true"


def _writer(handle):
    return csv.writer(handle, lineterminator="\n")


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_table(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_epochs_csv(path: Path, reports: Sequence[EpochReport]) -> None:
    n_stations = max((len(r.quotas) for r in reports), default=0)
    header = EPOCH_COLUMNS + [f"quota_{i + 1}" for i in range(n_stations)]
    rows = (
        [r.epoch, r.demand, r.max_queue, r.max_sojourn, r.mean_utility,
         r.overflow_count, r.fallback_count, r.stability_relaxed, *r.quotas]
        for r in reports
    )
    write_table(path, header, rows)


def read_epochs_csv(path: Path) -> list[EpochReport]:
    out = []
    for row in read_table(path):
        quotas = [int(row[k]) for k in row if k.startswith("quota_")]
        out.append(EpochReport(
            epoch=int(row["epoch"]),
            demand=int(row["demand"]),
            max_queue=float(row["max_queue"]),
            max_sojourn=float(row["max_sojourn"]),
            mean_utility=float(row["mean_utility"]),
            overflow_count=int(row["overflow"]),
            fallback_count=int(row["fallback"]),
            stability_relaxed=_parse_bool(row["stability_relaxed"]),
            quotas=quotas,
        ))
    return out


def write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


SERIES_COLUMNS = ["epoch", "policy", "mean", "p10", "p90", "seeds"]


def epoch_series(runs: dict[str, list[list[EpochReport]]], metric: str) -> list[list]:
    """Long-format per-epoch statistics across seeds, one block per policy."""
    rows = []
    for policy, per_seed in runs.items():
        values = np.array([[getattr(r, metric) for r in reports] for reports in per_seed])
        for k in range(values.shape[1]):
            col = values[:, k]
            rows.append([k + 1, policy, col.mean(), np.percentile(col, 10), np.percentile(col, 90), len(col)])
    return rows


def saving_series(runs: dict[str, list[list[EpochReport]]], reference: str = "two_stage") -> list[list]:
    """Per-epoch worst-sojourn reduction of ``reference`` against each other policy."""
    rows = []
    ref = runs[reference]
    for policy, per_seed in runs.items():
        if policy == reference:
            continue
        diffs = np.array([
            [b.max_sojourn - o.max_sojourn for b, o in zip(base, opt)]
            for base, opt in zip(per_seed, ref)
        ])
        for k in range(diffs.shape[1]):
            col = diffs[:, k]
            cum = diffs[:, : k + 1].sum(axis=1).mean()
            rows.append([k + 1, policy, col.mean(), np.percentile(col, 10), np.percentile(col, 90), len(col), cum])
    return rows
