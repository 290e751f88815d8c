"""Figures rendered next to the CSV outputs."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SMALL_SIZE = 9
MEDIUM_SIZE = 10
FIGSIZE = (6.0, 3.6)
DPI = 150

plt.rc("font", size=SMALL_SIZE)
plt.rc("axes", titlesize=MEDIUM_SIZE, labelsize=MEDIUM_SIZE)
plt.rc("legend", fontsize=SMALL_SIZE)
plt.rc("lines", linewidth=1.4)

POLICY_STYLE = {
    "two_stage": {"color": "tab:blue", "label": "two-stage"},
    "nearest": {"color": "tab:orange", "label": "nearest (free choice)"},
    "matching": {"color": "tab:green", "label": "matching (DA stand-in)"},
}


def _style(policy):
    return POLICY_STYLE.get(policy, {"label": policy})


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_series(rows: Sequence[Sequence], path: Path, ylabel: str, title: str, policies=None) -> Path:
    """Per-epoch mean with a 10-90% band; rows follow SERIES_COLUMNS."""
    grouped = defaultdict(list)
    for row in rows:
        grouped[row[1]].append(row)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for policy, pts in grouped.items():
        if policies and policy not in policies:
            continue
        epochs = [r[0] for r in pts]
        st = _style(policy)
        ax.plot(epochs, [r[2] for r in pts], **st)
        ax.fill_between(epochs, [r[3] for r in pts], [r[4] for r in pts], color=st.get("color"), alpha=0.15, lw=0)
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_epochs(reports, path: Path) -> Path:
    fig, axes = plt.subplots(3, 1, figsize=(6.0, 6.4), sharex=True)
    epochs = [r.epoch for r in reports]
    for ax, attr, label in zip(
        axes,
        ("max_queue", "max_sojourn", "mean_utility"),
        ("max queue", "max sojourn", "mean utility"),
    ):
        ax.plot(epochs, [getattr(r, attr) for r in reports], "-", color="tab:blue")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("epoch")
    return _save(fig, path)


def plot_scaling(rows: Sequence[Sequence], path: Path, title: str = "Average utility vs number of stations") -> Path:
    """``rows`` are ``(stations, policy, mean_utility, p10, p90)``."""
    grouped = defaultdict(list)
    for row in rows:
        grouped[row[1]].append(row)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for policy, pts in grouped.items():
        pts = sorted(pts)
        xs = [p[0] for p in pts]
        st = _style(policy)
        ax.plot(xs, [p[2] for p in pts], marker="o", **st)
        ax.fill_between(xs, [p[3] for p in pts], [p[4] for p in pts], color=st.get("color"), alpha=0.15, lw=0)
    ax.set_xlabel("number of stations")
    ax.set_ylabel("mean utility per EV")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)
