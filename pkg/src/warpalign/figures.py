"""Matplotlib figure rendering for the CLI report paths (file output only)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_alignment_figure",
    "save_average_figure",
    "save_history_figure",
    "save_accuracy_figure",
    "save_timing_figure",
]

_REFERENCE_STYLE = dict(color="0.6", lw=0.8, alpha=0.6)


def _finish(fig: plt.Figure, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_alignment_figure(
    path: str | Path,
    reference: Sequence[np.ndarray],
    originals: Sequence[np.ndarray],
    warped: Sequence[np.ndarray],
    title: str = "",
) -> None:
    """Aligned training set (gray) with test signals before/after warping."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for values in reference:
        ax.plot(values.reshape(-1), **_REFERENCE_STYLE)
    for i, values in enumerate(originals):
        ax.plot(values.reshape(-1), color="tab:red", lw=1.0, alpha=0.8,
                label="test original" if i == 0 else None)
    for i, values in enumerate(warped):
        ax.plot(values.reshape(-1), color="tab:green", lw=1.2,
                label="test warped" if i == 0 else None)
    ax.set_xlabel("time step")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    if originals or warped:
        ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def save_average_figure(
    path: str | Path,
    members: Sequence[np.ndarray],
    simple_avg: np.ndarray,
    dba_avg: np.ndarray,
    warped_members: Sequence[np.ndarray],
    warped_avg: np.ndarray,
    title: str = "",
) -> None:
    """Two panels: originals with simple/DBA averages, warped set with its mean."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for values in members:
        left.plot(values.reshape(-1), **_REFERENCE_STYLE)
    left.plot(simple_avg.reshape(-1), color="tab:red", lw=1.6, label="simple average")
    left.plot(dba_avg.reshape(-1), color="tab:green", lw=1.6, label="dba average")
    left.set_title("original signals")
    left.legend(loc="best", fontsize=8)
    for values in warped_members:
        right.plot(values.reshape(-1), **_REFERENCE_STYLE)
    right.plot(warped_avg.reshape(-1), color="tab:blue", lw=1.8, label="warped average")
    right.set_title("warped signals")
    right.legend(loc="best", fontsize=8)
    for ax in (left, right):
        ax.set_xlabel("time step")
    left.set_ylabel("value")
    if title:
        fig.suptitle(title)
    _finish(fig, path)


def save_history_figure(path: str | Path, histories: Mapping[int, Sequence[float]],
                        title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, history in sorted(histories.items()):
        ax.plot(range(1, len(history) + 1), history, marker="o", ms=3,
                label=f"label {label}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    _finish(fig, path)


def save_accuracy_figure(path: str | Path, accuracies: Mapping[str, float],
                         title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = list(accuracies)
    values = [accuracies[m] for m in methods]
    ax.bar(methods, values, color="tab:blue")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    for i, v in enumerate(values):
        ax.text(i, v + 0.01, f"{v:.3f}", ha="center", fontsize=8)
    if title:
        ax.set_title(title)
    _finish(fig, path)


def save_timing_figure(path: str | Path, rows: Sequence[Mapping[str, object]],
                       title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [f"{r['dataset']}:{r['label']}" for r in rows]
    ours = [float(r["our_whole_s"]) for r in rows]
    dba = [float(r["dba_whole_s"]) for r in rows]
    pos = np.arange(len(labels))
    width = 0.38
    ax.bar(pos - width / 2, ours, width, label="ours")
    ax.bar(pos + width / 2, dba, width, label="dba + dtw")
    ax.set_xticks(pos)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("seconds")
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    _finish(fig, path)
