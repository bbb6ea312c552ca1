"""Figure rendering for the report paths of the CLI.

All figures are written to files (Agg backend); the CSV exports remain the
primary machine-readable output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .config import FINGER_CHANNELS
from .slip import SlipTimeline
from .trace import Trace


def plot_replay(trace: Trace, timeline: SlipTimeline, filtered: np.ndarray,
                path: str | Path, threshold_db2: float = 2.0) -> None:
    """Filtered channels, band-power features, and finger variances."""
    fig, axes = plt.subplots(3, 1, figsize=(10, 8), sharex=True)
    colors = {"R": "tab:blue", "L": "tab:red"}
    for g, chans in FINGER_CHANNELS.items():
        for j, ch in enumerate(chans):
            axes[0].plot(trace.t, filtered[:, ch], color=colors[g],
                         alpha=0.9 - 0.25 * j, lw=0.6,
                         label=f"{g}{j}" if j == 0 else None)
    axes[0].set_ylabel("filtered signal")
    axes[0].legend(loc="upper left", fontsize=8)

    for g, chans in FINGER_CHANNELS.items():
        for j, ch in enumerate(chans):
            axes[1].plot(timeline.t, timeline.features[:, ch], color=colors[g],
                         alpha=0.9 - 0.25 * j, lw=0.6)
    axes[1].set_ylabel("band max power (dB)")

    axes[2].plot(timeline.t, timeline.sigma_bar[:, 0], color="tab:blue", label="right")
    axes[2].plot(timeline.t, timeline.sigma_bar[:, 1], color="tab:red", label="left")
    axes[2].axhline(threshold_db2, color="k", ls="--", lw=0.8, label="threshold")
    if timeline.eta.any():
        fire = timeline.eta.astype(bool)
        axes[2].plot(timeline.t[fire], np.full(fire.sum(), threshold_db2 * 1.05),
                     "k.", ms=3, label="indicator")
    if trace.slip_gt is not None and trace.slip_gt.any():
        gt = trace.slip_gt.astype(bool)
        axes[0].plot(trace.t[gt], np.full(gt.sum(), filtered.max() * 1.05),
                     ".", color="gray", ms=2, label="slip gt")
    axes[2].set_ylabel("avg variance (dB$^2$)")
    axes[2].set_xlabel("time (s)")
    axes[2].legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_force_eval(y_true: np.ndarray, y_pred: np.ndarray, path: str | Path,
                    label: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(y_true, y_pred, ".", ms=2, alpha=0.5)
    lim = [0.0, max(float(np.max(y_true)), float(np.max(y_pred)), 1.0)]
    ax.plot(lim, lim, "k--", lw=0.8)
    ax.set_xlabel("ground-truth force (N)")
    ax.set_ylabel("predicted force (N)")
    if label:
        ax.set_title(label)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_session(log_t, log_theta, log_force, log_eta, path: str | Path,
                 title: str = "") -> None:
    fig, axes = plt.subplots(3, 1, figsize=(9, 7), sharex=True)
    axes[0].plot(log_t, log_theta, lw=0.9)
    axes[0].set_ylabel("servo angle (deg)")
    axes[1].plot(log_t, log_force, lw=0.9)
    axes[1].set_ylabel("force estimate (N)")
    axes[2].step(log_t, log_eta, where="post", lw=0.9)
    axes[2].set_ylabel("slip indicator")
    axes[2].set_xlabel("time (s)")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_sweep(rows: list[dict], path: str | Path) -> None:
    """F1 and precision/recall against the detection threshold."""
    fig, ax = plt.subplots(figsize=(6, 4))
    thr = [r["threshold_db2"] for r in rows]
    for key, style in (("f1", "o-"), ("precision", "s--"), ("recall", "^--")):
        ax.plot(thr, [r[key] for r in rows], style, ms=4, label=key)
    ax.set_xlabel("threshold (dB$^2$)")
    ax.set_ylabel("score")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
