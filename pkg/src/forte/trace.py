"""Trace file I/O.

Trace CSV format (UTF-8, header row):
    t,ch0,ch1,ch2,ch3,ch4,ch5[,force_n][,slip_gt]
with t in seconds, ch* normalized floats in [-1, 1], optional ground-truth
force in newtons and optional slip ground truth in {0, 1}. Missing optional
columns mean "not labeled".
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import N_CHANNELS

CHANNEL_COLS = [f"ch{i}" for i in range(N_CHANNELS)]


class TraceFormatError(ValueError):
    """Raised for malformed trace files; carries the offending line number."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


@dataclass
class Trace:
    """An in-memory trace: sample times, channels, optional labels."""

    t: np.ndarray                      # (n,)
    channels: np.ndarray               # (n, 6)
    force_n: np.ndarray | None = None  # (n,) or None
    slip_gt: np.ndarray | None = None  # (n,) ints in {0,1} or None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def f_s(self) -> float:
        if len(self.t) < 2:
            raise ValueError("trace too short to infer sampling rate")
        return 1.0 / float(self.t[1] - self.t[0])


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_trace(path: str | Path, trace: Trace) -> None:
    header = ["t"] + CHANNEL_COLS
    if trace.force_n is not None:
        header.append("force_n")
    if trace.slip_gt is not None:
        header.append("slip_gt")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(trace)):
            row = [_fmt(trace.t[i])] + [_fmt(v) for v in trace.channels[i]]
            if trace.force_n is not None:
                row.append(_fmt(trace.force_n[i]))
            if trace.slip_gt is not None:
                row.append(str(int(trace.slip_gt[i])))
            writer.writerow(row)


def read_trace(path: str | Path) -> Trace:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(path, 1, "empty file") from None
        header = [h.strip() for h in header]
        expected = ["t"] + CHANNEL_COLS
        if header[:len(expected)] != expected:
            raise TraceFormatError(path, 1, f"bad header {header!r}")
        has_force = "force_n" in header
        has_slip = "slip_gt" in header
        force_col = header.index("force_n") if has_force else -1
        slip_col = header.index("slip_gt") if has_slip else -1

        t, channels, force, slip = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceFormatError(path, lineno,
                                       f"expected {len(header)} fields, got {len(row)}")
            try:
                t.append(float(row[0]))
                channels.append([float(v) for v in row[1:1 + N_CHANNELS]])
                if has_force:
                    force.append(float(row[force_col]))
                if has_slip:
                    slip.append(int(float(row[slip_col])))
            except ValueError as exc:
                raise TraceFormatError(path, lineno, str(exc)) from None

    return Trace(
        t=np.asarray(t),
        channels=np.asarray(channels),
        force_n=np.asarray(force) if has_force else None,
        slip_gt=np.asarray(slip, dtype=np.int64) if has_slip else None,
    )


def write_ground_truth(path: str | Path, t: np.ndarray, slip_gt: np.ndarray,
                       force_r: np.ndarray, force_l: np.ndarray, phase: list[str]) -> None:
    """Simulator ground-truth CSV: t,slip_gt,force_R_n,force_L_n,phase."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "slip_gt", "force_R_n", "force_L_n", "phase"])
        for i in range(len(t)):
            writer.writerow([_fmt(t[i]), str(int(slip_gt[i])),
                             _fmt(force_r[i]), _fmt(force_l[i]), phase[i]])
