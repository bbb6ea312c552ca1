"""Evaluation metrics: trial-wise confusion statistics and event latency.

Trial-level accounting: a trial is slip-positive if its ground truth flag
is ever 1, predicted-positive if the indicator ever fires. When the
detector makes no positive prediction and there are no true positives,
precision is defined as 1.0 (correct abstention); F1 is 0 whenever recall
is 0 and ground-truth positives exist.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Ground-truth events closer than this are merged into one.
EVENT_MERGE_GAP_S = 0.2


@dataclass
class ConfusionStats:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 1.0

    @property
    def precision(self) -> float:
        if self.tp + self.fp == 0:
            return 1.0
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        if self.tp + self.fn == 0:
            return 1.0
        return self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        if p + r == 0.0:
            return 0.0
        return 2.0 * p * r / (p + r)


def confusion_from_labels(gt: np.ndarray, pred: np.ndarray) -> ConfusionStats:
    gt = np.asarray(gt, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    if gt.shape != pred.shape:
        raise ValueError("label arrays must have the same shape")
    return ConfusionStats(
        tp=int(np.sum(gt & pred)),
        fp=int(np.sum(~gt & pred)),
        tn=int(np.sum(~gt & ~pred)),
        fn=int(np.sum(gt & ~pred)),
    )


@dataclass
class GtEvent:
    onset: float
    end: float


def extract_events(t: np.ndarray, flag: np.ndarray,
                   merge_gap: float = EVENT_MERGE_GAP_S) -> list[GtEvent]:
    """Rising/falling-edge event extraction with gap merging."""
    t = np.asarray(t, dtype=np.float64)
    flag = np.asarray(flag).astype(bool)
    if len(t) != len(flag):
        raise ValueError("t and flag must have equal length")
    padded = np.concatenate([[False], flag, [False]])
    rises = np.flatnonzero(~padded[:-1] & padded[1:])
    falls = np.flatnonzero(padded[:-1] & ~padded[1:]) - 1
    events: list[GtEvent] = []
    for r, f in zip(rises, falls):
        ev = GtEvent(float(t[r]), float(t[f]))
        if events and ev.onset - events[-1].end < merge_gap:
            events[-1].end = ev.end
        else:
            events.append(ev)
    return events


@dataclass
class EventMatch:
    onset: float
    detected: bool
    latency_ms: float | None  # None when undetected


def match_events(gt_events: list[GtEvent], detect_times: np.ndarray,
                 tail: float = 0.1) -> tuple[list[EventMatch], int]:
    """Match detection firings to ground-truth events.

    A firing matches a ground-truth event if it falls within
    [onset, end + tail]; each event takes its earliest firing. Firings
    matching no event are counted as false firings. Returns the per-event
    matches and the false-firing count.
    """
    detect_times = np.sort(np.asarray(detect_times, dtype=np.float64))
    matches = []
    used = np.zeros(len(detect_times), dtype=bool)
    for ev in gt_events:
        in_win = (detect_times >= ev.onset) & (detect_times <= ev.end + tail) & ~used
        idx = np.flatnonzero(in_win)
        if len(idx):
            used[idx[0]] = True
            # Later firings inside the same event window are follow-ups of
            # the same detection, not false alarms.
            used[idx[1:]] = True
            matches.append(EventMatch(ev.onset, True,
                                      (detect_times[idx[0]] - ev.onset) * 1e3))
        else:
            matches.append(EventMatch(ev.onset, False, None))
    return matches, int(np.sum(~used))


@dataclass
class EvalReport:
    """Aggregated evaluation over one or more trials."""

    trial_gt: list[int] = field(default_factory=list)
    trial_pred: list[int] = field(default_factory=list)
    latencies_ms: list[float] = field(default_factory=list)
    missed_events: int = 0
    false_firings: int = 0
    outcomes: dict[str, int] = field(default_factory=dict)

    def add_trial(self, gt_positive: bool, pred_positive: bool) -> None:
        self.trial_gt.append(int(gt_positive))
        self.trial_pred.append(int(pred_positive))

    def add_outcome(self, name: str) -> None:
        self.outcomes[name] = self.outcomes.get(name, 0) + 1

    @property
    def confusion(self) -> ConfusionStats:
        return confusion_from_labels(np.array(self.trial_gt, dtype=bool),
                                     np.array(self.trial_pred, dtype=bool))

    @property
    def event_recall(self) -> float:
        n_events = len(self.latencies_ms) + self.missed_events
        if n_events == 0:
            return 1.0
        return len(self.latencies_ms) / n_events

    @property
    def event_precision(self) -> float:
        """Fraction of firings matching a ground-truth event; 1.0 on abstention."""
        fired = len(self.latencies_ms) + self.false_firings
        if fired == 0:
            return 1.0
        return len(self.latencies_ms) / fired

    def max_latency_ms(self) -> float | None:
        return max(self.latencies_ms) if self.latencies_ms else None

    def summary(self) -> dict[str, float]:
        c = self.confusion
        out = {
            "trials": c.total,
            "accuracy": c.accuracy,
            "precision": c.precision,
            "recall": c.recall,
            "f1": c.f1,
            "event_recall": self.event_recall,
            "event_precision": self.event_precision,
            "false_firings": self.false_firings,
        }
        if self.latencies_ms:
            lat = np.array(self.latencies_ms)
            out["latency_mean_ms"] = float(lat.mean())
            out["latency_max_ms"] = float(lat.max())
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for key, value in self.summary().items():
                writer.writerow([key, format(float(value), ".9g")])
            for name in sorted(self.outcomes):
                writer.writerow([f"outcome_{name}", self.outcomes[name]])
