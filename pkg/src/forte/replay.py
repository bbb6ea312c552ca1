"""Trace replay: filtering, slip detection, optional force estimation,
and comparison against ground-truth labels.

Batch mode recomputes the whole chain vectorized; realtime mode paces the
streaming detector at the trace's sample cadence. Both modes produce the
identical indicator timeline (the baseline is fixed from the trace's
initialization interval in either mode, so timing never affects results).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .force import ForceModel, batch_features as force_features
from .metrics import EvalReport, extract_events, match_events
from .signal import SignalPipeline, batch_filter_trace
from .slip import SlipDetector, SlipTimeline, batch_slip_timeline
from .trace import Trace

FORCE_PERIOD_SAMPLES = 20


@dataclass
class ReplayResult:
    timeline: SlipTimeline
    report: EvalReport | None      # None when the trace has no slip labels
    filtered: np.ndarray
    force_pred: np.ndarray | None  # at 100 Hz cadence, or None
    force_t: np.ndarray | None


def trace_baseline(trace: Trace, config: PipelineConfig) -> np.ndarray:
    n0 = min(len(trace), int(round(config.baseline_seconds * config.f_s)))
    return trace.channels[:n0].mean(axis=0) if n0 else np.zeros(6)


def replay_trace(trace: Trace, config: PipelineConfig,
                 model: ForceModel | None = None,
                 realtime: bool = False) -> ReplayResult:
    baseline = trace_baseline(trace, config)
    if realtime:
        pipeline = SignalPipeline(config, baseline=baseline)
        detector = SlipDetector(config)
        filtered_rows = []
        step_t, feats = [], []
        t_start = time.perf_counter()
        for i in range(len(trace)):
            filtered_rows.append(pipeline.push(trace.channels[i]))
            n = i + 1
            if n >= config.fft_window and (n - config.fft_window) % config.hop == 0:
                state = detector.step(pipeline.ring, float(trace.t[i]))
                step_t.append(state.t)
                feats.append(state.features)
            lag = trace.t[i] - trace.t[0] - (time.perf_counter() - t_start)
            if lag > 1e-3:
                time.sleep(lag)
        filtered = np.asarray(filtered_rows)
        from .slip import features_to_timeline
        timeline = features_to_timeline(np.asarray(step_t), np.asarray(feats), config)
    else:
        filtered = batch_filter_trace(trace.channels, config, baseline=baseline)
        timeline = batch_slip_timeline(trace.t, filtered, config)

    force_pred = force_t = None
    if model is not None:
        idx = np.arange(FORCE_PERIOD_SAMPLES - 1, len(trace), FORCE_PERIOD_SAMPLES)
        feats24 = force_features(filtered, trace.f_s, idx)
        if model.support_vectors.shape[1] == 6:
            feats24 = feats24[:, :6]
        force_pred = model.predict(feats24)
        force_t = trace.t[idx]

    report = None
    if trace.slip_gt is not None:
        report = score_timeline(trace, timeline)
    return ReplayResult(timeline=timeline, report=report, filtered=filtered,
                        force_pred=force_pred, force_t=force_t)


def score_timeline(trace: Trace, timeline: SlipTimeline) -> EvalReport:
    """Event matching and trial-level labels for one labeled trace."""
    report = EvalReport()
    gt_events = extract_events(trace.t, trace.slip_gt)
    detect_times = timeline.t[np.flatnonzero(
        np.diff(np.concatenate([[0], timeline.eta])) == 1)]
    matches, false_firings = match_events(gt_events, detect_times)
    for m in matches:
        if m.detected:
            report.latencies_ms.append(m.latency_ms)
        else:
            report.missed_events += 1
    report.false_firings = false_firings
    report.add_trial(bool(trace.slip_gt.any()), bool(timeline.eta.any()))
    return report
