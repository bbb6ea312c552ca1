"""Throughput and latency benchmarks for the streaming pipeline.

Budgets follow the pipeline cadences: slip detection must keep up with a
500 Hz step rate (p99 step compute <= 2 ms) and force prediction with a
100 Hz update (p99 <= 10 ms even at 5000 support vectors), while ingest
sustains the full sensor rate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .force import FEATURE_DIM, ForceModel, build_feature
from .signal import SignalPipeline
from .sim import quiescent_trace
from .slip import SlipDetector

SLIP_STEP_BUDGET_MS = 2.0
PREDICT_BUDGET_MS = 10.0


@dataclass
class BenchResult:
    duration_s: float
    n_frames: int
    n_slip_steps: int
    ingest_wall_s: float
    slip_p50_ms: float
    slip_p99_ms: float
    predict_p50_ms: float
    predict_p99_ms: float

    @property
    def ingest_rate(self) -> float:
        return self.n_frames / self.ingest_wall_s

    @property
    def passed(self) -> bool:
        return (self.slip_p99_ms <= SLIP_STEP_BUDGET_MS
                and self.predict_p99_ms <= PREDICT_BUDGET_MS
                and self.ingest_rate >= 2000.0)

    def lines(self) -> list[str]:
        return [
            f"frames ingested      {self.n_frames} in {self.ingest_wall_s:.2f} s "
            f"({self.ingest_rate:.0f} frames/s, trace {self.duration_s:.0f} s)",
            f"slip steps           {self.n_slip_steps} "
            f"(p50 {self.slip_p50_ms:.3f} ms, p99 {self.slip_p99_ms:.3f} ms, "
            f"budget {SLIP_STEP_BUDGET_MS} ms)",
            f"force predict        p50 {self.predict_p50_ms:.3f} ms, "
            f"p99 {self.predict_p99_ms:.3f} ms (budget {PREDICT_BUDGET_MS} ms)",
            f"result               {'PASS' if self.passed else 'FAIL'}",
        ]


def make_dense_model(n_sv: int, seed: int = 0) -> ForceModel:
    """Synthetic kernel expansion for prediction-latency benchmarking."""
    rng = np.random.default_rng(seed)
    return ForceModel(
        gamma=0.5, C=10.0, epsilon=0.01, bias=0.1,
        support_vectors=rng.uniform(-1.0, 1.0, (n_sv, FEATURE_DIM)),
        coefficients=rng.uniform(-10.0, 10.0, n_sv),
    )


def run_bench(duration_s: float = 60.0, n_sv: int = 5000, seed: int = 0,
              config: PipelineConfig | None = None) -> BenchResult:
    config = config or PipelineConfig()
    trace = quiescent_trace(duration_s, seed)
    pipeline = SignalPipeline(config)
    detector = SlipDetector(config)

    slip_times = []
    t0 = time.perf_counter()
    for i in range(len(trace)):
        pipeline.push(trace.channels[i])
        n = i + 1
        if n >= config.fft_window and (n - config.fft_window) % config.hop == 0:
            s0 = time.perf_counter()
            detector.step(pipeline.ring, float(trace.t[i]))
            slip_times.append(time.perf_counter() - s0)
    ingest_wall = time.perf_counter() - t0

    model = make_dense_model(n_sv, seed)
    predict_times = []
    for _ in range(200):
        feat = build_feature(pipeline.ring)
        p0 = time.perf_counter()
        model.predict(feat)
        predict_times.append(time.perf_counter() - p0)

    slip_ms = np.array(slip_times) * 1e3
    pred_ms = np.array(predict_times) * 1e3
    return BenchResult(
        duration_s=duration_s, n_frames=len(trace), n_slip_steps=len(slip_times),
        ingest_wall_s=ingest_wall,
        slip_p50_ms=float(np.percentile(slip_ms, 50)),
        slip_p99_ms=float(np.percentile(slip_ms, 99)),
        predict_p50_ms=float(np.percentile(pred_ms, 50)),
        predict_p99_ms=float(np.percentile(pred_ms, 99)),
    )
