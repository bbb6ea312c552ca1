"""Sensor data model: normalization, streaming median filter, ring buffers.

All downstream consumers (slip detection, force features, the controller)
read filtered channel histories out of a ChannelRing. Pushes are serialized
by the caller; reads copy the requested window out so readers never observe
a partially written frame.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .config import N_CHANNELS, PipelineConfig

# Exact re-summation period for the running window sums.
RESUM_INTERVAL = 1 << 20


@dataclass(frozen=True)
class SensorFrame:
    """One timestamped 6-channel normalized pressure sample."""

    t: float
    channels: tuple[float, ...]

    def __post_init__(self):
        if len(self.channels) != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} channels, got {len(self.channels)}")


def normalize_raw(raw: int, bits: int = 11, baseline: int | float = 1024) -> float:
    """Map an ADC count onto [-1, 1].

    The full ADC span of 2**bits counts maps onto a span of 2.0, centered
    on the baseline count; the result is clamped to [-1, 1].
    """
    if bits <= 0:
        raise ValueError("bits must be positive")
    if not 0 <= raw < (1 << bits):
        raise ValueError(f"raw count {raw} outside [0, 2^{bits})")
    value = (raw - baseline) / float(1 << (bits - 1))
    return min(1.0, max(-1.0, value))


class MedianFilter:
    """Streaming median over the last M samples of one channel.

    Warm-up replicates the first pushed sample, so output is defined from
    the first push. Maintains a sorted window; M is small (11), so insort
    is cheap.
    """

    def __init__(self, window: int):
        if window < 1 or window % 2 == 0:
            raise ValueError("median window must be odd and >= 1")
        self.window = window
        self._raw: list[float] = []
        self._sorted: list[float] = []

    def push(self, x: float) -> float:
        x = float(x)
        if not self._raw:
            # Edge replication: pretend the first sample has always been there.
            self._raw = [x] * self.window
            self._sorted = [x] * self.window
            return x
        old = self._raw.pop(0)
        self._raw.append(x)
        self._sorted.pop(bisect.bisect_left(self._sorted, old))
        bisect.insort(self._sorted, x)
        return self._sorted[self.window // 2]


def median_filter_batch(x: np.ndarray, window: int) -> np.ndarray:
    """Causal sliding median over axis 0, edge-replicating the first sample.

    Matches MedianFilter.push sample-for-sample: output[n] is the median of
    the last `window` raw values ending at n, with the front padded by x[0].
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("median window must be odd and >= 1")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        return x.copy()
    pad = np.repeat(x[:1], window - 1, axis=0)
    padded = np.concatenate([pad, x], axis=0)
    windows = np.lib.stride_tricks.sliding_window_view(padded, window, axis=0)
    return np.median(windows, axis=-1)


class ChannelRing:
    """Fixed-capacity per-channel history of filtered samples.

    Supports copy-out of the trailing k samples and running means over
    trailing time windows. Running sums are kept in double precision and
    re-summed exactly every 2**20 pushes to bound accumulation drift.
    """

    def __init__(self, config: PipelineConfig, mean_windows: tuple[float, ...] = (2.5, 5.0, 10.0)):
        self.config = config
        self.mean_windows = tuple(mean_windows)
        needed = max(config.fft_window,
                     int(round(max(self.mean_windows, default=10.0) * config.f_s)))
        self.capacity = max(needed, config.fft_window)
        self._buf = np.zeros((self.capacity, N_CHANNELS))
        self._pos = 0
        self.count = 0
        self._mean_lens = [max(1, int(round(tau * config.f_s))) for tau in self.mean_windows]
        self._sums = [np.zeros(N_CHANNELS) for _ in self.mean_windows]

    def push(self, channels) -> None:
        vals = np.asarray(channels, dtype=np.float64)
        for sums, length in zip(self._sums, self._mean_lens):
            sums += vals
            if self.count >= length:
                idx = (self._pos - length) % self.capacity
                sums -= self._buf[idx]
        self._buf[self._pos] = vals
        self._pos = (self._pos + 1) % self.capacity
        self.count += 1
        if self.count % RESUM_INTERVAL == 0:
            self._resum()

    def push_many(self, block: np.ndarray) -> None:
        for row in np.asarray(block, dtype=np.float64):
            self.push(row)

    def _resum(self) -> None:
        for i, length in enumerate(self._mean_lens):
            k = min(self.count, length)
            self._sums[i] = self.last(k).sum(axis=0)

    def last(self, k: int) -> np.ndarray:
        """Chronological copy of the trailing k samples, shape (k, 6)."""
        if k < 0 or k > min(self.count, self.capacity):
            raise ValueError(f"cannot serve {k} samples (have {min(self.count, self.capacity)})")
        if k == 0:
            return np.empty((0, N_CHANNELS))
        start = (self._pos - k) % self.capacity
        if start + k <= self.capacity:
            return self._buf[start:start + k].copy()
        head = self._buf[start:]
        tail = self._buf[:self._pos]
        return np.concatenate([head, tail], axis=0)

    def window_mean(self, tau: float) -> np.ndarray:
        """Per-channel mean of the trailing tau seconds of filtered samples.

        During warm-up (fewer than tau*f_s samples) the mean shrinks to the
        available samples, so the operation is total from the first push.
        """
        if tau <= 0:
            raise ValueError("tau must be positive")
        if self.count == 0:
            raise ValueError("no samples pushed yet")
        length = max(1, int(round(tau * self.config.f_s)))
        k = min(self.count, length)
        for i, cached in enumerate(self._mean_lens):
            if cached == length:
                return self._sums[i] / k
        return self.last(k).mean(axis=0)


class SignalPipeline:
    """Baseline subtraction + median filtering feeding a ChannelRing.

    Baseline per channel is the mean of the raw (unfiltered) samples seen
    during the initialization interval; during that interval the running
    mean so far is used. Subtraction happens before the median filter.
    """

    def __init__(self, config: PipelineConfig,
                 mean_windows: tuple[float, ...] = (2.5, 5.0, 10.0),
                 baseline: np.ndarray | None = None):
        self.config = config
        self.ring = ChannelRing(config, mean_windows)
        self._filters = [MedianFilter(config.median_window) for _ in range(N_CHANNELS)]
        self._baseline_n = int(round(config.baseline_seconds * config.f_s))
        self._baseline_sum = np.zeros(N_CHANNELS)
        self._baseline_count = 0
        self._baseline = None if baseline is None else np.asarray(baseline, dtype=np.float64)

    @property
    def baseline(self) -> np.ndarray:
        if self._baseline is not None:
            return self._baseline
        if self._baseline_count == 0:
            return np.zeros(N_CHANNELS)
        return self._baseline_sum / self._baseline_count

    def push(self, frame_channels) -> np.ndarray:
        vals = np.asarray(frame_channels, dtype=np.float64)
        if self._baseline is None and self._baseline_count < self._baseline_n:
            self._baseline_sum += vals
            self._baseline_count += 1
        centered = vals - self.baseline
        filtered = np.array([f.push(v) for f, v in zip(self._filters, centered)])
        self.ring.push(filtered)
        return filtered


def batch_filter_trace(channels: np.ndarray, config: PipelineConfig,
                       baseline: np.ndarray | None = None) -> np.ndarray:
    """Offline equivalent of SignalPipeline over a whole (n, 6) trace.

    Fixed-baseline mode (baseline given) matches the streaming pipeline
    exactly; the default running-baseline warm-up is only approximated for
    the first baseline interval, so batch users normally pass the trace's
    initialization mean explicitly.
    """
    channels = np.asarray(channels, dtype=np.float64)
    if baseline is None:
        n0 = min(len(channels), int(round(config.baseline_seconds * config.f_s)))
        baseline = channels[:n0].mean(axis=0) if n0 else np.zeros(N_CHANNELS)
    return median_filter_batch(channels - baseline, config.median_window)
