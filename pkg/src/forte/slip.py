"""Slip detection chain.

Per detection step (every `hop` samples, 500 Hz at stock settings), for each
of the six sensors: Hann-window the most recent N filtered samples, take a
single-segment periodogram normalized by f_s * sum(w^2), extract the maximum
log-power over the 10-50 Hz band, push it into a fixed-length history, and
compute a variance that is gated to zero unless the history is strictly
increasing by more than delta per step. Per-finger averages of the gated
variances are thresholded to produce the binary slip indicator.

Temporal smoothing comes from the sliding history, not from per-step segment
averaging: each step evaluates exactly one windowed segment.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import FINGER_CHANNELS, FINGER_L, FINGER_R, N_CHANNELS, PipelineConfig
from .signal import ChannelRing


class InsufficientSamples(RuntimeError):
    """Raised when a detection step is attempted before N samples exist."""


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window: w(k) = 0.5 * (1 - cos(2*pi*k / (n-1)))."""
    if n < 2:
        raise ValueError("window length must be >= 2")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))


def compute_psd(window: np.ndarray, config: PipelineConfig,
                hann: np.ndarray | None = None) -> np.ndarray:
    """One-sided periodogram of one N-sample channel window.

    Returns power density per bin, |DFT(x*w)[k]|^2 / (f_s * sum(w^2)), for
    bins k = 0 .. N//2 (bin spacing f_s/N). No one-sided doubling is applied;
    the band feature only compares bins against each other.
    """
    window = np.asarray(window, dtype=np.float64)
    n = config.fft_window
    if window.shape[-1] != n:
        raise ValueError(f"window must have exactly {n} samples")
    if hann is None:
        hann = hann_window(n)
    spec = np.fft.rfft(window * hann)
    scale = config.f_s * np.sum(hann * hann)
    return (spec.real ** 2 + spec.imag ** 2) / scale


def band_bins(config: PipelineConfig) -> np.ndarray:
    """Indices of PSD bins whose centers span [f_min, f_max].

    A bin at k*f_s/N is included iff its center lies within half a bin width
    of the band: [f_min - df/2, f_max + df/2]. At stock settings this is
    bins 2..10, spanning 7.5-52.5 Hz.
    """
    n = config.fft_window
    df = config.f_s / n
    k = np.arange(n // 2 + 1)
    centers = k * df
    mask = (centers >= config.f_min - df / 2) & (centers <= config.f_max + df / 2)
    return k[mask]


def psd_feature(psd: np.ndarray, config: PipelineConfig,
                bins: np.ndarray | None = None) -> float:
    """Max of 10*log10(PSD + guard) over the analysis band, in dB.

    The additive guard bounds the feature below by 10*log10(guard)
    (-120 dB at the default), so no input can produce NaN or -inf.
    """
    if bins is None:
        bins = band_bins(config)
    vals = 10.0 * np.log10(np.asarray(psd)[..., bins] + config.log_guard)
    return vals.max(axis=-1)


def gated_variance(history: np.ndarray, config: PipelineConfig) -> float:
    """Variance of a full V-length feature history, gated on monotonicity.

    Returns 0 unless the history holds V entries and every consecutive
    increment exceeds delta. Population variance by default (sample
    variance behind config.sample_variance).
    """
    history = np.asarray(history, dtype=np.float64)
    if history.shape[-1] < config.history_len:
        return 0.0
    if history.shape[-1] > config.history_len:
        raise ValueError("history longer than configured length")
    if np.all(np.diff(history) > config.delta_db):
        return float(np.var(history, ddof=1 if config.sample_variance else 0))
    return 0.0


def finger_aggregate(sigma2: np.ndarray, config: PipelineConfig) -> dict[str, float]:
    """Average the per-sensor gated variances within each finger group.

    A group's average is kept only if it reaches alpha, otherwise it is
    zeroed. In strict mode every group must reach alpha or all groups are
    zeroed.
    """
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    means = {g: float(sigma2[list(chs)].mean()) for g, chs in FINGER_CHANNELS.items()}
    if config.strict_group_gate:
        if all(m >= config.alpha_db2 for m in means.values()):
            return means
        return {g: 0.0 for g in means}
    return {g: (m if m >= config.alpha_db2 else 0.0) for g, m in means.items()}


@dataclass
class SlipState:
    """Result of one detection step."""

    t: float
    features: np.ndarray                      # (6,) P_max per sensor, dB
    sigma2: np.ndarray                        # (6,) gated variances, dB^2
    sigma_bar: dict[str, float]               # per-finger averages, dB^2
    eta: int                                  # slip indicator
    step_index: int

    @property
    def leading_finger(self) -> str:
        return max(self.sigma_bar, key=self.sigma_bar.get)


@dataclass
class SlipEvent:
    t_detect: float
    finger: str
    sigma_bar_db2: float


class SlipDetector:
    """Streaming detector: call step() every `hop` pushed samples.

    Pure function of the last N + (V-1)*hop filtered samples and the
    config; carries only the per-sensor feature histories between steps.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._hann = hann_window(config.fft_window)
        self._bins = band_bins(config)
        self._hist = [deque(maxlen=config.history_len) for _ in range(N_CHANNELS)]
        self._steps = 0
        self._prev_eta = 0
        self.events: list[SlipEvent] = []

    def step(self, ring: ChannelRing, t: float) -> SlipState:
        n = self.config.fft_window
        if ring.count < n:
            raise InsufficientSamples(f"need {n} samples, have {ring.count}")
        window = ring.last(n)                        # (N, 6)
        psd = compute_psd(window.T, self.config, self._hann)     # (6, bins)
        feats = psd_feature(psd, self.config, self._bins)        # (6,)
        sigma2 = np.empty(N_CHANNELS)
        for i in range(N_CHANNELS):
            self._hist[i].append(float(feats[i]))
            sigma2[i] = gated_variance(np.array(self._hist[i]), self.config)
        sigma_bar = finger_aggregate(sigma2, self.config)
        eta = int(max(sigma_bar.values()) > self.config.threshold_db2)
        state = SlipState(t=t, features=feats, sigma2=sigma2,
                          sigma_bar=sigma_bar, eta=eta, step_index=self._steps)
        if eta and not self._prev_eta:
            self.events.append(SlipEvent(t, state.leading_finger,
                                         max(sigma_bar.values())))
        self._prev_eta = eta
        self._steps += 1
        return state


@dataclass
class SlipTimeline:
    """Batch detection output over a whole trace, aligned on step end times."""

    t: np.ndarray                # (n_steps,) time of each window's last sample
    features: np.ndarray         # (n_steps, 6)
    sigma2: np.ndarray           # (n_steps, 6)
    sigma_bar: np.ndarray        # (n_steps, 2) columns [R, L]
    eta: np.ndarray              # (n_steps,) ints
    events: list[SlipEvent] = field(default_factory=list)


def batch_features(t: np.ndarray, filtered: np.ndarray, config: PipelineConfig,
                   chunk: int = 16384) -> tuple[np.ndarray, np.ndarray]:
    """Band-max log-power features for every detection step of a trace.

    Returns (step_t, features) with features shaped (n_steps, 6). Windows
    are processed in chunks to bound memory on long traces.
    """
    filtered = np.asarray(filtered, dtype=np.float64)
    n = config.fft_window
    hop = config.hop
    total = filtered.shape[0]
    if total < n:
        return np.empty(0), np.empty((0, N_CHANNELS))
    n_steps = (total - n) // hop + 1
    ends = n - 1 + hop * np.arange(n_steps)
    hann = hann_window(n)
    bins = band_bins(config)
    scale = config.f_s * np.sum(hann * hann)

    features = np.empty((n_steps, N_CHANNELS))
    for start in range(0, n_steps, chunk):
        stop = min(start + chunk, n_steps)
        for ch in range(N_CHANNELS):
            view = np.lib.stride_tricks.sliding_window_view(filtered[:, ch], n)[::hop]
            windows = view[start:stop] * hann
            spec = np.fft.rfft(windows, axis=-1)
            psd = (spec.real ** 2 + spec.imag ** 2) / scale
            features[start:stop, ch] = (
                10.0 * np.log10(psd[:, bins] + config.log_guard)).max(axis=-1)
    return np.asarray(t)[ends], features


def features_to_timeline(step_t: np.ndarray, features: np.ndarray,
                         config: PipelineConfig) -> SlipTimeline:
    """Variance/aggregation/threshold stages over precomputed features."""
    n_steps = features.shape[0]
    v = config.history_len
    sigma2 = np.zeros((n_steps, N_CHANNELS))
    if n_steps >= v:
        hist = np.lib.stride_tricks.sliding_window_view(features, v, axis=0)  # (n_steps-v+1, 6, v)
        gate = np.all(np.diff(hist, axis=-1) > config.delta_db, axis=-1)
        var = np.var(hist, axis=-1, ddof=1 if config.sample_variance else 0)
        sigma2[v - 1:] = np.where(gate, var, 0.0)

    groups = [FINGER_CHANNELS[FINGER_R], FINGER_CHANNELS[FINGER_L]]
    sigma_bar = np.stack([sigma2[:, list(g)].mean(axis=1) for g in groups], axis=1)
    if config.strict_group_gate:
        ok = np.all(sigma_bar >= config.alpha_db2, axis=1, keepdims=True)
        sigma_bar = np.where(ok, sigma_bar, 0.0)
    else:
        sigma_bar = np.where(sigma_bar >= config.alpha_db2, sigma_bar, 0.0)
    eta = (sigma_bar.max(axis=1) > config.threshold_db2).astype(np.int64)

    events = []
    rising = np.flatnonzero(np.diff(np.concatenate([[0], eta])) == 1)
    names = [FINGER_R, FINGER_L]
    for j in rising:
        finger = names[int(np.argmax(sigma_bar[j]))]
        events.append(SlipEvent(float(step_t[j]), finger, float(sigma_bar[j].max())))
    return SlipTimeline(np.asarray(step_t), features, sigma2, sigma_bar, eta, events)


def batch_slip_timeline(t: np.ndarray, filtered: np.ndarray,
                        config: PipelineConfig, chunk: int = 16384) -> SlipTimeline:
    """Offline recomputation of the full detection chain over a trace.

    Equals the streaming path step-for-step.
    """
    step_t, features = batch_features(t, filtered, config, chunk=chunk)
    return features_to_timeline(step_t, features, config)
