"""Pipeline and controller configuration.

Defaults reproduce the stock operating point of the detection chain:
2 kHz sampling, 400-sample FFT windows with 99% overlap (500 Hz detection
cadence), 10-50 Hz analysis band, and the variance-gate thresholds the
system ships with.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path


FINGER_R = "R"
FINGER_L = "L"

# Channel layout is fixed by the hardware: channels 0-2 are the right
# finger (distal, middle, root), channels 3-5 the left finger.
FINGER_CHANNELS = {FINGER_R: (0, 1, 2), FINGER_L: (3, 4, 5)}
N_CHANNELS = 6


@dataclass
class PipelineConfig:
    """Parameters of the signal and slip-detection chain."""

    f_s: float = 2000.0            # sampling rate, Hz
    adc_bits: int = 11             # ADC resolution
    median_window: int = 11        # M, samples (odd)
    fft_window: int = 400          # N, samples
    overlap: float = 0.99          # O, fraction of fft_window
    f_min: float = 10.0            # band lower edge, Hz
    f_max: float = 50.0            # band upper edge, Hz
    history_len: int = 15          # V, PSD features kept per sensor
    delta_db: float = 0.1          # minimal increment for monotonicity, dB
    alpha_db2: float = 0.6         # group average variance gate, dB^2
    threshold_db2: float = 2.0     # slip detection threshold T, dB^2
    log_guard: float = 1e-12       # epsilon added before the log
    baseline_seconds: float = 1.0  # initialization interval for baselines
    sample_variance: bool = False  # Bessel-corrected variance instead of population
    strict_group_gate: bool = False  # require every finger to pass alpha

    def __post_init__(self):
        if self.f_s <= 0:
            raise ValueError("f_s must be positive")
        if self.adc_bits <= 0:
            raise ValueError("adc_bits must be positive")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError("median_window must be odd and >= 1")
        if self.fft_window < 2:
            raise ValueError("fft_window must be >= 2")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError("overlap must be in [0, 1)")
        if self.hop < 1:
            raise ValueError("overlap too large: hop would be < 1 sample")
        if not 0.0 <= self.f_min < self.f_max:
            raise ValueError("need 0 <= f_min < f_max")
        if self.f_max > self.f_s / 2:
            raise ValueError("f_max exceeds Nyquist")
        if self.history_len < 2:
            raise ValueError("history_len must be >= 2")

    @property
    def hop(self) -> int:
        """Samples between detection steps (4 at stock settings -> 500 Hz)."""
        return int(round(self.fft_window * (1.0 - self.overlap)))

    @property
    def detect_rate(self) -> float:
        return self.f_s / self.hop

    @property
    def warmup_samples(self) -> int:
        """Samples before the indicator can fire (full window + full history)."""
        return self.fft_window + (self.history_len - 1) * self.hop


@dataclass
class ControllerConfig:
    """Grasp controller parameters."""

    contact_threshold: float = 0.005   # tau, fraction of full-scale span
    contact_window: int = 200          # w, samples (0.1 s at 2 kHz)
    f_init: float = 0.25               # preload force, N
    v_lift: float = 0.005              # lift speed, m/s
    delta_cmd_deg: float = 0.88        # grip increment on slip, degrees
    tick_rate: float = 20.0            # control loop rate, Hz
    close_rate_deg: float = 0.5        # closing speed, degrees per tick
    policy: str = "forte"              # forte | onoff | woslip
    success_height: float = 0.05       # lift height for success, m
    drop_timeout: float = 0.25         # contact-loss time before DROPPED, s
    drop_noise_factor: float = 1.2     # contact-loss level vs noise floor
    sustained_slip: bool = False       # re-increment on sustained eta
    sustained_period: float = 0.1      # s between increments when sustained

    def __post_init__(self):
        for name in ("contact_threshold", "f_init", "v_lift", "delta_cmd_deg",
                     "tick_rate", "close_rate_deg", "success_height"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.contact_window < 2:
            raise ValueError("contact_window must be >= 2")
        if self.policy not in ("forte", "onoff", "woslip"):
            raise ValueError(f"unknown policy {self.policy!r}")


def _coerce(value: str, target_type):
    if target_type is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    return target_type(value)


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Parse a line-oriented key=value file; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def apply_overrides(config, overrides: dict[str, str]):
    """Return a copy of a dataclass config with string overrides applied.

    Unknown keys are ignored so one file can configure several dataclasses.
    """
    known = {f.name: f.type for f in fields(config)}
    updates = {}
    for key, value in overrides.items():
        if key not in known:
            continue
        current = getattr(config, key)
        updates[key] = _coerce(value, type(current))
    return replace(config, **updates) if updates else config


def load_pipeline_config(path: str | Path | None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is not None:
        cfg = apply_overrides(cfg, parse_kv_file(path))
    return cfg


def load_controller_config(path: str | Path | None, policy: str | None = None) -> ControllerConfig:
    cfg = ControllerConfig()
    if path is not None:
        cfg = apply_overrides(cfg, parse_kv_file(path))
    if policy is not None:
        cfg = replace(cfg, policy=policy)
    return cfg
