"""Closed-loop stick-slip grasp simulator.

Generates 2 kHz six-channel traces from a simple physical model: the fin-ray
pair is a linear grip spring (servo angle -> aperture -> normal force), each
finger-object contact is a tangential pad spring with Coulomb stick-slip,
and every stick-to-slip transition injects a decaying band-limited burst
(20-40 Hz) into the slipping finger's channels. Channel values are a
monotone force response plus bursts, a bounded random-walk drift, Gaussian
noise, and 11-bit quantization.

The grip spring is calibrated so that full closure on an incompressible
5 cm object produces ~8 N of total grip force, matching the force range the
estimator is characterized over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .signal import normalize_raw
from .trace import Trace

GRAVITY = 9.81
APERTURE_PER_DEG = 0.1 / 60.0          # m of aperture per servo degree
K_GRIP = 160.0                         # N/m grip spring (8 N at 5 cm closure)
K_TANGENT = 120.0                      # tangential pad stiffness scale, N/m at 1 N
TANGENT_EXP = 1.3                      # contact stiffness grows superlinearly with load
RESTICK_TRAVEL = 8e-4                  # m of sliding before the pad re-catches
V_STICK = 1e-4                         # m/s: below this, slipping contact re-sticks
V_SLIP_GT = 1e-5                       # m/s: ground-truth slip flag threshold
V_OBJ_MAX = 0.5                        # m/s object speed clamp (energy sanity)
SERVO_SLEW_DEG = 25.0                  # deg/s servo slew toward commanded angle
BURST_DECAY_S = 0.06
BURST_F_LO, BURST_F_HI = 20.0, 40.0
MIN_CONTACT_FORCE = 1e-3               # N below which friction is ignored

INDENTOR_TAGS = ("flat", "cylinder", "sphere", "edge", "cone", "ring")


@dataclass(frozen=True)
class SimObject:
    name: str
    mass: float                 # kg
    mu_s: float                 # static friction coefficient
    mu_k: float                 # kinetic friction coefficient (< mu_s)
    fragility: float = math.inf  # N per-finger crush threshold
    width: float = 0.05         # m
    grasp_offset: float = 0.0   # m lateral offset; biases finger force split
    escape_travel: float = 0.02  # m of cumulative slip before contact is lost
    geometry: str = "cylinder"

    def __post_init__(self):
        if not 0.0 < self.mu_k < self.mu_s:
            raise ValueError("need 0 < mu_k < mu_s")
        if self.mass <= 0 or self.fragility <= 0 or self.width <= 0:
            raise ValueError("mass, fragility and width must be positive")

    @property
    def theta_zero_f(self) -> float:
        """Servo angle (deg) where the fingers just touch the object."""
        return self.width / APERTURE_PER_DEG

    @property
    def weight(self) -> float:
        return self.mass * GRAVITY

    @property
    def required_force(self) -> float:
        """Minimal total grip force for a stable (static) hold."""
        return self.weight / self.mu_s

    def closed_grip_force(self) -> float:
        """Total normal force when the servo is fully closed (theta = 0)."""
        return K_GRIP * self.width

    def finger_split(self) -> tuple[float, float]:
        asym = max(-0.3, min(0.3, self.grasp_offset / self.width))
        return 0.5 + asym, 0.5 - asym


@dataclass(frozen=True)
class SensorResponseModel:
    """Force-to-pressure mapping of the six channels.

    Per-finger channel order is (distal, middle, root); distal responds
    strongest. The response is monotone in normal force over 0-8 N.
    """

    gains: tuple[float, ...] = (0.10, 0.07, 0.04, 0.10, 0.07, 0.04)
    response_exp: float = 0.9
    vib_gains: tuple[float, ...] = (0.055, 0.038, 0.022, 0.055, 0.038, 0.022)
    noise_std: float = 0.002
    drift_rate: float = 0.001   # normalized units per sqrt(second)
    drift_bound: float = 0.1
    bits: int = 11
    # Stationary ambient vibration floor (building hum). Keeping a small
    # deterministic in-band component bounds how deep the band-power floor
    # can fade, which is what keeps noise-only variance crawls from
    # tripping the monotonicity gate; slip bursts sit ~30 dB above it.
    ambient_amp: float = 0.001
    ambient_freqs: tuple[float, ...] = (31.0, 33.5, 36.0, 29.0, 34.5, 37.5)
    ambient_phases: tuple[float, ...] = (0.0, 0.7, 1.4, 2.1, 2.8, 3.5)

    def ambient(self, t):
        """Ambient vibration of all six channels at time(s) t."""
        t = np.asarray(t, dtype=np.float64)
        freqs = np.asarray(self.ambient_freqs)
        phases = np.asarray(self.ambient_phases)
        return self.ambient_amp * np.sin(
            2.0 * np.pi * t[..., None] * freqs + phases)

    def response(self, force_n):
        """Normalized pressure per (distal, middle, root) channel of one finger."""
        f = np.maximum(np.asarray(force_n, dtype=np.float64), 0.0)
        return f ** self.response_exp

    def quantize(self, x: np.ndarray) -> np.ndarray:
        half = 1 << (self.bits - 1)
        counts = np.clip(np.rint(np.asarray(x) * half + half), 0, (1 << self.bits) - 1)
        return (counts - half) / half


@dataclass
class _FingerContact:
    stick: bool = True
    stretch: float = 0.0        # m, tangential pad deflection
    travel_in_slip: float = 0.0
    slipping_now: bool = False


@dataclass
class TickTruth:
    slip: int
    force_r: float
    force_l: float
    contact: bool


class SimWorld:
    """One grasp world stepped at the sensor rate (single-threaded)."""

    def __init__(self, obj: SimObject, sensors: SensorResponseModel | None = None,
                 seed: int = 0, f_s: float = 2000.0):
        self.obj = obj
        self.sensors = sensors or SensorResponseModel()
        self.f_s = f_s
        self.dt = 1.0 / f_s
        self.rng = np.random.default_rng(seed)
        self.t = 0.0
        self.theta = obj.theta_zero_f + 3.0
        self.theta_target = self.theta
        self.instant_servo = False
        self.z_grip = 0.0
        self.v_lift = 0.0
        self.z_obj = 0.0
        self.v_obj = 0.0
        self.slip_travel = 0.0
        self.crushed = False
        self.contact_lost = False
        self.saturated = False
        self._fingers = (_FingerContact(), _FingerContact())
        self._drift = np.zeros(6)
        self._bursts: list[tuple[float, float, float, np.ndarray]] = []
        self._noise_block = np.empty((0, 6))
        self._noise_i = 0

    # -- commands -------------------------------------------------------

    def command_servo(self, theta_deg: float) -> None:
        if theta_deg < 0.0:
            theta_deg = 0.0
            self.saturated = True
        self.theta_target = theta_deg

    def set_servo(self, theta_deg: float) -> None:
        self.command_servo(theta_deg)
        self.theta = self.theta_target

    def set_lift_velocity(self, v: float) -> None:
        self.v_lift = v

    # -- internals ------------------------------------------------------

    def _noise_row(self) -> np.ndarray:
        if self._noise_i >= len(self._noise_block):
            self._noise_block = self.rng.standard_normal((4096, 6)) * self.sensors.noise_std
            self._noise_i = 0
        row = self._noise_block[self._noise_i]
        self._noise_i += 1
        return row

    def _inject_burst(self, finger: int, force_n: float) -> None:
        freq = self.rng.uniform(BURST_F_LO, BURST_F_HI)
        phase = self.rng.uniform(0.0, 2.0 * math.pi)
        amp = np.zeros(6)
        chans = slice(0, 3) if finger == 0 else slice(3, 6)
        scale = math.sqrt(max(force_n, 0.05))
        amp[chans] = np.asarray(self.sensors.vib_gains[chans]) * scale
        self._bursts.append((self.t, freq, phase, amp))

    def _burst_signal(self) -> np.ndarray:
        if not self._bursts:
            return np.zeros(6)
        out = np.zeros(6)
        keep = []
        for t0, freq, phase, amp in self._bursts:
            age = self.t - t0
            if age > 5.0 * BURST_DECAY_S:
                continue
            keep.append((t0, freq, phase, amp))
            out += amp * (math.exp(-age / BURST_DECAY_S)
                          * math.sin(2.0 * math.pi * freq * age + phase))
        self._bursts = keep
        return out

    def _normal_forces(self) -> tuple[float, float]:
        if self.contact_lost or self.crushed:
            return 0.0, 0.0
        penetration = self.obj.width - APERTURE_PER_DEG * self.theta
        if penetration <= 0.0:
            return 0.0, 0.0
        total = K_GRIP * penetration
        sr, sl = self.obj.finger_split()
        return total * sr, total * sl

    def tick(self) -> tuple[np.ndarray, TickTruth]:
        dt = self.dt
        self.t += dt
        if not self.instant_servo:
            step = max(-SERVO_SLEW_DEG * dt, min(SERVO_SLEW_DEG * dt,
                                                 self.theta_target - self.theta))
            self.theta += step
        else:
            self.theta = self.theta_target
        self.z_grip += self.v_lift * dt

        f_r, f_l = self._normal_forces()
        if max(f_r, f_l) > self.obj.fragility:
            self.crushed = True
            f_r, f_l = 0.0, 0.0

        v_rel = (self.v_lift - self.v_obj)
        tangential = 0.0
        slip_flag = 0
        for idx, f_n in enumerate((f_r, f_l)):
            fc = self._fingers[idx]
            if f_n < MIN_CONTACT_FORCE:
                fc.stick, fc.stretch, fc.slipping_now = True, 0.0, False
                continue
            k_t = K_TANGENT * f_n ** TANGENT_EXP
            if fc.stick:
                fc.stretch += v_rel * dt
                f_t = k_t * fc.stretch
                if abs(f_t) > self.obj.mu_s * f_n:
                    fc.stick = False
                    fc.travel_in_slip = 0.0
                    fc.slipping_now = True
                    self._inject_burst(idx, f_n)
                    f_t = self.obj.mu_k * f_n * (1.0 if f_t > 0 else -1.0)
                    fc.stretch = f_t / k_t
            else:
                sgn = 1.0 if (v_rel >= 0.0) else -1.0
                f_t = self.obj.mu_k * f_n * sgn
                fc.stretch = f_t / k_t
                moved = abs(v_rel) * dt
                fc.travel_in_slip += moved
                self.slip_travel += moved
                fc.slipping_now = abs(v_rel) > V_SLIP_GT
                if fc.travel_in_slip >= RESTICK_TRAVEL or abs(v_rel) < V_STICK:
                    fc.stick = True
                    fc.slipping_now = False
            tangential += f_t
            if fc.slipping_now and abs(v_rel) > V_SLIP_GT:
                slip_flag = 1

        if self.slip_travel > self.obj.escape_travel and not self.contact_lost:
            self.contact_lost = True
            f_r, f_l = 0.0, 0.0

        # Object vertical dynamics (damped toward the gripper while stuck).
        damping = 1.5 * (self._fingers[0].stick + self._fingers[1].stick) * v_rel
        net = tangential + damping - self.obj.weight
        if self.z_obj <= 0.0 and net <= 0.0:
            self.z_obj, self.v_obj = 0.0, 0.0
        else:
            self.v_obj += (net / self.obj.mass) * dt
            self.v_obj = max(-V_OBJ_MAX, min(V_OBJ_MAX, self.v_obj))
            self.z_obj = max(0.0, self.z_obj + self.v_obj * dt)

        # Sensor synthesis.
        s = self.sensors
        self._drift += self.rng.normal(0.0, s.drift_rate * math.sqrt(dt), 6)
        np.clip(self._drift, -s.drift_bound, s.drift_bound, out=self._drift)
        base = np.empty(6)
        base[:3] = np.asarray(s.gains[:3]) * s.response(f_r)
        base[3:] = np.asarray(s.gains[3:]) * s.response(f_l)
        raw = (base + self._burst_signal() + s.ambient(self.t)
               + self._drift + self._noise_row())
        channels = s.quantize(raw)
        return channels, TickTruth(slip=slip_flag, force_r=f_r, force_l=f_l,
                                   contact=(max(f_r, f_l) > MIN_CONTACT_FORCE))

    @property
    def grip_force(self) -> float:
        f_r, f_l = self._normal_forces()
        return f_r + f_l

    @property
    def noise_floor(self) -> float:
        return self.sensors.noise_std


# ----------------------------------------------------------------------
# Vectorized open-loop synthesis (press scenarios: no friction dynamics).

def synthesize_press_trace(force_total: np.ndarray, sensors: SensorResponseModel,
                           seed: int, f_s: float = 2000.0,
                           split: tuple[float, float] = (0.5, 0.5),
                           gain_factor: float = 1.0,
                           response_exp: float | None = None) -> Trace:
    """Channels for a scripted total-grip-force profile, no slip events."""
    rng = np.random.default_rng(seed)
    n = len(force_total)
    dt = 1.0 / f_s
    exp = sensors.response_exp if response_exp is None else response_exp
    gains = np.asarray(sensors.gains) * gain_factor
    f_fingers = np.empty((n, 6))
    f_fingers[:, :3] = np.maximum(force_total * split[0], 0.0)[:, None] ** exp
    f_fingers[:, 3:] = np.maximum(force_total * split[1], 0.0)[:, None] ** exp
    base = f_fingers * gains
    drift_steps = rng.normal(0.0, sensors.drift_rate * math.sqrt(dt), (n, 6))
    drift = np.cumsum(drift_steps, axis=0)
    np.clip(drift, -sensors.drift_bound, sensors.drift_bound, out=drift)
    noise = rng.standard_normal((n, 6)) * sensors.noise_std
    t = np.arange(1, n + 1) * dt
    channels = sensors.quantize(base + sensors.ambient(t) + drift + noise)
    return Trace(t=t, channels=channels, force_n=force_total.astype(np.float64))


def quiescent_trace(duration_s: float, seed: int,
                    sensors: SensorResponseModel | None = None,
                    f_s: float = 2000.0) -> Trace:
    """Noise-and-drift-only trace (no contact), slip ground truth all zero."""
    sensors = sensors or SensorResponseModel()
    n = int(round(duration_s * f_s))
    trace = synthesize_press_trace(np.zeros(n), sensors, seed, f_s)
    trace.force_n = None
    trace.slip_gt = np.zeros(n, dtype=np.int64)
    return trace


# ----------------------------------------------------------------------
# Scripted scenarios.

SCENARIO_A_OBJECT = SimObject("apple", mass=0.23, mu_s=0.35, mu_k=0.27,
                              width=0.07, grasp_offset=0.001)


@dataclass
class ScriptedResult:
    trace: Trace
    gt_force_r: np.ndarray
    gt_force_l: np.ndarray
    phase: list[str]
    outcome: str


def run_scenario_a(seed: int, obj: SimObject = SCENARIO_A_OBJECT,
                   sensors: SensorResponseModel | None = None,
                   lift_s: float = 5.0) -> ScriptedResult:
    """Insufficient-force lift: grasp below the stable force, then lift.

    The grip force is sampled in [0.3, 0.5) N, far below the object's
    required force, so ground-truth slip events are guaranteed during the
    lift.
    """
    rng = np.random.default_rng(seed ^ 0x5A)
    grip = rng.uniform(0.3, 0.5)
    theta_hat = obj.theta_zero_f - grip / (K_GRIP * APERTURE_PER_DEG)
    world = SimWorld(obj, sensors, seed=seed)
    f_s = world.f_s

    rows, truth, phases = [], [], []

    def run(duration, phase):
        for _ in range(int(round(duration * f_s))):
            ch, tt = world.tick()
            rows.append(ch)
            truth.append(tt)
            phases.append(phase)

    run(1.2, "init")
    world.command_servo(theta_hat)
    run(0.8, "close")
    run(0.5, "hold")
    world.set_lift_velocity(0.005)
    run(lift_s, "lift")

    n = len(rows)
    t = np.arange(1, n + 1) / f_s
    trace = Trace(t=t, channels=np.asarray(rows),
                  slip_gt=np.array([tt.slip for tt in truth], dtype=np.int64))
    return ScriptedResult(
        trace=trace,
        gt_force_r=np.array([tt.force_r for tt in truth]),
        gt_force_l=np.array([tt.force_l for tt in truth]),
        phase=phases,
        outcome="slip" if trace.slip_gt.any() else "no_slip",
    )


def indentor_press_profile(seed: int, f_s: float = 2000.0,
                           max_force: float = 8.0) -> np.ndarray:
    """Force profile of one indentor trial: quiet, ramp to a random force, hold."""
    rng = np.random.default_rng(seed ^ 0xB0)
    target = rng.uniform(0.0, max_force)
    n_init = int(round(1.2 * f_s))
    n_ramp = int(round(1.0 * f_s))
    n_hold = int(round(1.6 * f_s))
    ramp = np.linspace(0.0, target, n_ramp, endpoint=False)
    return np.concatenate([np.zeros(n_init), ramp, np.full(n_hold, target)])


def run_scenario_b_trial(seed: int, indentor: str,
                         sensors: SensorResponseModel | None = None) -> Trace:
    """One force-characterization press against a rigid indentor."""
    sensors = sensors or SensorResponseModel()
    tag_i = INDENTOR_TAGS.index(indentor)
    gain_factor = 1.0 + 0.015 * (tag_i - 2.5) / 2.5
    response_exp = sensors.response_exp + 0.01 * (tag_i - 2.5) / 2.5
    profile = indentor_press_profile(seed)
    return synthesize_press_trace(profile, sensors, seed,
                                  gain_factor=gain_factor,
                                  response_exp=response_exp)


def drift_stress_profile(seed: int, f_s: float = 2000.0,
                         duration_s: float = 25.0) -> np.ndarray:
    """Three short presses separated by long rests (drift ablation trials)."""
    rng = np.random.default_rng(seed ^ 0xE0)
    n = int(round(duration_s * f_s))
    profile = np.zeros(n)
    for start in (2.0, 10.0, 18.0):
        target = rng.uniform(0.5, 8.0)
        i0 = int(round(start * f_s))
        i_ramp = int(round(0.5 * f_s))
        i_hold = int(round(2.5 * f_s))
        profile[i0:i0 + i_ramp] = np.linspace(0.0, target, i_ramp, endpoint=False)
        profile[i0 + i_ramp:i0 + i_ramp + i_hold] = target
    return profile


def run_scenario_e_trial(seed: int, sensors: SensorResponseModel | None = None) -> Trace:
    sensors = sensors or SensorResponseModel()
    sensors = replace(sensors, drift_rate=sensors.drift_rate * 20.0,
                      drift_bound=0.3)
    profile = drift_stress_profile(seed)
    return synthesize_press_trace(profile, sensors, seed)


def make_force_dataset(out_dir, n_trials: int = 240, seed: int = 0,
                       scenario: str = "B") -> str:
    """Write scenario-B or -E trial traces plus a manifest; returns manifest path."""
    import csv
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial_id", "file", "indentor"])
        for k in range(n_trials):
            trial_seed = seed * 100_000 + k
            if scenario == "B":
                indentor = INDENTOR_TAGS[k % len(INDENTOR_TAGS)]
                trace = run_scenario_b_trial(trial_seed, indentor)
            elif scenario == "E":
                indentor = "drift"
                trace = run_scenario_e_trial(trial_seed)
            else:
                raise ValueError(f"no force dataset for scenario {scenario!r}")
            name = f"trial_{k:03d}.csv"
            from .trace import write_trace
            write_trace(out_dir / name, trace)
            writer.writerow([f"t{k:03d}", name, indentor])
    return str(manifest)


# ----------------------------------------------------------------------
# Object suite for controller evaluation.

def fragile_object(i: int) -> SimObject:
    return SimObject(
        name=f"fragile_{i}", mass=0.012 + 0.002 * i, mu_s=0.9, mu_k=0.7,
        fragility=0.8 + 0.3 * i, width=0.05, grasp_offset=0.001 * (i % 3),
    )


def slippery_object(i: int) -> SimObject:
    return SimObject(
        name=f"slippery_{i}", mass=0.06 + 0.01 * i, mu_s=0.32 + 0.01 * i,
        mu_k=0.8 * (0.32 + 0.01 * i), width=0.05 + 0.004 * (i % 3),
        grasp_offset=0.001 * (i % 2),
    )


def object_suite() -> list[SimObject]:
    return [fragile_object(i) for i in range(5)] + [slippery_object(i) for i in range(5)]


def get_object(name: str) -> SimObject:
    for obj in object_suite() + [SCENARIO_A_OBJECT]:
        if obj.name == name:
            return obj
    raise KeyError(f"unknown object {name!r}")


def parse_scenario_file(path) -> dict:
    """Scenario definition file: key=value lines describing object, sensor
    model, schedule and seed. Returns the parsed mapping; unknown keys are
    left to the caller."""
    from .config import parse_kv_file
    return parse_kv_file(path)
