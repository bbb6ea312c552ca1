"""Grasp controller state machine and baseline policies.

Phases: INIT -> CLOSING -> PRELOAD -> LIFTING -> {SUCCESS, DROPPED};
CRUSHED can be reported by the simulated world from any contact phase.
The controller ticks at 20 Hz and consumes latest-value snapshots of the
slip indicator (500 Hz) and force estimate (100 Hz).

Policies:
  forte  - contact detection, preload to f_init, slip-reactive increments
  onoff  - close fully, then lift; never reads the sensors
  woslip - forte procedure with slip reaction disabled
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ControllerConfig
from .signal import ChannelRing

PHASES = ("INIT", "CLOSING", "PRELOAD", "LIFTING", "SUCCESS", "DROPPED", "CRUSHED")
TERMINAL = ("SUCCESS", "DROPPED", "CRUSHED")


def detect_contact(ring: ChannelRing, config: ControllerConfig) -> bool:
    """True iff any channel moved by more than tau * full-scale span
    (span = 2.0 in normalized units) within the trailing window."""
    w = config.contact_window
    if ring.count < w:
        return False
    window = ring.last(w)
    swing = window.max(axis=0) - window.min(axis=0)
    return bool(swing.max() > config.contact_threshold * 2.0)


@dataclass
class LogRow:
    t: float
    phase: str
    theta_deg: float
    force_est_n: float
    eta: int
    event: str = ""


@dataclass
class GraspSession:
    """Controller state, advanced once per control tick."""

    config: ControllerConfig
    theta_start: float
    phase: str = "INIT"
    theta_cmd: float = 0.0
    lift_v: float = 0.0
    elapsed: float = 0.0
    lift_height: float = 0.0
    slip_events: int = 0
    increments: int = 0
    saturated: bool = False
    noise_floor: float = 0.0
    log: list[LogRow] = field(default_factory=list)
    _prev_eta: int = 0
    _last_increment_t: float = -1.0
    _contact_lost_since: float | None = None
    _init_ticks: int = 0

    def __post_init__(self):
        self.theta_cmd = self.theta_start

    def _transition(self, phase: str, t: float, note: str = "") -> None:
        self.log.append(LogRow(t, phase, self.theta_cmd, -1.0, 0, note or f"-> {phase}"))
        self.phase = phase

    def step(self, *, t: float, ring: ChannelRing, eta: int,
             force_est: float, crushed: bool = False) -> None:
        """One 20 Hz control tick.

        ring holds the filtered signal history (unused by the onoff
        policy), eta is the latest slip indicator, force_est the latest
        force estimate in newtons.
        """
        cfg = self.config
        dt = 1.0 / cfg.tick_rate
        self.elapsed = t
        if self.phase in TERMINAL:
            return
        if crushed:
            self._transition("CRUSHED", t)
            return

        sensing = cfg.policy != "onoff"
        event = ""

        if self.phase == "INIT":
            self._init_ticks += 1
            if sensing:
                window = ring.last(min(ring.count, cfg.contact_window * 4))
                if len(window):
                    self.noise_floor = float(window.std(axis=0).max())
            # Hold during the baseline interval, then start closing.
            if self._init_ticks * dt >= 1.0:
                self._transition("CLOSING", t)
        elif self.phase == "CLOSING":
            if sensing and detect_contact(ring, cfg):
                self._transition("PRELOAD", t, "contact")
            else:
                self.theta_cmd -= cfg.close_rate_deg
                if self.theta_cmd <= 0.0:
                    self.theta_cmd = 0.0
                    if not sensing:
                        self._transition("LIFTING", t)
                        self.lift_v = cfg.v_lift
                    else:
                        self.saturated = True
        elif self.phase == "PRELOAD":
            if force_est >= cfg.f_init:
                self._transition("LIFTING", t, f"preload {force_est:.3f} N")
                self.lift_v = cfg.v_lift
            else:
                self.theta_cmd -= cfg.close_rate_deg
                if self.theta_cmd < 0.0:
                    self.theta_cmd = 0.0
                    self.saturated = True
        elif self.phase == "LIFTING":
            self.lift_height += self.lift_v * dt
            if sensing and eta and not self._prev_eta:
                self.slip_events += 1
            react = cfg.policy == "forte" and eta
            if react and not cfg.sustained_slip:
                react = not self._prev_eta
            if react and cfg.sustained_slip:
                react = (t - self._last_increment_t) >= cfg.sustained_period
            if react:
                self.theta_cmd -= cfg.delta_cmd_deg
                self.increments += 1
                self._last_increment_t = t
                event = "grip+"
                if self.theta_cmd < 0.0:
                    self.theta_cmd = 0.0
                    self.saturated = True
                    event = "grip saturated"
            if self.lift_height >= cfg.success_height:
                self._transition("SUCCESS", t)
            elif sensing:
                window = ring.last(min(ring.count, cfg.contact_window))
                # Drift keeps the post-drop level slightly off zero; the
                # floor is bounded below so drift alone cannot mask a drop.
                floor = max(self.noise_floor, 4e-3)
                quiet = bool(np.abs(window).max() < cfg.drop_noise_factor * floor)
                if quiet:
                    if self._contact_lost_since is None:
                        self._contact_lost_since = t
                    elif t - self._contact_lost_since > cfg.drop_timeout:
                        self._transition("DROPPED", t, "contact lost")
                else:
                    self._contact_lost_since = None

        if sensing:
            self._prev_eta = eta
        if self.phase not in TERMINAL:
            self.log.append(LogRow(t, self.phase, self.theta_cmd,
                                   force_est if sensing else -1.0,
                                   eta if sensing else 0, event))

    def write_log(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "phase", "theta_deg", "force_est_n", "eta", "event"])
            for row in self.log:
                writer.writerow([format(row.t, ".9g"), row.phase,
                                 format(row.theta_deg, ".9g"),
                                 format(row.force_est_n, ".9g"),
                                 row.eta, row.event])
