"""Closed-loop grasp sessions: simulator + pipeline + detector + controller.

Cadences: sensor ingest at f_s (2 kHz), slip detection every hop samples
(500 Hz), force estimation every 20 samples (100 Hz), control ticks at
20 Hz. The controller consumes latest-value snapshots of the slip and
force outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ControllerConfig, PipelineConfig
from .controller import GraspSession, TERMINAL
from .force import ForceModel, build_feature
from .metrics import EvalReport
from .signal import SignalPipeline
from .sim import SimObject, SimWorld, SensorResponseModel, fragile_object, slippery_object
from .slip import SlipDetector, SlipState
from .trace import Trace

FORCE_PERIOD_SAMPLES = 20   # 100 Hz at f_s = 2 kHz
SESSION_TIMEOUT_S = 30.0


@dataclass
class SessionResult:
    outcome: str                      # SUCCESS | DROPPED | CRUSHED
    session: GraspSession
    trace: Trace
    phase_per_sample: list[str]
    eta_t: np.ndarray
    eta: np.ndarray
    gt_force_r: np.ndarray
    gt_force_l: np.ndarray
    object_name: str
    policy: str
    seed: int


def run_grasp_session(obj: SimObject, policy: str, seed: int,
                      model: ForceModel | None = None,
                      pcfg: PipelineConfig | None = None,
                      ccfg: ControllerConfig | None = None,
                      sensors: SensorResponseModel | None = None) -> SessionResult:
    """Run one closed-loop grasp. Without a force model, the simulator's
    true grip force stands in for the estimator (oracle mode)."""
    pcfg = pcfg or PipelineConfig()
    ccfg = ccfg or ControllerConfig()
    if ccfg.policy != policy:
        from dataclasses import replace
        ccfg = replace(ccfg, policy=policy)

    world = SimWorld(obj, sensors, seed=seed, f_s=pcfg.f_s)
    pipeline = SignalPipeline(pcfg)
    detector = SlipDetector(pcfg)
    session = GraspSession(ccfg, theta_start=world.theta)

    control_period = int(round(pcfg.f_s / ccfg.tick_rate))
    rows, slips, phases = [], [], []
    force_r, force_l = [], []
    eta_t, eta_vals = [], []
    eta, force_est = 0, 0.0
    n = 0
    max_ticks = int(SESSION_TIMEOUT_S * pcfg.f_s)

    while n < max_ticks:
        channels, truth = world.tick()
        pipeline.push(channels)
        n += 1
        rows.append(channels)
        slips.append(truth.slip)
        force_r.append(truth.force_r)
        force_l.append(truth.force_l)
        phases.append(session.phase)

        if n >= pcfg.fft_window and (n - pcfg.fft_window) % pcfg.hop == 0:
            state = detector.step(pipeline.ring, world.t)
            eta = state.eta
            eta_t.append(world.t)
            eta_vals.append(eta)
        if n % FORCE_PERIOD_SAMPLES == 0:
            if model is not None:
                force_est = float(model.predict(build_feature(pipeline.ring))[0])
            else:
                force_est = world.grip_force
        if n % control_period == 0:
            session.step(t=world.t, ring=pipeline.ring, eta=eta,
                         force_est=force_est, crushed=world.crushed)
            world.command_servo(session.theta_cmd)
            world.set_lift_velocity(session.lift_v)
            if session.phase in TERMINAL:
                break

    if session.phase == "CRUSHED" or world.crushed:
        outcome = "CRUSHED"
    elif session.phase == "SUCCESS":
        lifted = (not world.contact_lost) and world.z_obj > 0.2 * ccfg.success_height
        outcome = "SUCCESS" if lifted else "DROPPED"
    else:
        outcome = "DROPPED"

    t = np.arange(1, len(rows) + 1) / pcfg.f_s
    trace = Trace(t=t, channels=np.asarray(rows),
                  slip_gt=np.asarray(slips, dtype=np.int64))
    return SessionResult(
        outcome=outcome, session=session, trace=trace, phase_per_sample=phases,
        eta_t=np.asarray(eta_t), eta=np.asarray(eta_vals, dtype=np.int64),
        gt_force_r=np.asarray(force_r), gt_force_l=np.asarray(force_l),
        object_name=obj.name, policy=policy, seed=seed,
    )


def run_policy_suite(objects: list[SimObject], policies: list[str], seeds: list[int],
                     model: ForceModel | None = None,
                     pcfg: PipelineConfig | None = None,
                     ccfg: ControllerConfig | None = None) -> dict[str, EvalReport]:
    """Grasp every object with every policy over the seed set."""
    reports: dict[str, EvalReport] = {}
    for policy in policies:
        report = EvalReport()
        for obj in objects:
            for seed in seeds:
                result = run_grasp_session(obj, policy, seed, model=model,
                                           pcfg=pcfg, ccfg=ccfg)
                report.add_outcome(result.outcome)
                report.add_trial(bool(result.trace.slip_gt.any()),
                                 bool(result.eta.any()) if policy != "onoff" else False)
        reports[policy] = report
    return reports


def success_rate(report: EvalReport) -> float:
    total = sum(report.outcomes.values())
    return report.outcomes.get("SUCCESS", 0) / total if total else 0.0


def scenario_object(name: str, seed: int) -> SimObject:
    if name == "C":
        return fragile_object(seed % 5)
    if name == "D":
        return slippery_object(seed % 5)
    raise ValueError(f"no session object for scenario {name!r}")


def run_scenario(name: str, seed: int, policy: str = "forte",
                 model: ForceModel | None = None,
                 pcfg: PipelineConfig | None = None,
                 ccfg: ControllerConfig | None = None):
    """Scenario dispatch.

    A: scripted insufficient-force lift (slip characterization)
    B: scripted indentor press (force dataset trial)
    C: closed-loop fragile grasp with the given policy
    D: closed-loop slippery grasp with the given policy
    E: scripted drift-stress press (force ablation trial)

    Returns a ScriptedResult for A, a Trace for B/E, a SessionResult for C/D.
    """
    from . import sim

    if name == "A":
        return sim.run_scenario_a(seed)
    if name == "B":
        indentor = sim.INDENTOR_TAGS[seed % len(sim.INDENTOR_TAGS)]
        return sim.run_scenario_b_trial(seed, indentor)
    if name == "E":
        return sim.run_scenario_e_trial(seed)
    if name in ("C", "D"):
        return run_grasp_session(scenario_object(name, seed), policy, seed,
                                 model=model, pcfg=pcfg, ccfg=ccfg)
    raise ValueError(f"unknown scenario {name!r}")
