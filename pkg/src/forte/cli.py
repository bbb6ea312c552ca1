"""Command-line interface.

Subcommands: replay, grasp, simulate, train-force, eval-force, sweep,
bench. Exit codes: 0 success, 1 usage error, 2 data error, 3 threshold
failure (for CI gating). FORTE_SEED sets the default seed. All report
paths emit plain CSV; --plot-dir additionally renders figures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from .config import (ControllerConfig, PipelineConfig, apply_overrides,
                     parse_kv_file)
from .trace import Trace, TraceFormatError, read_trace, write_ground_truth, write_trace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_THRESHOLD = 3


class DataError(Exception):
    """Bad input data (malformed files, missing columns, unknown names)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    try:
        return int(os.environ.get("FORTE_SEED", "0"))
    except ValueError:
        return 0


def _load_configs(path: str | None) -> tuple[PipelineConfig, ControllerConfig]:
    overrides = {}
    if path is not None:
        if not Path(path).is_file():
            raise DataError(f"config file not found: {path}")
        try:
            overrides = parse_kv_file(path)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        known = {f.name for f in dataclasses.fields(PipelineConfig)}
        known |= {f.name for f in dataclasses.fields(ControllerConfig)}
        for key in overrides:
            if key not in known:
                raise DataError(f"{path}: unknown config key {key!r}")
    try:
        pcfg = apply_overrides(PipelineConfig(), overrides)
        ccfg = apply_overrides(ControllerConfig(), overrides)
    except ValueError as exc:
        raise DataError(f"bad config value: {exc}") from None
    return pcfg, ccfg


def _read_trace_checked(path: str) -> Trace:
    if not Path(path).is_file():
        raise DataError(f"trace file not found: {path}")
    try:
        return read_trace(path)
    except TraceFormatError as exc:
        raise DataError(str(exc)) from None


def _load_model(path: str):
    from .force import ForceModel
    if not Path(path).is_file():
        raise DataError(f"model file not found: {path}")
    try:
        return ForceModel.load(path)
    except (ValueError, KeyError) as exc:
        raise DataError(f"{path}: bad model file ({exc})") from None


def _write_events_csv(path, events) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_detect", "finger", "sigma_bar_db2", "eta"])
        for ev in events:
            writer.writerow([format(ev.t_detect, ".9g"), ev.finger,
                             format(ev.sigma_bar_db2, ".9g"), 1])


def _write_timeline_csv(path, timeline) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "p_max_ch0", "p_max_ch1", "p_max_ch2",
                         "p_max_ch3", "p_max_ch4", "p_max_ch5",
                         "sigma_bar_r_db2", "sigma_bar_l_db2", "eta"])
        for i in range(len(timeline.t)):
            row = [format(timeline.t[i], ".9g")]
            row += [format(v, ".9g") for v in timeline.features[i]]
            row += [format(timeline.sigma_bar[i, 0], ".9g"),
                    format(timeline.sigma_bar[i, 1], ".9g"),
                    str(int(timeline.eta[i]))]
            writer.writerow(row)


# ----------------------------------------------------------------------
# replay


def cmd_replay(args) -> int:
    from .replay import replay_trace
    from . import plots

    pcfg, _ = _load_configs(args.config)
    trace = _read_trace_checked(args.trace)
    model = _load_model(args.model) if args.model else None
    result = replay_trace(trace, pcfg, model=model, realtime=args.realtime)

    if args.events:
        _write_events_csv(args.events, result.timeline.events)
    if args.timeline:
        _write_timeline_csv(args.timeline, result.timeline)
    if args.force_out and result.force_pred is not None:
        with open(args.force_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "force_pred_n"])
            for ti, fi in zip(result.force_t, result.force_pred):
                writer.writerow([format(ti, ".9g"), format(fi, ".9g")])
    if args.report:
        if result.report is None:
            print("trace has no slip ground truth; metrics omitted", file=sys.stderr)
        else:
            result.report.write_csv(args.report)
    if args.plot_dir:
        out = Path(args.plot_dir)
        out.mkdir(parents=True, exist_ok=True)
        plots.plot_replay(trace, result.timeline, result.filtered,
                          out / "replay.png", threshold_db2=pcfg.threshold_db2)

    n_events = len(result.timeline.events)
    print(f"replayed {len(trace)} samples, {len(result.timeline.t)} detection "
          f"steps, {n_events} slip event(s)")
    if result.report is not None:
        s = result.report.summary()
        print(f"event recall {s['event_recall']:.3f}, "
              f"event precision {s['event_precision']:.3f}, "
              f"false firings {result.report.false_firings}")
        if result.report.latencies_ms:
            print(f"latency mean {s['latency_mean_ms']:.1f} ms, "
                  f"max {s['latency_max_ms']:.1f} ms")
        if args.max_latency_ms is not None:
            lat = result.report.max_latency_ms()
            if (result.report.missed_events
                    or (lat is not None and lat > args.max_latency_ms)):
                print("latency threshold exceeded", file=sys.stderr)
                return EXIT_THRESHOLD
    return EXIT_OK


# ----------------------------------------------------------------------
# grasp


def cmd_grasp(args) -> int:
    from dataclasses import replace
    from .session import run_grasp_session
    from .sim import get_object
    from . import plots

    pcfg, ccfg = _load_configs(args.config)
    ccfg = replace(ccfg, policy=args.policy)
    try:
        obj = get_object(args.object)
    except KeyError as exc:
        raise DataError(str(exc.args[0])) from None
    model = _load_model(args.model) if args.model else None

    result = run_grasp_session(obj, args.policy, args.seed, model=model,
                               pcfg=pcfg, ccfg=ccfg)
    if args.log:
        result.session.write_log(args.log)
    if args.plot_dir:
        out = Path(args.plot_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = result.session.log
        plots.plot_session([r.t for r in rows], [r.theta_deg for r in rows],
                           [r.force_est_n for r in rows], [r.eta for r in rows],
                           out / "grasp.png",
                           title=f"{obj.name} / {args.policy} (seed {args.seed})")
    print(f"object {obj.name}, policy {args.policy}, seed {args.seed}: "
          f"{result.outcome} ({result.session.increments} grip increment(s), "
          f"{result.session.slip_events} slip event(s))")
    return EXIT_OK


# ----------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    from .session import SessionResult, run_scenario
    from .sim import ScriptedResult

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = args.scenario.upper()
    try:
        result = run_scenario(scenario, args.seed, policy=args.policy)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    stem = f"scenario_{scenario}_seed{args.seed}"
    trace_path = out_dir / f"{stem}.csv"
    gt_path = out_dir / f"{stem}_gt.csv"
    if isinstance(result, ScriptedResult):
        write_trace(trace_path, result.trace)
        write_ground_truth(gt_path, result.trace.t, result.trace.slip_gt,
                           result.gt_force_r, result.gt_force_l, result.phase)
        outcome = result.outcome
    elif isinstance(result, SessionResult):
        write_trace(trace_path, result.trace)
        write_ground_truth(gt_path, result.trace.t, result.trace.slip_gt,
                           result.gt_force_r, result.gt_force_l,
                           result.phase_per_sample)
        outcome = result.outcome
    else:  # plain Trace (scenarios B and E)
        write_trace(trace_path, result)
        n = len(result)
        write_ground_truth(gt_path, result.t, np.zeros(n, dtype=np.int64),
                           result.force_n / 2.0, result.force_n / 2.0,
                           ["press"] * n)
        outcome = "press"
    print(f"scenario {scenario} seed {args.seed}: {outcome}")
    print(f"wrote {trace_path} and {gt_path}")
    return EXIT_OK


def cmd_make_dataset(args) -> int:
    from .sim import make_force_dataset

    try:
        manifest = make_force_dataset(args.out_dir, n_trials=args.trials,
                                      seed=args.seed, scenario=args.scenario.upper())
    except ValueError as exc:
        raise DataError(str(exc)) from None
    print(f"wrote {args.trials} trials, manifest {manifest}")
    return EXIT_OK


# ----------------------------------------------------------------------
# train-force / eval-force


def _load_trials_checked(manifest: str, pcfg: PipelineConfig, rate: float,
                         baseline_only: bool):
    from .force import load_trials
    if not Path(manifest).is_file():
        raise DataError(f"manifest not found: {manifest}")
    try:
        return load_trials(manifest, pcfg, sample_rate=rate,
                           baseline_only=baseline_only)
    except (ValueError, TraceFormatError, FileNotFoundError) as exc:
        raise DataError(str(exc)) from None


def cmd_train_force(args) -> int:
    from .force import SvrConvergenceError, train

    pcfg, _ = _load_configs(args.config)
    trials = _load_trials_checked(args.manifest, pcfg, args.rate, args.baseline_only)
    try:
        model = train(trials, C=args.C, epsilon=args.epsilon)
    except SvrConvergenceError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        model = exc.model
    model.save(args.model)
    n = sum(len(tr.force) for tr in trials)
    print(f"trained on {len(trials)} trials ({n} samples): "
          f"{len(model.coefficients)} support vectors -> {args.model}")
    return EXIT_OK


def cmd_eval_force(args) -> int:
    from .force import cross_validate, rmse
    from . import plots

    pcfg, _ = _load_configs(args.config)
    trials = _load_trials_checked(args.manifest, pcfg, args.rate, args.baseline_only)

    if args.model:
        model = _load_model(args.model)
        value = rmse(model, trials)
        rows = [["rmse_n", format(value, ".9g")]]
        print(f"held-out RMSE over {len(trials)} trials: {value:.4f} N")
        if args.plot_dir:
            out = Path(args.plot_dir)
            out.mkdir(parents=True, exist_ok=True)
            x = np.concatenate([tr.features for tr in trials])
            y = np.concatenate([tr.force for tr in trials])
            plots.plot_force_eval(y, model.predict(x), out / "force_eval.png")
    else:
        try:
            cv = cross_validate(trials, folds=args.folds, seed=args.seed,
                                C=args.C, epsilon=args.epsilon)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        value = cv.mean_rmse
        rows = [["mean_rmse_n", format(cv.mean_rmse, ".9g")],
                ["pooled_rmse_n", format(cv.pooled_rmse, ".9g")]]
        rows += [[f"fold{k}_rmse_n", format(r, ".9g")]
                 for k, r in enumerate(cv.fold_rmse)]
        print(f"{args.folds}-fold trial-wise CV over {len(trials)} trials: "
              f"mean RMSE {cv.mean_rmse:.4f} N, pooled {cv.pooled_rmse:.4f} N")

    if args.report:
        with open(args.report, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerows(rows)
    if args.rmse_max is not None and value > args.rmse_max:
        print(f"RMSE {value:.4f} N exceeds threshold {args.rmse_max} N",
              file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


# ----------------------------------------------------------------------
# sweep / bench


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    from .sweep import run_sweep, write_sweep_csv
    from . import plots

    pcfg, _ = _load_configs(args.config)
    try:
        cells = run_sweep(pcfg, args.deltas, args.alphas, args.thresholds,
                          args.histories, n_runs=args.runs, seed=args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    write_sweep_csv(cells, args.out)
    if args.plot_dir:
        out = Path(args.plot_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = [{"threshold_db2": c.threshold_db2, **c.report.summary()}
                for c in cells]
        plots.plot_sweep(rows, out / "sweep.png")
    print(f"evaluated {len(cells)} grid cell(s) -> {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_bench

    result = run_bench(duration_s=args.duration, n_sv=args.n_sv, seed=args.seed)
    for line in result.lines():
        print(line)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerow(["ingest_rate_hz", format(result.ingest_rate, ".6g")])
            writer.writerow(["slip_p50_ms", format(result.slip_p50_ms, ".6g")])
            writer.writerow(["slip_p99_ms", format(result.slip_p99_ms, ".6g")])
            writer.writerow(["predict_p50_ms", format(result.predict_p50_ms, ".6g")])
            writer.writerow(["predict_p99_ms", format(result.predict_p99_ms, ".6g")])
    return EXIT_OK if result.passed else EXIT_THRESHOLD


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    seed = _default_seed()
    parser = _Parser(prog="forte",
                     description="Tactile slip detection, force estimation, "
                                 "and grasp control toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", parents=[], help="replay a recorded trace")
    p.add_argument("trace", help="trace CSV file")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--model", help="force model JSON (adds force estimates)")
    p.add_argument("--realtime", action="store_true",
                   help="pace the replay at the trace's sample cadence")
    p.add_argument("--events", help="slip event CSV output")
    p.add_argument("--timeline", help="full per-step timeline CSV output")
    p.add_argument("--force-out", help="force estimate CSV output")
    p.add_argument("--report", help="metrics CSV output (needs slip_gt)")
    p.add_argument("--plot-dir", help="directory for rendered figures")
    p.add_argument("--max-latency-ms", type=float,
                   help="exit 3 if any event is missed or slower than this")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("grasp", help="run one closed-loop grasp session")
    p.add_argument("--policy", choices=("forte", "onoff", "woslip"),
                   default="forte")
    p.add_argument("--object", required=True, help="object id, e.g. slippery_0")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--model", help="force model JSON (default: oracle force)")
    p.add_argument("--log", help="session log CSV output")
    p.add_argument("--plot-dir", help="directory for rendered figures")
    p.set_defaults(func=cmd_grasp)

    p = sub.add_parser("simulate", help="generate a scenario trace")
    p.add_argument("--scenario", required=True, choices=list("ABCDEabcde"))
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--policy", choices=("forte", "onoff", "woslip"),
                   default="forte", help="policy for closed-loop scenarios")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("make-dataset", help="generate a force training dataset")
    p.add_argument("--scenario", default="B", choices=("B", "E", "b", "e"))
    p.add_argument("--trials", type=int, default=240)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("train-force", help="train the grip-force regressor")
    p.add_argument("manifest", help="dataset manifest CSV")
    p.add_argument("--model", required=True, help="model JSON output path")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--rate", type=float, default=50.0,
                   help="feature sample rate after decimation, Hz")
    p.add_argument("--C", type=float, default=10.0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--baseline-only", action="store_true",
                   help="drop trailing-mean features (6-dim ablation)")
    p.set_defaults(func=cmd_train_force)

    p = sub.add_parser("eval-force", help="evaluate force estimation accuracy")
    p.add_argument("manifest", help="dataset manifest CSV")
    p.add_argument("--model", help="evaluate a saved model instead of CV")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--C", type=float, default=10.0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--baseline-only", action="store_true")
    p.add_argument("--report", help="metrics CSV output")
    p.add_argument("--plot-dir", help="directory for rendered figures")
    p.add_argument("--rmse-max", type=float,
                   help="exit 3 if RMSE exceeds this threshold, N")
    p.set_defaults(func=cmd_eval_force)

    p = sub.add_parser("sweep", help="detection parameter sweep")
    p.add_argument("--deltas", type=_float_list, default=[0.1],
                   help="comma-separated delta values, dB")
    p.add_argument("--alphas", type=_float_list, default=[0.6],
                   help="comma-separated alpha values, dB^2")
    p.add_argument("--thresholds", type=_float_list, default=[1.0, 2.0, 4.0],
                   help="comma-separated threshold values, dB^2")
    p.add_argument("--histories", type=_int_list, default=[15],
                   help="comma-separated history lengths")
    p.add_argument("--runs", type=int, default=10, help="traces per cell")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", required=True, help="sweep CSV output")
    p.add_argument("--plot-dir", help="directory for rendered figures")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="pipeline throughput/latency benchmark")
    p.add_argument("--duration", type=float, default=60.0,
                   help="benchmark trace length, s")
    p.add_argument("--n-sv", type=int, default=5000,
                   help="support vectors in the synthetic predict model")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", help="benchmark CSV output")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"forte: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
