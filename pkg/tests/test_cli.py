import filecmp
import os

import numpy as np
import pytest

from forte.cli import main
from forte.sim import quiescent_trace, run_scenario_a
from forte.trace import Trace, TraceFormatError, read_trace, write_trace


@pytest.fixture()
def slip_trace_path(tmp_path):
    res = run_scenario_a(0)
    path = tmp_path / "trace.csv"
    write_trace(path, res.trace)
    return path


class TestTraceIO:
    def test_round_trip(self, tmp_path):
        res = run_scenario_a(1)
        path = tmp_path / "t.csv"
        write_trace(path, res.trace)
        back = read_trace(path)
        np.testing.assert_array_equal(back.t, res.trace.t)
        np.testing.assert_array_equal(back.channels, res.trace.channels)
        np.testing.assert_array_equal(back.slip_gt, res.trace.slip_gt)

    def test_force_column_round_trip(self, tmp_path):
        tr = quiescent_trace(0.5, 0)
        tr.force_n = np.linspace(0, 2, len(tr))
        path = tmp_path / "t.csv"
        write_trace(path, tr)
        back = read_trace(path)
        # CSV carries 9 significant digits
        np.testing.assert_allclose(back.force_n, tr.force_n, rtol=1e-8)

    def test_corrupted_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        good = quiescent_trace(0.01, 0)
        write_trace(path, good)
        lines = path.read_text().splitlines()
        lines[5] = lines[5].replace(",", ",oops", 1)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(TraceFormatError) as exc:
            read_trace(path)
        assert "6" in str(exc.value)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(TraceFormatError):
            read_trace(path)


class TestExitCodes:
    def test_missing_trace_is_data_error(self, capsys):
        assert main(["replay", "/nonexistent/trace.csv"]) == 2
        assert "not found" in capsys.readouterr().err

    def test_corrupt_trace_is_data_error(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        assert main(["replay", str(path)]) == 2

    def test_unknown_subcommand_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_missing_required_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["grasp", "--policy", "forte"])
        assert exc.value.code == 1

    def test_latency_threshold_failure(self, slip_trace_path, capsys):
        assert main(["replay", str(slip_trace_path),
                     "--max-latency-ms", "0.001"]) == 3

    def test_replay_ok(self, slip_trace_path, capsys):
        assert main(["replay", str(slip_trace_path)]) == 0


class TestReplayOutputs:
    def test_events_and_timeline_csv(self, slip_trace_path, tmp_path, capsys):
        events = tmp_path / "events.csv"
        timeline = tmp_path / "timeline.csv"
        report = tmp_path / "report.csv"
        assert main(["replay", str(slip_trace_path),
                     "--events", str(events),
                     "--timeline", str(timeline),
                     "--report", str(report)]) == 0
        ev_lines = events.read_text().splitlines()
        assert ev_lines[0] == "t_detect,finger,sigma_bar_db2,eta"
        assert len(ev_lines) >= 2  # scenario A guarantees detections
        tl_lines = timeline.read_text().splitlines()
        assert tl_lines[0].startswith("t,p_max_ch0")
        assert report.read_text().startswith("metric,value")

    def test_realtime_matches_batch(self, tmp_path, capsys):
        res = run_scenario_a(2)
        path = tmp_path / "t.csv"
        write_trace(path, res.trace)
        a = tmp_path / "batch.csv"
        b = tmp_path / "rt.csv"
        assert main(["replay", str(path), "--timeline", str(a)]) == 0
        assert main(["replay", str(path), "--realtime", "--timeline", str(b)]) == 0
        assert filecmp.cmp(a, b, shallow=False)

    def test_plot_rendered(self, slip_trace_path, tmp_path, capsys):
        plots = tmp_path / "plots"
        assert main(["replay", str(slip_trace_path),
                     "--plot-dir", str(plots)]) == 0
        assert any(p.suffix == ".png" for p in plots.iterdir())

    def test_rerun_byte_identical(self, slip_trace_path, tmp_path, capsys):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        main(["replay", str(slip_trace_path), "--timeline", str(a)])
        main(["replay", str(slip_trace_path), "--timeline", str(b)])
        assert filecmp.cmp(a, b, shallow=False)


class TestSimulateCommand:
    def test_outputs_and_determinism(self, tmp_path, capsys):
        d1 = tmp_path / "r1"
        d2 = tmp_path / "r2"
        for d in (d1, d2):
            assert main(["simulate", "--scenario", "A", "--seed", "3",
                         "--out-dir", str(d)]) == 0
        name = "scenario_A_seed3.csv"
        assert filecmp.cmp(d1 / name, d2 / name, shallow=False)
        assert (d1 / "scenario_A_seed3_gt.csv").is_file()

    def test_quiescent_scenario(self, tmp_path, capsys):
        assert main(["simulate", "--scenario", "C", "--seed", "0",
                     "--out-dir", str(tmp_path)]) == 0
        tr = read_trace(tmp_path / "scenario_C_seed0.csv")
        assert not tr.slip_gt.any()


class TestGraspCommand:
    def test_log_and_plot(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        plots = tmp_path / "plots"
        assert main(["grasp", "--policy", "forte", "--object", "slippery_0",
                     "--seed", "1", "--log", str(log),
                     "--plot-dir", str(plots)]) == 0
        assert log.read_text().startswith("t,phase,theta_deg")
        assert any(p.suffix == ".png" for p in plots.iterdir())
        assert "SUCCESS" in capsys.readouterr().out

    def test_unknown_object(self, capsys):
        assert main(["grasp", "--policy", "forte",
                     "--object", "nosuchthing"]) == 2


class TestForceCommands:
    def test_train_eval_round_trip(self, tmp_path, capsys):
        ds = tmp_path / "ds"
        model = tmp_path / "model.json"
        report = tmp_path / "eval.csv"
        assert main(["make-dataset", "--scenario", "B", "--trials", "6",
                     "--seed", "0", "--out-dir", str(ds)]) == 0
        manifest = ds / "manifest.csv"
        assert main(["train-force", str(manifest), "--model", str(model),
                     "--rate", "5"]) == 0
        assert model.is_file()
        assert main(["eval-force", str(manifest), "--model", str(model),
                     "--rate", "5", "--report", str(report)]) == 0
        assert report.read_text().startswith("metric,value")

    def test_rmse_threshold_failure(self, tmp_path, capsys):
        ds = tmp_path / "ds"
        main(["make-dataset", "--scenario", "B", "--trials", "4",
              "--seed", "1", "--out-dir", str(ds)])
        assert main(["eval-force", str(ds / "manifest.csv"), "--folds", "2",
                     "--rate", "5", "--rmse-max", "1e-9"]) == 3

    def test_missing_manifest(self, capsys):
        assert main(["train-force", "/nonexistent/manifest.csv",
                     "--model", "/tmp/x.json"]) == 2


class TestConfigHandling:
    def test_config_overrides_applied(self, slip_trace_path, tmp_path, capsys):
        # an absurdly high threshold suppresses every detection
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("threshold_db2 = 1e9\n")
        events = tmp_path / "events.csv"
        assert main(["replay", str(slip_trace_path), "--config", str(cfg),
                     "--events", str(events)]) == 0
        assert len(events.read_text().splitlines()) == 1  # header only

    def test_unknown_config_key(self, slip_trace_path, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("no_such_knob = 1\n")
        assert main(["replay", str(slip_trace_path),
                     "--config", str(cfg)]) == 2

    def test_forte_seed_env_default(self, monkeypatch):
        from forte.cli import build_parser
        monkeypatch.setenv("FORTE_SEED", "77")
        args = build_parser().parse_args(["simulate", "--scenario", "A"])
        assert args.seed == 77
        monkeypatch.setenv("FORTE_SEED", "junk")
        args = build_parser().parse_args(["simulate", "--scenario", "A"])
        assert args.seed == 0


class TestBenchCommand:
    def test_quick_bench_passes(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--duration", "2", "--n-sv", "100",
                     "--out", str(out)]) == 0
        assert out.read_text().startswith("metric,value")
