import numpy as np
import pytest

from forte.metrics import (ConfusionStats, EvalReport, confusion_from_labels,
                           extract_events, match_events)


def confusion_oracle(gt, pred):
    """Independent elementwise confusion counting."""
    tp = fp = tn = fn = 0
    for g, p in zip(gt, pred):
        if g and p:
            tp += 1
        elif not g and p:
            fp += 1
        elif g and not p:
            fn += 1
        else:
            tn += 1
    prec = tp / (tp + fp) if tp + fp else 1.0
    rec = tp / (tp + fn) if tp + fn else 1.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    acc = (tp + tn) / len(gt) if len(gt) else 1.0
    return tp, fp, tn, fn, acc, prec, rec, f1


class TestConfusion:
    def test_matches_oracle_on_random_label_sets(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = rng.integers(1, 40)
            gt = rng.integers(0, 2, n).astype(bool)
            pred = rng.integers(0, 2, n).astype(bool)
            c = confusion_from_labels(gt, pred)
            tp, fp, tn, fn, acc, prec, rec, f1 = confusion_oracle(gt, pred)
            assert (c.tp, c.fp, c.tn, c.fn) == (tp, fp, tn, fn)
            assert c.accuracy == pytest.approx(acc)
            assert c.precision == pytest.approx(prec)
            assert c.recall == pytest.approx(rec)
            assert c.f1 == pytest.approx(f1)

    def test_abstention_precision(self):
        c = confusion_from_labels(np.zeros(10, bool), np.zeros(10, bool))
        assert c.precision == 1.0
        assert c.accuracy == 1.0

    def test_f1_zero_when_recall_zero_with_positives(self):
        c = confusion_from_labels(np.ones(5, bool), np.zeros(5, bool))
        assert c.recall == 0.0
        assert c.f1 == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            confusion_from_labels(np.zeros(3, bool), np.zeros(4, bool))


class TestExtractEvents:
    def test_simple_event(self):
        t = np.arange(10) * 0.1
        flag = np.array([0, 0, 1, 1, 1, 0, 0, 0, 0, 0])
        ev = extract_events(t, flag)
        assert len(ev) == 1
        assert ev[0].onset == pytest.approx(0.2)
        assert ev[0].end == pytest.approx(0.4)

    def test_merge_close_events(self):
        t = np.arange(20) * 0.05
        flag = np.zeros(20, int)
        flag[2:4] = 1
        flag[6:8] = 1   # gap 0.1 s < 0.2 s -> merged
        flag[15:17] = 1  # gap 0.35 s -> separate
        ev = extract_events(t, flag)
        assert len(ev) == 2
        assert ev[0].end == pytest.approx(0.35)

    def test_no_events(self):
        assert extract_events(np.arange(5.0), np.zeros(5)) == []

    def test_event_at_edges(self):
        t = np.arange(4) * 0.1
        ev = extract_events(t, np.array([1, 0, 0, 1]))
        assert len(ev) == 2


class TestMatchEvents:
    def test_latency_and_false_firings(self):
        t = np.arange(100) * 0.01
        flag = np.zeros(100, int)
        flag[30:50] = 1
        ev = extract_events(t, flag)
        matches, false_firings = match_events(ev, np.array([0.34, 0.4, 0.9]))
        assert matches[0].detected
        assert matches[0].latency_ms == pytest.approx(40.0)
        assert false_firings == 1  # the 0.9 s firing matched nothing

    def test_tail_window(self):
        t = np.arange(100) * 0.01
        flag = np.zeros(100, int)
        flag[30:40] = 1  # event [0.30, 0.39]
        ev = extract_events(t, flag)
        matches, ff = match_events(ev, np.array([0.48]), tail=0.1)
        assert matches[0].detected and ff == 0
        matches, ff = match_events(ev, np.array([0.52]), tail=0.1)
        assert not matches[0].detected and ff == 1

    def test_missed_event(self):
        t = np.arange(100) * 0.01
        flag = np.zeros(100, int)
        flag[10:20] = 1
        ev = extract_events(t, flag)
        matches, ff = match_events(ev, np.array([]))
        assert not matches[0].detected and matches[0].latency_ms is None


class TestEvalReport:
    def test_trial_level_accounting(self):
        rep = EvalReport()
        rep.add_trial(True, True)
        rep.add_trial(False, False)
        rep.add_trial(True, False)
        c = rep.confusion
        assert (c.tp, c.tn, c.fn) == (1, 1, 1)
        assert rep.confusion.precision == 1.0

    def test_event_rates(self):
        rep = EvalReport()
        rep.latencies_ms += [30.0, 50.0]
        rep.missed_events = 1
        rep.false_firings = 1
        assert rep.event_recall == pytest.approx(2 / 3)
        assert rep.event_precision == pytest.approx(2 / 3)

    def test_abstention_event_rates(self):
        rep = EvalReport()
        assert rep.event_recall == 1.0
        assert rep.event_precision == 1.0
        assert rep.max_latency_ms() is None

    def test_csv_round_trip(self, tmp_path):
        rep = EvalReport()
        rep.add_trial(True, True)
        rep.latencies_ms.append(42.0)
        rep.add_outcome("SUCCESS")
        path = tmp_path / "report.csv"
        rep.write_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "metric,value"
        assert any(r.startswith("latency_mean_ms,42") for r in rows)
        assert "outcome_SUCCESS,1" in rows
