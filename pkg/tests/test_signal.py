import numpy as np
import pytest

from forte.config import PipelineConfig
from forte.signal import (ChannelRing, MedianFilter, SensorFrame, SignalPipeline,
                          batch_filter_trace, median_filter_batch, normalize_raw)


class TestNormalizeRaw:
    def test_center_anchor(self):
        assert normalize_raw(1024, bits=11, baseline=1024) == 0.0

    def test_full_scale_negative(self):
        assert normalize_raw(0, bits=11, baseline=1024) == -1.0

    def test_top_count(self):
        # oracle: (2047 - 1024) / 2^10
        assert normalize_raw(2047, bits=11, baseline=1024) == pytest.approx(
            (2047 - 1024) / 1024, abs=0)

    def test_monotone_in_raw(self):
        vals = [normalize_raw(r, 11, 1024) for r in range(0, 2048, 37)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_clamped(self):
        assert normalize_raw(2047, bits=11, baseline=0) == 1.0

    def test_rejects_bad_bits(self):
        with pytest.raises(ValueError):
            normalize_raw(0, bits=0, baseline=0)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            normalize_raw(2048, bits=11, baseline=1024)


class TestMedianFilter:
    def test_constant_stream(self):
        f = MedianFilter(11)
        assert all(f.push(0.7) == 0.7 for _ in range(30))

    def test_impulse_rejection(self):
        f = MedianFilter(11)
        out = [f.push(1.0 if i == 15 else 0.0) for i in range(40)]
        assert all(v == 0.0 for v in out)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(100)
        f = MedianFilter(11)
        got = np.array([f.push(v) for v in x])
        # oracle: sort every 11-sample window of the edge-padded sequence
        padded = np.concatenate([np.full(10, x[0]), x])
        want = np.array([np.sort(padded[i:i + 11])[5] for i in range(100)])
        np.testing.assert_array_equal(got, want)

    def test_batch_equals_streaming(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((300, 6))
        filters = [MedianFilter(11) for _ in range(6)]
        stream = np.array([[f.push(v) for f, v in zip(filters, row)] for row in x])
        np.testing.assert_array_equal(median_filter_batch(x, 11), stream)

    def test_pure_delay_on_monotone(self):
        # on monotone input the causal median is a pure (M-1)/2-sample
        # delay, so re-filtering only delays again and never reshapes
        x = np.linspace(0.0, 1.0, 50)
        once = median_filter_batch(x, 11)
        np.testing.assert_allclose(once[10:], x[5:45], atol=1e-12)
        twice = median_filter_batch(once, 11)
        np.testing.assert_allclose(twice[10:], once[5:45], atol=1e-12)

    def test_rejects_even_window(self):
        with pytest.raises(ValueError):
            MedianFilter(10)


class TestChannelRing:
    def setup_method(self):
        self.cfg = PipelineConfig(f_s=100.0)  # small ring for fast tests

    def test_capacity_covers_fft_and_mean_windows(self):
        cfg = PipelineConfig()
        ring = ChannelRing(cfg)
        assert ring.capacity >= max(cfg.fft_window, int(10.0 * cfg.f_s))

    def test_last_k_chronological(self):
        ring = ChannelRing(self.cfg)
        for i in range(2000):
            ring.push(np.full(6, float(i)))
        got = ring.last(5)[:, 0]
        np.testing.assert_array_equal(got, [1995, 1996, 1997, 1998, 1999])

    def test_last_rejects_too_many(self):
        ring = ChannelRing(self.cfg)
        ring.push(np.zeros(6))
        with pytest.raises(ValueError):
            ring.last(2)

    def test_window_mean_constant(self):
        ring = ChannelRing(self.cfg)
        for _ in range(600):
            ring.push(np.full(6, 0.3))
        np.testing.assert_allclose(ring.window_mean(2.5), np.full(6, 0.3))

    def test_window_mean_ramp(self):
        # linear ramp 0 -> 1 over exactly tau seconds averages to ~0.5
        ring = ChannelRing(self.cfg)
        n = int(2.5 * self.cfg.f_s)
        for v in np.linspace(0.0, 1.0, n):
            ring.push(np.full(6, v))
        np.testing.assert_allclose(ring.window_mean(2.5), np.full(6, 0.5),
                                   atol=1.0 / n)

    def test_window_mean_warmup_shrinks(self):
        ring = ChannelRing(self.cfg)
        ring.push(np.full(6, 0.8))
        np.testing.assert_allclose(ring.window_mean(10.0), np.full(6, 0.8))

    def test_window_mean_rejects_nonpositive_tau(self):
        ring = ChannelRing(self.cfg)
        ring.push(np.zeros(6))
        with pytest.raises(ValueError):
            ring.window_mean(0.0)

    def test_running_sum_drift_bound(self):
        # streaming mean equals batch recomputation within 1e-9 after 1e6 pushes
        cfg = PipelineConfig(f_s=2000.0)
        ring = ChannelRing(cfg)
        rng = np.random.default_rng(11)
        block = rng.uniform(-1.0, 1.0, (10_000, 6))
        for _ in range(100):
            for row in block:
                ring.push(row)
        assert ring.count == 1_000_000
        for tau in (2.5, 5.0, 10.0):
            k = int(tau * cfg.f_s)
            batch = ring.last(k).mean(axis=0)
            np.testing.assert_allclose(ring.window_mean(tau), batch, atol=1e-9)


class TestSensorFrame:
    def test_requires_six_channels(self):
        with pytest.raises(ValueError):
            SensorFrame(0.0, (0.0, 0.0))

    def test_holds_values(self):
        f = SensorFrame(0.0005, (0.0, 0.1, 0.2, 0.3, 0.4, 0.5))
        assert len(f.channels) == 6


class TestSignalPipeline:
    def test_fixed_baseline_matches_batch(self):
        cfg = PipelineConfig()
        rng = np.random.default_rng(5)
        x = rng.uniform(-0.1, 0.1, (500, 6))
        baseline = x[:100].mean(axis=0)
        pipe = SignalPipeline(cfg, baseline=baseline)
        stream = np.array([pipe.push(row) for row in x])
        batch = batch_filter_trace(x, cfg, baseline=baseline)
        np.testing.assert_array_equal(stream, batch)

    def test_running_baseline_converges(self):
        cfg = PipelineConfig(baseline_seconds=0.1)
        pipe = SignalPipeline(cfg)
        offset = np.arange(6) * 0.01
        for _ in range(300):
            pipe.push(offset)
        np.testing.assert_allclose(pipe.baseline, offset, atol=1e-12)
        np.testing.assert_allclose(pipe.ring.last(1)[0], np.zeros(6), atol=1e-12)
