"""Online monitor: statistic updates, decisions, and stream scoring."""

import math

import numpy as np
import pytest

from kerndetect.errors import ConfigError, OrderingError, ParameterError
from kerndetect.kernels import epanechnikov, gaussian
from kerndetect.monitor import MonitorConfig, StreamState, run, smoother_stat, step


def brute_stat(kernel, h, times, values):
    t_n = times[-1]
    w = kernel.eval((np.asarray(times) - t_n) / h) / h
    return float(np.dot(w, values))


class TestConfig:
    def test_default_window_tracks_effective_radius(self):
        cfg = MonitorConfig(kernel=gaussian(), h=10.0, c=0.5)
        assert cfg.window_radius == pytest.approx(gaussian().effective_radius * 10.0)

    def test_validation(self):
        with pytest.raises(ConfigError):
            MonitorConfig(kernel=gaussian(), h=0.0, c=0.5)
        with pytest.raises(ConfigError):
            MonitorConfig(kernel=gaussian(), h=1.0, c=-0.5)
        with pytest.raises(ConfigError):
            MonitorConfig(kernel=gaussian(), h=1.0, c=0.5, side="sideways")
        with pytest.raises(ConfigError):
            MonitorConfig(kernel=gaussian(), h=1.0, c=0.5, horizon=0)
        # window smaller than the kernel support discards mass silently
        with pytest.raises(ConfigError):
            MonitorConfig(kernel=epanechnikov(), h=10.0, c=0.5, window_radius=5.0)


class TestStep:
    def test_streaming_equals_brute_force_full_window(self):
        rng = np.random.default_rng(314)
        kernel = gaussian()
        cfg = MonitorConfig(kernel=kernel, h=30.0, c=math.inf, window_radius=math.inf)
        state = StreamState()
        times, values = [], []
        worst = 0.0
        for i in range(1, 2001):
            y = rng.standard_normal() + 0.01 * i
            times.append(float(i))
            values.append(y)
            state, _, stat = step(state, y, float(i), cfg)
            worst = max(worst, abs(stat - brute_stat(kernel, 30.0, times, values)))
        assert worst < 1e-12

    def test_window_trimming_matches_full_history_within_tail_mass(self):
        rng = np.random.default_rng(9)
        trimmed = MonitorConfig(kernel=gaussian(), h=5.0, c=math.inf)
        full = MonitorConfig(kernel=gaussian(), h=5.0, c=math.inf, window_radius=math.inf)
        st_t, st_f = StreamState(), StreamState()
        for i in range(1, 501):
            y = rng.standard_normal()
            st_t, _, stat_t = step(st_t, y, float(i), trimmed)
            st_f, _, stat_f = step(st_f, y, float(i), full)
        # beyond 8 bandwidths the gaussian tail is ~1e-15 of the mass
        assert abs(stat_t - stat_f) < 1e-12
        assert len(st_t.times) < len(st_f.times)

    def test_non_increasing_times_rejected(self):
        cfg = MonitorConfig(kernel=gaussian(), h=5.0, c=1.0)
        state = StreamState()
        state, _, _ = step(state, 0.1, 1.0, cfg)
        with pytest.raises(OrderingError):
            step(state, 0.2, 1.0, cfg)
        with pytest.raises(OrderingError):
            step(state, 0.2, 0.5, cfg)

    def test_signal_freezes_state(self):
        cfg = MonitorConfig(kernel=gaussian(), h=2.0, c=0.01, side="one_sided_upper")
        state = StreamState()
        for i in range(1, 50):
            state, decision, _ = step(state, 5.0, float(i), cfg)
            if decision == 1:
                break
        assert state.signaled
        n_before = state.n
        frozen, decision, _ = step(state, -100.0, 1000.0, cfg)
        assert decision == 1
        assert frozen.n == n_before

    def test_two_sided_vs_upper(self):
        up = MonitorConfig(kernel=gaussian(), h=2.0, c=0.05, side="one_sided_upper")
        two = MonitorConfig(kernel=gaussian(), h=2.0, c=0.05)
        s1, s2 = StreamState(), StreamState()
        fired_two = False
        for i in range(1, 40):
            s1, d1, _ = step(s1, -5.0, float(i), up)
            assert d1 == 0  # negative drift never trips the upper rule
            if not fired_two:
                s2, d2, _ = step(s2, -5.0, float(i), two)
                fired_two = d2 == 1
        assert fired_two


class TestSmootherStat:
    def test_matches_direct_formula(self):
        cfg = MonitorConfig(kernel=epanechnikov(), h=4.0, c=1.0)
        state = StreamState()
        for i, y in enumerate([0.3, -0.2, 0.9, 1.4], start=1):
            state, _, _ = step(state, y, float(i), cfg)
        assert smoother_stat(state, cfg) == pytest.approx(
            brute_stat(epanechnikov(), 4.0, state.times, state.values), abs=1e-15
        )

    def test_empty_state_rejected(self):
        with pytest.raises(ParameterError):
            smoother_stat(StreamState(), MonitorConfig(kernel=gaussian(), h=1.0, c=1.0))


class TestRun:
    def test_scalar_observations_use_unit_times(self):
        cfg = MonitorConfig(kernel=gaussian(), h=5.0, c=0.1, side="one_sided_upper")
        rec = run([1.0] * 40, cfg, t_q=10.0)
        assert rec.signaled
        assert rec.normed_delay == pytest.approx(max(rec.n_h - 10.0, 0.0) / 5.0)

    def test_pair_observations_score_on_their_clock(self):
        cfg = MonitorConfig(kernel=gaussian(), h=5.0, c=0.1, side="one_sided_upper")
        obs = [(0.5 * i, 1.0) for i in range(1, 80)]
        rec = run(obs, cfg, t_q=4.0)
        assert rec.signaled
        t_signal = 0.5 * rec.n_h
        assert rec.normed_delay == pytest.approx(max(t_signal - 4.0, 0.0) / 5.0)

    def test_censoring_at_horizon(self):
        cfg = MonitorConfig(kernel=gaussian(), h=5.0, c=100.0, horizon=25)
        rec = run([0.0] * 100, cfg, t_q=1.0)
        assert rec.censored
        assert rec.n_h is None
        assert rec.steps == 25
        assert rec.to_dict()["normed_delay"] is None

    def test_capture_path_length(self):
        cfg = MonitorConfig(kernel=gaussian(), h=5.0, c=100.0, horizon=10)
        rec = run([0.1] * 10, cfg, t_q=1.0, capture_path=True)
        assert len(rec.stat_path) == 10

    def test_empty_stream_rejected(self):
        cfg = MonitorConfig(kernel=gaussian(), h=5.0, c=1.0)
        with pytest.raises(ParameterError):
            run([], cfg, t_q=1.0)
