"""Noise schedule, forward sampling, DDIM recovery, sampling sequences."""

import numpy as np
import pytest
from scipy import stats

from diffspan import schedule as sc

LAMBDA = 2.0


def closed_form_alpha_bar(t, t_total, offset=0.008):
    """Independent evaluation of the cosine form f(t)/f(0)."""
    def f(x):
        return np.cos(((x / t_total + offset) / (1 + offset)) * np.pi / 2) ** 2
    return f(t) / f(0)


class TestBuildSchedule:
    def test_alpha_bar_zero_is_one(self):
        assert sc.build_cosine_schedule(100).alpha_bar[0] == 1.0

    def test_midpoint_matches_closed_form(self):
        sched = sc.build_cosine_schedule(1000)
        assert sched.alpha_bar[500] == pytest.approx(0.4937, abs=1e-3)
        assert sched.alpha_bar[500] == pytest.approx(closed_form_alpha_bar(500, 1000), abs=1e-6)

    @pytest.mark.parametrize("t_total", [1, 10, 100, 1000])
    def test_invariants(self, t_total):
        sched = sc.build_cosine_schedule(t_total)
        ab = sched.alpha_bar
        assert ab.shape == (t_total + 1,)
        assert ab[0] == 1.0
        assert (np.diff(ab) < 0).all()
        assert ((ab > 0) & (ab <= 1)).all()

    def test_zero_steps_rejected(self):
        with pytest.raises(ValueError):
            sc.build_cosine_schedule(0)


class TestScaling:
    def test_midpoint_maps_to_origin(self):
        assert np.allclose(sc.scale_to_diffusion((0.5, 0.5), LAMBDA), (0.0, 0.0))

    def test_boundary_maps_to_lambda(self):
        assert np.allclose(sc.scale_to_diffusion((1.0, 1.0), LAMBDA), (2.0, 2.0))

    def test_round_trip_on_interior(self):
        rng = np.random.default_rng(3)
        w_min = 1 / 64
        widths = rng.uniform(w_min, 1.0, size=10_000)
        centers = rng.uniform(widths / 2, 1.0 - widths / 2)
        cw = np.stack([centers, widths], axis=-1)
        back = sc.unscale_from_diffusion(sc.scale_to_diffusion(cw, LAMBDA), LAMBDA, w_min)
        assert np.allclose(back, cw, atol=1e-12)

    def test_nonpositive_lambda_rejected(self):
        with pytest.raises(ValueError):
            sc.scale_to_diffusion((0.5, 0.5), 0.0)
        with pytest.raises(ValueError):
            sc.unscale_from_diffusion((0.0, 0.0), -1.0)

    def test_unscale_output_always_valid(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(-LAMBDA, LAMBDA, size=(10_000, 2))
        w_min = 1 / 32
        cw = sc.unscale_from_diffusion(x, LAMBDA, w_min)
        start, end = cw[:, 0] - cw[:, 1] / 2, cw[:, 0] + cw[:, 1] / 2
        assert ((start >= -1e-12) & (end <= 1 + 1e-12)).all()
        assert (cw[:, 1] >= w_min - 1e-12).all()


class TestQSample:
    def test_zero_noise(self):
        sched = sc.build_cosine_schedule(100, LAMBDA)
        x0 = np.array([0.4, -0.2])
        out = sc.q_sample(x0, 30, np.zeros(2), sched)
        assert np.allclose(out, np.sqrt(sched.alpha_bar[30]) * x0)

    def test_t_zero_returns_x0(self):
        sched = sc.build_cosine_schedule(100, LAMBDA)
        x0 = np.array([0.4, -0.2])
        assert np.allclose(sc.q_sample(x0, 0, np.ones(2), sched), x0)

    def test_out_of_range_t(self):
        sched = sc.build_cosine_schedule(100, LAMBDA)
        with pytest.raises(ValueError):
            sc.q_sample(np.zeros(2), 101, np.zeros(2), sched)
        with pytest.raises(ValueError):
            sc.q_sample(np.zeros(2), -1, np.zeros(2), sched)

    def test_monte_carlo_moments(self):
        # large lambda so the clamp never fires
        sched = sc.build_cosine_schedule(1000, lambda_scale=100.0)
        rng = np.random.default_rng(17)
        x0 = np.array([0.3, -0.7])
        t = 400
        n = 100_000
        eps = rng.standard_normal((n, 2))
        x_t = sc.q_sample(x0, t, eps, sched)
        ab = sched.alpha_bar[t]
        se_mean = np.sqrt((1 - ab) / n)
        assert (np.abs(x_t.mean(axis=0) - np.sqrt(ab) * x0) < 3 * se_mean).all()
        se_var = (1 - ab) * np.sqrt(2.0 / (n - 1))
        assert (np.abs(x_t.var(axis=0, ddof=1) - (1 - ab)) < 3 * se_var).all()

    def test_linearity_away_from_clamp(self):
        sched = sc.build_cosine_schedule(100, lambda_scale=1000.0)
        rng = np.random.default_rng(5)
        a, b = rng.standard_normal(2), rng.standard_normal(2)
        e1, e2 = rng.standard_normal(2), rng.standard_normal(2)
        t = 42
        left = sc.q_sample(a + b, t, e1 + e2, sched)
        right = sc.q_sample(a, t, e1, sched) + sc.q_sample(b, t, e2, sched)
        assert np.allclose(left, right, atol=1e-12)
        assert np.allclose(sc.q_sample(3.0 * a, t, 3.0 * e1, sched),
                           3.0 * sc.q_sample(a, t, e1, sched), atol=1e-12)

    def test_clamped_to_lambda(self):
        sched = sc.build_cosine_schedule(100, lambda_scale=1.0)
        out = sc.q_sample(np.array([0.9, 0.9]), 99, np.array([50.0, -50.0]), sched)
        assert np.allclose(np.abs(out), 1.0)


class TestDDIM:
    def setup_method(self):
        self.sched = sc.build_cosine_schedule(1000, LAMBDA)

    def test_zero_implied_noise(self):
        x0_hat = np.array([0.5, -0.3])
        t, t_prev = 600, 200
        x_t = np.sqrt(self.sched.alpha_bar[t]) * x0_hat
        out = sc.ddim_step(x_t, x0_hat, t, t_prev, self.sched)
        assert np.allclose(out, np.sqrt(self.sched.alpha_bar[t_prev]) * x0_hat)

    def test_terminal_step_returns_x0_hat(self):
        rng = np.random.default_rng(0)
        x_t, x0_hat = rng.standard_normal(2), rng.uniform(-1, 1, 2)
        assert np.allclose(sc.ddim_step(x_t, x0_hat, 5, 0, self.sched), x0_hat)

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            sc.ddim_step(np.zeros(2), np.zeros(2), 5, 5, self.sched)
        with pytest.raises(ValueError):
            sc.ddim_step(np.zeros(2), np.zeros(2), 5, 9, self.sched)

    def test_oracle_recovery_full_chain(self):
        rng = np.random.default_rng(1)
        x0 = rng.uniform(-1.5, 1.5, size=(100, 2))
        x = rng.standard_normal((100, 2))
        steps = list(range(1000, 0, -1))
        for i, t_now in enumerate(steps):
            t_prev = steps[i + 1] if i + 1 < len(steps) else 0
            x = sc.ddim_step(x, x0, t_now, t_prev, self.sched)
        assert np.abs(x - x0).max() < 1e-6

    def test_oracle_recovery_any_sequence(self):
        rng = np.random.default_rng(2)
        for n_steps in (1, 3, 5, 50):
            x0 = rng.uniform(-1.8, 1.8, size=(20, 2))
            x = 3.0 * rng.standard_normal((20, 2))
            steps = sc.make_sampling_sequence(n_steps, 1000)
            for i, t_now in enumerate(steps):
                t_prev = steps[i + 1] if i + 1 < len(steps) else 0
                x = sc.ddim_step(x, x0, t_now, t_prev, self.sched)
            assert np.abs(x - x0).max() < 1e-6


class TestSamplingSequence:
    def test_single_step(self):
        assert sc.make_sampling_sequence(1, 1000) == [1000]

    def test_five_of_thousand(self):
        assert sc.make_sampling_sequence(5, 1000) == [1000, 800, 600, 400, 200]

    def test_full_length(self):
        assert sc.make_sampling_sequence(10, 10) == list(range(10, 0, -1))

    def test_invariants(self):
        for n, t_total in [(3, 7), (6, 11), (50, 1000), (7, 7)]:
            steps = sc.make_sampling_sequence(n, t_total)
            assert steps[0] == t_total
            assert all(a > b for a, b in zip(steps, steps[1:]))
            assert all(1 <= s <= t_total for s in steps)

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            sc.make_sampling_sequence(0, 10)
        with pytest.raises(ValueError):
            sc.make_sampling_sequence(11, 10)


class TestSampleTimesteps:
    def test_range(self):
        rng = np.random.default_rng(0)
        t = sc.sample_timesteps(10_000, 37, rng)
        assert ((t >= 1) & (t <= 37)).all()

    def test_degenerate_t(self):
        rng = np.random.default_rng(0)
        assert (sc.sample_timesteps(100, 1, rng) == 1).all()

    def test_chi_square_uniformity(self):
        rng = np.random.default_rng(123)
        draws = sc.sample_timesteps(100_000, 10, rng)
        counts = np.bincount(draws, minlength=11)[1:]
        result = stats.chisquare(counts)
        assert result.pvalue > 0.001
