from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from wsdt.autodiff import Tensor, backward
from wsdt.diffusion import (
    DEFAULT_ALPHA_BAR,
    NoiseSchedule,
    forward_sample,
    posterior_sample,
    sample_pair,
    sr_sample,
)
from wsdt.exceptions import ConfigurationError, ContractError
from wsdt.models import WSDT, ModelConfig
from wsdt.wavelet import SubBand, mdwt


class NoiseScheduleTests(SimpleTestCase):
    """Test cases for schedule validation and derived coefficients"""

    def test_default_four_steps(self):
        schedule = NoiseSchedule.default()
        self.assertEqual(schedule.alpha_bar, DEFAULT_ALPHA_BAR)
        np.testing.assert_allclose(np.sqrt(schedule.alpha_bar), [0.99, 0.8, 0.4, 0.1])
        self.assertEqual(schedule.timesteps, 4)

    def test_default_other_lengths(self):
        np.testing.assert_allclose(NoiseSchedule.default(2).alpha_bar, [0.9801, 0.01])
        self.assertEqual(NoiseSchedule.default(1).alpha_bar, (0.01,))
        self.assertEqual(NoiseSchedule.default(8).timesteps, 8)
        with self.assertRaises(ConfigurationError):
            NoiseSchedule.default(0)

    def test_invalid_schedules(self):
        for values in ((), (0.5, 0.6, 0.01), (0.9801, 0.2), (0.5, 0.01), (1.0, 0.01), (0.99, 0.5, 0.0)):
            with self.assertRaises(ConfigurationError, msg=str(values)):
                NoiseSchedule(values)

    def test_first_step_bound(self):
        NoiseSchedule((0.9801, 0.5, 0.01))
        NoiseSchedule.default(2)
        with self.assertRaisesMessage(ConfigurationError, "start at or above"):
            NoiseSchedule((0.98, 0.5, 0.01))

    def test_step_coefficients(self):
        schedule = NoiseSchedule.default()
        self.assertEqual(schedule.previous(0), 1.0)
        self.assertAlmostEqual(schedule.beta(0), 0.0199)
        self.assertAlmostEqual(schedule.alpha(2), 0.25)
        for t in range(1, 4):
            self.assertLessEqual(schedule.posterior_variance(t), schedule.beta(t))
            self.assertGreater(schedule.posterior_variance(t), 0.0)

    def test_posterior_mean_is_consistent(self):
        schedule = NoiseSchedule.default()
        for t in range(1, 4):
            coef_x0, coef_xt = schedule.posterior_coefficients(t)
            self.assertAlmostEqual(
                coef_x0 + coef_xt * np.sqrt(schedule.alpha_bar[t]), np.sqrt(schedule.previous(t))
            )

    def test_check_step(self):
        schedule = NoiseSchedule.default()
        self.assertEqual(schedule.check_step(np.int64(2)), 2)
        for t in (-1, 4, 1.0, True):
            with self.assertRaises(ContractError):
                schedule.check_step(t)


class ForwardProcessTests(SimpleTestCase):
    """Test cases for q(I_t | I_0) and the pair sampler"""

    def setUp(self):
        """Default schedule and generator"""
        self.schedule = NoiseSchedule.default()
        self.rng = np.random.default_rng(0)

    def test_fixed_noise_example(self):
        schedule = NoiseSchedule((0.99, 0.25, 0.01))
        ones = np.ones((2, 2, 1))
        np.testing.assert_allclose(forward_sample(ones, 1, schedule, self.rng, noise=np.zeros_like(ones)), 0.5)
        np.testing.assert_allclose(
            forward_sample(ones, 1, schedule, self.rng, noise=np.ones_like(ones)), 0.5 + np.sqrt(0.75), rtol=1e-6
        )

    def test_marginal_moments(self):
        samples = forward_sample(np.full(200_000, 0.6), 1, self.schedule, self.rng)
        self.assertAlmostEqual(float(samples.mean()), 0.48, delta=0.01)
        self.assertAlmostEqual(float(samples.var()), 0.36, delta=0.01)

    def test_out_of_range(self):
        with self.assertRaises(ContractError):
            forward_sample(np.zeros(3), 4, self.schedule, self.rng)

    def test_pair_at_zero_keeps_clean_image(self):
        x0 = np.full((4, 4, 1), 0.3, dtype=np.float32)
        previous, current = sample_pair(x0, 0, self.schedule, self.rng)
        np.testing.assert_array_equal(previous, x0)
        self.assertEqual(current.shape, x0.shape)

    def test_pair_marginals(self):
        previous, current = sample_pair(np.full(200_000, 0.5), 2, self.schedule, self.rng)
        self.assertAlmostEqual(float(previous.mean()), 0.4, delta=0.01)
        self.assertAlmostEqual(float(previous.var()), 0.36, delta=0.01)
        self.assertAlmostEqual(float(current.mean()), 0.2, delta=0.01)
        self.assertAlmostEqual(float(current.var()), 0.84, delta=0.015)

    def test_pair_noise_in_spectrum_domain(self):
        x0 = np.random.default_rng(5).uniform(-1, 1, (16, 128, 128, 1))
        t = 2
        previous, current = sample_pair(x0, t, self.schedule, self.rng)
        alpha_bar, alpha_bar_prev = self.schedule.alpha_bar[t], self.schedule.previous(t)
        noise = mdwt(current - np.sqrt(alpha_bar) * x0, 2)
        noise_prev = mdwt(previous - np.sqrt(alpha_bar_prev) * x0, 2)
        covariance = np.sqrt(self.schedule.alpha(t)) * (1.0 - alpha_bar_prev)
        pairs = [(noise.lowpass(), noise_prev.lowpass())]
        for level in (1, 2):
            for subband in (SubBand.V, SubBand.H, SubBand.D):
                pairs.append((noise.band(level, subband), noise_prev.band(level, subband)))
        for band, band_prev in pairs:
            self.assertAlmostEqual(float(np.var(band)), 1.0 - alpha_bar, delta=0.05 * (1.0 - alpha_bar))
            self.assertAlmostEqual(float(np.var(band_prev)), 1.0 - alpha_bar_prev, delta=0.05 * (1.0 - alpha_bar_prev))
            self.assertAlmostEqual(float(np.mean(band * band_prev)), covariance, delta=0.02)


class PosteriorTests(SimpleTestCase):
    """Test cases for q(I_{t-1} | I_t, I_0)"""

    def setUp(self):
        """Default schedule"""
        self.schedule = NoiseSchedule.default()
        self.rng = np.random.default_rng(1)

    def test_noise_free_chain(self):
        x0 = np.linspace(-1, 1, 12).reshape(2, 2, 3)
        xt = np.sqrt(self.schedule.alpha_bar[2]) * x0
        out = posterior_sample(xt, x0, 2, self.schedule, self.rng, noise=np.zeros_like(x0))
        np.testing.assert_allclose(out, np.sqrt(self.schedule.alpha_bar[1]) * x0, rtol=1e-5, atol=1e-6)

    def test_last_step_has_no_noise(self):
        x0 = np.full((3, 3, 1), 0.5)
        xt = self.rng.standard_normal((3, 3, 1))
        coef_x0, coef_xt = self.schedule.posterior_coefficients(1)
        first = posterior_sample(xt, x0, 1, self.schedule, self.rng)
        second = posterior_sample(xt, x0, 1, self.schedule, self.rng)
        np.testing.assert_array_equal(first, second)
        np.testing.assert_allclose(first, coef_x0 * x0 + coef_xt * xt, rtol=1e-5)

    def test_variance(self):
        x0 = np.zeros(200_000)
        out = posterior_sample(np.zeros(200_000), x0, 3, self.schedule, self.rng)
        self.assertAlmostEqual(float(out.var()), self.schedule.posterior_variance(3), delta=0.01)

    def test_step_zero_rejected(self):
        with self.assertRaises(ContractError):
            posterior_sample(np.zeros(2), np.zeros(2), 0, self.schedule, self.rng)

    def test_tensor_prediction_keeps_gradient(self):
        pred = Tensor(np.zeros((2, 2)), requires_grad=True)
        out = posterior_sample(np.zeros((2, 2)), pred, 2, self.schedule, self.rng)
        backward(out.sum())
        coef_x0, _ = self.schedule.posterior_coefficients(2)
        np.testing.assert_allclose(pred.grad, np.full((2, 2), coef_x0), rtol=1e-6)


class SrSampleTests(SimpleTestCase):
    """Test cases for the conditional sampling loop"""

    def setUp(self):
        """Tiny model with random weights"""
        self.config = ModelConfig.tiny()
        self.schedule = NoiseSchedule.default()
        self.model = WSDT(self.config, seed=3)
        rng = np.random.default_rng(3)
        for param in self.model.parameters():
            param.data = rng.normal(0.0, 0.2, param.shape).astype(param.dtype)
        self.lr = rng.uniform(-1, 1, self.config.lr_shape)

    def test_fresh_model_samples_zero(self):
        out = sr_sample(self.lr, WSDT(self.config), self.schedule, np.random.default_rng(0))
        np.testing.assert_array_equal(out, np.zeros(self.config.hr_shape))

    def test_same_seed_same_image(self):
        first = sr_sample(self.lr, self.model, self.schedule, np.random.default_rng(7))
        second = sr_sample(self.lr, self.model, self.schedule, np.random.default_rng(7))
        other = sr_sample(self.lr, self.model, self.schedule, np.random.default_rng(8))
        np.testing.assert_array_equal(first, second)
        self.assertFalse(np.array_equal(first, other))
        self.assertTrue(np.all(np.abs(first) <= 1.0))

    def test_one_evaluation_per_step(self):
        spy = mock.Mock(wraps=self.model)
        spy.config = self.config
        sr_sample(self.lr, spy, self.schedule, np.random.default_rng(0))
        self.assertEqual([call.args[2] for call in spy.call_args_list], [3, 2, 1, 0])

    def test_unbatched_condition(self):
        out = sr_sample(self.lr, self.model, self.schedule, np.random.default_rng(2))
        self.assertEqual(out.shape, self.config.hr_shape)
        self.assertTrue(np.all(np.isfinite(out)))
        self.assertTrue(np.any(out != 0.0))

    def test_batched_condition(self):
        lr = np.stack([self.lr, -self.lr])
        out = sr_sample(lr, self.model, self.schedule, np.random.default_rng(0))
        self.assertEqual(out.shape, (2,) + self.config.hr_shape)

    def test_geometry_mismatch(self):
        with self.assertRaises(ConfigurationError):
            sr_sample(np.zeros((2, 2, 3)), self.model, self.schedule, np.random.default_rng(0))
        with self.assertRaises(ConfigurationError):
            sr_sample(self.lr, self.model, NoiseSchedule.default(2), np.random.default_rng(0))
