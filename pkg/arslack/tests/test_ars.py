from unittest import TestCase

import numpy as np

from arslack.ar import fit_ar
from arslack.ars import (
    ArsModel,
    ExtArsModel,
    SlackInit,
    _optimize,
    _Problem,
    ars_gradient,
    ars_objective,
    delay_slack,
    fit_ars,
    fit_ars_interactions,
    forecast_ars,
    forecast_ars_interactions,
    init_slack,
    joint_loss,
    rescale_slack,
)
from arslack.dynamics import (
    MissingSpec,
    NoiseConfig,
    add_noise,
    gen_circular,
    gen_lorenz,
    lorenz_map_matrix,
    split_missing,
    split_observed,
)
from arslack.errors import InvalidArgument
from arslack.optimizer import OptimSettings, check_gradient
from arslack.regression import build_design, ols_fit
from arslack.series import ObservedSeries


def circular(n: int = 100, sigma: float = 0.0, seed: int = 0):
    trajectory = add_noise(gen_circular(n), NoiseConfig(sigma=sigma, seed=seed))
    return split_observed(trajectory, MissingSpec(1, 1)), split_missing(gen_circular(n), MissingSpec(1, 1))


class TestInitSlack(TestCase):

    def test_zeros(self):
        np.testing.assert_array_equal(np.zeros((5, 2)), init_slack(5, 2, SlackInit(mode="zeros")))

    def test_standard_normal_is_seeded(self):
        a = init_slack(10, 1, SlackInit(seed=3))
        b = init_slack(10, 1, SlackInit(seed=3))

        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, init_slack(10, 1, SlackInit(seed=4))))

    def test_truth_without_perturbation(self):
        truth = np.arange(6.0)
        slack = init_slack(6, 1, SlackInit(mode="truth_perturbed", truth=truth, scale=0.0))

        np.testing.assert_array_equal(truth.reshape(-1, 1), slack)

    def test_truth_required(self):
        with self.assertRaises(InvalidArgument):
            init_slack(6, 1, SlackInit(mode="truth_perturbed"))

    def test_truth_shape(self):
        with self.assertRaises(InvalidArgument):
            init_slack(6, 1, SlackInit(mode="truth_perturbed", truth=np.zeros((5, 1))))

    def test_unknown_mode(self):
        with self.assertRaises(NotImplementedError):
            init_slack(6, 1, SlackInit(mode="uniform"))

    def test_invalid_sizes(self):
        with self.assertRaises(InvalidArgument):
            init_slack(1, 1)


class TestObjective(TestCase):

    def setUp(self):
        self.observed, self.truth = circular(20, sigma=0.01)

    def test_zero_at_true_slack(self):
        observed, truth = circular(50)
        self.assertLess(ars_objective(observed, truth.ravel(), 1), 1e-20)

    def test_gradient_matches_finite_differences(self):
        def objective(u):
            return ars_objective(self.observed, u, 1)

        def gradient(u):
            return ars_gradient(self.observed, u, 1)

        for seed in range(20):
            with self.subTest(seed=seed):
                slack = np.random.default_rng(seed).standard_normal(20)
                self.assertLess(check_gradient(objective, gradient, slack), 1e-5)

    def test_gradient_with_ridge(self):
        slack = np.random.default_rng(2).standard_normal(40).reshape(20, 2)

        def objective(u):
            return ars_objective(self.observed, u, 2, ridge=0.1)

        def gradient(u):
            return ars_gradient(self.observed, u, 2, ridge=0.1)

        self.assertLess(check_gradient(objective, gradient, slack), 1e-5)

    def test_gradient_with_interactions(self):
        observed = ObservedSeries(np.random.default_rng(3).standard_normal((15, 2)), step=1.0)
        slack = np.random.default_rng(4).standard_normal(15)

        def objective(u):
            return ars_objective(observed, u, 1, interactions=True)

        def gradient(u):
            return ars_gradient(observed, u, 1, interactions=True)

        self.assertLess(check_gradient(objective, gradient, slack), 1e-5)

    def test_zero_gradient_at_true_slack(self):
        observed, truth = circular(50)
        self.assertLess(np.linalg.norm(ars_gradient(observed, truth.ravel(), 1)), 1e-8)

    def test_slack_size_mismatch(self):
        with self.assertRaises(InvalidArgument):
            ars_objective(self.observed, np.zeros(7), 1)

    def test_joint_loss_at_least_profiled(self):
        slack = np.random.default_rng(5).standard_normal((20, 1))
        states = np.hstack([self.observed.states, slack])
        B = np.array([[0.9, -0.1], [0.2, 0.8]])

        self.assertGreaterEqual(joint_loss(states, B), ars_objective(self.observed, slack.ravel(), 1))


class TestFitArs(TestCase):

    def test_recovers_rotation(self):
        observed, truth = circular(100)
        init = SlackInit(mode="truth_perturbed", truth=truth, seed=1, scale=0.05)
        model = fit_ars(observed, 1, init, OptimSettings(max_iters=2000, target_loss=1e-20))
        eigenvalues = np.linalg.eigvals(model.B)

        self.assertIsInstance(model, ArsModel)
        self.assertLess(model.final_loss, 1e-12)
        np.testing.assert_allclose([1.0, 1.0], np.abs(eigenvalues), atol=1e-4)
        np.testing.assert_allclose([1 / 20, 1 / 20], np.sort(np.abs(np.angle(eigenvalues))), atol=1e-4)

        future = gen_circular(25, start_index=100).states[:, 0]
        np.testing.assert_allclose(future, forecast_ars(model, 25).states[:, 0], rtol=0, atol=1e-5)

    def test_random_rotations(self):
        recovered = 0

        for seed in range(10):
            generator = np.random.default_rng(seed)
            angle = generator.uniform(0.05, 1.0)
            R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
            states = [generator.standard_normal(2)]

            for _ in range(124):
                states.append(R @ states[-1])

            states = np.array(states)
            observed = ObservedSeries(states[:100, :1], step=1.0)
            init = SlackInit(mode="truth_perturbed", truth=states[:100, 1:], seed=seed, scale=0.1)
            model = fit_ars(observed, 1, init, OptimSettings(max_iters=2000, target_loss=1e-20, seed=seed))

            if model.final_loss < 1e-12:
                recovered += 1
                error = np.abs(forecast_ars(model, 25).states[:, 0] - states[100:, 0])
                self.assertLess(float(np.max(error)), 1e-4)

        self.assertGreaterEqual(recovered, 8)

    def test_slack_is_normalized(self):
        observed, truth = circular(40, sigma=0.01)
        model = fit_ars(observed, 1, SlackInit(mode="truth_perturbed", truth=truth), OptimSettings(max_iters=50))

        self.assertAlmostEqual(1.0, float(np.var(model.slack, ddof=1)), delta=1e-10)
        self.assertEqual(1, model.s_tilde)
        self.assertEqual(1, model.r)

    def test_model_fields(self):
        observed, _ = circular(30, sigma=0.01)
        model = fit_ars(observed, 1, SlackInit(seed=9), OptimSettings(max_iters=20))

        self.assertEqual(9, model.seed)
        self.assertEqual((2, 2), model.B.shape)
        self.assertEqual(model.optim.converged, model.converged)
        self.assertEqual(observed.step, model.step)

    def test_never_worse_than_pinned_ar2(self):
        for seed in range(20):
            with self.subTest(seed=seed):
                observed = ObservedSeries(np.random.default_rng(seed).standard_normal((40, 1)), step=1.0)
                trimmed, pinned = delay_slack(observed, 1)
                pinned_loss = ars_objective(trimmed, pinned.ravel(), 1)

                self.assertAlmostEqual(fit_ar(observed, p=2).residual_sum, pinned_loss, delta=1e-9)

                init = SlackInit(mode="truth_perturbed", truth=pinned, scale=0.0)
                model = fit_ars(trimmed, 1, init, OptimSettings(max_iters=50, restarts=1, seed=seed), normalize=False)
                self.assertLessEqual(model.optim.loss, pinned_loss + 1e-12)

    def test_exact_ar1_observations(self):
        states = 2.0 * 0.9 ** np.arange(30)
        observed = ObservedSeries(states.reshape(-1, 1), step=1.0)
        settings = OptimSettings(max_iters=2000, grad_tol=1e-14, target_loss=1e-20)

        for seed in range(3):
            with self.subTest(seed=seed):
                model = fit_ars(observed, 1, SlackInit(seed=seed), settings, normalize=False)
                self.assertLess(model.final_loss, 1e-12)

    def test_lorenz_beats_ar1(self):
        trajectory = gen_lorenz(100)
        spec = MissingSpec(2, 1)
        observed = split_observed(trajectory, spec)
        init = SlackInit(mode="truth_perturbed", truth=split_missing(trajectory, spec), seed=4)
        model = fit_ars(observed, 1, init, OptimSettings(max_iters=500, restarts=0), normalize=False)

        self.assertLess(model.final_loss, fit_ar(observed).residual_sum)

    def test_without_slack_is_ar1(self):
        observed, _ = circular(30, sigma=0.01)
        model = fit_ars(observed, 0)

        self.assertAlmostEqual(fit_ar(observed).residual_sum, model.final_loss, delta=1e-12)
        np.testing.assert_allclose(fit_ar(observed).coeffs[0], model.B)

    def test_alternating_least_squares(self):
        observed, truth = circular(40, sigma=0.01)
        init = SlackInit(mode="truth_perturbed", truth=truth, seed=2, scale=0.1)
        start = ars_objective(observed, init_slack(40, 1, init).ravel(), 1)
        model = fit_ars(observed, 1, init, OptimSettings(max_iters=200), method="als", normalize=False)

        self.assertLessEqual(model.optim.loss, start)
        self.assertEqual("alternating least squares", model.optim.message)
        self.assertAlmostEqual(model.optim.loss, model.final_loss, delta=1e-10)

    def test_unknown_method(self):
        observed, _ = circular(30)

        with self.assertRaises(NotImplementedError):
            fit_ars(observed, 1, method="newton")

    def test_too_short(self):
        with self.assertRaises(InvalidArgument):
            fit_ars(ObservedSeries([[1.0], [2.0]], step=1.0))

    def test_negative_slack_dimension(self):
        observed, _ = circular(30)

        with self.assertRaises(InvalidArgument):
            fit_ars(observed, -1)


class TestInteractions(TestCase):

    def test_recovers_lorenz_map(self):
        trajectory = gen_lorenz(500)
        observed = split_observed(trajectory, MissingSpec(3, 0))
        model = fit_ars_interactions(observed, 0)

        self.assertIsInstance(model, ExtArsModel)
        np.testing.assert_allclose(lorenz_map_matrix(), model.E, atol=1e-5)

    def test_linear_dynamics_have_no_product_terms(self):
        observed = split_observed(gen_circular(60), MissingSpec(2, 0))
        model = fit_ars_interactions(observed, 0)

        np.testing.assert_allclose(np.zeros((2, 1)), model.E[:, 2:], atol=1e-8)

    def test_forecast_continues_lorenz(self):
        trajectory = gen_lorenz(230)
        observed = ObservedSeries(trajectory.states[:200], step=trajectory.step)
        model = fit_ars_interactions(observed, 0)
        forecast = forecast_ars_interactions(model, 30)

        np.testing.assert_allclose(trajectory.states[200:], forecast.states, atol=1e-4)
        self.assertEqual(200, forecast.start_index)

    def test_forecast_dispatches_on_model_type(self):
        observed = split_observed(gen_lorenz(100), MissingSpec(3, 0))
        model = fit_ars_interactions(observed, 0)

        np.testing.assert_array_equal(forecast_ars_interactions(model, 5).states, forecast_ars(model, 5).states)

    def test_als_is_rejected(self):
        observed, _ = circular(30)
        problem = _Problem(np.asarray(observed.states), 1, interactions=True)

        with self.assertRaises(InvalidArgument):
            _optimize(problem, np.zeros(30), OptimSettings(), "als")


class TestForecastArs(TestCase):

    def setUp(self):
        observed, truth = circular(40, sigma=0.01)
        init = SlackInit(mode="truth_perturbed", truth=truth, seed=1, scale=0.1)
        self.model = fit_ars(observed, 1, init, OptimSettings(max_iters=100))

    def test_first_step(self):
        state = np.concatenate([self.model.series.observed.states[-1], self.model.slack[-1]])
        forecast = forecast_ars(self.model, 1)

        self.assertAlmostEqual((self.model.B @ state)[0], forecast.states[0, 0], delta=1e-14)
        self.assertEqual(40, forecast.start_index)

    def test_zero_horizon(self):
        self.assertEqual((0, 1), forecast_ars(self.model, 0).states.shape)

    def test_explicit_history(self):
        history = ObservedSeries([[0.5]], step=self.model.step, start_index=70)

        with self.assertLogs("arslack.ars", "WARNING") as logs:
            forecast = forecast_ars(self.model, 3, history)

        self.assertEqual(71, forecast.start_index)
        self.assertIn("History ends at index 71", logs.output[0])

    def test_invalid(self):
        with self.assertRaises(InvalidArgument):
            forecast_ars(self.model, -1)

        with self.assertRaises(InvalidArgument):
            forecast_ars(self.model, 3, ObservedSeries([[0.5, 0.5]], step=1.0))

        with self.assertRaises(InvalidArgument):
            forecast_ars(self.model, 3, ObservedSeries(np.zeros((0, 1)), step=1.0))


class TestRescaleSlack(TestCase):

    def test_forecast_is_invariant(self):
        observed, truth = circular(40, sigma=0.01)
        model = fit_ars(observed, 1, SlackInit(mode="truth_perturbed", truth=truth), OptimSettings(max_iters=50))
        expected = forecast_ars(model, 30).states

        for alpha in (0.1, 2.0, 10.0):
            with self.subTest(alpha=alpha):
                rescaled = rescale_slack(model, alpha)

                np.testing.assert_allclose(alpha * model.slack, rescaled.slack)
                np.testing.assert_allclose(expected, forecast_ars(rescaled, 30).states, rtol=0, atol=1e-10)

    def test_interaction_forecast_is_invariant(self):
        trajectory = gen_lorenz(60)
        observed = split_observed(trajectory, MissingSpec(2, 1))
        init = SlackInit(mode="truth_perturbed", truth=split_missing(trajectory, MissingSpec(2, 1)), scale=0.0)
        model = fit_ars_interactions(observed, 1, init, OptimSettings(max_iters=5, restarts=0), normalize=False)
        expected = forecast_ars(model, 10).states

        for alpha in (0.1, 2.0, 10.0):
            with self.subTest(alpha=alpha):
                rescaled = rescale_slack(model, alpha)

                self.assertIsInstance(rescaled, ExtArsModel)
                np.testing.assert_allclose(expected, forecast_ars(rescaled, 10).states, rtol=1e-10, atol=1e-10)

    def test_least_squares_fields_follow_the_slack(self):
        observed, truth = circular(40, sigma=0.01)
        model = fit_ars(observed, 1, SlackInit(mode="truth_perturbed", truth=truth), OptimSettings(max_iters=50))

        for alpha in (2.0, 10.0):
            with self.subTest(alpha=alpha):
                rescaled = rescale_slack(model, alpha)
                loss = ars_objective(observed, rescaled.slack.ravel(), 1)

                self.assertAlmostEqual(loss, rescaled.final_loss, delta=1e-9 * (1 + loss))
                np.testing.assert_allclose(ols_fit(build_design(rescaled.series.states)).T, rescaled.B, atol=1e-8)

    def test_ridge_keeps_forecasts_and_reports_penalized_loss(self):
        observed, truth = circular(40, sigma=0.01)
        init = SlackInit(mode="truth_perturbed", truth=truth)
        model = fit_ars(observed, 1, init, OptimSettings(max_iters=50), ridge=0.1)
        rescaled = rescale_slack(model, 2.0)
        penalized = joint_loss(rescaled.series.states, rescaled.B) + 0.1 * float(np.sum(rescaled.B ** 2))

        np.testing.assert_allclose(forecast_ars(model, 25).states, forecast_ars(rescaled, 25).states,
                                   rtol=0, atol=1e-10)
        self.assertAlmostEqual(penalized, rescaled.final_loss, delta=1e-12 * (1 + penalized))
        self.assertGreaterEqual(rescaled.final_loss + 1e-12,
                                ars_objective(observed, rescaled.slack.ravel(), 1, ridge=0.1))

    def test_identity_scale(self):
        observed, _ = circular(30)
        model = fit_ars(observed, 1, settings=OptimSettings(max_iters=5))

        self.assertIs(model, rescale_slack(model, 1.0))

    def test_nonpositive_scale(self):
        observed, _ = circular(30)
        model = fit_ars(observed, 1, settings=OptimSettings(max_iters=5))

        with self.assertRaises(InvalidArgument):
            rescale_slack(model, 0.0)


class TestDelaySlack(TestCase):

    def test_two_lags(self):
        series = ObservedSeries(np.arange(6.0).reshape(-1, 1), step=1.0, start_index=10)
        trimmed, slack = delay_slack(series, 2)

        np.testing.assert_array_equal([[2], [3], [4], [5]], trimmed.states)
        np.testing.assert_array_equal([[1, 0], [2, 1], [3, 2], [4, 3]], slack)
        self.assertEqual(12, trimmed.start_index)

    def test_too_many_lags(self):
        with self.assertRaises(InvalidArgument):
            delay_slack(ObservedSeries(np.arange(3.0), step=1.0), 2)
