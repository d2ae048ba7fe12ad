import io
from unittest import TestCase

import numpy as np

from arslack.ar import ArModel, fit_ar, forecast_ar
from arslack.ars import ExtArsModel, SlackInit, fit_ars, fit_ars_interactions, forecast_ars
from arslack.dynamics import MissingSpec, gen_circular, gen_lorenz, split_missing, split_observed
from arslack.errors import SeriesFormatError
from arslack.optimizer import OptimSettings
from arslack.persistence import dump_model, load_model, model_from_dict, model_to_dict
from arslack.series import ObservedSeries


def reload(model):
    fp = io.StringIO()
    dump_model(model, fp)
    fp.seek(0)
    return load_model(fp)


class TestArModel(TestCase):

    def test_round_trip(self):
        values = np.cumsum(np.random.default_rng(0).standard_normal((30, 2)), axis=0)
        series = ObservedSeries(values, step=0.5, start_index=4)
        model = fit_ar(series, p=2, intercept=True)
        loaded = reload(model)

        self.assertIsInstance(loaded, ArModel)
        np.testing.assert_array_equal(model.coeffs, loaded.coeffs)
        np.testing.assert_array_equal(model.intercept, loaded.intercept)
        self.assertEqual(model.residual_sum, loaded.residual_sum)
        np.testing.assert_array_equal(forecast_ar(model, series, 5).states, forecast_ar(loaded, series, 5).states)

    def test_coefficient_layout(self):
        model = ArModel(coeffs=[[[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [7.0, 8.0]]], step=1.0)
        data = model_to_dict(model)

        self.assertEqual([[1, 2, 5, 6], [3, 4, 7, 8]], data["coeffs"])
        self.assertIsNone(data["intercept"])
        self.assertEqual("ar", data["type"])


class TestArsModel(TestCase):

    def test_round_trip(self):
        trajectory = gen_circular(30)
        observed = split_observed(trajectory, MissingSpec(1, 1))
        init = SlackInit(mode="truth_perturbed", truth=split_missing(trajectory, MissingSpec(1, 1)), seed=5)
        model = fit_ars(observed, 1, init, OptimSettings(max_iters=20))
        loaded = reload(model)

        self.assertEqual("ars", model_to_dict(model)["type"])
        np.testing.assert_array_equal(model.B, loaded.B)
        np.testing.assert_array_equal(model.slack, loaded.slack)
        self.assertEqual(model.final_loss, loaded.final_loss)
        self.assertEqual(model.converged, loaded.converged)
        self.assertEqual(5, loaded.seed)
        np.testing.assert_array_equal(forecast_ars(model, 10).states, forecast_ars(loaded, 10).states)

    def test_interactions_round_trip(self):
        observed = split_observed(gen_lorenz(40), MissingSpec(3, 0))
        model = fit_ars_interactions(observed, 0)
        data = model_to_dict(model)
        loaded = reload(model)

        self.assertEqual("ars_int", data["type"])
        self.assertIn("E", data)
        self.assertIsInstance(loaded, ExtArsModel)
        np.testing.assert_array_equal(model.E, loaded.E)


class TestMalformed(TestCase):

    def test_invalid_json(self):
        with self.assertRaises(SeriesFormatError) as context:
            load_model(io.StringIO("{\n\"type\": \"ar\",\n oops"))

        self.assertEqual(3, context.exception.line)

    def test_unknown_type(self):
        with self.assertRaises(SeriesFormatError):
            model_from_dict({"type": "var"})

    def test_missing_field(self):
        with self.assertRaises(SeriesFormatError):
            model_from_dict({"type": "ar", "p": 1, "r": 1})

    def test_wrong_shape(self):
        with self.assertRaises(SeriesFormatError):
            model_from_dict({"type": "ar", "p": 1, "r": 2, "h": 1.0, "coeffs": [[1.0, 2.0, 3.0]]})

    def test_not_an_object(self):
        with self.assertRaises(SeriesFormatError):
            model_from_dict([1, 2, 3])
