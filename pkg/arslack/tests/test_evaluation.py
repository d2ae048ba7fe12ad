import io
import math
import os
import tempfile
from unittest import TestCase

import numpy as np

from arslack.errors import InvalidArgument
from arslack.evaluation import (
    REPORT_FIELDS,
    ExperimentConfig,
    ExperimentRecord,
    ExperimentReport,
    FigureData,
    check_envelopes,
    figure1_demo,
    mse_at_horizon,
    relative_error_table,
    run_experiment,
    write_figure_csv,
    write_report_csv,
)
from arslack.optimizer import OptimSettings
from arslack.series import ObservedSeries


def record(sigma=0.0, k=5, instance=0, rel_err=0.5, converged=True, mse_ars=None):
    mse_ars = rel_err if mse_ars is None else mse_ars
    return ExperimentRecord("circular", sigma, k, instance, 1.0, mse_ars, rel_err, converged)


def small_config(**kwargs):
    defaults = dict(system="circular", n_train=30, n_test=10, instances=2, horizons=(5, 10),
                    settings=OptimSettings(max_iters=20, restarts=1))
    defaults.update(kwargs)
    return ExperimentConfig(**defaults)


class TestMse(TestCase):

    def test_two_coordinates(self):
        truth = ObservedSeries([[1.0, 2.0]], step=1.0)
        forecast = ObservedSeries([[4.0, 6.0]], step=1.0)

        self.assertEqual(12.5, mse_at_horizon(truth, forecast, 1))

    def test_one_coordinate(self):
        truth = ObservedSeries([[0.0], [0.1]], step=1.0, start_index=3)
        forecast = ObservedSeries([[0.0], [0.0]], step=1.0, start_index=3)

        self.assertAlmostEqual(0.01, mse_at_horizon(truth, forecast, 2), delta=1e-15)

    def test_invalid(self):
        truth = ObservedSeries([[1.0], [2.0]], step=1.0)

        with self.assertRaises(InvalidArgument):
            mse_at_horizon(truth, ObservedSeries([[1.0], [2.0]], step=1.0), 0)

        with self.assertRaises(InvalidArgument):
            mse_at_horizon(truth, ObservedSeries([[1.0], [2.0]], step=1.0), 3)

        with self.assertRaises(InvalidArgument):
            mse_at_horizon(truth, ObservedSeries([[1.0], [2.0]], step=1.0, start_index=1), 1)

        with self.assertRaises(InvalidArgument):
            mse_at_horizon(truth, ObservedSeries([[1.0, 0.0], [2.0, 0.0]], step=1.0), 1)


class TestConfig(TestCase):

    def test_default_test_length(self):
        self.assertEqual(30, ExperimentConfig(system="circular").n_test)
        self.assertEqual(100, ExperimentConfig(system="lorenz").n_test)

    def test_missing_coordinates(self):
        self.assertEqual(1, ExperimentConfig(system="circular").missing.missing_dims)
        self.assertEqual(2, ExperimentConfig(system="lorenz").missing.observed_dims)

    def test_budget_by_noise_level(self):
        config = ExperimentConfig(system="circular")

        self.assertEqual(2000, config.settings_for(0.0).max_iters)
        self.assertEqual(100, config.settings_for(0.01).max_iters)

        fixed = OptimSettings(max_iters=7)
        self.assertIs(fixed, ExperimentConfig(settings=fixed).settings_for(0.01))

    def test_invalid(self):
        for kwargs in ({"system": "pendulum"}, {"instances": 0}, {"n_train": 2},
                       {"horizons": (40,)}, {"horizons": ()}, {"sigmas": (-0.1,)}, {"base_seed": -1}):
            with self.subTest(**kwargs):
                with self.assertRaises(InvalidArgument):
                    ExperimentConfig(**kwargs)


class TestRunExperiment(TestCase):

    def test_records(self):
        report = run_experiment(small_config())

        self.assertEqual(2 * 2 * 2, len(report.records))
        self.assertEqual({0.0, 0.01}, set(report.figures))
        self.assertEqual([], [r for r in report.records if not r.mse_ar > 0])
        self.assertEqual((0.0, 5, 0), (report.records[0].sigma, report.records[0].k, report.records[0].instance))

    def test_deterministic(self):
        a = run_experiment(small_config())
        b = run_experiment(small_config())

        self.assertEqual(a.records, b.records)

    def test_workers_do_not_change_the_report(self):
        serial = run_experiment(small_config(workers=1))
        parallel = run_experiment(small_config(workers=2))

        self.assertEqual(serial.records, parallel.records)

    def test_first_instance_curves(self):
        figure = run_experiment(small_config(instances=1, sigmas=(0.0,))).figures[0.0]

        self.assertEqual(30, len(figure.train))
        self.assertEqual(30, figure.truth.start_index)
        self.assertEqual(10, len(figure.ars))
        self.assertEqual(30, figure.ar.start_index)

    def test_lorenz(self):
        config = small_config(system="lorenz", instances=1, sigmas=(0.0,), n_test=5, horizons=(5,))
        report = run_experiment(config)

        self.assertEqual(1, len(report.records))
        self.assertEqual("lorenz", report.records[0].system)


class TestAggregates(TestCase):

    def setUp(self):
        self.config = ExperimentConfig(instances=3, sigmas=(0.0,), horizons=(5,))

    def test_mean_and_sd(self):
        records = [record(instance=i, rel_err=v) for i, v in enumerate([1.0, 2.0, 3.0])]
        aggregate = ExperimentReport(self.config, records).aggregate(0.0, 5)

        self.assertEqual(2.0, aggregate.mean)
        self.assertEqual(1.0, aggregate.sd)
        self.assertEqual(3, aggregate.count)

    def test_single_instance_has_zero_sd(self):
        aggregate = ExperimentReport(self.config, [record(rel_err=0.3)]).aggregate(0.0, 5)
        self.assertEqual(0.0, aggregate.sd)

    def test_exclusions(self):
        records = [record(instance=0, rel_err=1.0), record(instance=1, rel_err=math.nan, mse_ars=math.inf)]
        report = ExperimentReport(self.config, records, failures={(0.0, 2): "SingularMatrix"})
        aggregate = report.aggregate(0.0, 5)

        self.assertEqual([1, 2], report.excluded(0.0))
        self.assertEqual(1.0, aggregate.mean)
        self.assertEqual(2, aggregate.excluded)

    def test_unconverged_fits_are_kept(self):
        records = [record(instance=0, rel_err=1.0), record(instance=1, rel_err=3.0, converged=False)]
        report = ExperimentReport(self.config, records)

        self.assertEqual([], report.excluded(0.0))
        self.assertEqual(2.0, report.aggregate(0.0, 5).mean)

    def test_all_excluded(self):
        report = ExperimentReport(self.config, [record(rel_err=math.nan, mse_ars=math.nan)])
        self.assertTrue(math.isnan(report.aggregate(0.0, 5).mean))

    def test_unknown_aggregate(self):
        with self.assertRaises(InvalidArgument):
            ExperimentReport(self.config, []).aggregate(0.5, 5)


class TestTable(TestCase):

    def test_shape(self):
        config = ExperimentConfig(instances=1)
        records = [record(sigma=s, k=k, rel_err=0.5) for s in config.sigmas for k in config.horizons]
        rows = relative_error_table(ExperimentReport(config, records))

        self.assertEqual(4, len(rows))

        for row in rows[2:]:
            self.assertEqual(5, row.count("±"))

    def test_scaled_row(self):
        config = ExperimentConfig(instances=2, sigmas=(0.0,), horizons=(5, 10))
        records = [record(k=5, instance=0, rel_err=0.001), record(k=5, instance=1, rel_err=0.003),
                   record(k=10, instance=0, rel_err=0.004), record(k=10, instance=1, rel_err=0.004)]
        rows = relative_error_table(ExperimentReport(config, records))

        self.assertEqual("| σ=0 | 2.00 ± 1.41 | 4.00 ± 0.00 | (×10^-3) |", rows[2])

    def test_zero_errors(self):
        config = ExperimentConfig(instances=1, sigmas=(0.0,), horizons=(5,))
        rows = relative_error_table(ExperimentReport(config, [record(rel_err=0.0)]))

        self.assertEqual("| σ=0 | 0.00 ± 0.00 |  |", rows[2])

    def test_missing_values(self):
        config = ExperimentConfig(instances=1, sigmas=(0.01,), horizons=(5,))
        rows = relative_error_table(ExperimentReport(config, []))

        self.assertEqual("| σ=0.01 | n/a |  |", rows[2])


class TestEnvelopes(TestCase):

    def test_tight_and_loose_bounds(self):
        config = ExperimentConfig(instances=1, sigmas=(0.01,), horizons=(5, 10))
        records = [record(sigma=0.01, k=5, rel_err=0.8), record(sigma=0.01, k=10, rel_err=0.8)]
        checks = check_envelopes(ExperimentReport(config, records))

        self.assertEqual([False, True], [passed for _, passed in checks])

    def test_noise_free_circular(self):
        config = ExperimentConfig(instances=1, sigmas=(0.0,), horizons=(5,))
        checks = check_envelopes(ExperimentReport(config, [record(rel_err=1e-4)]))

        self.assertEqual([True], [passed for _, passed in checks])

    def test_missing_mean_fails(self):
        config = ExperimentConfig(system="lorenz", instances=1, sigmas=(0.0,), horizons=(5,))
        checks = check_envelopes(ExperimentReport(config, []))

        self.assertFalse(checks[0][1])


class TestOutput(TestCase):

    def test_report_csv(self):
        config = ExperimentConfig(instances=2, sigmas=(0.0,), horizons=(5,))
        report = ExperimentReport(config, [record(instance=0), record(instance=1, rel_err=0.25)])

        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "circular.csv")
            write_report_csv(report, path)

            with open(path) as fp:
                lines = fp.read().splitlines()

        self.assertEqual(",".join(REPORT_FIELDS), lines[0])
        self.assertEqual("circular,0,5,1,1,0.25,0.25", lines[2])

    def test_report_csv_overwrites(self):
        config = ExperimentConfig(instances=1, sigmas=(0.0,), horizons=(5,))
        report = ExperimentReport(config, [record()])

        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "circular.csv")
            write_report_csv(report, path)
            write_report_csv(report, path)

            with open(path) as fp:
                self.assertEqual(2, len(fp.read().splitlines()))

    def test_figure_csv(self):
        train = ObservedSeries([[1.0], [2.0]], step=0.5)
        future = ObservedSeries([[3.0]], step=0.5, start_index=2)
        figure = FigureData("circular", 0.0, train, future, ObservedSeries([[2.5]], step=0.5, start_index=2), future)
        fp = io.StringIO()
        write_figure_csv(figure, fp)

        self.assertEqual("t,train,truth,ar,ars\n0,1,,,\n0.5,2,,,\n1,,3,2.5,3\n", fp.getvalue())


class TestSampledCosineDemo(TestCase):

    def test_demo(self):
        truth, ar, ars = figure1_demo()

        self.assertEqual(60, len(truth))
        np.testing.assert_allclose(np.cos(0.3 * np.arange(60)), truth.states[:, 0], atol=1e-15)
        self.assertEqual((30, 30), (ar.start_index, ars.start_index))

        future = truth.states[30:, 0]
        ar_error = float(np.mean((future - ar.states[:, 0]) ** 2))
        ars_error = float(np.mean((future - ars.states[:, 0]) ** 2))
        self.assertLess(ars_error, ar_error)


class TestPublishedAccuracy(TestCase):
    """Ten instances of n=100 per system at both noise levels."""

    def assert_envelopes(self, system):
        report = run_experiment(ExperimentConfig(system=system, workers=4))
        failed = [name for name, passed in check_envelopes(report) if not passed]

        self.assertEqual([], failed)
        self.assertEqual([], report.excluded(0.0))

    def test_circular(self):
        self.assert_envelopes("circular")

    def test_lorenz(self):
        self.assert_envelopes("lorenz")
