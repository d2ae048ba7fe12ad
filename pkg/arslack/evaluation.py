"""Forecasting experiments comparing AR and ARS models.

Every (sigma, instance) pair is one unit of work for the `arslack.runner`:
the instance draws its noise, slack initialization and optimizer jitter from
seeds derived from ``base_seed + instance``, so a report depends only on its
`ExperimentConfig`, however many workers run it.
"""
import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal, TextIO

import numpy as np

from arslack.ar import fit_ar, forecast_ar
from arslack.ars import SlackInit, fit_ars, fit_ars_interactions, forecast_ars
from arslack.backlog import Backlog
from arslack.dynamics import (
    MissingSpec,
    NoiseConfig,
    add_noise,
    gen_circular,
    gen_lorenz,
    split_missing,
    split_observed,
)
from arslack.errors import InvalidArgument
from arslack.lorenz_identity import OdeResidualReport, lorenz_ode_residual
from arslack.optimizer import OptimSettings
from arslack.runner import ErrorPolicy, run
from arslack.series import ObservedSeries, Trajectory
from arslack.storage import CsvFileStorage
from arslack.utils import derive_seeds, format_float, sample_std

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig", "ExperimentRecord", "Aggregate", "FigureData", "ExperimentReport", "OdeResidualReport",
    "mse_at_horizon", "run_experiment", "figure1_demo", "lorenz_ode_residual", "relative_error_table",
    "check_envelopes", "write_report_csv", "write_figure_csv", "REPORT_FIELDS",
]

HORIZONS = (5, 10, 15, 20, 25)
SIGMAS = (0.0, 0.01)
REPORT_FIELDS = ("system", "sigma", "k", "instance", "mse_ar", "mse_ars", "rel_err")

MISSING = {
    "circular": MissingSpec(observed_dims=1, missing_dims=1),
    "lorenz": MissingSpec(observed_dims=2, missing_dims=1),
}
TEST_LENGTH = {"circular": 30, "lorenz": 100}

NOISE_FREE_SETTINGS = OptimSettings(max_iters=2000)
NOISY_SETTINGS = OptimSettings(max_iters=100)


@dataclass(frozen=True)
class ExperimentConfig(object):
    """One forecasting experiment over several noise levels.

    :param n_test: Length of the noise-free continuation; defaults to 30 for
        the circular motion and 100 for the Lorenz map.
    :param init_mode: Slack initialization of the ARS fits. The true missing
        coordinates are used by ``truth_perturbed`` only.
    :param settings: Optimizer settings of every ARS fit. When omitted, noise-free
        fits get `NOISE_FREE_SETTINGS` and noisy fits the 100-iteration
        `NOISY_SETTINGS`; longer runs let the slack absorb the training noise.
    :param error_policy: ``record`` excludes failing instances from the
        aggregates, ``fail`` aborts the experiment.
    """
    system: Literal["circular", "lorenz"] = "circular"
    n_train: int = 100
    n_test: int | None = None
    instances: int = 10
    sigmas: tuple[float, ...] = SIGMAS
    horizons: tuple[int, ...] = HORIZONS
    s_tilde: int = 1
    init_mode: Literal["standard_normal", "truth_perturbed", "zeros"] = "truth_perturbed"
    init_scale: float = 1.0
    base_seed: int = 0
    ar_order: int = 1
    ridge: float = 0.0
    interactions: bool = False
    settings: OptimSettings | None = None
    workers: int = 1
    error_policy: ErrorPolicy = "record"

    def __post_init__(self):
        if self.system not in MISSING:
            raise InvalidArgument(f"Unknown system `{self.system}`; choose from {sorted(MISSING)}.")

        if self.n_test is None:
            object.__setattr__(self, "n_test", TEST_LENGTH[self.system])

        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "horizons", tuple(int(k) for k in self.horizons))

        if self.instances < 1:
            raise InvalidArgument(f"Need at least one instance, got {self.instances}.")

        if self.n_train < 3:
            raise InvalidArgument(f"Need at least 3 training states, got {self.n_train}.")

        if not self.horizons or any(not 1 <= k <= self.n_test for k in self.horizons):
            raise InvalidArgument(f"Horizons {self.horizons} must lie in [1, {self.n_test}].")

        if not self.sigmas or any(not s >= 0 for s in self.sigmas):
            raise InvalidArgument(f"Noise levels must be nonnegative, got {self.sigmas}.")

        if self.base_seed < 0:
            raise InvalidArgument(f"Seeds must be nonnegative, got {self.base_seed}.")

    @property
    def missing(self) -> MissingSpec:
        return MISSING[self.system]

    def settings_for(self, sigma: float) -> OptimSettings:
        if self.settings is not None:
            return self.settings

        return NOISE_FREE_SETTINGS if sigma == 0 else NOISY_SETTINGS


@dataclass(frozen=True)
class ExperimentRecord(object):
    system: str
    sigma: float
    k: int
    instance: int
    mse_ar: float
    mse_ars: float
    rel_err: float
    converged: bool = True

    def as_row(self) -> dict[str, str]:
        """CSV fields except ``instance``, which the storage writes as the key."""
        return {
            "system": self.system,
            "sigma": format(self.sigma, "g"),
            "k": str(self.k),
            "mse_ar": format_float(self.mse_ar),
            "mse_ars": format_float(self.mse_ars),
            "rel_err": format_float(self.rel_err),
        }


@dataclass(frozen=True)
class Aggregate(object):
    """Relative errors at one (sigma, horizon) over the included instances."""
    sigma: float
    k: int
    mean: float
    sd: float
    count: int
    excluded: int


@dataclass(frozen=True, eq=False)
class FigureData(object):
    """Training series, noise-free continuation and both forecasts of one instance."""
    system: str
    sigma: float
    train: ObservedSeries
    truth: ObservedSeries
    ar: ObservedSeries
    ars: ObservedSeries


@dataclass(frozen=True, eq=False)
class ExperimentReport(object):
    config: ExperimentConfig
    records: list[ExperimentRecord]
    failures: dict[tuple[float, int], str] = field(default_factory=dict)
    figures: dict[float, FigureData] = field(default_factory=dict)

    def excluded(self, sigma: float) -> list[int]:
        """Instances left out of the aggregates: fits that raised and forecasts that are not finite.

        Fits stopped by the iteration limit or a failed line search still count.
        """
        failed = {instance for s, instance in self.failures if s == sigma}
        diverged = {r.instance for r in self.records if r.sigma == sigma and not math.isfinite(r.mse_ars)}
        return sorted(failed | diverged)

    def aggregates(self) -> list[Aggregate]:
        result = []

        for sigma in self.config.sigmas:
            excluded = self.excluded(sigma)

            for k in self.config.horizons:
                values = [r.rel_err for r in self.records
                          if r.sigma == sigma and r.k == k and r.instance not in excluded
                          and math.isfinite(r.rel_err)]
                mean = float(np.mean(values)) if values else math.nan
                result.append(Aggregate(sigma, k, mean, sample_std(values), len(values), len(excluded)))

        return result

    def aggregate(self, sigma: float, k: int) -> Aggregate:
        for item in self.aggregates():
            if item.sigma == sigma and item.k == k:
                return item

        raise InvalidArgument(f"No aggregate for sigma={sigma}, k={k}.")


def mse_at_horizon(truth: ObservedSeries, forecast: ObservedSeries, k: int) -> float:
    """``|z(n+k) - ẑ(n+k)|^2 / r`` where row ``k - 1`` of both series is time ``n + k``."""
    if truth.dim != forecast.dim:
        raise InvalidArgument(f"Truth has {truth.dim} columns but the forecast has {forecast.dim}.")

    if truth.start_index != forecast.start_index:
        raise InvalidArgument(
            f"Truth starts at index {truth.start_index} but the forecast at {forecast.start_index}.")

    if not 1 <= k <= min(len(truth), len(forecast)):
        raise InvalidArgument(f"Horizon {k} is outside [1, {min(len(truth), len(forecast))}].")

    error = truth.states[k - 1] - forecast.states[k - 1]
    return float(error @ error) / truth.dim


def _trajectory(system: str, n: int) -> Trajectory:
    if system == "circular":
        return gen_circular(n)

    return gen_lorenz(n)


def _split(trajectory: Trajectory, n_train: int) -> tuple[Trajectory, Trajectory]:
    return (Trajectory(trajectory.states[:n_train], step=trajectory.step, start_index=trajectory.start_index),
            Trajectory(trajectory.states[n_train:], step=trajectory.step,
                       start_index=trajectory.start_index + n_train))


def run_instance(config: ExperimentConfig, sigma: float, instance: int) -> dict:
    """Fit and forecast one training instance at noise level `sigma`."""
    noise_seed, init_seed, optim_seed = derive_seeds(config.base_seed + instance, 3)
    clean = _trajectory(config.system, config.n_train + config.n_test)
    train_clean, test = _split(clean, config.n_train)
    train = add_noise(train_clean, NoiseConfig(sigma=sigma, seed=noise_seed))

    observed = split_observed(train, config.missing)
    truth = split_observed(test, config.missing)
    horizon = max(config.horizons)

    init = SlackInit(
        mode=config.init_mode,
        truth=split_missing(train_clean, config.missing) if config.init_mode == "truth_perturbed" else None,
        seed=init_seed,
        scale=config.init_scale,
    )
    settings = replace(config.settings_for(sigma), seed=optim_seed)
    fit = fit_ars_interactions if config.interactions else fit_ars

    ar_model = fit_ar(observed, p=config.ar_order, ridge=config.ridge)
    ars_model = fit(observed, s_tilde=config.s_tilde, init=init, settings=settings, ridge=config.ridge)
    ar_forecast = forecast_ar(ar_model, observed, horizon)
    ars_forecast = forecast_ars(ars_model, horizon)

    records = []

    for k in config.horizons:
        mse_ar = mse_at_horizon(truth, ar_forecast, k)
        mse_ars = mse_at_horizon(truth, ars_forecast, k)
        records.append(ExperimentRecord(
            system=config.system,
            sigma=sigma,
            k=k,
            instance=instance,
            mse_ar=mse_ar,
            mse_ars=mse_ars,
            rel_err=mse_ars / mse_ar if mse_ar > 0 else math.nan,
            converged=ars_model.converged,
        ))

    figure = None

    if instance == 0:
        figure = FigureData(config.system, sigma, observed, truth, ar_forecast, ars_forecast)

    return {"records": records, "figure": figure}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run every (sigma, instance) pair of `config` and collect the report."""
    keys = [(sigma, instance) for sigma in config.sigmas for instance in range(config.instances)]
    storage, failures = run(
        lambda key: run_instance(config, *key),
        Backlog(*keys),
        error_policy=config.error_policy,
        workers=config.workers,
    )

    records, figures = [], {}

    for (sigma, instance), value in storage.iter_items():
        records.extend(value["records"])

        if value["figure"] is not None:
            figures[sigma] = value["figure"]

    records.sort(key=lambda r: (config.sigmas.index(r.sigma), r.k, r.instance))
    report = ExperimentReport(config, records, dict(sorted(failures.items())), figures)

    for sigma in config.sigmas:
        if excluded := report.excluded(sigma):
            logger.warning("%s, sigma=%g: excluding instances %s from the aggregates.",
                           config.system, sigma, excluded)

        unconverged = sorted({r.instance for r in report.records if r.sigma == sigma and not r.converged})

        if unconverged:
            logger.info("%s, sigma=%g: instances %s stopped before convergence.", config.system, sigma, unconverged)

    return report


def figure1_demo(seed: int = 0,
                 settings: OptimSettings = OptimSettings(max_iters=2000, target_loss=1e-20),
                 attempts: int = 5) -> tuple[ObservedSeries, ObservedSeries, ObservedSeries]:
    """Circular motion with phase step 0.3 and n=30, observed through ``cos`` only.

    Returns the observed truth over the 30 training and 30 continuation steps,
    and the AR(1) and ARS forecasts of the continuation. The ARS slack starts
    from standard normal draws; up to `attempts` seeds are tried until the
    profiled loss vanishes.
    """
    n = 30
    spec = MissingSpec(observed_dims=1, missing_dims=1)
    trajectory = gen_circular(2 * n, phase0=0.0, increment=0.3)
    truth = split_observed(trajectory, spec)
    observed = ObservedSeries(truth.states[:n], step=truth.step)

    best = None

    for attempt in range(max(attempts, 1)):
        init = SlackInit(mode="standard_normal", seed=seed + attempt)
        model = fit_ars(observed, s_tilde=1, init=init, settings=replace(settings, seed=seed + attempt))

        if best is None or model.optim.loss < best.optim.loss:
            best = model

        if best.optim.loss <= 1e-12:
            break

    ar_model = fit_ar(observed, p=1)
    return truth, forecast_ar(ar_model, observed, n), forecast_ars(best, n)


def _exponent(means: list[float]) -> int:
    finite = [abs(m) for m in means if math.isfinite(m)]

    if not finite or max(finite) == 0:
        return 0

    return math.floor(math.log10(max(finite)))


def relative_error_table(report: ExperimentReport) -> list[str]:
    """Markdown rows: one per sigma, one ``mean ± sd`` cell per horizon.

    Each row is scaled by a power of ten chosen from its largest mean and
    listed in the last column.
    """
    horizons = report.config.horizons
    rows = [
        "| | " + " | ".join(f"k={k}" for k in horizons) + " | |",
        "|---|" + "---|" * len(horizons) + "---|",
    ]

    for sigma in report.config.sigmas:
        aggregates = [report.aggregate(sigma, k) for k in horizons]
        exponent = _exponent([a.mean for a in aggregates])
        scale = 10.0 ** exponent
        cells = [
            f"{a.mean / scale:.2f} ± {a.sd / scale:.2f}" if math.isfinite(a.mean) else "n/a"
            for a in aggregates
        ]
        suffix = f"(×10^{exponent})" if exponent else ""
        rows.append(f"| σ={sigma:g} | " + " | ".join(cells) + f" | {suffix} |")

    return rows


def check_envelopes(report: ExperimentReport) -> list[tuple[str, bool]]:
    """Compare mean relative errors with the expected accuracy of each system."""
    bounds = {
        "circular": {0.0: (1e-3, None, None), 0.01: (1.0, 5, 0.7)},
        "lorenz": {0.0: (1.0, 15, 5e-2), 0.01: (1.0, 5, 0.1)},
    }[report.config.system]
    checks = []

    for sigma in report.config.sigmas:
        if sigma not in bounds:
            continue

        bound, up_to, tight = bounds[sigma]

        for k in report.config.horizons:
            mean = report.aggregate(sigma, k).mean
            limit = tight if up_to is not None and k <= up_to else bound
            checks.append((f"{report.config.system} sigma={sigma:g} k={k}: mean {mean:.3g} < {limit:g}",
                           math.isfinite(mean) and mean < limit))

    return checks


def write_report_csv(report: ExperimentReport, file_path: str) -> None:
    """Write one row per (sigma, horizon, instance) with header `REPORT_FIELDS`."""
    with CsvFileStorage(file_path, REPORT_FIELDS, key_field="instance", overwrite=True) as storage:
        storage.save_from_iterable((r.instance, r.as_row()) for r in report.records)


def write_figure_csv(figure: FigureData, fp: TextIO) -> None:
    """Write the first observed coordinate of every curve against time, blank where a curve is undefined."""
    columns = {"train": figure.train, "truth": figure.truth, "ar": figure.ar, "ars": figure.ars}
    values: dict[int, dict[str, str]] = {}

    for name, series in columns.items():
        for offset, value in enumerate(series.states[:, 0]):
            values.setdefault(series.start_index + offset, {})[name] = format_float(value)

    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["t", *columns])

    for index in sorted(values):
        row = values[index]
        writer.writerow([format_float(index * figure.train.step), *(row.get(name, "") for name in columns)])
