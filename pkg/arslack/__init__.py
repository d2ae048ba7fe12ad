from .ar import ArModel, fit_ar, forecast_ar
from .ars import (
    ArsModel,
    ExtArsModel,
    SlackInit,
    fit_ars,
    fit_ars_interactions,
    forecast_ars,
    forecast_ars_interactions,
    rescale_slack,
)
from .errors import ArsError, FixableError, SingularMatrix
from .optimizer import OptimSettings, minimize
from .series import CompletedSeries, ObservedSeries, Trajectory

__all__ = [
    "ArModel", "fit_ar", "forecast_ar",
    "ArsModel", "ExtArsModel", "SlackInit", "fit_ars", "fit_ars_interactions", "forecast_ars",
    "forecast_ars_interactions", "rescale_slack",
    "ArsError", "FixableError", "SingularMatrix",
    "OptimSettings", "minimize",
    "CompletedSeries", "ObservedSeries", "Trajectory",
]
