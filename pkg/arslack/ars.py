"""Autoregression with a slack time series.

The completed state ``x‡_j = (z_j, u_j)`` joins the observed coordinates
``z_j`` with a slack vector ``u_j`` that stands in for the missing ones. The
transition matrix is profiled out in closed form (see `arslack.regression`),
so the optimizer only searches over the slack entries.

Gradient of the profiled loss with respect to the slack: the slack of state
``j`` appears in row ``j`` of ``D`` (as a regressor) and in row ``j - 1`` of
``D_plus`` (as a target). With ``G_D = -2 R M^T`` and ``G_+ = 2 R`` the
gradient on the completed states is ``G_X[:-1] += G_D`` and
``G_X[1:] += G_+``; the slack gradient is the slack columns of ``G_X``. For
the interaction-extended model ``G_D`` is first pulled back through the
feature map by the product rule.
"""
import logging
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import scipy.linalg

from arslack.ar import propagate
from arslack.errors import InvalidArgument, NumericOverflow
from arslack.optimizer import OptimResult, OptimSettings, minimize
from arslack.regression import (
    DesignPair,
    FitDiagnostics,
    ProfiledFit,
    build_design,
    build_interaction_design,
    fit_profiled,
    interaction_map,
    interaction_pullback,
    interaction_scale,
    profiled_gradient,
)
from arslack.series import CompletedSeries, ObservedSeries
from arslack.utils import rng

logger = logging.getLogger(__name__)

__all__ = [
    "SlackInit", "ArsModel", "ExtArsModel", "init_slack", "ars_objective", "ars_gradient",
    "fit_ars", "forecast_ars", "rescale_slack", "interaction_map", "fit_ars_interactions",
    "forecast_ars_interactions", "delay_slack", "joint_loss",
]


@dataclass(frozen=True, eq=False)
class SlackInit(object):
    """How the slack series is initialized.

    :type mode: {'standard_normal', 'truth_perturbed', 'zeros'}
    :param truth: The true missing coordinates, required by ``truth_perturbed``.
    :param scale: Standard deviation of the perturbation added to `truth`.
    """
    mode: Literal["standard_normal", "truth_perturbed", "zeros"] = "standard_normal"
    truth: np.ndarray | None = None
    seed: int = 0
    scale: float = 1.0


@dataclass(frozen=True, eq=False)
class ArsModel(object):
    """Fitted transition matrix ``B`` (column convention) and slack series."""

    B: np.ndarray
    series: CompletedSeries
    final_loss: float
    diagnostics: FitDiagnostics
    optim: OptimResult
    ridge: float = 0.0
    seed: int = 0

    @property
    def r(self) -> int:
        return self.series.r

    @property
    def s_tilde(self) -> int:
        return self.series.s_tilde

    @property
    def step(self) -> float:
        return self.series.step

    @property
    def slack(self) -> np.ndarray:
        return self.series.slack

    @property
    def converged(self) -> bool:
        return self.optim.converged


@dataclass(frozen=True, eq=False)
class ExtArsModel(ArsModel):
    """Interaction-extended model ``x‡_{j+1} = E I(x‡_j)``; `B` holds ``E``."""

    @property
    def E(self) -> np.ndarray:
        return self.B


@dataclass(frozen=True)
class _Problem(object):
    observed: np.ndarray
    s_tilde: int
    ridge: float = 0.0
    interactions: bool = False

    def completed(self, slack_flat) -> np.ndarray:
        slack = np.asarray(slack_flat, dtype=float).reshape(self.observed.shape[0], self.s_tilde)
        return np.hstack([self.observed, slack])

    def solve(self, states: np.ndarray) -> tuple[DesignPair, ProfiledFit]:
        pair = build_interaction_design(states) if self.interactions else build_design(states)
        return pair, fit_profiled(pair, self.ridge)

    def value(self, slack_flat) -> float:
        return self.solve(self.completed(slack_flat))[1].loss

    def gradient(self, slack_flat) -> np.ndarray:
        states = self.completed(slack_flat)
        pair, fit = self.solve(states)
        grad_D, grad_plus = profiled_gradient(pair, fit)

        if self.interactions:
            grad_D = interaction_pullback(states[:-1], grad_D)

        grad = np.zeros_like(states)
        grad[:-1] += grad_D
        grad[1:] += grad_plus

        return grad[:, self.observed.shape[1]:].ravel()


def _problem(observed: ObservedSeries, slack_flat, s_tilde: int, ridge: float, interactions: bool) -> _Problem:
    n = len(observed)

    if np.size(slack_flat) != n * s_tilde:
        raise InvalidArgument(f"Slack vector has {np.size(slack_flat)} entries, expected n*s_tilde={n * s_tilde}.")

    return _Problem(np.asarray(observed.states), s_tilde, ridge, interactions)


def init_slack(n: int, s_tilde: int, init: SlackInit = SlackInit()) -> np.ndarray:
    """Initial ``(n, s_tilde)`` slack series."""
    if n < 2 or s_tilde < 1:
        raise InvalidArgument(f"Need n >= 2 and s_tilde >= 1, got n={n}, s_tilde={s_tilde}.")

    if init.mode == "zeros":
        return np.zeros((n, s_tilde))

    noise = rng(init.seed).standard_normal((n, s_tilde))

    if init.mode == "standard_normal":
        return noise

    if init.mode == "truth_perturbed":
        if init.truth is None:
            raise InvalidArgument("Slack mode 'truth_perturbed' needs the true missing series.")

        truth = np.asarray(init.truth, dtype=float)
        truth = truth.reshape(-1, 1) if truth.ndim == 1 else truth

        if truth.shape != (n, s_tilde):
            raise InvalidArgument(f"Truth has shape {truth.shape}, expected {(n, s_tilde)}.")

        return truth + init.scale * noise

    raise NotImplementedError(f"Slack initialization `{init.mode}` not implemented.")


def ars_objective(observed: ObservedSeries, slack_flat, s_tilde: int, ridge: float = 0.0,
                  interactions: bool = False) -> float:
    """Profiled loss ``tr(D_plus^T (I - H) D_plus)`` of the completed series."""
    return _problem(observed, slack_flat, s_tilde, ridge, interactions).value(slack_flat)


def ars_gradient(observed: ObservedSeries, slack_flat, s_tilde: int, ridge: float = 0.0,
                 interactions: bool = False) -> np.ndarray:
    """Exact gradient of `ars_objective` with respect to the flattened slack."""
    return _problem(observed, slack_flat, s_tilde, ridge, interactions).gradient(slack_flat)


def joint_loss(states: np.ndarray, B: np.ndarray, interactions: bool = False) -> float:
    """``sum_j |x_{j+1} - B x_j|^2`` (or ``E I(x_j)``) for a given matrix, without profiling."""
    regressors = interaction_map(states[:-1]) if interactions else states[:-1]
    residual = states[1:] - regressors @ B.T
    return float(np.sum(residual * residual))


def delay_slack(series: ObservedSeries, lags: int = 1) -> tuple[ObservedSeries, np.ndarray]:
    """Slack pinned to delayed observations ``(z_{j-1}, ..., z_{j-lags})``.

    The first `lags` observations only serve as history, so the returned
    observed series starts `lags` steps later.
    """
    n = len(series)

    if lags < 1 or n <= lags + 1:
        raise InvalidArgument(f"Need 1 <= lags < n - 1, got lags={lags}, n={n}.")

    slack = np.hstack([series.states[lags - k:n - k] for k in range(1, lags + 1)])
    trimmed = ObservedSeries(series.states[lags:], step=series.step, start_index=series.start_index + lags)

    return trimmed, slack


def _initial_slack(n: int, s_tilde: int, init: SlackInit) -> np.ndarray:
    return np.zeros((n, 0)) if s_tilde == 0 else init_slack(n, s_tilde, init)


def _als(problem: _Problem, slack: np.ndarray, settings: OptimSettings) -> OptimResult:
    """Alternate a closed-form B-step and a closed-form slack-step."""
    Z = problem.observed
    n, r = Z.shape
    s = problem.s_tilde
    d = r + s
    loss = problem.value(slack)
    converged = False
    iterations = 0

    while iterations < settings.max_iters:
        B = problem.solve(problem.completed(slack))[1].M.T
        # residual_j = Q u_{j+1} - B Q u_j + (z_{j+1} - B P z_j) with P, Q the observed/slack injections
        system = np.zeros(((n - 1) * d, n * s))
        constant = np.zeros((n - 1) * d)
        BQ = B[:, r:]

        for j in range(n - 1):
            rows = slice(j * d, (j + 1) * d)
            system[j * d + r:(j + 1) * d, (j + 1) * s:(j + 2) * s] = np.eye(s)
            system[rows, j * s:(j + 1) * s] = -BQ
            constant[rows] = -B[:, :r] @ Z[j]
            constant[j * d:j * d + r] += Z[j + 1]

        slack, *_ = scipy.linalg.lstsq(system, -constant)
        new_loss = problem.value(slack)
        iterations += 1
        decrease = loss - new_loss
        loss = new_loss

        if new_loss == 0 or decrease <= settings.loss_tol * (loss + decrease):
            converged = True
            break

    return OptimResult(np.asarray(slack).ravel(), loss, iterations, converged, 0, "alternating least squares")


def _optimize(problem: _Problem, slack0: np.ndarray, settings: OptimSettings,
              method: Literal["bfgs", "als"]) -> OptimResult:
    if method == "bfgs" or slack0.size == 0:
        return minimize(problem.value, problem.gradient, slack0.ravel(), settings)
    elif method == "als":
        if problem.interactions:
            raise InvalidArgument("The alternating fallback only supports the plain model.")

        return _als(problem, slack0.ravel(), settings)

    raise NotImplementedError(f"Fitting method `{method}` not implemented.")


def _fit(observed: ObservedSeries, s_tilde: int, init: SlackInit, settings: OptimSettings,
         ridge: float, interactions: bool, method: Literal["bfgs", "als"], normalize: bool,
         model_cls: type) -> ArsModel:
    n = len(observed)

    if n < 3:
        raise InvalidArgument(f"Need at least 3 observations (two transitions), got {n}.")

    if s_tilde < 0:
        raise InvalidArgument(f"Slack dimension must be nonnegative, got {s_tilde}.")

    problem = _Problem(np.asarray(observed.states), s_tilde, ridge, interactions)
    slack0 = _initial_slack(n, s_tilde, init)
    result = _optimize(problem, slack0, settings, method)

    if not result.converged:
        logger.warning("Slack optimization did not converge (%s); loss %g.", result.message, result.loss)

    slack = result.argmin.reshape(n, s_tilde)

    if normalize and s_tilde > 0:
        spread = float(np.sqrt(np.mean(np.var(slack, axis=0, ddof=1))))
        if spread > 0:
            slack = slack / spread

    series = CompletedSeries(observed, slack)
    _, fit = problem.solve(series.states)

    if fit.diagnostics.underdetermined:
        logger.warning("Design has fewer rows (%d) than features (%d); the fit is not identifiable.",
                       n - 1, fit.M.shape[0])

    return model_cls(
        B=fit.M.T,
        series=series,
        final_loss=fit.loss,
        diagnostics=fit.diagnostics,
        optim=result,
        ridge=ridge,
        seed=init.seed,
    )


def fit_ars(observed: ObservedSeries,
            s_tilde: int = 1,
            init: SlackInit = SlackInit(),
            settings: OptimSettings = OptimSettings(),
            ridge: float = 0.0,
            method: Literal["bfgs", "als"] = "bfgs",
            normalize: bool = True) -> ArsModel:
    """Jointly estimate the slack series and the transition matrix.

    The slack is optimized on the profiled loss; ``B`` is then the least-squares
    solution for the (optionally variance-normalized) optimal slack.
    """
    return _fit(observed, s_tilde, init, settings, ridge, False, method, normalize, ArsModel)


def fit_ars_interactions(observed: ObservedSeries,
                         s_tilde: int = 1,
                         init: SlackInit = SlackInit(),
                         settings: OptimSettings = OptimSettings(),
                         ridge: float = 0.0,
                         normalize: bool = True) -> ExtArsModel:
    """Like `fit_ars` with design rows ``I(x‡_j)`` of linear and pairwise product terms."""
    return _fit(observed, s_tilde, init, settings, ridge, True, "bfgs", normalize, ExtArsModel)


def _start(model: ArsModel, history: ObservedSeries | None) -> tuple[np.ndarray, int, float]:
    """Last completed state, first forecast index and step."""
    if history is None:
        history = model.series.observed

    if history.dim != model.r:
        raise InvalidArgument(f"Model has r={model.r} but the history has {history.dim} columns.")

    if len(history) < 1:
        raise InvalidArgument("Forecasting needs at least one observed state.")

    if history.end_index != model.series.observed.end_index:
        logger.warning("History ends at index %d but the slack was fitted up to index %d; "
                       "its last value is paired with the last history row.",
                       history.end_index, model.series.observed.end_index)

    state = np.concatenate([history.states[-1], model.slack[-1]])
    return state, history.end_index, history.step


def forecast_ars(model: ArsModel, k: int, history: ObservedSeries | None = None) -> ObservedSeries:
    """Iterate ``x <- B x`` from ``(z_n, u_n)`` and project onto the observed coordinates.

    `history` replaces the observed series the model was fitted on as the
    source of ``z_n``.
    """
    if isinstance(model, ExtArsModel):
        return forecast_ars_interactions(model, k, history)

    if k < 0:
        raise InvalidArgument(f"Horizon must be nonnegative, got {k}.")

    state, start_index, step = _start(model, history)
    values = propagate(model.B, state, k, model.r)

    return ObservedSeries(values.reshape(k, model.r), step=step, start_index=start_index)


def forecast_ars_interactions(model: ExtArsModel, k: int, history: ObservedSeries | None = None) -> ObservedSeries:
    """Iterate ``x <- E I(x)`` and project onto the observed coordinates."""
    if k < 0:
        raise InvalidArgument(f"Horizon must be nonnegative, got {k}.")

    x, start_index, step = _start(model, history)
    values = np.empty((k, model.r))

    for i in range(k):
        x = model.E @ interaction_map(x)

        if not np.all(np.isfinite(x)):
            raise NumericOverflow(f"Forecast diverged at step {i + 1}.", step=i + 1)

        values[i] = x[:model.r]

    return ObservedSeries(values, step=step, start_index=start_index)


def rescale_slack(model: ArsModel, alpha: float) -> ArsModel:
    """Multiply the slack by `alpha` and conjugate the transition accordingly.

    With ``S = diag(I_r, alpha I_s)`` the new matrix is ``S B S^-1`` (or
    ``S E T^-1`` with ``I(S x) = T I(x)`` for the extended model), so every
    forecast of the observed block is unchanged.

    Without a ridge penalty the new matrix is the least-squares solution of the
    rescaled design and `final_loss` its profiled loss. With a penalty the
    conjugated matrix is kept for the forecasts but is no longer the ridge
    solution; `final_loss` is then its penalized loss, which is at least the
    profiled loss of the rescaled design.
    """
    if not alpha > 0:
        raise InvalidArgument(f"Rescaling factor must be positive, got {alpha}.")

    if alpha == 1:
        return model

    scale = np.concatenate([np.ones(model.r), np.full(model.s_tilde, float(alpha))])
    interactions = isinstance(model, ExtArsModel)
    inverse = 1 / (interaction_scale(scale) if interactions else scale)
    B = scale[:, None] * model.B * inverse[None, :]
    series = CompletedSeries(model.series.observed, model.slack * alpha)
    loss = joint_loss(series.states, B, interactions) + model.ridge * float(np.sum(B * B))

    return replace(model, B=B, series=series, final_loss=loss)
