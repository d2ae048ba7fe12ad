"""Autoregressive baseline of order p on the observed series."""
import logging
from dataclasses import dataclass

import numpy as np

from arslack.errors import InvalidArgument
from arslack.regression import DesignPair, fit_profiled
from arslack.series import ObservedSeries

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ArModel(object):
    """``z_{j+1} = sum_k B_k z_{j-k+1} (+ c)`` with ``coeffs[k - 1] = B_k``."""

    coeffs: np.ndarray
    step: float
    intercept: np.ndarray | None = None
    residual_sum: float = 0.0
    ridge: float = 0.0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)

        if coeffs.ndim != 3 or coeffs.shape[0] < 1 or coeffs.shape[1] != coeffs.shape[2]:
            raise InvalidArgument(f"Coefficients must have shape (p, r, r), got {coeffs.shape}.")

        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0]

    @property
    def r(self) -> int:
        return self.coeffs.shape[1]

    def companion(self) -> np.ndarray:
        """The ``(p r) x (p r)`` transition matrix of the stacked state ``(z_j, ..., z_{j-p+1})``."""
        p, r = self.order, self.r
        matrix = np.zeros((p * r, p * r))
        matrix[:r] = np.hstack(list(self.coeffs))
        matrix[r:, :-r] = np.eye((p - 1) * r)

        return matrix


def delay_embed(states: np.ndarray, p: int) -> np.ndarray:
    """Rows ``(z_t, z_{t-1}, ..., z_{t-p+1})`` for ``t = p-1, ..., n-1``."""
    n = states.shape[0]
    return np.hstack([states[p - 1 - k:n - k] for k in range(p)])


def propagate(B: np.ndarray, state: np.ndarray, k: int, r: int, offset: np.ndarray | None = None) -> np.ndarray:
    """Iterate ``x <- B x (+ offset)`` `k` times and return the first `r` coordinates of each iterate."""
    out = np.empty((k, r))
    x = np.asarray(state, dtype=float)

    for i in range(k):
        x = B @ x if offset is None else B @ x + offset
        out[i] = x[:r]

    return out


def fit_ar(series: ObservedSeries, p: int = 1, ridge: float = 0.0, intercept: bool = False) -> ArModel:
    """Least squares of ``z_{j+1}`` on ``(z_j, ..., z_{j-p+1})``."""
    if p < 1:
        raise InvalidArgument(f"AR order must be at least 1, got {p}.")

    n, r = len(series), series.dim

    if n <= p:
        raise InvalidArgument(f"AR({p}) needs more than {p} observations, got {n}.")

    lagged = delay_embed(series.states, p)[:-1]

    if intercept:
        lagged = np.hstack([lagged, np.ones((lagged.shape[0], 1))])

    fit = fit_profiled(DesignPair(lagged, series.states[p:]), ridge, escalate=False)
    coeffs = np.stack([fit.M[k * r:(k + 1) * r].T for k in range(p)])
    logger.debug("AR(%d) residual sum %g", p, fit.loss)

    return ArModel(
        coeffs=coeffs,
        step=series.step,
        intercept=fit.M[-1].copy() if intercept else None,
        residual_sum=fit.loss,
        ridge=ridge,
    )


def forecast_ar(model: ArModel, history: ObservedSeries, k: int) -> ObservedSeries:
    """Continue `history` for `k` steps with the fitted recursion."""
    if k < 0:
        raise InvalidArgument(f"Horizon must be nonnegative, got {k}.")

    if history.dim != model.r:
        raise InvalidArgument(f"Model has r={model.r} but the history has {history.dim} columns.")

    if len(history) < model.order:
        raise InvalidArgument(f"AR({model.order}) needs {model.order} past values, got {len(history)}.")

    state = delay_embed(history.states[-model.order:], model.order)[-1]
    offset = None

    if model.intercept is not None:
        offset = np.zeros(state.size)
        offset[:model.r] = model.intercept

    values = propagate(model.companion(), state, k, model.r, offset)
    return ObservedSeries(values.reshape(k, model.r), step=history.step, start_index=history.end_index)
