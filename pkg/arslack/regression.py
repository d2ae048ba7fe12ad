"""Dense least-squares kernel.

Matrices follow the row convention: a design ``D`` holds one state (or feature
vector) per row and the fitted ``M`` predicts ``D_plus`` as ``D @ M``. The
transition matrix acting on column vectors is ``B = M.T``.

Every solve goes through one thin SVD ``D = U diag(s) V^T``. With ridge ``λ``:

    M = V diag(s / (s^2 + λ)) U^T D_plus
    H = U diag(s^2 / (s^2 + λ)) U^T
    loss = tr(D_plus^T (I - H) D_plus) = min_M |D_plus - D M|_F^2 + λ |M|_F^2

Because the loss is a minimum over ``M``, its derivatives with respect to the
data are those of the inner objective at the minimizer ``M*`` (envelope
theorem). With ``R = D_plus - D M*``::

    dloss/dD      = -2 R M*^T
    dloss/dD_plus =  2 R
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from arslack.errors import InvalidArgument, SingularMatrix

logger = logging.getLogger(__name__)

ESCALATION_FACTOR = 1e-10


@dataclass(frozen=True, eq=False)
class DesignPair(object):
    """Regressors ``D`` and targets ``D_plus`` sharing one row per transition."""

    D: np.ndarray
    D_plus: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        D_plus = np.atleast_2d(np.asarray(self.D_plus, dtype=float))

        if D.shape[0] != D_plus.shape[0]:
            raise InvalidArgument(f"D has {D.shape[0]} rows but D_plus has {D_plus.shape[0]}.")

        if D.shape[0] < 1:
            raise InvalidArgument("A design needs at least one row.")

        object.__setattr__(self, "D", D)
        object.__setattr__(self, "D_plus", D_plus)

    @property
    def rows(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class FitDiagnostics(object):
    residual_sum: float
    condition_hint: float
    ridge_used: float
    underdetermined: bool = False


@dataclass(frozen=True, eq=False)
class ProfiledFit(object):
    """Everything one least-squares solve yields."""

    M: np.ndarray
    residual: np.ndarray
    loss: float
    diagnostics: FitDiagnostics


def interaction_map(x) -> np.ndarray:
    """Append all distinct pairwise products to `x`.

    Accepts one vector of length ``d`` or a ``(m, d)`` array of rows; returns
    ``d (d + 1) / 2`` features per vector: the coordinates, then ``x_a x_b``
    for ``a < b`` in lexicographic order.
    """
    x = np.asarray(x, dtype=float)
    rows = np.atleast_2d(x)
    a, b = np.triu_indices(rows.shape[1], k=1)
    features = np.hstack([rows, rows[:, a] * rows[:, b]])

    return features[0] if x.ndim == 1 else features


def interaction_scale(scale) -> np.ndarray:
    """Diagonal of ``T`` with ``I(S x) = T I(x)`` for ``S = diag(scale)``."""
    scale = np.asarray(scale, dtype=float)
    a, b = np.triu_indices(scale.size, k=1)
    return np.concatenate([scale, scale[a] * scale[b]])


def interaction_pullback(rows: np.ndarray, feature_grad: np.ndarray) -> np.ndarray:
    """Chain a gradient with respect to ``interaction_map(rows)`` back onto `rows`."""
    d = rows.shape[1]
    a, b = np.triu_indices(d, k=1)
    grad = np.array(feature_grad[:, :d])
    products = feature_grad[:, d:]

    for column, (i, j) in enumerate(zip(a, b)):
        grad[:, i] += products[:, column] * rows[:, j]
        grad[:, j] += products[:, column] * rows[:, i]

    return grad


def build_design(series) -> DesignPair:
    """Pair each completed state with its successor.

    `series` is a `CompletedSeries` (or anything with ``states``) or an
    ``(n, d)`` array of states.
    """
    states = np.asarray(getattr(series, "states", series), dtype=float)

    if states.ndim != 2 or states.shape[0] < 2:
        raise InvalidArgument(f"Need at least 2 states to build a design, got shape {states.shape}.")

    return DesignPair(states[:-1], states[1:])


def build_interaction_design(series) -> DesignPair:
    """Like `build_design`, with regressor rows passed through `interaction_map`."""
    pair = build_design(series)
    return DesignPair(interaction_map(pair.D), pair.D_plus)


def escalated_ridge(pair: DesignPair) -> float:
    """Ridge used when the unregularized normal equations are singular."""
    mean_diagonal = float(np.sum(pair.D ** 2)) / pair.D.shape[1]
    return max(ESCALATION_FACTOR * mean_diagonal, np.finfo(float).tiny)


def _svd(pair: DesignPair):
    return scipy.linalg.svd(pair.D, full_matrices=False, lapack_driver="gesvd")


def _condition_hint(s: np.ndarray, columns: int) -> float:
    if s.size < columns or s[0] == 0:
        return 0.0

    return float(s[-1] / s[0])


def _raise_if_singular(pair: DesignPair, s: np.ndarray) -> float:
    condition = _condition_hint(s, pair.D.shape[1])

    if condition <= max(pair.D.shape) * np.finfo(float).eps:
        raise SingularMatrix(ridge=0.0, condition=condition)

    return condition


def _check_ridge(ridge: float) -> None:
    if not ridge >= 0:
        raise InvalidArgument(f"Ridge must be nonnegative, got {ridge}.")


def _solve(pair: DesignPair, ridge: float) -> ProfiledFit:
    _check_ridge(ridge)
    U, s, Vt = _svd(pair)
    columns = pair.D.shape[1]
    condition = _condition_hint(s, columns)

    if ridge == 0:
        _raise_if_singular(pair, s)

    projected = U.T @ pair.D_plus
    M = Vt.T @ ((s / (s ** 2 + ridge))[:, None] * projected)

    if ridge == 0:
        residual = pair.D_plus - U @ projected
        loss = float(np.sum(residual * residual))
    else:
        residual = pair.D_plus - pair.D @ M
        loss = max(float(np.sum(pair.D_plus * residual)), 0.0)

    diagnostics = FitDiagnostics(
        residual_sum=loss,
        condition_hint=condition,
        ridge_used=ridge,
        underdetermined=pair.rows < columns,
    )

    return ProfiledFit(M=M, residual=residual, loss=loss, diagnostics=diagnostics)


def fit_profiled(pair: DesignPair, ridge: float = 0.0, escalate: bool = True) -> ProfiledFit:
    """Solve the least-squares problem, escalating the ridge once if it is singular."""
    try:
        return _solve(pair, ridge)
    except SingularMatrix as error:
        if not escalate:
            raise

        handled = escalated_ridge(pair)
        logger.warning("%s Retrying with ridge=%g.", error, handled)
        return _solve(pair, handled)


def ols_fit(pair: DesignPair, ridge: float = 0.0) -> np.ndarray:
    """``M = (D^T D + ridge I)^-1 D^T D_plus``, computed without forming the inverse."""
    return _solve(pair, ridge).M


def hat_matrix(pair: DesignPair, ridge: float = 0.0) -> np.ndarray:
    """``H = D (D^T D + ridge I)^-1 D^T``."""
    _check_ridge(ridge)
    U, s, _ = _svd(pair)

    if ridge == 0:
        _raise_if_singular(pair, s)

    return (U * (s ** 2 / (s ** 2 + ridge))) @ U.T


def profiled_loss(pair: DesignPair, ridge: float = 0.0) -> float:
    """``tr(D_plus^T (I - H) D_plus)``."""
    return _solve(pair, ridge).loss


def profiled_gradient(pair: DesignPair, fit: ProfiledFit) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the profiled loss with respect to ``D`` and ``D_plus``."""
    return -2 * fit.residual @ fit.M.T, 2 * fit.residual
