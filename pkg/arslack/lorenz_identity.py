"""Check that the first Lorenz coordinate alone obeys a third-order ODE.

Eliminating ``x2`` and ``x3`` from the Lorenz field gives, with
``x = x1`` and ``W = x1 x3 = (beta - 1) x - (1 + 1/alpha) x' - x''/alpha``::

    x W' - x' W + gamma x W - x^3 (x + x'/alpha) = 0

which expands to ``sum_k Q_k(x, x') x^(k) = 0`` with

    Q3 = -x/alpha
    Q2 = -((1 + alpha + gamma)/alpha) x + x'/alpha
    Q1 = (1 + 1/alpha) x' - gamma (1 + 1/alpha) x - x^3/alpha
    Q0 = gamma (beta - 1) x - x^3           (multiplies x itself)

`lorenz_ode_residual` evaluates this identity and the single-variable
polynomials ``P_k(x)`` of the published form side by side on a finely
integrated trajectory. The published polynomials do not vanish at the
equilibria, so only the exact identity cancels to truncation error.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from arslack.dynamics import LorenzParams, rk4_lorenz
from arslack.errors import InvalidArgument

logger = logging.getLogger(__name__)

DEFAULT_START = (1.0, 1.0, 1.0)


@dataclass(frozen=True, eq=False)
class OdeResidualReport(object):
    """Residuals of both forms of the identity at each evaluation time.

    ``*_terms[i, k]`` is the k-th summand at time ``times[i]`` and the
    residual is the row sum.
    """
    times: np.ndarray
    x: np.ndarray
    derivatives: np.ndarray
    listed_terms: np.ndarray
    exact_terms: np.ndarray
    dt: float

    @property
    def listed_residual(self) -> np.ndarray:
        return self.listed_terms.sum(axis=1)

    @property
    def exact_residual(self) -> np.ndarray:
        return self.exact_terms.sum(axis=1)

    @property
    def relative_residual(self) -> np.ndarray:
        """``|exact residual| / max_k |exact term|`` per time point."""
        scale = np.max(np.abs(self.exact_terms), axis=1)
        return np.abs(self.exact_residual) / np.where(scale > 0, scale, 1.0)


def listed_polynomials(params: LorenzParams = LorenzParams()) -> list[Callable[[float], float]]:
    """``[P0, P1, P2, P3]`` as printed for the Lorenz parameters."""
    a, b, g = params.alpha, params.beta, params.gamma

    return [
        lambda x: (1 - b) - (1 - b) * g * x,
        lambda x: (1 + a) / a - ((1 + a) * g / a - (1 - b)) * x - x ** 3,
        lambda x: 1 / a - ((1 + a + g) / a) * x - x ** 3 / a,
        lambda x: -x / a,
    ]


def exact_terms(x, derivatives, params: LorenzParams = LorenzParams()) -> np.ndarray:
    """Summands ``Q_k x^(k)`` of the exact identity, one row per point.

    `derivatives` holds ``(x', x'', x''')`` per row.
    """
    a, b, g = params.alpha, params.beta, params.gamma
    x = np.asarray(x, dtype=float)
    d1, d2, d3 = np.asarray(derivatives, dtype=float).T

    return np.column_stack([
        (g * (b - 1) * x - x ** 3) * x,
        ((1 + 1 / a) * d1 - g * (1 + 1 / a) * x - x ** 3 / a) * d1,
        (-((1 + a + g) / a) * x + d1 / a) * d2,
        -x / a * d3,
    ])


def central_derivatives(values: np.ndarray, index: int, dt: float) -> np.ndarray:
    """First three derivatives of a sampled function by central differences.

    Second-order stencils throughout; the third derivative uses the points
    ``index - 2 .. index + 2``.
    """
    if index < 2 or index + 2 >= values.size:
        raise InvalidArgument(f"Index {index} is too close to the edge of a series of length {values.size}.")

    m2, m1, c, p1, p2 = values[index - 2:index + 3]

    return np.array([
        (p1 - m1) / (2 * dt),
        (p1 - 2 * c + m1) / dt ** 2,
        (p2 - 2 * p1 + 2 * m1 - m2) / (2 * dt ** 3),
    ])


def lorenz_ode_residual(dt: float = 1e-4,
                        params: LorenzParams = LorenzParams(),
                        t_points: Sequence[float] | None = None,
                        x0=DEFAULT_START) -> OdeResidualReport:
    """Integrate the Lorenz field with RK4 at step `dt` and evaluate both identities at `t_points`.

    Each time is snapped to the nearest grid point. The default evaluates 50
    times evenly spread over ``[0.5, 1.5]``.
    """
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt}.")

    times = np.linspace(0.5, 1.5, 50) if t_points is None else np.asarray(t_points, dtype=float)

    if times.size == 0:
        raise InvalidArgument("Need at least one evaluation time.")

    indices = np.rint(times / dt).astype(int)

    if np.any(indices < 2):
        raise InvalidArgument(f"Time {times[np.argmin(indices)]} is too close to the start of the trajectory.")

    trajectory = rk4_lorenz(x0, params, dt, int(indices.max()) + 2)
    x1 = trajectory.states[:, 0]
    derivatives = np.array([central_derivatives(x1, i, dt) for i in indices])
    x = x1[indices]

    polynomials = listed_polynomials(params)
    orders = np.column_stack([x, derivatives])
    listed = np.column_stack([p(x) * orders[:, k] for k, p in enumerate(polynomials)])

    report = OdeResidualReport(
        times=indices * dt,
        x=x,
        derivatives=derivatives,
        listed_terms=listed,
        exact_terms=exact_terms(x, derivatives, params),
        dt=dt,
    )
    logger.debug("dt=%g: max relative exact residual %g", dt, float(np.max(report.relative_residual)))

    return report


def residual_rows(report: OdeResidualReport) -> list[dict[str, float]]:
    """One flat record per time point, for CSV output."""
    return [
        {
            "t": float(t),
            "x1": float(x),
            "listed_residual": float(listed),
            "exact_residual": float(exact),
            "max_term": float(np.max(np.abs(terms))),
            "dt": report.dt,
        }
        for t, x, listed, exact, terms in zip(report.times, report.x, report.listed_residual,
                                              report.exact_residual, report.exact_terms)
    ]
