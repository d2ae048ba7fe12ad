import logging
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.optimize

from arslack.errors import InvalidArgument
from arslack.utils import rng

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OptimSettings(object):
    """Settings of `minimize`.

    :param max_iters: BFGS iterations per start.
    :param grad_tol: Stop once the gradient norm falls below this value.
    :param loss_tol: Stop once an iteration lowers the loss by less than this fraction of it.
    :param restarts: Extra starts from the initial point plus Gaussian jitter.
    :param seed: Seed of the jitter.
    :param jitter: Standard deviation of the jitter.
    :param target_loss: Skip the remaining restarts once the best loss is at or below this value.
    """
    max_iters: int = 500
    grad_tol: float = 1e-8
    loss_tol: float = 1e-10
    restarts: int = 3
    seed: int = 0
    jitter: float = 0.1
    target_loss: float = 0.0
    c1: float = 1e-4
    c2: float = 0.9

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.loss_tol > 0):
            raise InvalidArgument("Optimizer tolerances must be positive.")

        if self.max_iters < 0 or self.restarts < 0:
            raise InvalidArgument("max_iters and restarts must be nonnegative.")

        if not 0 < self.c1 < self.c2 < 1:
            raise InvalidArgument(f"Wolfe constants need 0 < c1 < c2 < 1, got {self.c1}, {self.c2}.")


@dataclass(frozen=True, eq=False)
class OptimResult(object):
    argmin: np.ndarray
    loss: float
    iterations: int
    converged: bool
    restart_index: int = 0
    message: str = ""


def _line_search(objective, gradient, x, direction, g, f, settings):
    with warnings.catch_warnings():
        # LineSearchWarning is a RuntimeWarning; failure is reported through alpha=None
        warnings.simplefilter("ignore", RuntimeWarning)
        alpha, _, _, new_f, _, _ = scipy.optimize.line_search(
            objective, gradient, x, direction, gfk=g, old_fval=f,
            c1=settings.c1, c2=settings.c2, maxiter=30,
        )

    return alpha, new_f


def _bfgs(objective: Objective,
          gradient: Gradient,
          start: np.ndarray,
          settings: OptimSettings,
          restart_index: int) -> OptimResult:
    """Dense BFGS with a Wolfe line search from one start."""
    x = start
    f = float(objective(x))
    f_start = f
    g = np.asarray(gradient(x), dtype=float)
    identity = np.eye(x.size)
    H = identity / max(1.0, float(np.linalg.norm(g)))
    fresh = True
    iterations = 0

    while True:
        if np.linalg.norm(g) < settings.grad_tol:
            return OptimResult(x, f, iterations, True, restart_index, "gradient below tolerance")

        if iterations >= settings.max_iters:
            return OptimResult(x, f, iterations, False, restart_index, "iteration limit reached")

        direction = -H @ g
        alpha, new_f = _line_search(objective, gradient, x, direction, g, f, settings)

        if alpha is None or new_f is None or not np.isfinite(new_f) or new_f > f:
            if fresh:
                if iterations > 0 and f <= settings.loss_tol * f_start:
                    # no representable descent is left
                    return OptimResult(x, f, iterations, True, restart_index,
                                        "line search stalled at the precision floor")

                logger.debug("Line search failed at iteration %d (loss %g).", iterations, f)
                return OptimResult(x, f, iterations, False, restart_index, "line search failed")

            # retry along steepest descent before giving up
            H = identity / max(1.0, float(np.linalg.norm(g)))
            fresh = True
            continue

        step = alpha * direction
        new_x = x + step
        new_g = np.asarray(gradient(new_x), dtype=float)
        change = new_g - g
        curvature = float(change @ step)
        iterations += 1

        if curvature > 1e-12 * np.linalg.norm(step) * np.linalg.norm(change):
            if fresh:
                H = identity * (curvature / float(change @ change))

            rho = 1.0 / curvature
            left = identity - rho * np.outer(step, change)
            H = left @ H @ left.T + rho * np.outer(step, step)
            fresh = False

        decrease = f - float(new_f)
        x, f, g = new_x, float(new_f), new_g

        if decrease <= settings.loss_tol * abs(f + decrease):
            return OptimResult(x, f, iterations, True, restart_index, "loss decrease below tolerance")


def minimize(objective: Objective,
             gradient: Gradient,
             x0,
             settings: OptimSettings = OptimSettings()) -> OptimResult:
    """Minimize a smooth objective with BFGS, restarting from jittered copies of `x0`.

    Returns the result with the lowest loss over all starts.
    """
    x0 = np.array(x0, dtype=float).ravel()
    f0 = float(objective(x0))

    if not np.isfinite(f0) or not np.all(np.isfinite(gradient(x0))):
        raise InvalidArgument(f"Objective or gradient is not finite at the initial point (loss {f0}).")

    if x0.size == 0:
        return OptimResult(x0, f0, 0, True, 0, "no free parameters")

    generator = rng(settings.seed)
    best: OptimResult | None = None

    for index in range(settings.restarts + 1):
        start = x0 if index == 0 else x0 + settings.jitter * generator.standard_normal(x0.size)

        if index > 0 and not np.isfinite(objective(start)):
            logger.info("Skipping restart %d with non-finite initial loss.", index)
            continue

        result = _bfgs(objective, gradient, start, settings, index)
        logger.debug("Start %d: loss %g after %d iterations (%s).",
                     index, result.loss, result.iterations, result.message)

        if best is None or result.loss < best.loss:
            best = result

        if best.loss <= settings.target_loss:
            break

    return best


def check_gradient(objective: Objective, gradient: Gradient, x, fd_step: float = 1e-6) -> float:
    """Largest relative deviation of `gradient` from central differences of `objective` at `x`.

    Each coordinate contributes ``|analytic - fd| / max(1, |fd|)``.
    """
    if not fd_step > 0:
        raise InvalidArgument(f"fd_step must be positive, got {fd_step}.")

    x = np.array(x, dtype=float).ravel()
    analytic = np.asarray(gradient(x), dtype=float).ravel()
    worst = 0.0

    for i in range(x.size):
        offset = np.zeros_like(x)
        offset[i] = fd_step
        fd = (objective(x + offset) - objective(x - offset)) / (2 * fd_step)
        worst = max(worst, abs(analytic[i] - fd) / max(1.0, abs(fd)))

    return worst
