"""Synthetic trajectories: circular motion, the Taylor-discretized Lorenz map
and a reference RK4 integration of the Lorenz field, plus observation noise
and the observed/missing split."""
import logging
from dataclasses import dataclass

import numpy as np

from arslack.errors import InvalidArgument, NumericOverflow
from arslack.regression import interaction_map
from arslack.series import ObservedSeries, Trajectory
from arslack.utils import rng

logger = logging.getLogger(__name__)

CIRCULAR_PHASE = 5.0
CIRCULAR_INCREMENT = 1 / 20
LORENZ_STEP = 1 / 200
LORENZ_START = (0.25, 0.25, 0.25)
LORENZ_BURN_IN = 100


@dataclass(frozen=True)
class LorenzParams(object):
    alpha: float = 10.0
    beta: float = 28.0
    gamma: float = 8 / 3

    def equilibria(self) -> list[np.ndarray]:
        """The three fixed points of the Lorenz field."""
        c = np.sqrt(self.gamma * (self.beta - 1)) if self.beta >= 1 else 0.0
        return [
            np.zeros(3),
            np.array([c, c, self.beta - 1]),
            np.array([-c, -c, self.beta - 1]),
        ]


@dataclass(frozen=True)
class NoiseConfig(object):
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidArgument(f"Noise sigma must be nonnegative, got {self.sigma}.")


@dataclass(frozen=True)
class MissingSpec(object):
    observed_dims: int
    missing_dims: int = 0

    def __post_init__(self):
        if self.observed_dims < 1 or self.missing_dims < 0:
            raise InvalidArgument(
                f"Need r >= 1 and s >= 0, got r={self.observed_dims}, s={self.missing_dims}.")

    @property
    def dim(self) -> int:
        return self.observed_dims + self.missing_dims


def gen_circular(n: int,
                 start_index: int = 0,
                 phase0: float = CIRCULAR_PHASE,
                 increment: float = CIRCULAR_INCREMENT) -> Trajectory:
    """Sample ``(cos(phase0 + j*increment), sin(phase0 + j*increment))`` for ``j = start_index, ...``."""
    if n < 2:
        raise InvalidArgument(f"Need n >= 2, got {n}.")

    phase = phase0 + (start_index + np.arange(n)) * increment
    states = np.column_stack([np.cos(phase), np.sin(phase)])

    return Trajectory(states, step=increment, start_index=start_index)


def lorenz_feature_matrix(params: LorenzParams = LorenzParams()) -> np.ndarray:
    """Coefficients of the Lorenz field on ``(x1, x2, x3, x1x2, x1x3, x2x3)``."""
    a, b, g = params.alpha, params.beta, params.gamma
    return np.array([
        [-a, a, 0, 0, 0, 0],
        [b, -1, 0, 0, -1, 0],
        [0, 0, -g, 1, 0, 0],
    ], dtype=float)


def lorenz_map_matrix(params: LorenzParams = LorenzParams()) -> np.ndarray:
    """The 3x6 matrix E with ``g(x) = E I(x)`` for the Taylor-discretized map."""
    identity = np.hstack([np.eye(3), np.zeros((3, 3))])
    return identity + LORENZ_STEP * lorenz_feature_matrix(params)


def lorenz_field(x, params: LorenzParams = LorenzParams()) -> np.ndarray:
    x1, x2, x3 = x
    return np.array([
        -params.alpha * x1 + params.alpha * x2,
        params.beta * x1 - x2 - x1 * x3,
        -params.gamma * x3 + x1 * x2,
    ])


def lorenz_taylor_map(x, params: LorenzParams = LorenzParams()) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x + LORENZ_STEP * (lorenz_feature_matrix(params) @ interaction_map(x))


def gen_lorenz(n: int,
               params: LorenzParams = LorenzParams(),
               x0=LORENZ_START,
               burn_in: int = LORENZ_BURN_IN) -> Trajectory:
    """Iterate the Taylor map `burn_in` times from `x0`, then record `n` states."""
    if n < 2:
        raise InvalidArgument(f"Need n >= 2, got {n}.")

    x = np.asarray(x0, dtype=float)
    states = np.empty((n, 3))

    for i in range(burn_in + n):
        if i >= burn_in:
            states[i - burn_in] = x

        if not np.all(np.isfinite(x)):
            raise NumericOverflow(f"Lorenz map diverged at step {i}.", step=i)

        if i < burn_in + n - 1:
            x = lorenz_taylor_map(x, params)

    return Trajectory(states, step=LORENZ_STEP)


def rk4_lorenz(x0,
               params: LorenzParams = LorenzParams(),
               dt: float = 1e-3,
               steps: int = 1000) -> Trajectory:
    """Classical fourth-order Runge-Kutta on the Lorenz field; returns ``steps + 1`` states."""
    if not dt > 0 or steps < 1:
        raise InvalidArgument(f"Need dt > 0 and steps >= 1, got dt={dt}, steps={steps}.")

    states = np.empty((steps + 1, 3))
    states[0] = x = np.asarray(x0, dtype=float)

    for i in range(1, steps + 1):
        k1 = lorenz_field(x, params)
        k2 = lorenz_field(x + 0.5 * dt * k1, params)
        k3 = lorenz_field(x + 0.5 * dt * k2, params)
        k4 = lorenz_field(x + dt * k3, params)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

        if not np.all(np.isfinite(x)):
            raise NumericOverflow(f"RK4 integration diverged at step {i}.", step=i)

        states[i] = x

    return Trajectory(states, step=dt)


def add_noise(traj: Trajectory, cfg: NoiseConfig) -> Trajectory:
    """Add i.i.d. N(0, sigma^2) to every coordinate; sigma 0 returns `traj` unchanged."""
    if cfg.sigma == 0:
        return traj

    noise = rng(cfg.seed).standard_normal(traj.states.shape) * cfg.sigma
    return Trajectory(traj.states + noise, step=traj.step, start_index=traj.start_index)


def _check_split(traj: Trajectory, spec: MissingSpec) -> None:
    if spec.dim != traj.dim:
        raise InvalidArgument(
            f"Missing spec covers {spec.dim} coordinates but the trajectory has {traj.dim}.")


def split_observed(traj: Trajectory, spec: MissingSpec) -> ObservedSeries:
    _check_split(traj, spec)
    return ObservedSeries(traj.states[:, :spec.observed_dims],
                          step=traj.step,
                          start_index=traj.start_index)


def split_missing(traj: Trajectory, spec: MissingSpec) -> np.ndarray:
    """The missing coordinates z† of `traj` as an ``(n, s)`` array."""
    _check_split(traj, spec)
    return np.array(traj.states[:, spec.observed_dims:])
