"""Time series containers and their CSV codec.

States are stored 0-based as an ``(n, d)`` array together with the sampling
interval ``step`` and the index ``start_index`` of the first state, so the
state at row ``j`` sits at time ``(start_index + j) * step``.
"""
import csv
import logging
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from arslack.errors import InvalidArgument, SeriesFormatError
from arslack.utils import format_float

logger = logging.getLogger(__name__)


def _frozen_states(states) -> np.ndarray:
    array = np.array(states, dtype=float)

    if array.ndim == 1:
        array = array.reshape(-1, 1) if array.size else array.reshape(0, 1)

    if array.ndim != 2:
        raise InvalidArgument(f"States must be a 2-d array, got shape {array.shape}.")

    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Series(object):
    """A sequence of equally spaced real vectors."""

    states: np.ndarray
    step: float
    start_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen_states(self.states))
        object.__setattr__(self, "start_index", int(self.start_index))

        if not self.step > 0:
            raise InvalidArgument(f"Step must be positive, got {self.step}.")

        if self.states.shape[1] < 1:
            raise InvalidArgument("States must have at least one coordinate.")

    def __len__(self):
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.start_index * self.step + np.arange(len(self)) * self.step

    @property
    def end_index(self) -> int:
        """Index of the first time point after the series."""
        return self.start_index + len(self)


class Trajectory(Series):
    """Full ``d``-dimensional states of a dynamical system."""

    def __post_init__(self):
        super().__post_init__()

        if len(self) < 2:
            raise InvalidArgument(f"A trajectory needs at least 2 states, got {len(self)}.")


class ObservedSeries(Series):
    """The ``r`` observed coordinates of a trajectory, or a forecast of them.

    Unlike a trajectory it may be empty (a forecast of horizon 0).
    """


@dataclass(frozen=True, eq=False)
class CompletedSeries(object):
    """Observed coordinates paired with the slack series standing in for the missing ones."""

    observed: ObservedSeries
    slack: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.observed)
        slack = np.zeros((n, 0)) if self.slack is None else np.array(self.slack, dtype=float)

        if slack.ndim == 1:
            slack = slack.reshape(n, -1) if n else slack.reshape(0, 0)

        if slack.shape[0] != n:
            raise InvalidArgument(
                f"Slack has {slack.shape[0]} rows but the observed series has {n}.")

        slack.setflags(write=False)
        object.__setattr__(self, "slack", slack)

    def __len__(self):
        return len(self.observed)

    @property
    def r(self) -> int:
        return self.observed.dim

    @property
    def s_tilde(self) -> int:
        return self.slack.shape[1]

    @property
    def step(self) -> float:
        return self.observed.step

    @property
    def states(self) -> np.ndarray:
        """The completed states ``x‡_j = (z_j, slack_j)`` as an ``(n, r + s_tilde)`` array."""
        return np.hstack([self.observed.states, self.slack])


def write_series(series: Series, fp: TextIO) -> None:
    """Write `series` as CSV with header ``t,x1,...,xd``."""
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["t"] + [f"x{i + 1}" for i in range(series.dim)])

    for j, state in enumerate(series.states):
        t = series.start_index * series.step + j * series.step
        writer.writerow([format_float(t)] + [format_float(v) for v in state])


def read_series(fp: TextIO, step: float | None = None) -> ObservedSeries:
    """Read a CSV written by `write_series`.

    The step and start index are recovered from the time column; `step` must be
    given explicitly when the file holds fewer than two rows.
    """
    reader = csv.reader(fp)

    try:
        header = next(reader)
    except StopIteration:
        raise SeriesFormatError("empty file, expected a header", line=1)

    if not header or header[0].strip() != "t" or len(header) < 2:
        raise SeriesFormatError(f"expected header 't,x1,...', got {','.join(header)!r}", line=1)

    width = len(header)
    times, rows = [], []

    for line_number, row in enumerate(reader, start=2):
        if not row:
            continue

        if len(row) != width:
            raise SeriesFormatError(f"expected {width} fields, got {len(row)}", line=line_number)

        try:
            values = [float(v) for v in row]
        except ValueError as e:
            raise SeriesFormatError(str(e), line=line_number)

        times.append(values[0])
        rows.append(values[1:])

    if step is None:
        if len(times) < 2:
            raise SeriesFormatError("cannot infer the step from fewer than two rows")

        step = times[1] - times[0]

    if not step > 0:
        raise SeriesFormatError(f"time column is not increasing (step {step})")

    start_index = int(round(times[0] / step)) if times else 0
    states = np.array(rows, dtype=float).reshape(len(rows), width - 1)
    logger.debug("Read series with %d rows, %d columns, step %g", len(rows), width - 1, step)

    return ObservedSeries(states, step=step, start_index=start_index)
