from typing import Iterable

import numpy as np


def format_float(value: float) -> str:
    """Format a float with 17 significant digits so it survives a text round trip."""
    return format(float(value), ".17g")


def rng(seed: int) -> np.random.Generator:
    """Return the portable PCG64 generator used for every random draw in the package."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seeds(seed: int, count: int) -> list[int]:
    """Derive `count` independent 64-bit seeds from `seed`."""
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def sample_std(values: Iterable[float]) -> float:
    values = np.asarray(list(values), dtype=float)

    if values.size < 2:
        return 0.0

    return float(np.std(values, ddof=1))
