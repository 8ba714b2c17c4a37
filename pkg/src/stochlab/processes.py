"""Sample-path generators: Poisson process, random walk, Wiener process.

Paths are immutable once built and generation is pure given an RngStream,
so replications parallelise across sub-streams. Each path type exports as
CSV with (time, value) columns for external plotting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np

from .rng import RngStream
from .tabular import write_csv


@dataclass(frozen=True)
class ArrivalPath:
    """Arrival times of a counting process on (0, horizon]."""

    horizon: float
    arrival_times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.arrival_times, dtype=float)
        object.__setattr__(self, "arrival_times", times)
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if times.size:
            if (np.diff(times) <= 0).any():
                raise ValueError("arrival times must be strictly increasing")
            if times[0] <= 0 or times[-1] > self.horizon:
                raise ValueError("arrival times must lie in (0, horizon]")

    @property
    def count(self) -> int:
        return self.arrival_times.size

    def gaps(self) -> np.ndarray:
        """Interarrival gaps, the first measured from time 0."""
        return np.diff(self.arrival_times, prepend=0.0)

    def to_csv(self, target) -> None:
        """Piecewise-constant counting function, one row per jump."""
        rows = [(0.0, 0)]
        rows += [(float(t), i + 1) for i, t in enumerate(self.arrival_times)]
        write_csv(target, ("time", "value"), rows)


@dataclass(frozen=True)
class LatticePath:
    """Fair random walk on the integers started at 0."""

    steps: np.ndarray
    values: np.ndarray = field(init=False)

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=int)
        if steps.size == 0:
            raise ValueError("need at least one step")
        if not np.isin(steps, (-1, 1)).all():
            raise ValueError("steps must be -1 or +1")
        object.__setattr__(self, "steps", steps)
        values = np.concatenate([[0], np.cumsum(steps)])
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.steps.size

    def to_csv(self, target) -> None:
        rows = [(i, int(v)) for i, v in enumerate(self.values)]
        write_csv(target, ("time", "value"), rows)


@dataclass(frozen=True)
class WienerPath:
    """Wiener process values on a given time grid, starting at W_0 = 0."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.size != values.size:
            raise ValueError("grid and values must have equal length")
        if grid.size == 0 or grid[0] != 0.0 or (np.diff(grid) <= 0).any():
            raise ValueError("grid must be strictly increasing from 0")
        if values[0] != 0.0:
            raise ValueError("a Wiener path starts at 0")

    def to_csv(self, target) -> None:
        write_csv(target, ("time", "value"), zip(self.grid, self.values))


def simulate_poisson_process(rate: float, horizon: float, rng: RngStream) -> ArrivalPath:
    """Arrivals on (0, horizon] from cumulative exponential interarrivals."""
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    expected = rate * horizon
    block = max(16, int(expected + 6.0 * math.sqrt(expected) + 10))
    times = np.cumsum(rng.exponential(rate, block))
    while times[-1] <= horizon:
        extension = times[-1] + np.cumsum(rng.exponential(rate, block))
        times = np.concatenate([times, extension])
    return ArrivalPath(horizon, times[times <= horizon])


def count_in_interval(path: ArrivalPath, a: float, b: float) -> int:
    """Number of arrivals in the half-open interval (a, b]."""
    if not 0 <= a <= b <= path.horizon:
        raise ValueError(f"need 0 <= a <= b <= horizon, got a={a}, b={b}")
    times = path.arrival_times
    return int(np.searchsorted(times, b, "right") - np.searchsorted(times, a, "right"))


def simulate_random_walk(n_steps: int, rng: RngStream) -> LatticePath:
    """Fair +-1 walk; each step is +1 when its uniform falls below 1/2."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}")
    steps = np.where(rng.uniform(n_steps) < 0.5, 1, -1)
    return LatticePath(steps)


def rescale_walk(path: LatticePath, big_n: int, t: float) -> float:
    """Diffusive rescaling X_floor(N t) / sqrt(N) of a walk."""
    if big_n < 1:
        raise ValueError(f"N must be at least 1, got {big_n}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    index = int(math.floor(big_n * t))
    if index > path.n_steps:
        raise ValueError(f"path has {path.n_steps} steps, needs at least {index}")
    return float(path.values[index]) / math.sqrt(big_n)


def simulate_wiener(grid, rng: RngStream) -> WienerPath:
    """Wiener path from independent Normal(0, dt) increments on the grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or grid[0] != 0.0 or (np.diff(grid) <= 0).any():
        raise ValueError("grid must be strictly increasing from 0")
    dt = np.diff(grid)
    increments = np.sqrt(dt) * rng.standard_normal(dt.size)
    values = np.concatenate([[0.0], np.cumsum(increments)])
    return WienerPath(grid, values)
