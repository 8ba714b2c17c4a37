"""Finite-truncation machinery for Markov chains in continuous and discrete time.

A continuous-time chain on states 0..size-1 is described by its generator:
non-negative off-diagonal jump rates q_nm and diagonal -q_n with
q_n = sum_m q_nm, so rows sum to zero. The law p(t) then solves the
forward system

    dp_m/dt = -q_m p_m + sum_{k != m} p_k q_km,

integrated here with classical fixed-step RK4. Transition matrices are the
same integration started from unit masses; for constant rates they depend
on the elapsed time only, which is what the backward-consistency tests
exercise. Countable chains (queues, birth and death processes) enter after
truncation to a finite state window chosen so the neglected stationary
tail is below the test tolerances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import NonConvergenceError
from .rng import RngStream

#: default RK4 step as a fraction of the fastest holding rate
DEFAULT_STEP_FRACTION = 0.05
#: integration refuses steps above this fraction of the fastest rate
MAX_STEP_FRACTION = 0.1
#: negativity beyond this is instability, within it is rounding
NEGATIVITY_TOL = 1e-12

POWER_ITERATION_CAP = 10**6


class GeneratorMatrix:
    """Generator of a finite continuous-time Markov chain."""

    def __init__(self, matrix):
        q = np.asarray(matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("generator must be a square matrix")
        off = q.copy()
        np.fill_diagonal(off, 0.0)
        if (off < 0).any():
            raise ValueError("off-diagonal rates must be non-negative")
        if np.abs(q.sum(axis=1)).max() > NEGATIVITY_TOL:
            raise ValueError("generator rows must sum to zero")
        self.matrix = q
        self.matrix.setflags(write=False)

    @classmethod
    def from_transitions(cls, size: int, transitions) -> "GeneratorMatrix":
        """Build from (n, m, rate) triplets; diagonals are derived."""
        q = np.zeros((size, size))
        for n, m, rate in transitions:
            if n == m:
                raise ValueError("triplets must address off-diagonal entries")
            q[n, m] += rate
        np.fill_diagonal(q, -q.sum(axis=1))
        return cls(q)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def holding_rates(self) -> np.ndarray:
        """q_n, the total jump rate out of each state."""
        return -np.diag(self.matrix)

    @property
    def max_rate(self) -> float:
        return float(self.holding_rates.max())

    def default_dt(self) -> float:
        rate = self.max_rate
        if rate == 0.0:
            return 1.0
        return DEFAULT_STEP_FRACTION / rate

    def to_json(self) -> str:
        """Schema: {"size": n, "transitions": [[n, m, rate], ...]}."""
        triplets = [
            [int(n), int(m), float(self.matrix[n, m])]
            for n in range(self.size)
            for m in range(self.size)
            if n != m and self.matrix[n, m] > 0.0
        ]
        return json.dumps({"size": self.size, "transitions": triplets})

    @classmethod
    def from_json(cls, text: str) -> "GeneratorMatrix":
        doc = json.loads(text)
        return cls.from_transitions(doc["size"], doc["transitions"])


class TransitionMatrix:
    """Row-stochastic matrix of a discrete-time chain."""

    def __init__(self, entries):
        p = np.asarray(entries, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        if (p < -NEGATIVITY_TOL).any():
            raise ValueError("transition probabilities must be non-negative")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("transition matrix rows must sum to 1")
        self.matrix = np.clip(p, 0.0, None)
        self.matrix.setflags(write=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def to_json(self) -> str:
        """Schema: {"size": n, "rows": [[...], ...]}."""
        return json.dumps({"size": self.size, "rows": self.matrix.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "TransitionMatrix":
        doc = json.loads(text)
        rows = np.asarray(doc["rows"], dtype=float)
        if rows.shape != (doc["size"], doc["size"]):
            raise ValueError("row data does not match the declared size")
        return cls(rows)


@dataclass(frozen=True)
class BirthDeathRates:
    """Rates of a birth and death process truncated to states 0..n_max.

    ``birth[n]`` is the up-rate from state n for n = 0..n_max-1 and
    ``death[n-1]`` the down-rate from state n for n = 1..n_max; the
    up-rate out of the truncation boundary is structurally zero.
    """

    birth: np.ndarray
    death: np.ndarray

    def __post_init__(self):
        birth = np.asarray(self.birth, dtype=float)
        death = np.asarray(self.death, dtype=float)
        object.__setattr__(self, "birth", birth)
        object.__setattr__(self, "death", death)
        if birth.size != death.size or birth.size == 0:
            raise ValueError("birth and death sequences must have equal positive length")
        if (birth < 0).any():
            raise ValueError("birth rates must be non-negative")
        if (death <= 0).any():
            raise ValueError("death rates must be positive")

    @classmethod
    def constant(cls, birth_rate: float, death_rate: float, n_max: int) -> "BirthDeathRates":
        return cls(np.full(n_max, birth_rate), np.full(n_max, death_rate))

    @property
    def n_max(self) -> int:
        return self.birth.size


@dataclass(frozen=True)
class StatePath:
    """Piecewise-constant trajectory: states[i] holds on [jump_times[i], jump_times[i+1])."""

    jump_times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.jump_times, dtype=float)
        states = np.asarray(self.states, dtype=int)
        object.__setattr__(self, "jump_times", times)
        object.__setattr__(self, "states", states)
        if times.size != states.size or times.size == 0:
            raise ValueError("jump_times and states must have equal positive length")
        if times[0] != 0.0 or (np.diff(times) <= 0).any():
            raise ValueError("jump times must increase strictly from 0")

    def state_at(self, t: float) -> int:
        index = np.searchsorted(self.jump_times, t, "right") - 1
        return int(self.states[max(index, 0)])

    def occupation_times(self, horizon: float, n_states: int) -> np.ndarray:
        """Total time spent in each of 0..n_states-1 up to the horizon."""
        if horizon < self.jump_times[-1]:
            raise ValueError("horizon precedes the last recorded jump")
        bounds = np.append(self.jump_times, horizon)
        durations = np.diff(bounds)
        out = np.zeros(n_states)
        np.add.at(out, self.states, durations)
        return out


def birth_death_generator(rates: BirthDeathRates) -> GeneratorMatrix:
    """Tridiagonal generator with q_{n,n+1} = birth[n], q_{n,n-1} = death[n-1]."""
    size = rates.n_max + 1
    q = np.zeros((size, size))
    idx = np.arange(rates.n_max)
    q[idx, idx + 1] = rates.birth
    q[idx + 1, idx] = rates.death
    np.fill_diagonal(q, -q.sum(axis=1))
    return GeneratorMatrix(q)


def _resolve_dt(gen: GeneratorMatrix, duration: float, dt: float | None) -> tuple[int, float]:
    if dt is None:
        dt = gen.default_dt()
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    max_rate = gen.max_rate
    if max_rate > 0 and dt > MAX_STEP_FRACTION / max_rate + 1e-15:
        raise ValueError(
            f"dt={dt} is unstable for max rate {max_rate}; "
            f"need dt <= {MAX_STEP_FRACTION / max_rate}"
        )
    if duration == 0.0:
        return 0, dt
    steps = max(1, int(math.ceil(duration / dt - 1e-12)))
    return steps, duration / steps


def _rk4(rhs, state: np.ndarray, steps: int, dt: float) -> np.ndarray:
    y = state
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _clean_distribution(p: np.ndarray) -> np.ndarray:
    low = float(p.min())
    if low < -NEGATIVITY_TOL:
        raise ValueError(f"integration produced a negative probability {low}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def integrate_forward_law(
    gen: GeneratorMatrix, p0, t: float, dt: float | None = None
) -> np.ndarray:
    """Law p(t) of the chain from initial law p0, by RK4 on the forward system.

    The default step is ``0.05 / max_n q_n``; anything beyond twice that is
    rejected as unstable. Entries within rounding of zero are clipped and
    the vector renormalised; larger negativity raises.
    """
    p = np.asarray(p0, dtype=float)
    if p.shape != (gen.size,):
        raise ValueError(f"p0 must have length {gen.size}")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p0 must be a probability vector")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    steps, step = _resolve_dt(gen, t, dt)
    if steps == 0:
        return p.copy()
    q_t = np.ascontiguousarray(gen.matrix.T)
    p = _rk4(lambda v: q_t @ v, p, steps, step)
    return _clean_distribution(p)


def transition_probabilities(
    gen: GeneratorMatrix, s: float, t: float, dt: float | None = None
) -> TransitionMatrix:
    """P(s, t) for the time-homogeneous chain; row n starts from unit mass at n."""
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    steps, step = _resolve_dt(gen, t - s, dt)
    if steps == 0:
        return TransitionMatrix(np.eye(gen.size))
    q = gen.matrix
    rows = _rk4(lambda m: m @ q, np.eye(gen.size), steps, step)
    rows = np.clip(rows, 0.0, None)
    return TransitionMatrix(rows / rows.sum(axis=1, keepdims=True))


def chapman_kolmogorov_defect(
    gen: GeneratorMatrix, u: float, t: float, s: float, dt: float | None = None
) -> float:
    """Max-norm of P(u, s) - P(u, t) P(t, s)."""
    if not u <= t <= s:
        raise ValueError(f"need u <= t <= s, got {(u, t, s)}")
    direct = transition_probabilities(gen, u, s, dt).matrix
    left = transition_probabilities(gen, u, t, dt).matrix
    right = transition_probabilities(gen, t, s, dt).matrix
    return float(np.abs(direct - left @ right).max())


def stationary_birth_death(rates: BirthDeathRates) -> np.ndarray:
    """Stationary law by detailed balance: p_n proportional to prod birth/death."""
    masses = np.concatenate([[1.0], np.cumprod(rates.birth / rates.death)])
    total = masses.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError("stationary masses are degenerate on this truncation")
    return masses / total


@dataclass(frozen=True)
class StationaryResult:
    """Power-iteration fixed point with a uniqueness flag."""

    distribution: np.ndarray
    iterations: int
    unique: bool


def dtmc_stationary(
    p: TransitionMatrix,
    tol: float = 1e-12,
    start=None,
    max_iterations: int = POWER_ITERATION_CAP,
) -> StationaryResult:
    """Fixed point of left multiplication by power iteration.

    Starts from the uniform law unless ``start`` is given. Raises
    NonConvergenceError after ``max_iterations`` (periodic chains do this).
    The result is flagged non-unique when the chain has several closed
    communicating classes, in which case the fixed point depends on the
    start.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    matrix = p.matrix
    if start is None:
        pi = np.full(p.size, 1.0 / p.size)
    else:
        pi = np.asarray(start, dtype=float)
        if pi.shape != (p.size,) or (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-9:
            raise ValueError("start must be a probability vector of matching size")
    for iteration in range(1, max_iterations + 1):
        nxt = pi @ matrix
        if np.abs(nxt - pi).max() < tol:
            return StationaryResult(
                nxt / nxt.sum(), iteration, unique=_closed_class_count(p) == 1
            )
        pi = nxt
    raise NonConvergenceError(
        f"power iteration did not converge within {max_iterations} iterations"
    )


def _communicating_classes(p: TransitionMatrix) -> tuple[int, np.ndarray, np.ndarray]:
    adjacency = (p.matrix > 0.0).astype(np.int8)
    n_components, labels = connected_components(
        adjacency, directed=True, connection="strong"
    )
    closed = np.ones(n_components, dtype=bool)
    rows, cols = np.nonzero(adjacency)
    for r, c in zip(rows, cols):
        if labels[r] != labels[c]:
            closed[labels[r]] = False
    return n_components, labels, closed


def _closed_class_count(p: TransitionMatrix) -> int:
    _, _, closed = _communicating_classes(p)
    return int(closed.sum())


def classify_states(p: TransitionMatrix) -> list[str]:
    """Per-state label: absorbing, recurrent or transient.

    A state is absorbing when it keeps all its mass; recurrent when its
    communicating class is closed; transient otherwise.
    """
    _, labels, closed = _communicating_classes(p)
    out = []
    for n in range(p.size):
        if abs(p.matrix[n, n] - 1.0) <= NEGATIVITY_TOL:
            out.append("absorbing")
        elif closed[labels[n]]:
            out.append("recurrent")
        else:
            out.append("transient")
    return out


def simulate_ctmc(
    gen: GeneratorMatrix, start: int, horizon: float, rng: RngStream
) -> StatePath:
    """Exact jump-chain simulation: Exp(q_n) holding times, jumps by rate share."""
    if not 0 <= start < gen.size:
        raise ValueError(f"start state {start} outside 0..{gen.size - 1}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    rates = gen.holding_rates
    jump_probs = gen.matrix.copy()
    np.fill_diagonal(jump_probs, 0.0)
    cumulative = {}
    times = [0.0]
    states = [start]
    now = 0.0
    state = start
    while True:
        q_n = rates[state]
        if q_n <= 0.0:
            break
        now += float(rng.exponential(q_n))
        if now >= horizon:
            break
        if state not in cumulative:
            cumulative[state] = np.cumsum(jump_probs[state] / q_n)
        u = float(rng.uniform())
        state = int(np.searchsorted(cumulative[state], u, "right"))
        state = min(state, gen.size - 1)
        times.append(now)
        states.append(state)
    return StatePath(np.array(times), np.array(states))


def ergodic_time_average(path: StatePath, horizon: float) -> float:
    """Time-weighted average of the state value over [0, horizon]."""
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    occupation = path.occupation_times(horizon, int(path.states.max()) + 1)
    return float(occupation @ np.arange(occupation.size)) / horizon


def forward_rhs_norm(gen: GeneratorMatrix, p) -> float:
    """Max-norm of the forward-equation right-hand side at law p.

    Vanishes exactly at stationarity; used as the derivative test for
    candidate stationary laws.
    """
    p = np.asarray(p, dtype=float)
    return float(np.abs(p @ gen.matrix).max())


def truncation_level(ratio: float, tail: float = 1e-10) -> int:
    """Smallest n_max whose neglected geometric tail ratio^(n+1) is below tail."""
    if not 0 < ratio < 1:
        raise ValueError(f"geometric ratio must lie in (0, 1), got {ratio}")
    if not 0 < tail < 1:
        raise ValueError(f"tail must lie in (0, 1), got {tail}")
    return int(math.ceil(math.log(tail) / math.log(ratio)))
