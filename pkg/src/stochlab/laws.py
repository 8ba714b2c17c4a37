"""Parametric probability laws and elementary probability algebra.

Discrete laws live on the non-negative integers and expose ``pmf``,
``tail`` (strict upper tail P{X > k}), ``moments`` and seeded ``sample``.
Continuous laws expose ``density``, ``cdf``, ``moments``, ``sample`` and a
scalar ``draw``. Law objects are immutable value types, safe to share; all
sampling goes through an :class:`~stochlab.rng.RngStream` owned by the
caller.

Numerical conventions, frozen because tests depend on them:

* binomial pmfs are computed in log space through ``math.lgamma`` and
  exponentiated, stable up to trial counts of about 1e6;
* moments of discrete laws are summed as series, truncated once the
  remaining tail mass falls below ``TAIL_EPS = 1e-14``;
* the normal cdf is ``0.5 * erfc(-z / sqrt(2))`` with the C math
  library's double-precision complementary error function (absolute
  error well below 1e-12);
* samplers: inverse cdf for exponential, geometric and finite laws,
  Box-Muller pairs for normals, exponential-interarrival counting for
  Poisson draws, Bernoulli sums for binomial draws.

The geometric law counts failures before the first success, so its
support starts at k = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

TAIL_EPS = 1e-14
_PROB_SLACK = 1e-12
_SERIES_CAP = 10**7


@dataclass(frozen=True)
class LawSummary:
    """First two moments of a law."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            if self.variance > -1e-12:
                object.__setattr__(self, "variance", 0.0)
            else:
                raise ValueError(f"variance must be non-negative, got {self.variance}")


def _check_probability(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return float(value)


# ---------------------------------------------------------------------------
# elementary probability algebra
# ---------------------------------------------------------------------------

def union_probability(p_a: float, p_b: float, p_ab: float) -> float:
    """P(A or B) from P(A), P(B) and P(A and B).

    Probabilities behave like areas: the overlap was counted twice, so
    subtract it once. Inconsistent inputs (an intersection larger than a
    marginal, or a union outside [0, 1]) raise ValueError.
    """
    _check_probability("p_a", p_a)
    _check_probability("p_b", p_b)
    _check_probability("p_ab", p_ab)
    if p_ab > min(p_a, p_b) + _PROB_SLACK:
        raise ValueError(
            f"p_ab={p_ab} exceeds min(p_a, p_b)={min(p_a, p_b)}: inconsistent events"
        )
    result = p_a + p_b - p_ab
    if result > 1.0 + _PROB_SLACK or result < -_PROB_SLACK:
        raise ValueError(f"union probability {result} falls outside [0, 1]")
    return min(max(result, 0.0), 1.0)


def conditional_probability(p_ab: float, p_b: float) -> float:
    """P(A | B) = P(A and B) / P(B).

    Independence of A and B holds exactly when the result equals P(A).
    Conditioning on a null event (p_b = 0) raises ValueError.
    """
    _check_probability("p_ab", p_ab)
    _check_probability("p_b", p_b)
    if p_b == 0.0:
        raise ValueError("cannot condition on a null event (p_b = 0)")
    if p_ab > p_b + _PROB_SLACK:
        raise ValueError(f"p_ab={p_ab} exceeds p_b={p_b}: inconsistent events")
    return min(p_ab / p_b, 1.0)


# ---------------------------------------------------------------------------
# discrete laws
# ---------------------------------------------------------------------------

class DiscreteLaw:
    """Law on the non-negative integers.

    Subclasses implement ``pmf`` and ``sample`` and report a finite
    support bound where one exists; ``tail`` and ``moments`` have generic
    series implementations that closed-form subclasses override or reuse.
    """

    def pmf(self, k: int) -> float:
        """P{X = k}; zero outside the support."""
        raise NotImplementedError

    def support_bound(self) -> int | None:
        """Largest k with positive mass, or None for unbounded support."""
        return None

    def tail(self, k: int) -> float:
        """Strict upper tail P{X > k} = 1 - sum_{j<=k} pmf(j)."""
        if k < 0:
            return 1.0
        bound = self.support_bound()
        if bound is not None and k >= bound:
            return 0.0
        cumulative = math.fsum(self.pmf(j) for j in range(int(k) + 1))
        return max(0.0, 1.0 - cumulative)

    def moments(self) -> LawSummary:
        """Mean and variance by direct series summation.

        Finite supports are summed exactly; unbounded ones are truncated
        once the remaining mass drops below ``TAIL_EPS``.
        """
        bound = self.support_bound()
        total = mean_acc = second_acc = 0.0
        k = 0
        while True:
            p = self.pmf(k)
            total += p
            mean_acc += k * p
            second_acc += k * k * p
            if bound is not None and k >= bound:
                break
            if bound is None and 1.0 - total < TAIL_EPS:
                break
            k += 1
            if k > _SERIES_CAP:
                raise RuntimeError("moment series did not reach the tail threshold")
        variance = max(second_acc - mean_acc * mean_acc, 0.0)
        return LawSummary(mean_acc, variance)

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        """``count`` independent draws as a float array."""
        raise NotImplementedError


def _require_count(count: int) -> int:
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    return int(count)


@dataclass(frozen=True)
class Binomial(DiscreteLaw):
    """Number of successes in n independent trials with success probability p."""

    n: int
    p: float

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"trial count must be non-negative, got {self.n}")
        _check_probability("p", self.p)

    def pmf(self, k: int) -> float:
        n, p = self.n, self.p
        if k < 0 or k > n:
            return 0.0
        if p == 0.0:
            return 1.0 if k == 0 else 0.0
        if p == 1.0:
            return 1.0 if k == n else 0.0
        log_pmf = (
            math.lgamma(n + 1)
            - math.lgamma(k + 1)
            - math.lgamma(n - k + 1)
            + k * math.log(p)
            + (n - k) * math.log1p(-p)
        )
        return math.exp(log_pmf)

    def support_bound(self) -> int:
        return self.n

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        count = _require_count(count)
        if self.n == 0:
            return np.zeros(count)
        out = np.empty(count)
        # Bernoulli sums, chunked so the uniform block stays modest.
        chunk = max(1, 10**7 // max(self.n, 1))
        for start in range(0, count, chunk):
            stop = min(start + chunk, count)
            u = rng.uniform((stop - start, self.n))
            out[start:stop] = (u < self.p).sum(axis=1)
        return out


@dataclass(frozen=True)
class Geometric(DiscreteLaw):
    """Failures before the first success; support starts at k = 0."""

    p: float

    def __post_init__(self):
        _check_probability("p", self.p)
        if self.p == 0.0:
            raise ValueError("success probability must be positive")

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        if self.p == 1.0:
            return 1.0 if k == 0 else 0.0
        return math.exp(k * math.log1p(-self.p)) * self.p

    def tail(self, k: int) -> float:
        # Closed form (1 - p)^(k + 1); the memoryless identity
        # tail(m + k) = tail(m) * tail(k) is exact in this representation.
        if k < 0:
            return 1.0
        if self.p == 1.0:
            return 0.0
        return math.exp((k + 1) * math.log1p(-self.p))

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        count = _require_count(count)
        if self.p == 1.0:
            return np.zeros(count)
        u = rng.uniform(count)
        return np.floor(np.log1p(-u) / math.log1p(-self.p))


@dataclass(frozen=True)
class Poisson(DiscreteLaw):
    """Poisson law; the rate is the expected number of arrivals per unit time."""

    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        return math.exp(k * math.log(self.rate) - self.rate - math.lgamma(k + 1))

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        """Counts of unit-rate exponential interarrivals inside [0, rate]."""
        count = _require_count(count)
        counts = np.zeros(count)
        clocks = rng.exponential(1.0, count)
        active = clocks < self.rate
        while active.any():
            counts[active] += 1
            clocks[active] += rng.exponential(1.0, int(active.sum()))
            active = clocks < self.rate
        return counts


@dataclass(frozen=True)
class FiniteUniform(DiscreteLaw):
    """Equiprobable outcomes 1..size, the balanced-die law."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"size must be at least 1, got {self.size}")

    def pmf(self, k: int) -> float:
        return 1.0 / self.size if 1 <= k <= self.size else 0.0

    def support_bound(self) -> int:
        return self.size

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        count = _require_count(count)
        return np.floor(rng.uniform(count) * self.size) + 1.0


class Explicit(DiscreteLaw):
    """Law given by an explicit pmf table over 0..len(probs)-1."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("pmf table must be a non-empty 1-d sequence")
        if (probs < 0).any():
            raise ValueError("pmf entries must be non-negative")
        if abs(probs.sum() - 1.0) > _PROB_SLACK:
            raise ValueError(f"pmf entries sum to {probs.sum()}, not 1")
        self.probs = probs
        self._cumulative = np.cumsum(probs)

    def __repr__(self) -> str:
        return f"Explicit(probs={self.probs!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Explicit) and np.array_equal(self.probs, other.probs)

    def pmf(self, k: int) -> float:
        if 0 <= k < self.probs.size:
            return float(self.probs[int(k)])
        return 0.0

    def support_bound(self) -> int:
        return self.probs.size - 1

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        count = _require_count(count)
        u = rng.uniform(count)
        idx = np.searchsorted(self._cumulative, u, side="right")
        return np.minimum(idx, self.probs.size - 1).astype(float)


def induced_law(domain_size: int, outcome_map) -> Explicit:
    """Pushforward of the equiprobable law on 0..domain_size-1.

    ``outcome_map`` sends each outcome index to a non-negative integer
    value; the result assigns each value the fraction of outcomes mapped
    onto it.
    """
    if domain_size < 1:
        raise ValueError(f"domain_size must be at least 1, got {domain_size}")
    values = [outcome_map(omega) for omega in range(domain_size)]
    for v in values:
        if int(v) != v or v < 0:
            raise ValueError(f"mapped values must be non-negative integers, got {v!r}")
    counts = np.zeros(int(max(values)) + 1)
    for v in values:
        counts[int(v)] += 1.0
    return Explicit(counts / domain_size)


# ---------------------------------------------------------------------------
# continuous laws
# ---------------------------------------------------------------------------

class ContinuousLaw:
    """Law on the reals with a density."""

    def density(self, x: float) -> float:
        raise NotImplementedError

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def moments(self) -> LawSummary:
        raise NotImplementedError

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        raise NotImplementedError

    def draw(self, rng: RngStream) -> float:
        """Single draw, for event loops."""
        return float(self.sample(rng, 1)[0])


@dataclass(frozen=True)
class Exponential(ContinuousLaw):
    """Exponential law; rate per unit time, support on the non-negative reals."""

    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    def density(self, x: float) -> float:
        return self.rate * math.exp(-self.rate * x) if x >= 0 else 0.0

    def cdf(self, x: float) -> float:
        return -math.expm1(-self.rate * x) if x >= 0 else 0.0

    def moments(self) -> LawSummary:
        return LawSummary(1.0 / self.rate, 1.0 / self.rate**2)

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        return rng.exponential(self.rate, _require_count(count))

    def draw(self, rng: RngStream) -> float:
        return float(rng.exponential(self.rate))


@dataclass(frozen=True)
class Normal(ContinuousLaw):
    """Gaussian law parameterised by mean and variance."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError(f"variance must be positive, got {self.sigma2}")

    def density(self, x: float) -> float:
        z = (x - self.mu) ** 2 / (2.0 * self.sigma2)
        return math.exp(-z) / math.sqrt(2.0 * math.pi * self.sigma2)

    def cdf(self, x: float) -> float:
        # 0.5 * erfc(-z / sqrt(2)) with the C library erfc: accurate to
        # double precision, far inside the 1e-12 budget.
        z = (x - self.mu) / math.sqrt(self.sigma2)
        return 0.5 * math.erfc(-z / math.sqrt(2.0))

    def moments(self) -> LawSummary:
        return LawSummary(self.mu, self.sigma2)

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        z = rng.standard_normal(_require_count(count))
        return self.mu + math.sqrt(self.sigma2) * z

    def draw(self, rng: RngStream) -> float:
        return self.mu + math.sqrt(self.sigma2) * rng.standard_normal()


@dataclass(frozen=True)
class Uniform(ContinuousLaw):
    """Uniform law on the interval [a, b]."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")

    def density(self, x: float) -> float:
        return 1.0 / (self.b - self.a) if self.a <= x <= self.b else 0.0

    def cdf(self, x: float) -> float:
        if x <= self.a:
            return 0.0
        if x >= self.b:
            return 1.0
        return (x - self.a) / (self.b - self.a)

    def moments(self) -> LawSummary:
        return LawSummary((self.a + self.b) / 2.0, (self.b - self.a) ** 2 / 12.0)

    def sample(self, rng: RngStream, count: int) -> np.ndarray:
        return self.a + (self.b - self.a) * rng.uniform(_require_count(count))

    def draw(self, rng: RngStream) -> float:
        return self.a + (self.b - self.a) * float(rng.uniform())
