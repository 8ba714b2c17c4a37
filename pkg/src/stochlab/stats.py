"""Estimation and goodness-of-fit utilities for the simulation tests.

Normal quantiles come from the standard library's ``statistics.NormalDist``
(deterministic, no extra dependency). Kolmogorov-Smirnov critical values
use the asymptotic form sqrt(-log(alpha / 2) / 2) / sqrt(n), tabulated for
alpha in {0.05, 0.01, 0.001}; chi-square critical values come from the
Wilson-Hilferty cube approximation of the chi-square quantile, which is
accurate to a fraction of a percent at the degrees of freedom used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

_STD_NORMAL = NormalDist()

# Asymptotic KS coefficients sqrt(-log(alpha/2)/2); table values 1.3581,
# 1.6276 and 1.9495.
KS_COEFFICIENTS = {
    0.05: math.sqrt(-math.log(0.05 / 2.0) / 2.0),
    0.01: math.sqrt(-math.log(0.01 / 2.0) / 2.0),
    0.001: math.sqrt(-math.log(0.001 / 2.0) / 2.0),
}


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with a symmetric confidence interval."""

    mean: float
    half_width: float
    level: float
    n: int

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be non-negative")
        if self.n < 2:
            raise ValueError("need at least two samples")
        if not 0.0 < self.level < 1.0:
            raise ValueError("confidence level must lie in (0, 1)")

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def covers(self, value: float) -> bool:
        return self.low <= value <= self.high


@dataclass(frozen=True)
class GofResult:
    """Outcome of a goodness-of-fit statistic against a reference law."""

    statistic: float
    critical_value: float
    alpha: float
    passed: bool
    df: int | None = None


def relative_frequency(occurrences: int, trials: int) -> float:
    """Fraction of trials in which the event occurred."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not 0 <= occurrences <= trials:
        raise ValueError("occurrences must lie in [0, trials]")
    return occurrences / trials


def mean_ci(samples, level: float = 0.95) -> EstimateWithCI:
    """Normal-quantile interval mean +- z * s / sqrt(n)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples")
    z = _STD_NORMAL.inv_cdf((1.0 + level) / 2.0)
    std = float(x.std(ddof=1))
    return EstimateWithCI(float(x.mean()), z * std / math.sqrt(x.size), level, x.size)


def batch_means_ci(samples, n_batches: int = 20, level: float = 0.99) -> EstimateWithCI:
    """Interval from batch means, for autocorrelated simulation output.

    Splits the sequence into ``n_batches`` contiguous batches of equal
    length (a short remainder is dropped) and applies :func:`mean_ci` to
    the batch averages.
    """
    x = np.asarray(samples, dtype=float)
    batch_len = x.size // n_batches
    if batch_len < 1:
        raise ValueError(f"{x.size} samples cannot fill {n_batches} batches")
    trimmed = x[: batch_len * n_batches].reshape(n_batches, batch_len)
    return mean_ci(trimmed.mean(axis=1), level)


def ks_statistic(samples, cdf, alpha: float = 0.001) -> GofResult:
    """One-sample Kolmogorov-Smirnov test against a continuous cdf.

    The statistic is the sup distance between the empirical and reference
    cdfs; pass/fail compares it with the tabulated asymptotic critical
    value at the given significance.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 10:
        raise ValueError("need at least 10 samples")
    if alpha not in KS_COEFFICIENTS:
        raise ValueError(f"alpha must be one of {sorted(KS_COEFFICIENTS)}")
    f = np.array([cdf(v) for v in x])
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - f))
    d_minus = float(np.max(f - (grid - 1.0 / n)))
    statistic = max(d_plus, d_minus)
    critical = KS_COEFFICIENTS[alpha] / math.sqrt(n)
    return GofResult(statistic, critical, alpha, statistic <= critical)


def _chi_square_critical(df: int, alpha: float) -> float:
    # Wilson-Hilferty: chi2_q(df) ~ df * (1 - 2/(9 df) + z * sqrt(2/(9 df)))^3.
    z = _STD_NORMAL.inv_cdf(1.0 - alpha)
    t = 1.0 - 2.0 / (9.0 * df) + z * math.sqrt(2.0 / (9.0 * df))
    return df * t**3


def chi_square_statistic(observed, expected, n: int, alpha: float = 0.001) -> GofResult:
    """Pearson chi-square of observed counts against expected probabilities.

    If the expected probabilities do not exhaust the law (a truncated pmf),
    a remainder bin absorbs the missing mass and the uncounted
    observations. Bins with expected count below 5 are pooled left to
    right (the final accumulator folds into the last kept bin), preserving
    the total count exactly; degrees of freedom are pooled bins minus one.
    """
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected, dtype=float)
    if obs.shape != probs.shape:
        raise ValueError("observed and expected must have the same length")
    if n < 1:
        raise ValueError("n must be at least 1")
    if alpha not in KS_COEFFICIENTS:
        raise ValueError(f"alpha must be one of {sorted(KS_COEFFICIENTS)}")
    missing_prob = 1.0 - float(probs.sum())
    missing_obs = n - float(obs.sum())
    if missing_obs < -1e-9 or missing_prob < -1e-9:
        raise ValueError("observed counts or expected probabilities exceed the total")
    if missing_prob > 1e-12:
        obs = np.append(obs, max(missing_obs, 0.0))
        probs = np.append(probs, missing_prob)

    o, e = pool_bins(obs, n * probs)
    if o.size < 2:
        raise ValueError("fewer than two bins after pooling; test is degenerate")
    statistic = float(((o - e) ** 2 / e).sum())
    df = o.size - 1
    critical = _chi_square_critical(df, alpha)
    return GofResult(statistic, critical, alpha, statistic <= critical, df=df)


def pool_bins(observed, expected_counts, minimum: float = 5.0):
    """Merge adjacent bins left to right until each expected count reaches
    the minimum; a trailing remainder folds into the last kept bin. Totals
    are preserved exactly."""
    pooled_obs: list[float] = []
    pooled_exp: list[float] = []
    acc_obs = acc_exp = 0.0
    for o, e in zip(observed, expected_counts):
        acc_obs += o
        acc_exp += e
        if acc_exp >= minimum:
            pooled_obs.append(acc_obs)
            pooled_exp.append(acc_exp)
            acc_obs = acc_exp = 0.0
    if acc_exp > 0.0 or acc_obs > 0.0:
        if pooled_obs:
            pooled_obs[-1] += acc_obs
            pooled_exp[-1] += acc_exp
        else:
            pooled_obs.append(acc_obs)
            pooled_exp.append(acc_exp)
    return np.array(pooled_obs), np.array(pooled_exp)
