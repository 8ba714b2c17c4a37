"""Binomial-market option pricing by replication and risk-neutral expectation,
plus Monte Carlo pricing under the explicit geometric Brownian motion.

A one-period market has share price s0 moving to s0*u or s0*d and a bond
growing by 1+r. Without arbitrage (d < 1+r < u) every payoff is replicated
by a bond/share portfolio, and its setup cost equals the discounted payoff
expectation under the risk-neutral weight q = (1+r-d)/(u-d). Multi-period
prices run the same expectation backward down the recombining tree, under
which the discounted share price is a martingale; the stored real-world up
probability never enters a price.

In continuous time the share follows the explicit solution
S(t) = s0 * exp(mu t - sigma^2 t / 2 + sigma W(t)). Pricing replaces the
drift by the risk-free rate, the unique choice making the discounted price
a martingale in this family, and averages discounted payoffs over paths.
Monte Carlo sums use NumPy's pairwise summation, so the estimate is
reproducible for a fixed stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ArbitrageError
from .rng import RngStream
from .stats import mean_ci

OptionKind = Literal["call", "put"]


@dataclass(frozen=True)
class BinomialMarket:
    """One-period market primitives.

    ``p_up`` is the real-world up probability; it is carried for
    simulation only and deliberately ignored by every pricing routine.
    """

    s0: float
    u: float
    d: float
    r: float
    p_up: float = 0.5

    def __post_init__(self):
        if self.s0 <= 0:
            raise ValueError(f"share price must be positive, got {self.s0}")
        if not 0.0 < self.d < self.u:
            raise ValueError(f"need 0 < d < u, got d={self.d}, u={self.u}")
        if self.r <= -1.0:
            raise ValueError(f"rate must exceed -1, got {self.r}")
        if not 0.0 <= self.p_up <= 1.0:
            raise ValueError(f"p_up must lie in [0, 1], got {self.p_up}")

    @property
    def growth(self) -> float:
        """Per-period bond growth factor 1 + r."""
        return 1.0 + self.r


@dataclass(frozen=True)
class OptionSpec:
    """European option contract: strike, number of periods, call or put."""

    strike: float
    periods: int
    kind: OptionKind = "call"

    def __post_init__(self):
        if self.strike < 0:
            raise ValueError(f"strike must be non-negative, got {self.strike}")
        if self.periods < 1:
            raise ValueError(f"periods must be at least 1, got {self.periods}")
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be 'call' or 'put', got {self.kind!r}")

    def payoff(self, share_price):
        if self.kind == "call":
            return np.maximum(share_price - self.strike, 0.0)
        return np.maximum(self.strike - share_price, 0.0)


@dataclass(frozen=True)
class Portfolio:
    """Bond holding and share-value holding; negatives are borrowing/shorting."""

    bond: float
    shares_value: float

    @property
    def cost(self) -> float:
        return self.bond + self.shares_value


@dataclass(frozen=True)
class ArbitrageCheck:
    """No-arbitrage verdict with the exploiting direction when it fails."""

    ok: bool
    diagnostic: str


@dataclass(frozen=True)
class GbmParams:
    """Geometric Brownian motion: drift, volatility and the risk-free rate."""

    s0: float
    mu: float
    sigma: float
    r: float

    def __post_init__(self):
        if self.s0 <= 0:
            raise ValueError(f"share price must be positive, got {self.s0}")
        if self.sigma < 0:
            raise ValueError(f"volatility must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class PriceWithCI:
    """Monte Carlo price estimate with a symmetric confidence interval."""

    price: float
    ci_low: float
    ci_high: float
    level: float
    n_paths: int


@dataclass(frozen=True)
class TreePrice:
    """Backward-induction result: the price and the per-node value table.

    ``node_values[t][i]`` is the option value after t periods and i up
    moves.
    """

    price: float
    node_values: list[np.ndarray]


def check_no_arbitrage(market: BinomialMarket) -> ArbitrageCheck:
    """True exactly when d < 1 + r < u.

    Otherwise one side dominates: with 1 + r <= d, borrow and buy the
    share; with 1 + r >= u, sell the share and lend.
    """
    growth = market.growth
    if growth <= market.d:
        return ArbitrageCheck(False, "borrow and buy: the share dominates the bond")
    if growth >= market.u:
        return ArbitrageCheck(False, "sell and lend: the bond dominates the share")
    return ArbitrageCheck(True, "no arbitrage: d < 1 + r < u")


def _require_no_arbitrage(market: BinomialMarket) -> None:
    verdict = check_no_arbitrage(market)
    if not verdict.ok:
        raise ArbitrageError(verdict.diagnostic)


def risk_neutral_q(market: BinomialMarket) -> float:
    """q = (1 + r - d) / (u - d); independent of the real-world p_up."""
    _require_no_arbitrage(market)
    return (market.growth - market.d) / (market.u - market.d)


def replicate_one_period(
    market: BinomialMarket, payoff_up: float, payoff_down: float
) -> Portfolio:
    """Portfolio whose two terminal values match the payoffs exactly.

    Shares carry the payoff spread, the bond the residual:
    shares_value = (C_u - C_d)/(u - d) and
    bond = (u C_d - d C_u)/((1 + r)(u - d)).
    """
    _require_no_arbitrage(market)
    spread = market.u - market.d
    shares_value = (payoff_up - payoff_down) / spread
    bond = (market.u * payoff_down - market.d * payoff_up) / (market.growth * spread)
    return Portfolio(bond, shares_value)


def price_one_period(market: BinomialMarket, payoff_up: float, payoff_down: float) -> float:
    """Discounted risk-neutral expectation of the payoff pair."""
    q = risk_neutral_q(market)
    return (q * payoff_up + (1.0 - q) * payoff_down) / market.growth


def price_multi_period(market: BinomialMarket, option: OptionSpec) -> TreePrice:
    """Backward induction on the recombining tree s0 u^i d^(t-i)."""
    q = risk_neutral_q(market)
    t_final = option.periods
    ups = np.arange(t_final + 1)
    terminal_prices = market.s0 * market.u**ups * market.d ** (t_final - ups)
    values = [np.empty(0)] * (t_final + 1)
    values[t_final] = option.payoff(terminal_prices)
    for t in range(t_final - 1, -1, -1):
        nxt = values[t + 1]
        values[t] = (q * nxt[1:] + (1.0 - q) * nxt[:-1]) / market.growth
    return TreePrice(float(values[0][0]), values)


def discounted_martingale_defect(market: BinomialMarket, periods: int) -> float:
    """Largest one-step defect of the discounted share price over the tree.

    At each node the defect is
    |E_q[S(t+1)] / (1+r)^(t+1) - S(t) / (1+r)^t|; the identity
    q u + (1 - q) d = 1 + r makes it vanish under the risk-neutral weight.
    """
    if periods < 1:
        raise ValueError(f"periods must be at least 1, got {periods}")
    q = risk_neutral_q(market)
    worst = 0.0
    for t in range(periods):
        ups = np.arange(t + 1)
        prices = market.s0 * market.u**ups * market.d ** (t - ups)
        one_step = q * prices * market.u + (1.0 - q) * prices * market.d
        defect = np.abs(
            one_step / market.growth ** (t + 1) - prices / market.growth**t
        ).max()
        worst = max(worst, float(defect))
    return worst


def expectation_defect_under(market: BinomialMarket, p: float, periods: int) -> float:
    """Same one-step discounted defect but under an arbitrary up weight p.

    Nonzero in general unless p equals the risk-neutral q: the martingale
    property singles out q.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    worst = 0.0
    for t in range(periods):
        ups = np.arange(t + 1)
        prices = market.s0 * market.u**ups * market.d ** (t - ups)
        one_step = p * prices * market.u + (1.0 - p) * prices * market.d
        defect = np.abs(
            one_step / market.growth ** (t + 1) - prices / market.growth**t
        ).max()
        worst = max(worst, float(defect))
    return worst


def gbm_exact_sample(params: GbmParams, t: float, rng: RngStream) -> float:
    """One draw of S(t) from the closed-form solution; always positive."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    w = math.sqrt(t) * rng.standard_normal()
    return params.s0 * math.exp(
        params.mu * t - 0.5 * params.sigma**2 * t + params.sigma * w
    )


def mc_price_european(
    params: GbmParams,
    option: OptionSpec,
    n_paths: int,
    rng: RngStream,
    maturity: float | None = None,
    level: float = 0.99,
) -> PriceWithCI:
    """Monte Carlo price of a European option under the risk-neutral drift.

    Terminal prices follow
    S(T) = s0 exp((r - sigma^2/2) T + sigma sqrt(T) Z); discounted
    payoffs are averaged and interval-estimated at ``level``. ``maturity``
    defaults to the option's period count read as continuous time.
    """
    if n_paths < 100:
        raise ValueError(f"need at least 100 paths, got {n_paths}")
    t_final = float(option.periods) if maturity is None else float(maturity)
    if t_final < 0:
        raise ValueError(f"maturity must be non-negative, got {t_final}")
    z = rng.standard_normal(n_paths)
    terminal = params.s0 * np.exp(
        (params.r - 0.5 * params.sigma**2) * t_final
        + params.sigma * math.sqrt(t_final) * z
    )
    discounted = math.exp(-params.r * t_final) * option.payoff(terminal)
    if float(discounted.std(ddof=1)) == 0.0:
        price = float(discounted.mean())
        return PriceWithCI(price, price, price, level, n_paths)
    estimate = mean_ci(discounted, level)
    return PriceWithCI(estimate.mean, estimate.low, estimate.high, level, n_paths)


def crr_tree_market(params: GbmParams, maturity: float, n_steps: int) -> BinomialMarket:
    """Per-step binomial market matching the GBM moments under the pricing drift.

    Standard lattice calibration: u = exp(sigma sqrt(dt)), d = 1/u, and a
    per-step rate exp(r dt) - 1, so the tree price converges to the
    continuous one as steps grow.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}")
    if maturity <= 0:
        raise ValueError(f"maturity must be positive, got {maturity}")
    if params.sigma == 0:
        raise ValueError("a flat tree needs positive volatility")
    dt = maturity / n_steps
    u = math.exp(params.sigma * math.sqrt(dt))
    return BinomialMarket(params.s0, u, 1.0 / u, math.exp(params.r * dt) - 1.0)


def put_call_parity_gap(market: BinomialMarket, strike: float, periods: int) -> float:
    """call - put - (s0 - strike / (1+r)^periods); zero by linearity."""
    call = price_multi_period(market, OptionSpec(strike, periods, "call")).price
    put = price_multi_period(market, OptionSpec(strike, periods, "put")).price
    return call - put - (market.s0 - strike / market.growth**periods)
