"""M/M/1 analytics, a cross-checking discrete-event simulator, and an
(r, s) inventory model.

The analytic side evaluates the closed steady-state forms of the
single-server Markov queue: geometric state law p_n = rho^n (1 - rho),
E[N] = rho / (1 - rho), E[N_q] = rho^2 / (1 - rho), the waiting-time law
with its atom 1 - rho at zero, and E[T_q] = lambda / (mu (mu - lambda)).
The simulator is an independent event-driven FIFO implementation whose
long-run statistics must reproduce those forms; transient laws delegate to
the generator integration in :mod:`stochlab.markov`.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import NoSteadyStateError
from .laws import ContinuousLaw
from .markov import (
    BirthDeathRates,
    GeneratorMatrix,
    birth_death_generator,
    integrate_forward_law,
    truncation_level,
)
from .rng import RngStream
from .tabular import write_csv

#: fraction of customers discarded before collecting statistics
DEFAULT_WARMUP_FRACTION = 0.1


@dataclass(frozen=True)
class MM1Params:
    """Arrival and service rates of the single-server Markov queue.

    ``service_rate`` may be zero only for transient pure-arrival analysis;
    every steady-state or simulation operation requires it positive.
    """

    arrival_rate: float
    service_rate: float

    def __post_init__(self):
        if self.arrival_rate <= 0:
            raise ValueError(f"arrival rate must be positive, got {self.arrival_rate}")
        if self.service_rate < 0:
            raise ValueError(f"service rate must be non-negative, got {self.service_rate}")

    @property
    def rho(self) -> float:
        """Traffic intensity lambda / mu."""
        if self.service_rate == 0:
            raise NoSteadyStateError("service rate is zero; the queue grows forever")
        return self.arrival_rate / self.service_rate


@dataclass(frozen=True)
class MM1Analysis:
    """Steady-state summary of an M/M/1 queue."""

    rho: float
    p: np.ndarray
    expected_users: float
    expected_queue: float
    expected_wait: float
    expected_sojourn: float


@dataclass(frozen=True)
class QueueSimResult:
    """Post-warm-up statistics of one simulated FIFO run.

    ``state_fractions[n]`` is the fraction of observed time with n users
    in the system; ``duration`` is the observation window length.
    """

    per_customer_wait: np.ndarray
    per_customer_sojourn: np.ndarray
    time_avg_users: float
    time_avg_queue: float
    utilization: float
    completed: int
    duration: float
    state_fractions: np.ndarray
    events: list[tuple[float, str, int]] | None = None

    def __post_init__(self):
        if (self.per_customer_wait < 0).any():
            raise ValueError("waits must be non-negative")
        if not 0.0 <= self.utilization <= 1.0:
            raise ValueError("utilization must lie in [0, 1]")

    def events_to_csv(self, target) -> None:
        """Event log as (time, event_kind, state-after-event) rows."""
        if self.events is None:
            raise ValueError("run the simulation with record_events=True")
        write_csv(target, ("time", "event_kind", "state"), self.events)


@dataclass(frozen=True)
class LittleResidual:
    """Absolute Little's-law defects for the system and the queue."""

    system: float
    queue: float


@dataclass(frozen=True)
class InventoryPolicy:
    """(r, s) policy: when the level drops to r, order s - r units.

    Unit demands arrive at ``demand_interarrival`` gaps; a placed order
    arrives after a ``lead_time`` draw; at most one order is outstanding;
    demand during a stockout is lost.
    """

    reorder_point: int
    order_up_to: int
    demand_interarrival: ContinuousLaw
    lead_time: ContinuousLaw
    initial_level: int

    def __post_init__(self):
        if not 0 <= self.reorder_point < self.order_up_to:
            raise ValueError("need 0 <= reorder point < order-up-to level")
        if not 0 <= self.initial_level <= self.order_up_to:
            raise ValueError("initial level must lie in [0, order-up-to]")


@dataclass(frozen=True)
class InventoryMetrics:
    """Performance summary of one simulated inventory run."""

    average_level: float
    stockout_time_fraction: float
    lost_sales: int
    demands: int
    orders_placed: int
    level_times: np.ndarray = field(repr=False)
    level_values: np.ndarray = field(repr=False)

    @property
    def lost_sale_fraction(self) -> float:
        return self.lost_sales / self.demands if self.demands else 0.0

    def to_csv(self, target) -> None:
        write_csv(target, ("time", "value"), zip(self.level_times, self.level_values))


def mm1_truncation_level(params: MM1Params, tail: float = 1e-10) -> int:
    """State-space cut-off leaving stationary tail mass below ``tail``."""
    return truncation_level(params.rho, tail)


def analyze_mm1(params: MM1Params, truncation_tail: float = 1e-10) -> MM1Analysis:
    """Closed-form steady state; requires lambda < mu.

    The state pmf is truncated once its remaining mass falls below
    ``truncation_tail``; the expectations use the exact closed forms.
    """
    lam, mu = params.arrival_rate, params.service_rate
    if mu == 0 or lam >= mu:
        raise NoSteadyStateError(
            f"traffic intensity {lam}/{mu} is not below 1: no steady state exists, "
            "the queue tends to grow forever"
        )
    rho = params.rho
    n_max = truncation_level(rho, truncation_tail)
    p = rho ** np.arange(n_max + 1) * (1.0 - rho)
    return MM1Analysis(
        rho=rho,
        p=p,
        expected_users=rho / (1.0 - rho),
        expected_queue=rho**2 / (1.0 - rho),
        expected_wait=lam / (mu * (mu - lam)),
        expected_sojourn=lam / (mu * (mu - lam)) + 1.0 / mu,
    )


def waiting_time_cdf(params: MM1Params, t: float) -> float:
    """P{T_q <= t}: atom 1 - rho at zero, then 1 - rho exp(-mu (1 - rho) t)."""
    lam, mu = params.arrival_rate, params.service_rate
    if mu == 0 or lam >= mu:
        raise NoSteadyStateError("waiting-time law needs traffic intensity below 1")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    rho = params.rho
    if t == 0:
        return 1.0 - rho
    return 1.0 - rho * math.exp(-mu * (1.0 - rho) * t)


_ARRIVAL, _DEPARTURE = 0, 1  # arrival sorts first on time ties


def simulate_mm1(
    params: MM1Params,
    n_customers: int,
    rng: RngStream,
    warmup_fraction: float = DEFAULT_WARMUP_FRACTION,
    record_events: bool = False,
) -> QueueSimResult:
    """Event-driven FIFO single-server run serving ``n_customers``.

    Interarrival and service times are exponential; a customer's service
    draw happens when service starts. Events are processed from a queue
    ordered by (time, kind) with arrivals before departures on ties, so a
    run replays deterministically for a given stream. The first
    ``warmup_fraction`` of customers is discarded; time averages start at
    the arrival of the first counted customer. ``record_events`` keeps the
    full (time, kind, state) log for CSV export.
    """
    lam, mu = params.arrival_rate, params.service_rate
    if mu <= 0:
        raise ValueError("simulation requires a positive service rate")
    if n_customers < 1:
        raise ValueError(f"n_customers must be at least 1, got {n_customers}")
    if not 0.0 <= warmup_fraction < 1.0:
        raise ValueError("warmup fraction must lie in [0, 1)")

    first_counted = int(warmup_fraction * n_customers)
    arrivals: dict[int, float] = {}
    service_starts: dict[int, float] = {}
    waiting: deque[int] = deque()
    in_service: int | None = None

    events: list[tuple[float, int, int]] = []
    heapq.heappush(events, (float(rng.exponential(lam)), _ARRIVAL, 0))

    waits = np.empty(n_customers - first_counted)
    sojourns = np.empty(n_customers - first_counted)

    # Time statistics over the observation window [window_start, last departure].
    window_start: float | None = None
    last_time = 0.0
    users = 0
    busy_time = 0.0
    queue_area = 0.0
    users_area = 0.0
    state_time: dict[int, float] = {}

    def advance(now: float) -> None:
        nonlocal last_time, busy_time, queue_area, users_area
        if window_start is not None:
            begin = max(last_time, window_start)
            span = now - begin
            if span > 0:
                users_area += span * users
                queue_area += span * max(users - 1, 0)
                if users > 0:
                    busy_time += span
                state_time[users] = state_time.get(users, 0.0) + span
        last_time = now

    log: list[tuple[float, str, int]] | None = [] if record_events else None

    while events:
        now, kind, who = heapq.heappop(events)
        if window_start is None and kind == _ARRIVAL and who == first_counted:
            window_start = now
        advance(now)
        if kind == _ARRIVAL:
            arrivals[who] = now
            users += 1
            if in_service is None:
                in_service = who
                service_starts[who] = now
                heapq.heappush(events, (now + float(rng.exponential(mu)), _DEPARTURE, who))
            else:
                waiting.append(who)
            if who + 1 < n_customers:
                heapq.heappush(events, (now + float(rng.exponential(lam)), _ARRIVAL, who + 1))
            if log is not None:
                log.append((now, "arrival", users))
        else:
            users -= 1
            if who >= first_counted:
                waits[who - first_counted] = service_starts[who] - arrivals[who]
                sojourns[who - first_counted] = now - arrivals[who]
            del arrivals[who], service_starts[who]
            if waiting:
                nxt = waiting.popleft()
                in_service = nxt
                service_starts[nxt] = now
                heapq.heappush(events, (now + float(rng.exponential(mu)), _DEPARTURE, nxt))
            else:
                in_service = None
            if log is not None:
                log.append((now, "departure", users))

    duration = last_time - (window_start if window_start is not None else 0.0)
    if duration <= 0:
        raise RuntimeError("observation window is empty; lower the warm-up fraction")
    max_state = max(state_time) if state_time else 0
    fractions = np.zeros(max_state + 1)
    for state, span in state_time.items():
        fractions[state] = span / duration
    return QueueSimResult(
        per_customer_wait=waits,
        per_customer_sojourn=sojourns,
        time_avg_users=users_area / duration,
        time_avg_queue=queue_area / duration,
        utilization=busy_time / duration,
        completed=n_customers - first_counted,
        duration=duration,
        state_fractions=fractions,
        events=log,
    )


def littles_law_residual(sim: QueueSimResult, arrival_rate: float) -> LittleResidual:
    """|time averages - lambda * mean times| for the system and the queue.

    An empty result returns zero residuals by convention.
    """
    if sim.per_customer_sojourn.size == 0:
        return LittleResidual(0.0, 0.0)
    system = abs(sim.time_avg_users - arrival_rate * float(sim.per_customer_sojourn.mean()))
    queue = abs(sim.time_avg_queue - arrival_rate * float(sim.per_customer_wait.mean()))
    return LittleResidual(system, queue)


def transient_mm1(
    params: MM1Params,
    initial_users: int,
    t: float,
    n_max: int | None = None,
    dt: float | None = None,
) -> np.ndarray:
    """Law of the user count at time t, from the truncated forward system.

    ``n_max`` defaults to the steady-state truncation rule (requires
    lambda < mu); pure-arrival analysis with ``service_rate = 0`` must
    pass it explicitly. The death rate at the boundary uses mu (or is
    absent when mu = 0), matching the birth and death description of the
    queue.
    """
    lam, mu = params.arrival_rate, params.service_rate
    if n_max is None:
        if mu == 0 or lam >= mu:
            raise ValueError("n_max is required when no steady state exists")
        n_max = mm1_truncation_level(params)
    if initial_users < 0 or initial_users > n_max:
        raise ValueError(f"initial_users must lie in 0..{n_max}")
    if mu > 0:
        gen = birth_death_generator(BirthDeathRates.constant(lam, mu, n_max))
    else:
        # Pure birth: built directly, as zero death rates fall outside the
        # birth-death rate contract.
        size = n_max + 1
        q = np.zeros((size, size))
        idx = np.arange(n_max)
        q[idx, idx + 1] = lam
        np.fill_diagonal(q, -q.sum(axis=1))
        gen = GeneratorMatrix(q)
    p0 = np.zeros(n_max + 1)
    p0[initial_users] = 1.0
    return integrate_forward_law(gen, p0, t, dt)


def simulate_inventory(
    policy: InventoryPolicy, horizon: float, rng: RngStream
) -> InventoryMetrics:
    """Event-driven (r, s) inventory run over [0, horizon].

    Demands remove one unit or are lost during a stockout. Whenever the
    level sits at or below the reorder point with no order outstanding,
    an order of s - r units is placed and arrives after a lead-time draw;
    replenishment therefore never lifts the level above s.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")

    level = policy.initial_level
    batch = policy.order_up_to - policy.reorder_point
    order_due: float | None = None
    orders_placed = 0
    lost = 0
    demands = 0

    now = 0.0
    next_demand = policy.demand_interarrival.draw(rng)
    level_area = 0.0
    stockout_time = 0.0
    times = [0.0]
    levels = [level]

    def maybe_order(at: float) -> None:
        nonlocal order_due, orders_placed
        if order_due is None and level <= policy.reorder_point:
            order_due = at + policy.lead_time.draw(rng)
            orders_placed += 1

    maybe_order(0.0)
    while True:
        next_event = next_demand if order_due is None else min(next_demand, order_due)
        advance_to = min(next_event, horizon)
        level_area += level * (advance_to - now)
        if level == 0:
            stockout_time += advance_to - now
        now = advance_to
        if now >= horizon:
            break
        if order_due is not None and order_due <= next_demand:
            level += batch
            order_due = None
        else:
            demands += 1
            if level > 0:
                level -= 1
            else:
                lost += 1
            next_demand = now + policy.demand_interarrival.draw(rng)
        maybe_order(now)
        times.append(now)
        levels.append(level)

    return InventoryMetrics(
        average_level=level_area / horizon,
        stockout_time_fraction=stockout_time / horizon,
        lost_sales=lost,
        demands=demands,
        orders_placed=orders_placed,
        level_times=np.asarray(times),
        level_values=np.asarray(levels),
    )
