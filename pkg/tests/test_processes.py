import io
import math

import numpy as np
import pytest

from stochlab import processes
from stochlab.laws import Exponential, Normal, Poisson
from stochlab.rng import RngStream
from stochlab.stats import chi_square_statistic, ks_statistic, mean_ci

from seedutil import seeded


class TestPoissonProcess:
    def test_paths_live_in_the_window(self):
        path = processes.simulate_poisson_process(1.0, 20.0, RngStream(1))
        assert path.arrival_times.size > 0
        assert (np.diff(path.arrival_times) > 0).all()
        assert path.arrival_times[0] > 0.0
        assert path.arrival_times[-1] <= 20.0

    def test_rate_estimate_long_run(self):
        path = processes.simulate_poisson_process(1.0, 10_000.0, RngStream(seeded(42)))
        assert abs(path.count / path.horizon - 1.0) < 0.03

    def test_short_horizon_usually_empty(self):
        empty = sum(
            processes.simulate_poisson_process(1.0, 1e-6, RngStream(9, i)).count == 0
            for i in range(200)
        )
        assert empty == 200

    def test_count_in_interval(self):
        path = processes.ArrivalPath(10.0, np.array([1.0, 2.0, 2.5, 7.0]))
        assert processes.count_in_interval(path, 0.0, 10.0) == 4
        assert processes.count_in_interval(path, 1.0, 2.5) == 2  # (1, 2.5] half-open
        assert processes.count_in_interval(path, 3.0, 3.0) == 0
        empty = processes.ArrivalPath(5.0, np.array([]))
        assert processes.count_in_interval(empty, 0.0, 5.0) == 0

    def test_counts_add_over_partitions(self):
        path = processes.simulate_poisson_process(2.0, 50.0, RngStream(3))
        cuts = np.linspace(0.0, 50.0, 11)
        pieces = sum(
            processes.count_in_interval(path, a, b) for a, b in zip(cuts, cuts[1:])
        )
        assert pieces == processes.count_in_interval(path, 0.0, 50.0) == path.count

    def test_marginal_counts_poisson(self):
        # counts on [0, 3] at rate 2 against the Poisson(6) pmf
        n = 10_000
        counts = np.array(
            [
                processes.count_in_interval(
                    processes.simulate_poisson_process(2.0, 3.0, RngStream(seeded(777), i)),
                    0.0,
                    3.0,
                )
                for i in range(n)
            ]
        )
        law = Poisson(6.0)
        top = int(counts.max())
        observed = np.bincount(counts, minlength=top + 1)
        expected = np.array([law.pmf(k) for k in range(top + 1)])
        assert chi_square_statistic(observed, expected, n, alpha=0.001).passed

    def test_independent_increments(self):
        n = 10_000
        first, second = np.empty(n), np.empty(n)
        for i in range(n):
            path = processes.simulate_poisson_process(1.5, 2.0, RngStream(seeded(555), i))
            first[i] = processes.count_in_interval(path, 0.0, 1.0)
            second[i] = processes.count_in_interval(path, 1.0, 2.0)
        f, s = first - first.mean(), second - second.mean()
        correlation = float((f * s).mean() / (first.std() * second.std()))
        # 99% CI for a zero correlation estimate is roughly 2.58 / sqrt(n)
        assert abs(correlation) < 2.58 / math.sqrt(n)

    def test_conditional_arrival_times_uniform(self):
        # pooled normalised arrival times against Uniform(0, 1)
        pooled = []
        for i in range(400):
            path = processes.simulate_poisson_process(1.0, 10.0, RngStream(seeded(31), i))
            pooled.extend(path.arrival_times / path.horizon)
        assert ks_statistic(pooled, lambda u: min(max(u, 0.0), 1.0), alpha=0.001).passed

    def test_interarrival_gaps_exponential(self):
        path = processes.simulate_poisson_process(0.7, 20_000.0, RngStream(seeded(62)))
        assert ks_statistic(path.gaps(), Exponential(0.7).cdf, alpha=0.001).passed

    def test_csv_round_trip(self):
        path = processes.ArrivalPath(4.0, np.array([0.5, 2.25]))
        buffer = io.StringIO()
        path.to_csv(buffer)
        assert buffer.getvalue().splitlines() == [
            "time,value",
            "0.0,0",
            "0.5,1",
            "2.25,2",
        ]

    def test_validation(self):
        with pytest.raises(ValueError):
            processes.simulate_poisson_process(0.0, 1.0, RngStream(0))
        with pytest.raises(ValueError):
            processes.ArrivalPath(1.0, np.array([0.5, 0.5]))
        path = processes.simulate_poisson_process(1.0, 5.0, RngStream(0))
        with pytest.raises(ValueError):
            processes.count_in_interval(path, 3.0, 1.0)


class TestRandomWalk:
    def test_single_step(self):
        path = processes.simulate_random_walk(1, RngStream(17))
        assert path.values[0] == 0
        assert path.values[1] in (-1, 1)

    def test_parity(self):
        path = processes.simulate_random_walk(999, RngStream(4))
        steps = np.arange(1000)
        assert ((path.values + steps) % 2 == 0).all()

    def test_mean_is_zero(self):
        n = 1000
        endpoints = np.array(
            [
                processes.simulate_random_walk(10_000, RngStream(seeded(89), i)).values[-1]
                for i in range(n)
            ],
            dtype=float,
        )
        assert mean_ci(endpoints, 0.99).covers(0.0)

    def test_rescaling(self):
        path = processes.simulate_random_walk(10, RngStream(12))
        assert processes.rescale_walk(path, 4, 0.0) == 0.0
        assert processes.rescale_walk(path, 1, 1.0) == path.values[1]
        assert processes.rescale_walk(path, 4, 2.5) == path.values[10] / 2.0
        with pytest.raises(ValueError):
            processes.rescale_walk(path, 100, 1.0)

    def test_clt_ks(self):
        n, big_n = 1000, 10_000
        scaled = np.array(
            [
                processes.rescale_walk(
                    processes.simulate_random_walk(big_n, RngStream(seeded(123), i)), big_n, 1.0
                )
                for i in range(n)
            ]
        )
        # held to the stricter 0.05 critical value, not just 0.001
        assert ks_statistic(scaled, Normal(0.0, 1.0).cdf, alpha=0.05).passed


class TestWiener:
    def test_starts_at_zero(self):
        path = processes.simulate_wiener(np.linspace(0.0, 1.0, 101), RngStream(5))
        assert path.values[0] == 0.0

    def test_terminal_variance(self):
        grid = np.linspace(0.0, 1.0, 11)
        terminal = np.array(
            [processes.simulate_wiener(grid, RngStream(seeded(222), i)).values[-1] for i in range(10_000)]
        )
        assert abs(terminal.var() - 1.0) < 0.05

    def test_disjoint_increment_correlation(self):
        grid = np.array([0.0, 1.0, 2.0])
        inc1, inc2 = np.empty(10_000), np.empty(10_000)
        for i in range(10_000):
            values = processes.simulate_wiener(grid, RngStream(seeded(333), i)).values
            inc1[i], inc2[i] = values[1], values[2] - values[1]
        correlation = float(np.corrcoef(inc1, inc2)[0, 1])
        assert abs(correlation) < 2.58 / math.sqrt(10_000)

    def test_refined_grid_consistent_with_coarse(self):
        # law of W_1 must not depend on the grid resolution
        coarse_grid = np.linspace(0.0, 1.0, 3)
        fine_grid = np.linspace(0.0, 1.0, 65)
        coarse = np.array(
            [processes.simulate_wiener(coarse_grid, RngStream(seeded(61), i)).values[-1] for i in range(8000)]
        )
        fine = np.array(
            [processes.simulate_wiener(fine_grid, RngStream(seeded(62), i)).values[-1] for i in range(8000)]
        )
        diff = mean_ci(coarse, 0.99).half_width + mean_ci(fine, 0.99).half_width
        assert abs(coarse.mean() - fine.mean()) < diff
        assert abs(coarse.var() - fine.var()) < 0.1
        assert ks_statistic(fine, Normal(0.0, 1.0).cdf, alpha=0.001).passed

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            processes.simulate_wiener(np.array([0.5, 1.0]), RngStream(0))
        with pytest.raises(ValueError):
            processes.simulate_wiener(np.array([0.0, 0.0, 1.0]), RngStream(0))

    def test_csv(self):
        path = processes.WienerPath(np.array([0.0, 0.5]), np.array([0.0, 1.25]))
        buffer = io.StringIO()
        path.to_csv(buffer)
        assert buffer.getvalue().splitlines()[1] == "0.0,0.0"
