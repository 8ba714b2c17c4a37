import numpy as np
import pytest
from scipy.integrate import quad

from stochlab import queueing
from stochlab.errors import NoSteadyStateError
from stochlab.laws import Exponential, Poisson
from stochlab.rng import RngStream
from stochlab.stats import batch_means_ci, chi_square_statistic, mean_ci

from seedutil import seeded


class TestAnalyzeMM1:
    def test_half_loaded_queue(self):
        result = queueing.analyze_mm1(queueing.MM1Params(1.0, 2.0))
        assert result.rho == pytest.approx(0.5)
        assert result.p[0] == pytest.approx(0.5)
        assert result.expected_users == pytest.approx(1.0)
        assert result.expected_queue == pytest.approx(0.5)  # rho^2 / (1 - rho)
        assert result.expected_wait == pytest.approx(0.5)
        assert result.expected_sojourn == pytest.approx(1.0)

    def test_expectations_match_pmf_sums(self):
        # independent oracle: sum n p_n directly on a deep truncation
        result = queueing.analyze_mm1(queueing.MM1Params(2.0, 3.0), truncation_tail=1e-14)
        n = np.arange(result.p.size)
        assert result.expected_users == pytest.approx(float(n @ result.p), abs=1e-10)
        queue_sum = float(((n - 1)[1:] * result.p[1:]).sum())
        assert result.expected_queue == pytest.approx(queue_sum, abs=1e-10)

    def test_light_traffic_limit(self):
        result = queueing.analyze_mm1(queueing.MM1Params(1e-6, 1.0))
        assert result.p[0] == pytest.approx(1.0, abs=1e-5)
        assert result.expected_users == pytest.approx(0.0, abs=1e-5)

    def test_unstable_queue_rejected(self):
        with pytest.raises(NoSteadyStateError, match="grow forever"):
            queueing.analyze_mm1(queueing.MM1Params(2.0, 2.0))
        with pytest.raises(NoSteadyStateError):
            queueing.analyze_mm1(queueing.MM1Params(3.0, 2.0))

    def test_geometric_ratio_invariant(self):
        result = queueing.analyze_mm1(queueing.MM1Params(1.3, 1.9))
        ratios = result.p[1:] / result.p[:-1]
        assert np.abs(ratios - result.rho).max() < 1e-12

    def test_pmf_mass(self):
        result = queueing.analyze_mm1(queueing.MM1Params(1.0, 2.0), truncation_tail=1e-12)
        assert result.p.sum() == pytest.approx(1.0, abs=1e-11)


class TestWaitingTimeCdf:
    def test_atom_at_zero(self):
        params = queueing.MM1Params(1.0, 2.0)
        assert queueing.waiting_time_cdf(params, 0.0) == pytest.approx(0.5)

    def test_limits_and_monotonicity(self):
        params = queueing.MM1Params(1.5, 2.0)
        grid = np.linspace(0.0, 40.0, 4001)
        values = [queueing.waiting_time_cdf(params, t) for t in grid]
        assert values[-1] == pytest.approx(1.0, abs=1e-8)
        assert all(b >= a for a, b in zip(values, values[1:]))
        # right-continuity at the atom: cdf(0+) equals cdf(0)
        assert queueing.waiting_time_cdf(params, 1e-12) == pytest.approx(
            queueing.waiting_time_cdf(params, 0.0), abs=1e-9
        )

    def test_mean_wait_by_quadrature(self):
        params = queueing.MM1Params(1.0, 2.0)
        integral, _ = quad(lambda t: 1.0 - queueing.waiting_time_cdf(params, t), 0.0, 60.0)
        analytic = queueing.analyze_mm1(params).expected_wait
        assert integral == pytest.approx(analytic, abs=1e-8)
        assert integral == pytest.approx(0.5, abs=1e-8)

    def test_validation(self):
        with pytest.raises(ValueError):
            queueing.waiting_time_cdf(queueing.MM1Params(1.0, 2.0), -0.1)
        with pytest.raises(NoSteadyStateError):
            queueing.waiting_time_cdf(queueing.MM1Params(2.0, 2.0), 1.0)


class TestSimulateMM1:
    def test_instant_service_no_waits(self):
        result = queueing.simulate_mm1(queueing.MM1Params(1.0, 1e9), 2000, RngStream(1))
        assert result.per_customer_wait.max() < 1e-6
        assert result.utilization < 1e-3

    def test_mean_wait_within_ci(self):
        params = queueing.MM1Params(1.0, 2.0)
        result = queueing.simulate_mm1(params, 100_000, RngStream(seeded(2718)))
        ci = batch_means_ci(result.per_customer_wait, level=0.99)
        assert ci.covers(0.5), (ci.mean, ci.half_width)

    def test_zero_wait_fraction_matches_atom(self):
        params = queueing.MM1Params(1.0, 2.0)
        result = queueing.simulate_mm1(params, 100_000, RngStream(seeded(2718)))
        zero = (result.per_customer_wait < 1e-12).astype(float)
        ci = batch_means_ci(zero, level=0.99)
        assert ci.covers(0.5), (ci.mean, ci.half_width)

    def test_state_fractions_geometric(self):
        params = queueing.MM1Params(1.0, 2.0)
        result = queueing.simulate_mm1(params, 100_000, RngStream(seeded(2718)))
        # time fractions against rho^n (1 - rho) for n <= 10, pseudo-counts
        # at one observation per unit time to keep the statistic scale honest
        analytic = queueing.analyze_mm1(params)
        top = 10
        observed = result.state_fractions[: top + 1] * result.duration
        expected = analytic.p[: top + 1]
        gof = chi_square_statistic(observed, expected, int(result.duration), alpha=0.001)
        assert gof.passed, (gof.statistic, gof.critical_value)

    def test_utilization_tracks_traffic_intensity(self):
        params = queueing.MM1Params(1.0, 2.0)
        result = queueing.simulate_mm1(params, 100_000, RngStream(seeded(2718)))
        busy = 1.0 - result.state_fractions[0]
        assert result.utilization == pytest.approx(busy, abs=1e-9)
        assert abs(result.utilization - 0.5) < 0.01

    def test_deterministic_replay(self):
        params = queueing.MM1Params(1.0, 2.0)
        a = queueing.simulate_mm1(params, 3000, RngStream(99))
        b = queueing.simulate_mm1(params, 3000, RngStream(99))
        assert np.array_equal(a.per_customer_wait, b.per_customer_wait)
        assert a.time_avg_users == b.time_avg_users

    def test_validation(self):
        with pytest.raises(ValueError):
            queueing.simulate_mm1(queueing.MM1Params(1.0, 0.0), 100, RngStream(0))
        with pytest.raises(ValueError):
            queueing.simulate_mm1(queueing.MM1Params(1.0, 2.0), 0, RngStream(0))


class TestLittlesLaw:
    def test_hand_built_log(self):
        # three customers, unit service, no overlap: arrivals 0, 10, 20,
        # window [0, 21]; both sides of the law equal 1/7 exactly
        sim = queueing.QueueSimResult(
            per_customer_wait=np.zeros(3),
            per_customer_sojourn=np.ones(3),
            time_avg_users=3.0 / 21.0,
            time_avg_queue=0.0,
            utilization=3.0 / 21.0,
            completed=3,
            duration=21.0,
            state_fractions=np.array([18.0 / 21.0, 3.0 / 21.0]),
        )
        residual = queueing.littles_law_residual(sim, 3.0 / 21.0)
        assert residual.system == pytest.approx(0.0, abs=1e-15)
        assert residual.queue == pytest.approx(0.0, abs=1e-15)

    def test_empty_log_zero_by_convention(self):
        sim = queueing.QueueSimResult(
            per_customer_wait=np.empty(0),
            per_customer_sojourn=np.empty(0),
            time_avg_users=0.0,
            time_avg_queue=0.0,
            utilization=0.0,
            completed=0,
            duration=1.0,
            state_fractions=np.array([1.0]),
        )
        residual = queueing.littles_law_residual(sim, 1.0)
        assert residual.system == 0.0 and residual.queue == 0.0

    @pytest.mark.parametrize("lam,mu", [(1.0, 2.0), (2.0, 3.0), (0.5, 1.0)])
    def test_residuals_vanish_within_ci(self, lam, mu):
        params = queueing.MM1Params(lam, mu)
        result = queueing.simulate_mm1(params, 100_000, RngStream(seeded(1618), int(10 * lam)))
        residual = queueing.littles_law_residual(result, lam)
        sojourn_ci = batch_means_ci(result.per_customer_sojourn, level=0.99)
        wait_ci = batch_means_ci(result.per_customer_wait, level=0.99)
        # the time average and lam * mean are estimates of the same number;
        # their gap must be inside the CI scale of the estimator itself
        assert residual.system < 2.0 * lam * sojourn_ci.half_width, residual
        assert residual.queue < 2.0 * lam * wait_ci.half_width, residual


class TestTransientMM1:
    def test_time_zero_unit_mass(self):
        p = queueing.transient_mm1(queueing.MM1Params(1.0, 2.0), 3, 0.0)
        assert p[3] == 1.0 and p.sum() == 1.0

    def test_long_run_hits_steady_state(self):
        params = queueing.MM1Params(1.0, 2.0)
        p = queueing.transient_mm1(params, 0, 50.0)
        target = 0.5 ** np.arange(p.size) * 0.5
        assert np.abs(p - target).max() < 1e-6

    def test_pure_arrivals_poisson_shift(self):
        params = queueing.MM1Params(1.5, 0.0)
        initial = 2
        p = queueing.transient_mm1(params, initial, 2.0, n_max=60, dt=0.01)
        law = Poisson(1.5 * 2.0)
        for k in range(25):
            assert p[initial + k] == pytest.approx(law.pmf(k), abs=1e-8)
        assert p[:initial].max() == 0.0

    def test_requires_truncation_when_unstable(self):
        with pytest.raises(ValueError, match="n_max"):
            queueing.transient_mm1(queueing.MM1Params(2.0, 1.0), 0, 1.0)


class TestInventory:
    @staticmethod
    def policy(**overrides):
        base = dict(
            reorder_point=1,
            order_up_to=5,
            demand_interarrival=Exponential(1.0),
            lead_time=Exponential(1e6),
            initial_level=5,
        )
        base.update(overrides)
        return queueing.InventoryPolicy(**base)

    def test_no_demand_limit(self):
        policy = self.policy(demand_interarrival=Exponential(1e-12))
        metrics = queueing.simulate_inventory(policy, 1000.0, RngStream(5))
        assert metrics.average_level == pytest.approx(5.0)
        assert metrics.orders_placed == 0
        assert metrics.lost_sales == 0

    def test_instant_replenishment_never_stocks_out(self):
        metrics = queueing.simulate_inventory(self.policy(), 10_000.0, RngStream(6))
        assert metrics.stockout_time_fraction < 1e-9
        assert metrics.lost_sales == 0
        assert metrics.orders_placed > 0

    def test_level_bounds(self):
        policy = self.policy(lead_time=Exponential(0.5), reorder_point=2)
        metrics = queueing.simulate_inventory(policy, 5000.0, RngStream(7))
        assert metrics.level_values.min() >= 0
        assert metrics.level_values.max() <= policy.order_up_to

    def test_two_resolution_self_consistency(self):
        # short replicated runs against one long reference run
        policy = self.policy(lead_time=Exponential(0.5))
        reference = queueing.simulate_inventory(policy, 1_000_000.0, RngStream(seeded(8), 999))
        short_fracs = np.array(
            [
                queueing.simulate_inventory(policy, 10_000.0, RngStream(seeded(8), i)).lost_sale_fraction
                for i in range(20)
            ]
        )
        ci = mean_ci(short_fracs, 0.99)
        assert ci.covers(reference.lost_sale_fraction), (
            ci.mean,
            ci.half_width,
            reference.lost_sale_fraction,
        )
        assert reference.lost_sales > 0  # the scenario genuinely exercises stockouts

    def test_lost_sales_during_stockout(self):
        # long leads force stockouts; demand during them must be lost
        policy = self.policy(lead_time=Exponential(0.05))
        metrics = queueing.simulate_inventory(policy, 10_000.0, RngStream(seeded(9)))
        assert metrics.lost_sales > 0
        assert metrics.stockout_time_fraction > 0.1
        assert metrics.demands >= metrics.lost_sales

    def test_csv_export(self):
        import io

        metrics = queueing.simulate_inventory(self.policy(), 50.0, RngStream(10))
        buffer = io.StringIO()
        metrics.to_csv(buffer)
        lines = buffer.getvalue().splitlines()
        assert lines[0] == "time,value"
        assert len(lines) == metrics.level_times.size + 1

    def test_validation(self):
        with pytest.raises(ValueError):
            self.policy(reorder_point=5)
        with pytest.raises(ValueError):
            self.policy(initial_level=9)
        with pytest.raises(ValueError):
            queueing.simulate_inventory(self.policy(), 0.0, RngStream(0))


class TestTruncationRule:
    def test_rule(self):
        assert queueing.mm1_truncation_level(queueing.MM1Params(1.0, 2.0)) == 34
