"""Batch experiment runner.

Every module is reachable through a subcommand tree whose flags mirror the
operation parameters. A run builds a JSON report (schema_version, command,
resolved config, results, oracle comparisons where one is defined) that is
deterministic byte for byte for a fixed config: keys are sorted, floats
keep full repr precision, and files are written atomically.

Output handling: ``--output PATH --format json`` writes the report to the
file; ``--format csv`` writes the command's tabular data (paths, densities,
samples, event logs) to the file instead, prints the report to stdout, and
renders a PNG figure next to the CSV unless ``--no-figure`` is given.

Seeds come from ``--seed`` or the WORKBENCH_SEED environment variable.
A flat key=value config file can drive everything through ``stochlab run``;
flags given as KEY=VALUE overrides win over the file.

Exit codes: 0 success, 2 validation error, 3 model error (no steady state,
arbitrage, non-convergence).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import finance, genetics, markov, plots, processes, queueing
from . import laws as laws_mod
from .errors import ModelError
from .rng import RngStream
from .stats import mean_ci
from .tabular import write_csv

SCHEMA_VERSION = 1
SEED_ENV_VAR = "WORKBENCH_SEED"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MODEL = 3


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

def _jsonable(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def build_report(command: str, config: dict, results: dict, oracles: dict | None = None) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _jsonable(config),
        "results": _jsonable(results),
    }
    if oracles:
        report["oracles"] = _jsonable(oracles)
    return report


def report_text(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", dir=path.parent, prefix=f".{path.name}.", delete=False
    )
    try:
        handle.write(text)
        handle.close()
        os.replace(handle.name, path)
    except BaseException:
        handle.close()
        os.unlink(handle.name)
        raise


class Tabular:
    """Delimited data a command can emit, plus how to draw it."""

    def __init__(self, header, rows, kind=None, columns=None):
        self.header = header
        self.rows = rows
        self.kind = kind  # step | line | distribution | density | histogram | None
        self.columns = columns  # arrays used by the figure renderers

    def render_figure(self, out_path) -> None:
        if self.kind is None:
            return
        renderer = {
            "step": plots.save_step_path,
            "line": plots.save_line_path,
            "distribution": plots.save_distribution,
            "density": plots.save_density,
        }.get(self.kind)
        if renderer is not None:
            renderer(self.columns[0], self.columns[1], out_path)
        elif self.kind == "histogram":
            plots.save_histogram(self.columns[0], out_path)


# ---------------------------------------------------------------------------
# shared flag helpers
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser, sampling: bool, replicable: bool = False):
    parser.add_argument("--output", help="write the report (json) or data (csv) here")
    parser.add_argument(
        "--format",
        choices=("json", "csv"),
        default="json",
        dest="output_format",
        help="output flavour; csv emits the command's tabular data",
    )
    parser.add_argument(
        "--no-figure",
        action="store_true",
        help="skip the PNG rendered next to csv output",
    )
    if sampling:
        parser.add_argument(
            "--seed", type=int, default=None, help=f"rng seed (default ${SEED_ENV_VAR})"
        )
    if replicable:
        parser.add_argument(
            "--replications", type=int, default=1, help="independent replications"
        )


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is None:
        env = os.environ.get(SEED_ENV_VAR)
        if env is None:
            raise ValueError(f"this experiment samples: pass --seed or set {SEED_ENV_VAR}")
        args.seed = int(env)  # echoed into the report for exact replay
    return args.seed


def _config_echo(args, skip=("handler", "group", "command", "func")) -> dict:
    return {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in skip and not key.startswith("_") and value is not None
    }


def _make_law(args) -> laws_mod.DiscreteLaw | laws_mod.ContinuousLaw:
    kind = args.law
    need = {
        "binomial": ("n", "p"),
        "geometric": ("p",),
        "poisson": ("rate",),
        "finite-uniform": ("size",),
        "explicit": ("probs",),
        "exponential": ("rate",),
        "normal": ("mu", "sigma2"),
        "uniform": ("a", "b"),
    }[kind]
    missing = [name for name in need if getattr(args, name, None) is None]
    if missing:
        flags = ", ".join("--" + m.replace("_", "-") for m in missing)
        raise ValueError(f"law '{kind}' needs {flags}")
    if kind == "binomial":
        return laws_mod.Binomial(args.n, args.p)
    if kind == "geometric":
        return laws_mod.Geometric(args.p)
    if kind == "poisson":
        return laws_mod.Poisson(args.rate)
    if kind == "finite-uniform":
        return laws_mod.FiniteUniform(args.size)
    if kind == "explicit":
        return laws_mod.Explicit([float(v) for v in args.probs.split(",")])
    if kind == "exponential":
        return laws_mod.Exponential(args.rate)
    if kind == "normal":
        return laws_mod.Normal(args.mu, args.sigma2)
    return laws_mod.Uniform(args.a, args.b)


def _law_flags(parser):
    parser.add_argument(
        "--law",
        required=True,
        choices=(
            "binomial",
            "geometric",
            "poisson",
            "finite-uniform",
            "explicit",
            "exponential",
            "normal",
            "uniform",
        ),
    )
    parser.add_argument("--n", type=int, help="binomial trial count")
    parser.add_argument("--p", type=float, help="success probability")
    parser.add_argument("--rate", type=float, help="poisson/exponential rate")
    parser.add_argument("--size", type=int, help="finite-uniform outcome count")
    parser.add_argument("--probs", help="explicit pmf, comma separated")
    parser.add_argument("--mu", type=float, help="normal mean")
    parser.add_argument("--sigma2", type=float, help="normal variance")
    parser.add_argument("--a", type=float, help="uniform lower endpoint")
    parser.add_argument("--b", type=float, help="uniform upper endpoint")


# ---------------------------------------------------------------------------
# handlers: laws
# ---------------------------------------------------------------------------

def _run_laws_pmf(args):
    law = _make_law(args)
    if not isinstance(law, laws_mod.DiscreteLaw):
        raise ValueError("laws pmf applies to discrete laws")
    summary = law.moments()
    results = {
        "k": args.k,
        "pmf": law.pmf(args.k),
        "tail": law.tail(args.k),
        "mean": summary.mean,
        "variance": summary.variance,
    }
    head = sum(law.pmf(j) for j in range(args.k + 1))
    oracles = {"head_plus_tail": head + law.tail(args.k)}
    top = law.support_bound() or (args.k + 40)
    table = [(k, law.pmf(k)) for k in range(min(top, 400) + 1)]
    tabular = Tabular(
        ("k", "pmf"),
        table,
        "distribution",
        ([row[0] for row in table], [row[1] for row in table]),
    )
    return results, oracles, tabular


def _run_laws_sample(args):
    law = _make_law(args)
    seed = _resolve_seed(args)
    draws = law.sample(RngStream(seed), args.count)
    summary = law.moments()
    estimate = mean_ci(draws, 0.99) if args.count >= 2 else None
    results = {
        "count": args.count,
        "sample_mean": float(draws.mean()),
        "sample_variance": float(draws.var(ddof=1)) if args.count >= 2 else None,
        "minimum": float(draws.min()),
        "maximum": float(draws.max()),
    }
    oracles = {
        "law_mean": summary.mean,
        "law_variance": summary.variance,
        "mean_ci_low": estimate.low if estimate else None,
        "mean_ci_high": estimate.high if estimate else None,
        "mean_covered": estimate.covers(summary.mean) if estimate else None,
    }
    tabular = Tabular(
        ("index", "value"), list(enumerate(draws.tolist())), "histogram", (draws,)
    )
    return results, oracles, tabular


# ---------------------------------------------------------------------------
# handlers: processes
# ---------------------------------------------------------------------------

def _run_process_poisson(args):
    seed = _resolve_seed(args)
    reps = args.replications
    counts = []
    path = None
    for i in range(reps):
        path = processes.simulate_poisson_process(args.rate, args.horizon, RngStream(seed, i))
        counts.append(path.count)
    results = {
        "replications": reps,
        "counts": counts,
        "rate_estimate": counts[-1] / args.horizon if reps == 1 else float(np.mean(counts)) / args.horizon,
    }
    oracles = {"rate": args.rate, "expected_count": args.rate * args.horizon}
    times = np.concatenate([[0.0], path.arrival_times])
    values = np.arange(times.size)
    rows = [(0.0, 0)] + [(float(t), i + 1) for i, t in enumerate(path.arrival_times)]
    tabular = Tabular(("time", "value"), rows, "step", (times, values))
    return results, oracles, tabular


def _run_process_walk(args):
    seed = _resolve_seed(args)
    path = processes.simulate_random_walk(args.steps, RngStream(seed))
    results = {
        "steps": args.steps,
        "endpoint": int(path.values[-1]),
        "maximum": int(path.values.max()),
        "minimum": int(path.values.min()),
    }
    oracles = {"endpoint_parity_ok": (int(path.values[-1]) - args.steps) % 2 == 0}
    rows = list(enumerate(path.values.tolist()))
    tabular = Tabular(("time", "value"), rows, "line", (np.arange(path.values.size), path.values))
    return results, oracles, tabular


def _run_process_wiener(args):
    seed = _resolve_seed(args)
    grid = np.linspace(0.0, args.t_end, args.n_steps + 1)
    path = processes.simulate_wiener(grid, RngStream(seed))
    results = {
        "t_end": args.t_end,
        "n_steps": args.n_steps,
        "terminal_value": float(path.values[-1]),
    }
    rows = list(zip(path.grid.tolist(), path.values.tolist()))
    tabular = Tabular(("time", "value"), rows, "line", (path.grid, path.values))
    return results, None, tabular


# ---------------------------------------------------------------------------
# handlers: markov
# ---------------------------------------------------------------------------

def _run_markov_transient(args):
    gen = markov.GeneratorMatrix.from_json(Path(args.generator).read_text())
    p0 = np.zeros(gen.size)
    if not 0 <= args.start < gen.size:
        raise ValueError(f"start state must lie in 0..{gen.size - 1}")
    p0[args.start] = 1.0
    p = markov.integrate_forward_law(gen, p0, args.t, args.dt)
    results = {"t": args.t, "distribution": p, "size": gen.size}
    oracles = {"mass": float(p.sum())}
    states = np.arange(gen.size)
    rows = list(zip(states.tolist(), p.tolist()))
    tabular = Tabular(("state", "probability"), rows, "distribution", (states, p))
    return results, oracles, tabular


def _run_markov_stationary(args):
    matrix = markov.TransitionMatrix.from_json(Path(args.matrix).read_text())
    result = markov.dtmc_stationary(matrix, tol=args.tol)
    pi = result.distribution
    results = {
        "distribution": pi,
        "iterations": result.iterations,
        "unique": result.unique,
    }
    oracles = {"fixed_point_gap": float(np.abs(pi @ matrix.matrix - pi).max())}
    states = np.arange(matrix.size)
    rows = list(zip(states.tolist(), pi.tolist()))
    tabular = Tabular(("state", "probability"), rows, "distribution", (states, pi))
    return results, oracles, tabular


def _run_markov_classify(args):
    matrix = markov.TransitionMatrix.from_json(Path(args.matrix).read_text())
    labels = markov.classify_states(matrix)
    results = {"labels": labels}
    rows = list(enumerate(labels))
    return results, None, Tabular(("state", "label"), rows)


# ---------------------------------------------------------------------------
# handlers: queue
# ---------------------------------------------------------------------------

def _run_queue_analyze(args):
    params = queueing.MM1Params(args.arrival_rate, args.service_rate)
    analysis = queueing.analyze_mm1(params, args.tail)
    results = {
        "rho": analysis.rho,
        "p0": float(analysis.p[0]),
        "e_n": analysis.expected_users,
        "e_nq": analysis.expected_queue,
        "e_tq": analysis.expected_wait,
        "e_t": analysis.expected_sojourn,
        "pmf_states": analysis.p.size,
    }
    oracles = {
        "littles_law_e_n": args.arrival_rate * analysis.expected_sojourn,
        "littles_law_e_nq": args.arrival_rate * analysis.expected_wait,
    }
    states = np.arange(analysis.p.size)
    rows = list(zip(states.tolist(), analysis.p.tolist()))
    tabular = Tabular(("state", "probability"), rows, "distribution", (states, analysis.p))
    return results, oracles, tabular


def _run_queue_simulate(args):
    params = queueing.MM1Params(args.arrival_rate, args.service_rate)
    seed = _resolve_seed(args)
    reps = args.replications
    record = reps == 1
    runs = [
        queueing.simulate_mm1(
            params, args.customers, RngStream(seed, i), args.warmup, record_events=record
        )
        for i in range(reps)
    ]
    waits = [float(r.per_customer_wait.mean()) for r in runs]
    results = {
        "replications": reps,
        "mean_wait": waits if reps > 1 else waits[0],
        "mean_sojourn": [float(r.per_customer_sojourn.mean()) for r in runs],
        "time_avg_users": [r.time_avg_users for r in runs],
        "utilization": [r.utilization for r in runs],
        "completed": [r.completed for r in runs],
    }
    oracles = {}
    if args.arrival_rate < args.service_rate:
        analysis = queueing.analyze_mm1(params)
        residual = queueing.littles_law_residual(runs[0], args.arrival_rate)
        oracles = {
            "analytic_e_tq": analysis.expected_wait,
            "analytic_e_n": analysis.expected_users,
            "analytic_utilization": analysis.rho,
            "littles_residual_system": residual.system,
            "littles_residual_queue": residual.queue,
        }
    if record and runs[0].events is not None:
        events = runs[0].events
        times = np.array([e[0] for e in events])
        states = np.array([e[2] for e in events])
        tabular = Tabular(("time", "event_kind", "state"), events, "step", (times, states))
    else:
        rows = [
            (i, float(r.per_customer_wait.mean()), r.time_avg_users, r.utilization)
            for i, r in enumerate(runs)
        ]
        tabular = Tabular(("replication", "mean_wait", "time_avg_users", "utilization"), rows)
    return results, oracles, tabular


def _run_queue_transient(args):
    params = queueing.MM1Params(args.arrival_rate, args.service_rate)
    p = queueing.transient_mm1(params, args.initial, args.t, args.n_max, args.dt)
    results = {"t": args.t, "distribution": p}
    oracles = {"mass": float(p.sum())}
    if 0 < args.arrival_rate < args.service_rate:
        target = queueing.analyze_mm1(params).p
        k = min(p.size, target.size)
        oracles["steady_state_distance"] = float(np.abs(p[:k] - target[:k]).max())
    states = np.arange(p.size)
    rows = list(zip(states.tolist(), p.tolist()))
    tabular = Tabular(("state", "probability"), rows, "distribution", (states, p))
    return results, oracles, tabular


def _run_queue_inventory(args):
    lead = laws_mod.Exponential(args.lead_rate)
    if args.lead_uniform is not None:
        low, high = (float(v) for v in args.lead_uniform.split(","))
        lead = laws_mod.Uniform(low, high)
    policy = queueing.InventoryPolicy(
        reorder_point=args.reorder_point,
        order_up_to=args.order_up_to,
        demand_interarrival=laws_mod.Exponential(args.demand_rate),
        lead_time=lead,
        initial_level=args.initial,
    )
    seed = _resolve_seed(args)
    reps = args.replications
    metrics = [
        queueing.simulate_inventory(policy, args.horizon, RngStream(seed, i))
        for i in range(reps)
    ]
    results = {
        "replications": reps,
        "average_level": [m.average_level for m in metrics],
        "stockout_time_fraction": [m.stockout_time_fraction for m in metrics],
        "lost_sales": [m.lost_sales for m in metrics],
        "demands": [m.demands for m in metrics],
        "orders_placed": [m.orders_placed for m in metrics],
        "lost_sale_fraction": [m.lost_sale_fraction for m in metrics],
    }
    first = metrics[0]
    rows = list(zip(first.level_times.tolist(), first.level_values.tolist()))
    tabular = Tabular(
        ("time", "value"), rows, "step", (first.level_times, first.level_values)
    )
    return results, None, tabular


# ---------------------------------------------------------------------------
# handlers: genetics
# ---------------------------------------------------------------------------

def _run_genetics_hw(args):
    if args.observed_recessive is not None:
        freqs, genotype = genetics.infer_from_recessive_phenotype(args.observed_recessive)
    elif args.genotype is not None:
        values = [float(v) for v in args.genotype.split(",")]
        if len(values) != 3:
            raise ValueError("--genotype wants three comma-separated proportions")
        genotype = genetics.GenotypeFreqs(*values)
        freqs = genetics.gene_frequencies(genotype)
    else:
        raise ValueError("pass --observed-recessive or --genotype")
    nxt = genetics.next_generation(genotype)
    mating = genetics.mating_probabilities(genotype)
    results = {
        "p_a": freqs.p_a,
        "p_b": freqs.p_b,
        "genotype": {"aa": genotype.p_aa, "ab": genotype.p_ab, "bb": genotype.p_bb},
        "next_generation": {"aa": nxt.p_aa, "ab": nxt.p_ab, "bb": nxt.p_bb},
        "mating": {
            "aa_aa": mating.aa_aa,
            "ab_ab": mating.ab_ab,
            "bb_bb": mating.bb_bb,
            "aa_ab": mating.aa_ab,
            "aa_bb": mating.aa_bb,
            "ab_bb": mating.ab_bb,
        },
    }
    twice = genetics.next_generation(nxt)
    oracles = {
        "mating_total": mating.total(),
        "equilibrium_gap": max(
            abs(twice.p_aa - nxt.p_aa), abs(twice.p_ab - nxt.p_ab), abs(twice.p_bb - nxt.p_bb)
        ),
    }
    return results, oracles, None


def _run_genetics_wf_simulate(args):
    model = genetics.WrightFisherModel(args.two_n)
    seed = _resolve_seed(args)
    reps = args.replications
    runs = [
        genetics.simulate_wright_fisher(model, args.x0, args.max_generations, RngStream(seed, i))
        for i in range(reps)
    ]
    results = {
        "replications": reps,
        "absorbed": [r.absorbed for r in runs],
        "absorption_state": [r.absorption_state for r in runs],
        "generations": [r.generations for r in runs],
    }
    oracles = {"martingale_fixation_probability": args.x0 / args.two_n}
    if reps > 1:
        fixed = [1.0 if r.absorption_state == args.two_n else 0.0 for r in runs if r.absorbed]
        if len(fixed) >= 2:
            est = mean_ci(np.array(fixed), 0.99)
            oracles["fixation_frequency"] = est.mean
            oracles["fixation_ci_half_width"] = est.half_width
        rows = [
            (i, r.absorption_state if r.absorbed else "", r.generations)
            for i, r in enumerate(runs)
        ]
        tabular = Tabular(("replication", "absorption_state", "generations"), rows)
    else:
        run = runs[0]
        generations = np.arange(run.trajectory.size)
        rows = list(zip(generations.tolist(), run.trajectory.tolist()))
        tabular = Tabular(("time", "value"), rows, "line", (generations, run.trajectory))
    return results, oracles, tabular


def _run_genetics_wf_fixation(args):
    model = genetics.WrightFisherModel(args.two_n)
    probability = genetics.fixation_probability_exact(model, args.x0)
    results = {"fixation_probability": probability}
    oracles = {
        "martingale_closed_form": args.x0 / args.two_n,
        "gap": abs(probability - args.x0 / args.two_n),
        "conditional_mean_at_x0": genetics.conditional_mean_check(model, args.x0),
    }
    return results, oracles, None


def _run_genetics_diffusion(args):
    x = genetics.grid_points(args.points)
    if args.coefficient == "wright-fisher":
        a_fn = genetics.wright_fisher_coefficient
    else:
        a_fn = lambda xs: 2.0 * args.diffusivity * np.ones_like(xs)
    if args.mode == "forward":
        f0 = np.exp(-0.5 * ((x - args.center) / args.width) ** 2)
        f0[0] = f0[-1] = 0.0
        grid = genetics.solve_kolmogorov_forward(
            a_fn, genetics.zero_drift, f0, args.t_end, args.points
        )
        results = {
            "t_end": args.t_end,
            "interior_mass": grid.interior_mass(),
            "absorbed_mass_0": grid.absorbed_mass_0,
            "absorbed_mass_1": grid.absorbed_mass_1,
            "first_moment": grid.first_moment(),
            "dt": grid.dt,
        }
        oracles = {"total_mass": grid.total_mass(), "initial_mean": args.center}
        rows = list(zip(grid.x_points.tolist(), grid.density.tolist()))
        tabular = Tabular(("x", "value"), rows, "density", (grid.x_points, grid.density))
        return results, oracles, tabular
    # backward: value function for a terminal payoff
    if args.terminal == "linear":
        g = x.copy()
    else:
        g = 0.5 * (1.0 + np.tanh((x - args.center) / args.width))
        g[0], g[-1] = 0.0, 1.0
    u = genetics.solve_kolmogorov_backward(
        a_fn, genetics.zero_drift, g, args.t_end, args.points
    )
    results = {"t_end": args.t_end, "terminal": args.terminal, "u0": float(u[0]), "u1": float(u[-1])}
    oracles = {"max_gap_to_identity": float(np.abs(u - x).max())}
    rows = list(zip(x.tolist(), u.tolist()))
    tabular = Tabular(("x", "value"), rows, "density", (x, u))
    return results, oracles, tabular


# ---------------------------------------------------------------------------
# handlers: finance
# ---------------------------------------------------------------------------

def _market_from(args) -> finance.BinomialMarket:
    return finance.BinomialMarket(args.s0, args.u, args.d, args.r, args.p_up)


def _price_report(price, q=None, replication=None, ci=None, **extra) -> dict:
    # shared price-report schema; exact prices carry a zero-width interval
    low, high = ci if ci is not None else (price, price)
    report = {
        "price": price,
        "ci_low": low,
        "ci_high": high,
        "q": q,
        "replication": replication,
    }
    report.update(extra)
    return report


def _run_finance_price(args):
    market = _market_from(args)
    q = finance.risk_neutral_q(market)
    option = finance.OptionSpec(args.strike, 1, args.kind)
    payoff_up = float(option.payoff(market.s0 * market.u))
    payoff_down = float(option.payoff(market.s0 * market.d))
    price = finance.price_one_period(market, payoff_up, payoff_down)
    portfolio = finance.replicate_one_period(market, payoff_up, payoff_down)
    results = _price_report(
        price,
        q=q,
        replication={"bond": portfolio.bond, "shares_value": portfolio.shares_value},
        payoff_up=payoff_up,
        payoff_down=payoff_down,
    )
    oracles = {
        "replication_cost": portfolio.cost,
        "replication_gap": abs(portfolio.cost - price),
    }
    return results, oracles, None


def _run_finance_tree(args):
    market = _market_from(args)
    option = finance.OptionSpec(args.strike, args.periods, args.kind)
    tree = finance.price_multi_period(market, option)
    # the root hedge replicates the two node values one period out
    first_up, first_down = tree.node_values[1][1], tree.node_values[1][0]
    hedge = finance.replicate_one_period(market, float(first_up), float(first_down))
    results = _price_report(
        tree.price,
        q=finance.risk_neutral_q(market),
        replication={"bond": hedge.bond, "shares_value": hedge.shares_value},
        periods=args.periods,
    )
    oracles = {
        "martingale_defect": finance.discounted_martingale_defect(market, args.periods),
        "put_call_parity_gap": finance.put_call_parity_gap(market, args.strike, args.periods),
        "initial_hedge_cost_gap": abs(hedge.cost - tree.price),
    }
    levels = [(t, level.tolist()) for t, level in enumerate(tree.node_values)]
    rows = [(t, i, v) for t, level in levels for i, v in enumerate(level)]
    tabular = Tabular(("period", "up_moves", "value"), rows)
    return results, oracles, tabular


def _run_finance_mc(args):
    params = finance.GbmParams(args.s0, args.mu if args.mu is not None else args.r, args.sigma, args.r)
    option = finance.OptionSpec(args.strike, max(1, int(round(args.maturity))), args.kind)
    seed = _resolve_seed(args)
    result = finance.mc_price_european(
        params, option, args.paths, RngStream(seed), maturity=args.maturity
    )
    results = _price_report(
        result.price,
        ci=(result.ci_low, result.ci_high),
        level=result.level,
        n_paths=result.n_paths,
    )
    oracles = None
    if args.sigma > 0 and args.maturity > 0:
        market = finance.crr_tree_market(params, args.maturity, args.tree_steps)
        tree = finance.price_multi_period(
            market, finance.OptionSpec(args.strike, args.tree_steps, args.kind)
        )
        oracles = {
            "tree_price": tree.price,
            "tree_steps": args.tree_steps,
            "tree_inside_ci": bool(result.ci_low <= tree.price <= result.ci_high),
        }
    return results, oracles, None


# ---------------------------------------------------------------------------
# catalogue and parser
# ---------------------------------------------------------------------------

def list_experiments() -> list[dict]:
    """Stable, sorted catalogue of subcommands and their flags."""
    parser = build_parser()
    catalogue = []
    for group_name, group_parser in sorted(parser._group_parsers.items()):
        subactions = [
            a for a in group_parser._actions if isinstance(a, argparse._SubParsersAction)
        ]
        for sub in subactions:
            for name, leaf in sorted(sub.choices.items()):
                flags = sorted(
                    opt
                    for action in leaf._actions
                    for opt in action.option_strings
                    if opt.startswith("--") and opt != "--help"
                )
                catalogue.append(
                    {
                        "command": f"{group_name} {name}",
                        "description": (leaf.description or "").strip(),
                        "flags": flags,
                    }
                )
    return sorted(catalogue, key=lambda entry: entry["command"])


def _leaf(sub, name, handler, description, sampling=False, replicable=False):
    parser = sub.add_parser(name, description=description, help=description)
    parser.set_defaults(handler=handler)
    _add_common(parser, sampling=sampling, replicable=replicable)
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochlab",
        description="stochastic-modelling workbench: seeded experiments with JSON/CSV reports",
    )
    parser._group_parsers = {}
    top = parser.add_subparsers(dest="group", required=True)

    # list
    lister = top.add_parser("list", description="catalogue of experiments", help="catalogue of experiments")
    lister.set_defaults(handler="list")
    lister.add_argument("--output", help="write the catalogue as JSON here")

    # run (config file driver)
    runner = top.add_parser(
        "run",
        description="run an experiment described by a flat key=value config file",
        help="run from a config file",
    )
    runner.set_defaults(handler="run")
    runner.add_argument("--config", required=True, help="key=value file with a command= line")
    runner.add_argument(
        "overrides", nargs="*", metavar="KEY=VALUE", help="override config entries"
    )

    # laws
    laws_parser = top.add_parser("laws", help="probability-law queries and sampling")
    parser._group_parsers["laws"] = laws_parser
    laws_sub = laws_parser.add_subparsers(dest="command", required=True)
    p = _leaf(laws_sub, "pmf", _run_laws_pmf, "pointwise pmf, tail and moments of a discrete law")
    _law_flags(p)
    p.add_argument("--k", type=int, required=True, help="evaluation point")
    p = _leaf(laws_sub, "sample", _run_laws_sample, "seeded draws from a law", sampling=True)
    _law_flags(p)
    p.add_argument("--count", type=int, required=True, help="number of draws")

    # process
    proc_parser = top.add_parser("process", help="sample paths of stochastic processes")
    parser._group_parsers["process"] = proc_parser
    proc_sub = proc_parser.add_subparsers(dest="command", required=True)
    p = _leaf(
        proc_sub, "poisson", _run_process_poisson, "Poisson arrival path on (0, horizon]",
        sampling=True, replicable=True,
    )
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p = _leaf(proc_sub, "walk", _run_process_walk, "fair random walk path", sampling=True)
    p.add_argument("--steps", type=int, required=True)
    p = _leaf(proc_sub, "wiener", _run_process_wiener, "Wiener path on a uniform grid", sampling=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--n-steps", type=int, required=True)

    # markov
    markov_parser = top.add_parser("markov", help="Markov chain analysis")
    parser._group_parsers["markov"] = markov_parser
    markov_sub = markov_parser.add_subparsers(dest="command", required=True)
    p = _leaf(markov_sub, "transient", _run_markov_transient, "law at time t from a generator JSON file")
    p.add_argument("--generator", required=True, help="generator JSON path")
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--dt", type=float, default=None)
    p = _leaf(markov_sub, "stationary", _run_markov_stationary, "power-iteration fixed point of a transition matrix")
    p.add_argument("--matrix", required=True, help="transition-matrix JSON path")
    p.add_argument("--tol", type=float, default=1e-12)
    p = _leaf(markov_sub, "classify", _run_markov_classify, "absorbing/recurrent/transient state labels")
    p.add_argument("--matrix", required=True, help="transition-matrix JSON path")

    # queue
    queue_parser = top.add_parser("queue", help="M/M/1 analytics, simulation and inventories")
    parser._group_parsers["queue"] = queue_parser
    queue_sub = queue_parser.add_subparsers(dest="command", required=True)
    p = _leaf(queue_sub, "analyze", _run_queue_analyze, "closed-form steady state of the M/M/1 queue")
    p.add_argument("--lambda", type=float, required=True, dest="arrival_rate")
    p.add_argument("--mu", type=float, required=True, dest="service_rate")
    p.add_argument("--tail", type=float, default=1e-10, help="pmf truncation tail")
    p = _leaf(
        queue_sub, "simulate", _run_queue_simulate, "event-driven FIFO simulation",
        sampling=True, replicable=True,
    )
    p.add_argument("--lambda", type=float, required=True, dest="arrival_rate")
    p.add_argument("--mu", type=float, required=True, dest="service_rate")
    p.add_argument("--customers", type=int, required=True)
    p.add_argument("--warmup", type=float, default=queueing.DEFAULT_WARMUP_FRACTION)
    p = _leaf(queue_sub, "transient", _run_queue_transient, "user-count law at time t")
    p.add_argument("--lambda", type=float, required=True, dest="arrival_rate")
    p.add_argument("--mu", type=float, required=True, dest="service_rate")
    p.add_argument("--initial", type=int, default=0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p = _leaf(
        queue_sub, "inventory", _run_queue_inventory, "(r, s) inventory with lost sales",
        sampling=True, replicable=True,
    )
    p.add_argument("--r", type=int, required=True, dest="reorder_point")
    p.add_argument("--s", type=int, required=True, dest="order_up_to")
    p.add_argument("--demand-rate", type=float, required=True, help="exponential demand interarrival rate")
    p.add_argument("--lead-rate", type=float, default=1.0, help="exponential lead-time rate")
    p.add_argument("--lead-uniform", default=None, help="uniform lead time 'a,b' instead of exponential")
    p.add_argument("--initial", type=int, required=True)
    p.add_argument("--horizon", type=float, required=True)

    # genetics
    gen_parser = top.add_parser("genetics", help="Hardy-Weinberg, Wright-Fisher and diffusion limits")
    parser._group_parsers["genetics"] = gen_parser
    gen_sub = gen_parser.add_subparsers(dest="command", required=True)
    p = _leaf(gen_sub, "hw", _run_genetics_hw, "Hardy-Weinberg genotype algebra")
    p.add_argument("--observed-recessive", type=float, default=None)
    p.add_argument("--genotype", default=None, help="'p_aa,p_ab,p_bb'")
    p = _leaf(
        gen_sub, "wf-simulate", _run_genetics_wf_simulate, "Wright-Fisher drift until fixation",
        sampling=True, replicable=True,
    )
    p.add_argument("--two-n", type=int, required=True)
    p.add_argument("--x0", type=int, required=True)
    p.add_argument("--max-generations", type=int, default=100_000)
    p = _leaf(gen_sub, "wf-fixation", _run_genetics_wf_fixation, "exact fixation probability")
    p.add_argument("--two-n", type=int, required=True)
    p.add_argument("--x0", type=int, required=True)
    p = _leaf(gen_sub, "diffusion", _run_genetics_diffusion, "diffusion density (forward) or value function (backward)")
    p.add_argument("--mode", choices=("forward", "backward"), default="forward")
    p.add_argument("--coefficient", choices=("wright-fisher", "heat"), default="wright-fisher")
    p.add_argument("--diffusivity", type=float, default=0.05, help="D for the heat coefficient 2D")
    p.add_argument("--center", type=float, default=0.5, help="initial bump or terminal step location")
    p.add_argument("--width", type=float, default=0.04)
    p.add_argument("--terminal", choices=("linear", "step"), default="step", help="backward terminal payoff")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--points", type=int, default=genetics.DEFAULT_GRID_POINTS)

    # finance
    fin_parser = top.add_parser("finance", help="binomial and Monte Carlo option pricing")
    parser._group_parsers["finance"] = fin_parser
    fin_sub = fin_parser.add_subparsers(dest="command", required=True)

    def market_flags(leaf):
        leaf.add_argument("--s0", type=float, required=True)
        leaf.add_argument("--u", type=float, required=True)
        leaf.add_argument("--d", type=float, required=True)
        leaf.add_argument("--r", type=float, required=True)
        leaf.add_argument("--p-up", type=float, default=0.5)
        leaf.add_argument("--strike", type=float, required=True)
        leaf.add_argument("--kind", choices=("call", "put"), default="call")

    p = _leaf(fin_sub, "price", _run_finance_price, "one-period price with replication")
    market_flags(p)
    p = _leaf(fin_sub, "tree", _run_finance_tree, "multi-period recombining-tree price")
    market_flags(p)
    p.add_argument("--periods", type=int, required=True)
    p = _leaf(fin_sub, "mc", _run_finance_mc, "Monte Carlo GBM price under the risk-neutral drift", sampling=True)
    p.add_argument("--s0", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--mu", type=float, default=None, help="real-world drift, unused in pricing")
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--kind", choices=("call", "put"), default="call")
    p.add_argument("--tree-steps", type=int, default=1000, help="steps of the cross-checking tree")

    return parser


# ---------------------------------------------------------------------------
# config files and dispatch
# ---------------------------------------------------------------------------

def _parse_config_file(path: str) -> dict:
    entries = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    if "command" not in entries:
        raise ValueError("config file must contain a command= line")
    return entries


def _leaf_parser(command: str) -> argparse.ArgumentParser:
    tokens = command.split()
    if len(tokens) != 2:
        raise ValueError(f"command must be '<group> <name>', got {command!r}")
    parser = build_parser()
    group = parser._group_parsers.get(tokens[0])
    if group is None:
        raise ValueError(f"unknown command group {tokens[0]!r}")
    for action in group._actions:
        if isinstance(action, argparse._SubParsersAction) and tokens[1] in action.choices:
            return action.choices[tokens[1]]
    raise ValueError(f"unknown command {command!r}")


def _config_to_argv(entries: dict) -> list[str]:
    # config keys are parameter (dest) names; map them back onto the real
    # flags, which may differ (--lambda stores arrival_rate)
    leaf = _leaf_parser(entries["command"])
    flag_of = {
        action.dest: max(action.option_strings, key=len)
        for action in leaf._actions
        if action.option_strings
    }
    store_true = {
        action.dest
        for action in leaf._actions
        if isinstance(action, argparse._StoreTrueAction)
    }
    argv = entries["command"].split()
    for key, value in sorted(entries.items()):
        if key == "command":
            continue
        if key not in flag_of:
            raise ValueError(f"unknown config key {key!r} for {entries['command']!r}")
        if key in store_true:
            if value.lower() == "true":
                argv.append(flag_of[key])
        else:
            argv.extend([flag_of[key], value])
    return argv


def _handle_run(args) -> int:
    entries = _parse_config_file(args.config)
    for override in args.overrides:
        if "=" not in override:
            raise ValueError(f"override without '=': {override!r}")
        key, value = override.split("=", 1)
        entries[key.strip()] = value.strip()
    return main(_config_to_argv(entries))


def _handle_list(args) -> int:
    catalogue = list_experiments()
    if args.output:
        _atomic_write(Path(args.output), json.dumps(catalogue, indent=2, sort_keys=True) + "\n")
    else:
        for entry in catalogue:
            print(f"{entry['command']}: {entry['description']}")
            print(f"    flags: {' '.join(entry['flags'])}")
    return EXIT_OK


def _emit(args, report: dict, tabular: Tabular | None) -> None:
    text = report_text(report)
    if args.output and args.output_format == "json":
        _atomic_write(Path(args.output), text)
        return
    if args.output and args.output_format == "csv":
        if tabular is None:
            raise ValueError("this command has no tabular data; use --format json")
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        handle = tempfile.NamedTemporaryFile("w", dir=out.parent, prefix=f".{out.name}.", delete=False, newline="")
        try:
            write_csv(handle, tabular.header, tabular.rows)
            handle.close()
            os.replace(handle.name, out)
        except BaseException:
            handle.close()
            os.unlink(handle.name)
            raise
        if not args.no_figure:
            tabular.render_figure(out.with_suffix(".png"))
        sys.stdout.write(text)
        return
    if args.output_format == "csv":
        raise ValueError("--format csv needs --output")
    sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = args.handler
    if handler == "list":
        return _handle_list(args)
    try:
        if handler == "run":
            return _handle_run(args)
        results, oracles, tabular = handler(args)
        command = f"{args.group} {args.command}"
        report = build_report(command, _config_echo(args), results, oracles)
        _emit(args, report, tabular)
    except ModelError as error:
        print(f"model error: {error}", file=sys.stderr)
        return EXIT_MODEL
    except ValueError as error:
        print(f"invalid experiment: {error}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
