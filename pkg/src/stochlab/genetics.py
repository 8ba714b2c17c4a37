"""Hardy-Weinberg genotype algebra, the Wright-Fisher drift chain, and the
degenerate-coefficient diffusion solvers for its continuum limit.

Two-allele conventions: genotype proportions (p_aa, p_ab, p_bb) sum to 1;
gene frequencies are p_a = p_aa + p_ab / 2 and symmetrically for b. The
Wright-Fisher chain tracks the count of a-alleles in a pool of size 2N;
each generation resamples the pool binomially, so 0 and 2N absorb and the
count is a martingale.

The continuum limit lives on [0, 1] with diffusion coefficient
a(x) = x (1 - x) and zero drift, under the time scaling of one generation
per 1/(2N) diffusion time unit. Densities evolve by

    df/dt = 1/2 d^2/dx^2 [a f] - d/dx [b f]

solved with an explicit conservative scheme on a uniform grid; mass
leaving through the absorbing endpoints accumulates in per-boundary
absorbed-mass counters so that interior mass plus absorbed mass is
conserved. Value functions solve the adjoint equation

    -du/ds = 1/2 a d^2u/dx^2 + b du/dx

backward from a terminal condition with the endpoint values pinned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .laws import Binomial
from .rng import RngStream
from .tabular import write_csv

_SUM_TOL = 1e-12

#: default uniform grid resolution on [0, 1]
DEFAULT_GRID_POINTS = 201
#: default time step as a fraction of the explicit stability bound dx^2 / max(a)
DEFAULT_CFL_FRACTION = 0.4


# ---------------------------------------------------------------------------
# Hardy-Weinberg algebra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenotypeFreqs:
    """Proportions of the three genotypes aa, ab, bb."""

    p_aa: float
    p_ab: float
    p_bb: float

    def __post_init__(self):
        if not (0.0 <= self.p_aa <= 1.0 and 0.0 <= self.p_ab <= 1.0 and 0.0 <= self.p_bb <= 1.0):
            raise ValueError(
                f"genotype proportions must lie in [0, 1], got "
                f"({self.p_aa}, {self.p_ab}, {self.p_bb})"
            )
        total = self.p_aa + self.p_ab + self.p_bb
        if not -_SUM_TOL <= total - 1.0 <= _SUM_TOL:
            raise ValueError(f"genotype proportions sum to {total}, not 1")


@dataclass(frozen=True)
class GeneFreqs:
    """Proportions of the two alleles."""

    p_a: float
    p_b: float

    def __post_init__(self):
        gap = self.p_a + self.p_b - 1.0
        if not -_SUM_TOL <= gap <= _SUM_TOL:
            raise ValueError("allele proportions must sum to 1")
        if not 0.0 <= self.p_a <= 1.0:
            raise ValueError(f"p_a must lie in [0, 1], got {self.p_a}")


@dataclass(frozen=True)
class MatingProbs:
    """Probabilities of the six unordered mating pairs under random mating."""

    aa_aa: float
    ab_ab: float
    bb_bb: float
    aa_ab: float
    aa_bb: float
    ab_bb: float

    def total(self) -> float:
        return self.aa_aa + self.ab_ab + self.bb_bb + self.aa_ab + self.aa_bb + self.ab_bb


def gene_frequencies(g: GenotypeFreqs) -> GeneFreqs:
    """Allele proportions: each heterozygote carries half of each allele."""
    return GeneFreqs(g.p_aa + 0.5 * g.p_ab, g.p_bb + 0.5 * g.p_ab)


def mating_probabilities(g: GenotypeFreqs) -> MatingProbs:
    """Random-mating pair probabilities; they sum to 1."""
    return MatingProbs(
        aa_aa=g.p_aa**2,
        ab_ab=g.p_ab**2,
        bb_bb=g.p_bb**2,
        aa_ab=2.0 * g.p_aa * g.p_ab,
        aa_bb=2.0 * g.p_aa * g.p_bb,
        ab_bb=2.0 * g.p_ab * g.p_bb,
    )


def next_generation(g: GenotypeFreqs) -> GenotypeFreqs:
    """Offspring genotype proportions (p_a^2, 2 p_a p_b, p_b^2) from the
    parents' allele frequencies.

    This map is idempotent: equilibrium is reached after one generation
    of random mating and allele frequencies are conserved.
    """
    p_a = g.p_aa + 0.5 * g.p_ab
    p_b = g.p_bb + 0.5 * g.p_ab
    return GenotypeFreqs(p_a * p_a, 2.0 * p_a * p_b, p_b * p_b)


def infer_from_recessive_phenotype(observed_fraction: float) -> tuple[GeneFreqs, GenotypeFreqs]:
    """Population structure from the visible recessive fraction.

    At equilibrium the recessive phenotype has proportion p_b^2, so
    p_b is its square root and the genotypes follow.
    """
    if not 0.0 < observed_fraction <= 1.0:
        raise ValueError(f"observed fraction must lie in (0, 1], got {observed_fraction}")
    p_b = math.sqrt(observed_fraction)
    freqs = GeneFreqs(1.0 - p_b, p_b)
    return freqs, GenotypeFreqs(freqs.p_a**2, 2.0 * freqs.p_a * freqs.p_b, freqs.p_b**2)


# ---------------------------------------------------------------------------
# Wright-Fisher chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WrightFisherModel:
    """Allele pool of size two_n = 2N; states are counts 0..2N."""

    two_n: int

    def __post_init__(self):
        if self.two_n < 2 or self.two_n % 2 != 0:
            raise ValueError(f"pool size must be a positive even integer, got {self.two_n}")

    @classmethod
    def from_individuals(cls, n: int) -> "WrightFisherModel":
        return cls(2 * n)


@dataclass(frozen=True)
class WrightFisherRun:
    """Trajectory of allele counts and the absorption record."""

    trajectory: np.ndarray
    absorbed: bool
    absorption_state: int | None
    generations: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "absorbed": self.absorbed,
                "absorption_state": self.absorption_state,
                "generations": self.generations,
                "trajectory": [int(x) for x in self.trajectory],
            }
        )


def wf_transition_pmf(model: WrightFisherModel, j: int, k: int) -> float:
    """One-generation probability of moving from j to k copies."""
    two_n = model.two_n
    if not 0 <= j <= two_n or not 0 <= k <= two_n:
        raise ValueError(f"states must lie in 0..{two_n}")
    return Binomial(two_n, j / two_n).pmf(k)


def _transition_row(model: WrightFisherModel, j: int) -> np.ndarray:
    # Mode-anchored multiplicative recurrence, normalised: the anchor's
    # log-gamma error becomes a common factor that normalisation removes,
    # keeping row means accurate to ~1e-13 even at pool size 200.
    n = model.two_n
    if j == 0 or j == n:
        row = np.zeros(n + 1)
        row[j] = 1.0
        return row
    p = j / n
    q = 1.0 - p
    mode = int((n + 1) * p)
    row = np.zeros(n + 1)
    row[mode] = Binomial(n, p).pmf(mode)
    for k in range(mode, n):
        row[k + 1] = row[k] * ((n - k) * p) / ((k + 1) * q)
    for k in range(mode, 0, -1):
        row[k - 1] = row[k] * (k * q) / ((n - k + 1) * p)
    return row / row.sum()


def wf_transition_matrix(model: WrightFisherModel) -> np.ndarray:
    """Full (2N+1) x (2N+1) resampling matrix."""
    return np.vstack([_transition_row(model, j) for j in range(model.two_n + 1)])


def simulate_wright_fisher(
    model: WrightFisherModel, x0: int, max_generations: int, rng: RngStream
) -> WrightFisherRun:
    """Binomial resampling until fixation or the generation cap."""
    two_n = model.two_n
    if not 0 < x0 < two_n:
        raise ValueError(f"x0 must be strictly between 0 and {two_n}")
    if max_generations < 1:
        raise ValueError("max_generations must be at least 1")
    trajectory = [x0]
    state = x0
    for _ in range(max_generations):
        state = int((rng.uniform(two_n) < state / two_n).sum())
        trajectory.append(state)
        if state == 0 or state == two_n:
            return WrightFisherRun(np.array(trajectory), True, state, len(trajectory) - 1)
    return WrightFisherRun(np.array(trajectory), False, None, max_generations)


def fixation_probability_exact(model: WrightFisherModel, x0: int) -> float:
    """Probability of absorption at 2N from x0, by the absorbing-chain solve.

    Solves h(j) = sum_k P(j, k) h(k) with h(0) = 0 and h(2N) = 1 on the
    interior states. The martingale property of the count forces the
    solution onto h(j) = j / 2N, which the linear solve reproduces to
    rounding.
    """
    two_n = model.two_n
    if not 0 <= x0 <= two_n:
        raise ValueError(f"x0 must lie in 0..{two_n}")
    if x0 == 0:
        return 0.0
    if x0 == two_n:
        return 1.0
    p = wf_transition_matrix(model)
    interior = np.arange(1, two_n)
    a = np.eye(two_n - 1) - p[np.ix_(interior, interior)]
    b = p[interior, two_n]
    h = np.linalg.solve(a, b)
    return float(h[x0 - 1])


def conditional_mean_check(model: WrightFisherModel, j: int) -> float:
    """Mean copy count after one generation from j; equals j exactly."""
    two_n = model.two_n
    if not 0 <= j <= two_n:
        raise ValueError(f"state must lie in 0..{two_n}")
    row = _transition_row(model, j)
    return float(row @ np.arange(two_n + 1))


# ---------------------------------------------------------------------------
# diffusion solvers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionGrid:
    """Density on a uniform grid over [0, 1] plus absorbed boundary mass."""

    x_points: np.ndarray
    dt: float
    density: np.ndarray
    absorbed_mass_0: float
    absorbed_mass_1: float

    @property
    def dx(self) -> float:
        return float(self.x_points[1] - self.x_points[0])

    def interior_mass(self) -> float:
        return float(np.trapezoid(self.density, self.x_points))

    def total_mass(self) -> float:
        return self.interior_mass() + self.absorbed_mass_0 + self.absorbed_mass_1

    def first_moment(self) -> float:
        """Interior first moment plus the mass absorbed at x = 1."""
        return float(np.trapezoid(self.x_points * self.density, self.x_points)) + self.absorbed_mass_1

    def to_csv(self, target) -> None:
        write_csv(target, ("x", "value"), zip(self.x_points, self.density))


def grid_points(n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform grid on [0, 1]."""
    if n_points < 3:
        raise ValueError("need at least 3 grid points")
    return np.linspace(0.0, 1.0, n_points)


def wright_fisher_coefficient(x: np.ndarray) -> np.ndarray:
    """Degenerate drift-free diffusion coefficient x (1 - x)."""
    return x * (1.0 - x)


def zero_drift(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


def _prepare_coefficients(a_fn, b_fn, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a_fn(x), dtype=float)
    b = np.asarray(b_fn(x), dtype=float) if b_fn is not None else np.zeros_like(x)
    if a.shape != x.shape or b.shape != x.shape:
        raise ValueError("coefficient functions must evaluate pointwise on the grid")
    if (a < 0).any():
        raise ValueError("diffusion coefficient must be non-negative on [0, 1]")
    if a.max() == 0.0:
        raise ValueError("diffusion coefficient vanishes identically")
    return a, b


def _resolve_pde_dt(a_max: float, dx: float, t_total: float, dt: float | None) -> tuple[int, float]:
    bound = dx * dx / a_max
    if dt is None:
        dt = DEFAULT_CFL_FRACTION * bound
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > bound:
        raise ValueError(f"dt={dt} violates the stability bound dx^2/max(a)={bound}")
    if t_total == 0.0:
        return 0, dt
    steps = max(1, int(math.ceil(t_total / dt - 1e-12)))
    return steps, t_total / steps


def solve_kolmogorov_forward(
    a_fn,
    b_fn,
    f0,
    t_end: float,
    n_points: int = DEFAULT_GRID_POINTS,
    dt: float | None = None,
) -> DiffusionGrid:
    """Evolve a density to t_end with absorbing endpoints.

    ``f0`` gives density samples on the uniform grid; endpoint samples are
    zeroed (instantly absorbed in the continuum) and the rest renormalised
    by the trapezoidal rule. The scheme is conservative: the update moves
    flux differences between cells, and the flux through each endpoint
    accumulates into the matching absorbed mass, so total mass is
    conserved to rounding. With zero drift the total first moment
    (interior plus mass at x = 1) is conserved as well.
    """
    if t_end < 0:
        raise ValueError(f"t_end must be non-negative, got {t_end}")
    x = grid_points(n_points)
    dx = x[1] - x[0]
    a, b = _prepare_coefficients(a_fn, b_fn, x)

    f = np.asarray(f0, dtype=float).copy()
    if f.shape != x.shape:
        raise ValueError(f"f0 must sample the {n_points}-point grid")
    if (f < 0).any():
        raise ValueError("initial density must be non-negative")
    f[0] = f[-1] = 0.0
    mass = np.trapezoid(f, x)
    if mass <= 0:
        raise ValueError("initial density has no interior mass")
    f /= mass

    steps, step = _resolve_pde_dt(float(a.max()), dx, t_end, dt)
    absorbed_0 = absorbed_1 = 0.0
    for _ in range(steps):
        g = a * f
        drift_flux = b * f
        # flux at half points: J = -1/2 d(af)/dx + b f
        flux = -0.5 * (g[1:] - g[:-1]) / dx + 0.5 * (drift_flux[1:] + drift_flux[:-1])
        f[1:-1] -= step * (flux[1:] - flux[:-1]) / dx
        absorbed_0 += step * (-flux[0])
        absorbed_1 += step * flux[-1]
        f[0] = f[-1] = 0.0
    return DiffusionGrid(x, step, f, absorbed_0, absorbed_1)


def solve_kolmogorov_backward(
    a_fn,
    b_fn,
    terminal_g,
    t_span: float,
    n_points: int = DEFAULT_GRID_POINTS,
    dt: float | None = None,
) -> np.ndarray:
    """Value function at time 0 for a terminal payoff at t_span.

    Integrates du/dtau = 1/2 a u'' + b u' in time-to-go tau from the
    terminal samples, endpoint values pinned to g(0) and g(1). A linear
    terminal function is stationary under the drift-free degenerate
    coefficient; for long horizons the result approaches the line through
    the pinned endpoint values, which is the fixation-probability profile
    when g is the indicator of the upper boundary.
    """
    if t_span < 0:
        raise ValueError(f"t_span must be non-negative, got {t_span}")
    x = grid_points(n_points)
    dx = x[1] - x[0]
    a, b = _prepare_coefficients(a_fn, b_fn, x)

    u = np.asarray(terminal_g, dtype=float).copy()
    if u.shape != x.shape:
        raise ValueError(f"terminal_g must sample the {n_points}-point grid")

    steps, step = _resolve_pde_dt(float(a.max()), dx, t_span, dt)
    for _ in range(steps):
        curvature = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
        gradient = (u[2:] - u[:-2]) / (2.0 * dx)
        u[1:-1] += step * (0.5 * a[1:-1] * curvature + b[1:-1] * gradient)
    return u


def generations_to_diffusion_time(generations: float, model: WrightFisherModel) -> float:
    """Time scaling: one generation advances diffusion time by 1/(2N)."""
    return generations / model.two_n
