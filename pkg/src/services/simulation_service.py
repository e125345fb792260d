"""
Simulation Service
Seeded Monte Carlo study of the effect estimators under a linear
interference data-generating process
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.graph_core import (
    AdjacencyMatrix,
    degree_summary,
    eigenvalue_range,
    exposure,
    generate_ba,
    generate_er,
    generate_ws,
    total_weight_variance,
)
from src.services.data_service import Dataset
from src.services.effects_service import (
    EffectEstimate,
    estimate_naive,
    estimate_partially_known,
    estimate_total_known,
)
from src.services.regression_service import VcovSpec
from src.utils.constants import DEFAULT_ALPHA, ERROR_KINDS, GRAPH_KINDS, SIM_ESTIMATORS
from src.utils.errors import NotPositiveDefiniteError, NumericalError, ValidationError
from src.utils.helpers import replicate_seed_sequence, resolve_threads, seed_to_int
from src.utils.validation import (
    ensure_valid,
    validate_alpha,
    validate_choice,
    validate_count,
    validate_probability,
    validate_rows,
)

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())

# Coefficients of L1..L4 in both structural equations
COVARIATE_WEIGHTS = np.array([1.0, 2.0, 3.0, 4.0])
COVARIATE_NAMES = ("L1", "L2", "L3", "L4")


@dataclass(frozen=True)
class GraphSpec:
    """Random graph family for the simulated units"""

    kind: str = "er"
    p: float = 0.01
    power: float = 0.05
    m: int = 1
    nei: int = 10
    p_rewire: float = 0.05
    directed: bool = False

    def __post_init__(self):
        ensure_valid(validate_choice(self.kind, GRAPH_KINDS, "graph"))
        ensure_valid(validate_probability(self.p, "p"))
        ensure_valid(validate_probability(self.p_rewire, "p_rewire"))
        ensure_valid(validate_count(self.m, "m"))
        ensure_valid(validate_count(self.nei, "nei"))
        if self.directed and self.kind != "er":
            raise ValidationError(f"only er graphs can be generated directed, not {self.kind}")

    @property
    def label(self) -> str:
        if self.kind == "er":
            return f"er(p={self.p:g}{', directed' if self.directed else ''})"
        if self.kind == "ba":
            return f"ba(power={self.power:g}, m={self.m})"
        return f"ws(nei={self.nei}, p_rewire={self.p_rewire:g})"

    def generate(self, n: int, seed: int) -> AdjacencyMatrix:
        if self.kind == "er":
            return generate_er(n, self.p, seed, directed=self.directed)
        if self.kind == "ba":
            return generate_ba(n, power=self.power, m=self.m, seed=seed)
        return generate_ws(n, self.nei, self.p_rewire, seed)

    def weight_variance(self, n: int) -> float:
        return total_weight_variance(self.kind, n, p=self.p, directed=self.directed)


@dataclass(frozen=True)
class ErrorSpec:
    """
    Error covariance Sigma = a I + b G for both structural equations.

    homo uses Sigma = I. none keeps a standard normal treatment error and
    draws no outcome error, so Y is an exact function of A, L and G.
    """

    kind: str = "homo"
    a: float = 3.0
    b: float = 1.5

    def __post_init__(self):
        ensure_valid(validate_choice(self.kind, ERROR_KINDS, "errors"))
        if self.kind == "corr" and not (self.a > 0):
            raise ValidationError(f"correlated errors need a > 0, got {self.a}")

    @property
    def weights(self) -> Tuple[float, float]:
        if self.kind == "homo":
            return 1.0, 0.0
        if self.kind == "none":
            return 0.0, 0.0
        return float(self.a), float(self.b)

    @property
    def label(self) -> str:
        if self.kind == "corr":
            return f"corr(a={self.a:g}, b={self.b:g})"
        return self.kind


@dataclass(frozen=True)
class SimConfig:
    """
    One Monte Carlo configuration.

    Replicates first_rep .. first_rep + reps - 1 are run, so splitting a
    study into consecutive blocks pools to the same replicates.
    """

    n: int = 400
    graph: GraphSpec = field(default_factory=GraphSpec)
    errors: ErrorSpec = field(default_factory=ErrorSpec)
    estimators: Tuple[str, ...] = ("full", "partial", "naive")
    reps: int = 100
    base_seed: int = 1
    fixed_graph: bool = False
    first_rep: int = 0
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        ensure_valid(validate_count(self.n, "n"))
        ensure_valid(validate_count(self.reps, "reps"))
        ensure_valid(validate_count(self.first_rep, "first_rep", minimum=0))
        ensure_valid(validate_count(self.base_seed, "seed", minimum=0))
        ensure_valid(validate_alpha(self.alpha))
        estimators = tuple(self.estimators)
        if not estimators:
            raise ValidationError("at least one estimator is required")
        for name in estimators:
            ensure_valid(validate_choice(name, SIM_ESTIMATORS, "estimator"))
        if len(set(estimators)) != len(estimators):
            raise ValidationError(f"duplicate estimators in {', '.join(estimators)}")
        object.__setattr__(self, "estimators", estimators)

    def rep_indices(self) -> range:
        return range(self.first_rep, self.first_rep + self.reps)


@dataclass(frozen=True)
class ReplicateResult:
    """One estimator on one replicate; psi_hat is NaN when the fit failed."""

    estimator: str
    rep_index: int
    psi_hat: float
    se_hat: float
    ci_lower: float
    ci_upper: float
    covered: bool
    true_psi: float
    f_bar: float
    seed: int
    vcov_kind: str
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class EstimatorSummary:
    estimator: str
    reps: int
    failures: int
    bias: float
    sd: float
    mean_se: float
    coverage: float
    rmse: float
    mean_f_bar: float
    mean_true_psi: float
    mean_est_variance: float
    empirical_variance: float

    @property
    def failed(self) -> bool:
        return self.reps == 0


@dataclass(frozen=True)
class SimulationReport:
    config: SimConfig
    summaries: Tuple[EstimatorSummary, ...]
    replicates: Tuple[ReplicateResult, ...]

    def summary(self, estimator: str) -> EstimatorSummary:
        for item in self.summaries:
            if item.estimator == estimator:
                return item
        raise KeyError(estimator)


# ----------------------------------------------------------------------------
# Data-generating process
# ----------------------------------------------------------------------------

def sample_covariates(n: int, rng: np.random.Generator) -> np.ndarray:
    """n x 4 matrix: Gamma(3, 1), Poisson(1), Beta(2, 5), Bernoulli(0.6) columns"""
    ensure_valid(validate_count(n, "n"))
    return np.column_stack([
        rng.gamma(3.0, 1.0, size=n),
        rng.poisson(1.0, size=n).astype(float),
        rng.beta(2.0, 5.0, size=n),
        rng.binomial(1, 0.6, size=n).astype(float),
    ])


def _covariance_factor(a: float, b: float, G: AdjacencyMatrix, family: str) -> np.ndarray:
    """Lower Cholesky factor of a I + b G."""
    if b != 0 and not G.is_symmetric():
        raise ValidationError("correlated errors need a symmetric graph")
    sigma = a * np.eye(G.n) + b * G.toarray()
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError:
        lam_min, lam_max = eigenvalue_range(G)
        smallest = a + b * (lam_min if b > 0 else lam_max)
        raise NotPositiveDefiniteError(
            f"Sigma = {a:g} I + {b:g} G is not positive definite for the {family} graph "
            f"(smallest eigenvalue {smallest:.4g}, G spans [{lam_min:.4g}, {lam_max:.4g}]); "
            "shrink b or row-normalize G"
        ) from None


def sample_correlated_normal(
    n: int,
    a: float,
    b: float,
    G: AdjacencyMatrix,
    rng: np.random.Generator,
    family: str = "supplied",
) -> np.ndarray:
    """Draw from N(0, a I + b G) through a Cholesky factor of the covariance"""
    ensure_valid(validate_rows(G.n, n, "graph"))
    if not (a > 0):
        raise ValidationError(f"diagonal weight a must be positive, got {a}")
    if b == 0:
        return math.sqrt(a) * rng.standard_normal(n)
    return _covariance_factor(a, b, G, family) @ rng.standard_normal(n)


def generate_dgp(
    n: int,
    G: AdjacencyMatrix,
    errors: ErrorSpec,
    rng: np.random.Generator,
    family: str = "supplied",
) -> Tuple[Dataset, float]:
    """
    Simulate one dataset

    A = L1 + 2 L2 + 3 L3 + 4 L4 + eps_A
    Y = A + L1 + 2 L2 + 3 L3 + 4 L4 + G A + eps_Y

    Returns:
        Tuple of (dataset, true total effect 1 + F_bar)
    """
    ensure_valid(validate_rows(G.n, n, "graph"))
    L = sample_covariates(n, rng)
    signal = L @ COVARIATE_WEIGHTS

    a, b = errors.weights
    if errors.kind == "none":
        eps_a = rng.standard_normal(n)
        eps_y = np.zeros(n)
    elif b == 0:
        eps_a = math.sqrt(a) * rng.standard_normal(n)
        eps_y = math.sqrt(a) * rng.standard_normal(n)
    else:
        factor = _covariance_factor(a, b, G, family)
        eps_a = factor @ rng.standard_normal(n)
        eps_y = factor @ rng.standard_normal(n)

    A = signal + eps_a
    Y = A + signal + exposure(G, A) + eps_y
    data = Dataset(y=Y, a=A, L=L, covariate_names=COVARIATE_NAMES)
    return data, 1.0 + degree_summary(G).F_bar


def build_graph(config: SimConfig, rep_index: int) -> AdjacencyMatrix:
    """Graph for one replicate; fixed_graph reuses the replicate-0 graph."""
    graph_rep = 0 if config.fixed_graph else rep_index
    graph_seed = replicate_seed_sequence(config.base_seed, graph_rep).spawn(2)[0]
    return config.graph.generate(config.n, seed_to_int(graph_seed))


# ----------------------------------------------------------------------------
# Replicates
# ----------------------------------------------------------------------------

def _run_estimator(name: str, data: Dataset, G: AdjacencyMatrix, alpha: float) -> EffectEstimate:
    if name == "full":
        return estimate_total_known(data, [G], VcovSpec("classical"), alpha)
    if name == "full_gls":
        return estimate_total_known(data, [G], VcovSpec("gls"), alpha)
    if name == "partial":
        return estimate_partially_known(data, degree_summary(G).F, VcovSpec("classical"), alpha)
    return estimate_naive(data, VcovSpec("classical"), alpha)


def run_replicate(config: SimConfig, rep_index: int) -> List[ReplicateResult]:
    """
    Simulate one replicate and apply every requested estimator

    Estimator failures are recorded in the result; a non positive definite
    error covariance is raised.
    """
    ensure_valid(validate_count(rep_index, "rep_index", minimum=0))
    seed_sequence = replicate_seed_sequence(config.base_seed, rep_index)
    seed = seed_to_int(seed_sequence)
    data_seed = seed_sequence.spawn(2)[1]

    G = build_graph(config, rep_index)
    rng = np.random.default_rng(data_seed)
    data, true_psi = generate_dgp(config.n, G, config.errors, rng, family=config.graph.label)
    f_bar = true_psi - 1.0

    results = []
    for name in config.estimators:
        vcov_kind = "gls" if name == "full_gls" else "classical"
        try:
            estimate = _run_estimator(name, data, G, config.alpha)
        except (NumericalError, ValidationError) as exc:
            logger.warning(f"Replicate {rep_index}: {name} estimator failed: {exc}")
            results.append(ReplicateResult(
                estimator=name, rep_index=rep_index, psi_hat=math.nan, se_hat=math.nan,
                ci_lower=math.nan, ci_upper=math.nan, covered=False, true_psi=true_psi,
                f_bar=f_bar, seed=seed, vcov_kind=vcov_kind, error=str(exc),
            ))
            continue
        lower, upper = estimate.ci
        results.append(ReplicateResult(
            estimator=name,
            rep_index=rep_index,
            psi_hat=estimate.psi,
            se_hat=estimate.se,
            ci_lower=lower,
            ci_upper=upper,
            covered=bool(lower <= true_psi <= upper),
            true_psi=true_psi,
            f_bar=f_bar,
            seed=seed,
            vcov_kind=vcov_kind,
        ))
    logger.debug(f"Replicate {rep_index} (seed {seed}) done, F_bar={f_bar:.4f}")
    return results


def summarize(estimator: str, results: Sequence[ReplicateResult]) -> EstimatorSummary:
    """Operating characteristics of one estimator over its replicates"""
    rows = [r for r in results if r.estimator == estimator]
    ok = [r for r in rows if not r.failed]
    failures = len(rows) - len(ok)
    if not ok:
        nan = math.nan
        return EstimatorSummary(estimator, 0, failures, nan, nan, nan, nan, nan, nan, nan, nan, nan)

    psi = np.array([r.psi_hat for r in ok])
    truth = np.array([r.true_psi for r in ok])
    se = np.array([r.se_hat for r in ok])
    error = psi - truth
    sd = float(np.std(psi, ddof=1)) if len(ok) > 1 else math.nan
    return EstimatorSummary(
        estimator=estimator,
        reps=len(ok),
        failures=failures,
        bias=float(error.mean()),
        sd=sd,
        mean_se=float(se.mean()),
        coverage=float(np.mean([r.covered for r in ok])),
        rmse=float(np.sqrt(np.mean(error ** 2))),
        mean_f_bar=float(np.mean([r.f_bar for r in ok])),
        mean_true_psi=float(truth.mean()),
        mean_est_variance=float(np.mean(se ** 2)),
        empirical_variance=sd ** 2,
    )


def run_simulation(config: SimConfig, threads: int = 1) -> SimulationReport:
    """
    Run every replicate and aggregate per estimator

    Args:
        config: Simulation configuration
        threads: Worker threads (0 = one per physical core)

    Returns:
        SimulationReport; identical for any thread count
    """
    workers = resolve_threads(threads)
    indices = list(config.rep_indices())
    logger.info(
        f"Simulating n={config.n}, graph {config.graph.label}, errors {config.errors.label}, "
        f"{config.reps} replicates on {workers} thread(s)"
    )
    if workers > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda i: run_replicate(config, i), indices))
    else:
        batches = [run_replicate(config, i) for i in indices]

    replicates = tuple(result for batch in batches for result in batch)
    summaries = tuple(summarize(name, replicates) for name in config.estimators)
    for item in summaries:
        if item.failed:
            logger.warning(f"Estimator {item.estimator} failed on every replicate")
        elif item.failures:
            logger.warning(f"Estimator {item.estimator} failed on {item.failures} of {config.reps} replicates")
    return SimulationReport(config=config, summaries=summaries, replicates=replicates)


def pool_reports(reports: Sequence[SimulationReport]) -> SimulationReport:
    """Combine reports of consecutive replicate blocks of one configuration."""
    if not reports:
        raise ValidationError("no reports to pool")
    base = reports[0].config
    replicates = tuple(
        sorted((r for report in reports for r in report.replicates), key=lambda r: (r.rep_index, base.estimators.index(r.estimator)))
    )
    indices = sorted({r.rep_index for r in replicates})
    config = SimConfig(
        n=base.n, graph=base.graph, errors=base.errors, estimators=base.estimators,
        reps=len(indices), base_seed=base.base_seed, fixed_graph=base.fixed_graph,
        first_rep=indices[0], alpha=base.alpha,
    )
    summaries = tuple(summarize(name, replicates) for name in base.estimators)
    return SimulationReport(config=config, summaries=summaries, replicates=replicates)
