"""
Effects Service
Total, within-unit and spillover effect estimates with plug-in variances
and Wald confidence intervals
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from src.graph_core import AdjacencyMatrix, degree_summary
from src.services.data_service import Dataset
from src.services.regression_service import (
    VcovSpec,
    aic,
    build_design,
    degree_name,
    exposure_name,
    fit_gls_network,
    fit_ols,
    sandwich_vcov,
)
from src.utils.constants import DEFAULT_ALPHA, PSD_TOL, SYMMETRY_TOL
from src.utils.errors import NotPositiveDefiniteError, ValidationError
from src.utils.validation import ensure_valid, validate_alpha, validate_rows

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())


@dataclass(frozen=True)
class EffectEstimate:
    """
    One total-effect estimate.

    psi = beta_a + sum_k beta_as[k] * f_bar[k]; spillover[k] is the
    per-network component beta_as[k] * f_bar[k].
    """

    estimator: str
    psi: float
    se: float
    ci: Tuple[float, float]
    alpha: float
    beta_a: float
    beta_as: Tuple[float, ...]
    f_bar: Tuple[float, ...]
    vcov_kind: str
    n: int
    dropped: Tuple[str, ...] = ()
    warnings: Tuple[str, ...] = ()
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def spillover(self) -> Tuple[float, ...]:
        return tuple(b * f for b, f in zip(self.beta_as, self.f_bar))

    @property
    def variance(self) -> float:
        return self.se ** 2


# ----------------------------------------------------------------------------
# Plug-in arithmetic
# ----------------------------------------------------------------------------

def plug_in_psi(beta_a: float, beta_as: Sequence[float], f_bar: Sequence[float]) -> float:
    """beta_a + sum_k beta_as[k] * f_bar[k]"""
    beta_as = np.asarray(beta_as, dtype=float).ravel()
    f_bar = np.asarray(f_bar, dtype=float).ravel()
    if beta_as.shape != f_bar.shape:
        raise ValidationError(f"{beta_as.size} spillover coefficients for {f_bar.size} mean degrees")
    return float(beta_a + beta_as @ f_bar)


def plug_in_variance(vcov_sub: np.ndarray, f_bar: Sequence[float]) -> float:
    """
    c' V c with c = (1, f_bar_1, ..., f_bar_K)

    Args:
        vcov_sub: Covariance of (beta_a, beta_as_1, ..., beta_as_K)
        f_bar: Mean weighted degree per network

    Returns:
        Variance of the plug-in estimate, conditional on the observed graphs
    """
    V = np.atleast_2d(np.asarray(vcov_sub, dtype=float))
    c = np.concatenate([[1.0], np.asarray(f_bar, dtype=float).ravel()])
    if V.shape != (c.size, c.size):
        raise ValidationError(f"covariance block is {V.shape}, expected {(c.size, c.size)}")
    scale = max(1.0, float(np.max(np.abs(V))))
    if np.max(np.abs(V - V.T)) > SYMMETRY_TOL * scale * 1e3:
        raise ValidationError("coefficient covariance must be symmetric")
    V = 0.5 * (V + V.T)
    smallest = float(np.linalg.eigvalsh(V)[0])
    if smallest < -PSD_TOL * scale:
        raise NotPositiveDefiniteError(f"coefficient covariance is not positive semidefinite (eigenvalue {smallest:.3g})")
    return max(float(c @ V @ c), 0.0)


def z_quantile(alpha: float) -> float:
    """Standard normal quantile z_{1 - alpha/2}"""
    ensure_valid(validate_alpha(alpha))
    return float(norm.ppf(1.0 - alpha / 2.0))


def wald_ci(psi: float, variance: float, alpha: float = DEFAULT_ALPHA) -> Tuple[float, float]:
    """psi -/+ z_{1 - alpha/2} * sqrt(variance)"""
    if not variance >= 0:
        raise ValidationError(f"variance must be nonnegative, got {variance}")
    half = z_quantile(alpha) * float(np.sqrt(variance))
    return float(psi - half), float(psi + half)


# ----------------------------------------------------------------------------
# Estimators
# ----------------------------------------------------------------------------

def _finish(
    estimator: str,
    psi: float,
    variance: float,
    alpha: float,
    beta_a: float,
    beta_as: Sequence[float],
    f_bar: Sequence[float],
    vcov: VcovSpec,
    n: int,
    dropped: Sequence[str],
    warnings: Sequence[str],
    diagnostics: Optional[Dict[str, Any]] = None,
) -> EffectEstimate:
    for message in warnings:
        logger.warning(message)
    lower, upper = wald_ci(psi, variance, alpha)
    return EffectEstimate(
        estimator=estimator,
        psi=psi,
        se=float(np.sqrt(variance)),
        ci=(lower, upper),
        alpha=alpha,
        beta_a=float(beta_a),
        beta_as=tuple(float(b) for b in beta_as),
        f_bar=tuple(float(f) for f in f_bar),
        vcov_kind=vcov.kind,
        n=n,
        dropped=tuple(dropped),
        warnings=tuple(warnings),
        diagnostics=dict(diagnostics or {}),
    )


def _ols_only(vcov: VcovSpec, estimator: str):
    if vcov.kind == "gls":
        raise ValidationError(f"gls covariance needs a graph; use the full estimator instead of {estimator}")


def estimate_total_known(
    data: Dataset,
    graphs: Sequence[AdjacencyMatrix],
    vcov: VcovSpec = VcovSpec(),
    alpha: float = DEFAULT_ALPHA,
    include_neighbor_intercept: bool = False,
    known_sigma: Optional[Tuple[float, float]] = None,
    intercept: bool = True,
) -> EffectEstimate:
    """
    Total effect when every interference graph is observed

    Args:
        data: Unit table
        graphs: G_1..G_K; a single graph gives the "full" estimator, more give "multi"
        vcov: Covariance kind; gls fits network-correlated errors on graphs[0]
        alpha: CI level 1 - alpha
        include_neighbor_intercept: Add F_k = G_k 1 to the design
        known_sigma: (a, b) for a known Sigma = a I + b G under gls
        intercept: Prepend the intercept column

    Returns:
        EffectEstimate
    """
    ensure_valid(validate_alpha(alpha))
    graphs = list(graphs)
    if not graphs:
        raise ValidationError("the total-effect estimator needs at least one graph")
    if known_sigma is not None and vcov.kind != "gls":
        raise ValidationError("a known Sigma only applies to the gls covariance")

    design = build_design(
        data, graphs, "full", include_neighbor_intercept=include_neighbor_intercept, intercept=intercept
    )
    diagnostics: Dict[str, Any] = {}
    if vcov.kind == "gls":
        fit = fit_gls_network(design, data.y, graphs[0], known=known_sigma)
        cov = fit.vcov
        diagnostics.update(theta=fit.theta, rho=fit.rho, sigma2=fit.sigma2, loglik=fit.loglik)
    else:
        fit = fit_ols(design, data.y)
        cov = sandwich_vcov(fit, design, vcov)

    names = [data.treatment_name] + [exposure_name(k, data.treatment_name) for k in range(1, len(graphs) + 1)]
    coefficients, block, missing = fit.block(names, cov)
    warnings = [
        f"spillover column {name} is zero or collinear and was dropped; its coefficient is taken as 0"
        for name in missing
    ]
    f_bar = [degree_summary(G).F_bar for G in graphs]
    beta_as = coefficients[1:]
    psi = plug_in_psi(coefficients[0], beta_as, f_bar)
    variance = plug_in_variance(block, f_bar)
    return _finish(
        "full" if len(graphs) == 1 else "multi",
        psi,
        variance,
        alpha,
        coefficients[0],
        beta_as,
        f_bar,
        vcov,
        data.n,
        fit.dropped_columns,
        warnings,
        diagnostics,
    )


def estimate_partially_known(
    data: Dataset,
    F: np.ndarray,
    vcov: VcovSpec = VcovSpec(),
    alpha: float = DEFAULT_ALPHA,
    intercept: bool = True,
) -> EffectEstimate:
    """
    Total effect from weighted degrees alone

    Fits Y ~ 1 + A + L + F and, with within-unit and spillover coefficients
    assumed equal, reports psi = beta_a (1 + F_bar).
    """
    ensure_valid(validate_alpha(alpha))
    _ols_only(vcov, "partial")
    F = np.asarray(F, dtype=float).ravel()
    ensure_valid(validate_rows(F.shape[0], data.n, "degree vector"))
    if np.any(F < 0) or not np.all(np.isfinite(F)):
        raise ValidationError("weighted degrees must be finite and nonnegative")

    design = build_design(data, spec="degree_only", degrees=[F], intercept=intercept)
    fit = fit_ols(design, data.y)
    cov = sandwich_vcov(fit, design, vcov)
    (beta_a,), block, _ = fit.block([data.treatment_name], cov)

    warnings = []
    diagnostics: Dict[str, Any] = {}
    if degree_name(1) in fit.column_names:
        diagnostics["degree_coefficient"] = fit.coefficient(degree_name(1))
    else:
        warnings.append("degree column is constant across units and was dropped")

    f_bar = float(F.mean())
    psi = float(beta_a * (1.0 + f_bar))
    variance = float((1.0 + f_bar) ** 2 * block[0, 0])
    return _finish(
        "partial",
        psi,
        variance,
        alpha,
        beta_a,
        [beta_a],
        [f_bar],
        vcov,
        data.n,
        fit.dropped_columns,
        warnings,
        diagnostics,
    )


def estimate_naive(
    data: Dataset,
    vcov: VcovSpec = VcovSpec(),
    alpha: float = DEFAULT_ALPHA,
    intercept: bool = True,
) -> EffectEstimate:
    """Y ~ 1 + A + L, ignoring interference: psi = beta_a"""
    ensure_valid(validate_alpha(alpha))
    _ols_only(vcov, "naive")
    design = build_design(data, spec="naive", intercept=intercept)
    fit = fit_ols(design, data.y)
    cov = sandwich_vcov(fit, design, vcov)
    (beta_a,), block, _ = fit.block([data.treatment_name], cov)
    return _finish(
        "naive",
        float(beta_a),
        float(block[0, 0]),
        alpha,
        beta_a,
        [],
        [],
        vcov,
        data.n,
        fit.dropped_columns,
        [],
    )


# ----------------------------------------------------------------------------
# Diagnostics
# ----------------------------------------------------------------------------

def variance_bias_diagnostic(
    beta_as: Sequence[float],
    n: int,
    weight_variances: Sequence[float],
    weight_covariances: Optional[np.ndarray] = None,
) -> float:
    """
    Expected bias of the conditional plug-in variance when graphs are random.

    -(1/n^2) [sum_k beta_k^2 Var(W_k) + 2 sum_{k<m} beta_k beta_m Cov(W_k, W_m)],
    where W_k is the total edge weight of graph k. Zero for fixed-W families.
    """
    beta = np.asarray(beta_as, dtype=float).ravel()
    variances = np.asarray(weight_variances, dtype=float).ravel()
    if beta.shape != variances.shape:
        raise ValidationError(f"{beta.size} spillover coefficients for {variances.size} weight variances")
    if np.any(variances < 0):
        raise ValidationError("total-weight variances must be nonnegative")
    if weight_covariances is None:
        cov = np.diag(variances)
    else:
        cov = np.array(weight_covariances, dtype=float)
        if cov.shape != (beta.size, beta.size):
            raise ValidationError(f"weight covariance is {cov.shape}, expected {(beta.size, beta.size)}")
        np.fill_diagonal(cov, variances)
    return float(-(beta @ cov @ beta) / float(n) ** 2)


def compare_networks(
    data: Dataset,
    candidates: Sequence[Tuple[str, AdjacencyMatrix]],
    include_neighbor_intercept: bool = False,
) -> List[Dict[str, Any]]:
    """
    Fit one full model per candidate graph and rank them by AIC

    Returns:
        Rows {name, aic, loglik, k, psi} sorted by ascending AIC
    """
    if not candidates:
        raise ValidationError("no candidate networks to compare")
    rows = []
    for name, G in candidates:
        design = build_design(data, [G], "full", include_neighbor_intercept=include_neighbor_intercept)
        fit = fit_ols(design, data.y)
        treatment = fit.block([data.treatment_name, exposure_name(1, data.treatment_name)])[0]
        rows.append({
            "name": name,
            "aic": aic(fit),
            "loglik": fit.loglik,
            "k": fit.k,
            "psi": plug_in_psi(treatment[0], treatment[1:], [degree_summary(G).F_bar]),
        })
        logger.debug(f"Candidate network {name}: AIC {rows[-1]['aic']:.4f}")
    rows.sort(key=lambda row: row["aic"])
    return rows
