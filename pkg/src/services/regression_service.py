"""
Regression Service
Linear model fits on interference-augmented designs and their coefficient
covariances: classical, HC0-HC5 sandwiches, and GLS with network-correlated
errors Var(eps) = sigma^2 (I + theta G).
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from src.graph_core import AdjacencyMatrix, degree_summary, exposure
from src.services.data_service import Dataset
from src.utils.constants import (
    COLLINEARITY_TOL,
    DEFAULT_HC5_K,
    SYMMETRY_TOL,
    THETA_GRID_POINTS,
    THETA_XTOL,
    VCOV_KINDS,
)
from src.utils.errors import (
    DegenerateLikelihoodError,
    InfeasibleThetaError,
    LeverageError,
    NotPositiveDefiniteError,
    RankDeficientError,
    ValidationError,
)
from src.utils.validation import ensure_valid, validate_choice, validate_rows

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())

INTERCEPT = "(Intercept)"

ROLE_INTERCEPT = "intercept"
ROLE_TREATMENT = "treatment"
ROLE_COVARIATE = "covariate"
ROLE_EXPOSURE_TREATMENT = "exposure-treatment"
ROLE_EXPOSURE_COVARIATE = "exposure-covariate"
ROLE_DEGREE = "degree"

DESIGN_SPECS = ("naive", "full", "degree_only")


@dataclass(frozen=True)
class VcovSpec:
    """Which coefficient covariance to report"""

    kind: str = "classical"
    hc5_k: float = DEFAULT_HC5_K

    def __post_init__(self):
        ensure_valid(validate_choice(self.kind, VCOV_KINDS, "vcov kind"))
        if not (self.hc5_k > 0):
            raise ValidationError(f"hc5_k must be positive, got {self.hc5_k}")


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """
    Regressor matrix with one name, role and network index per column.

    network[j] is the 1-based graph index for exposure and degree columns,
    None otherwise.
    """

    X: np.ndarray
    column_names: Tuple[str, ...]
    roles: Tuple[str, ...]
    network: Tuple[Optional[int], ...] = ()
    dropped_columns: Tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise ValidationError("design matrix must be two-dimensional")
        if len(self.column_names) != X.shape[1] or len(self.roles) != X.shape[1]:
            raise ValidationError(
                f"{X.shape[1]} design columns but {len(self.column_names)} names / {len(self.roles)} roles"
            )
        network = tuple(self.network) or (None,) * X.shape[1]
        if len(network) != X.shape[1]:
            raise ValidationError("network tags must match the column count")
        if len(set(self.column_names)) != len(self.column_names):
            raise ValidationError("design column names must be unique")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "network", network)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def index(self, name: str) -> int:
        return self.column_names.index(name)

    def select(self, names: Sequence[str]) -> np.ndarray:
        return self.X[:, [self.index(name) for name in names]]


@dataclass(frozen=True, eq=False)
class FitResult:
    """
    Linear model fit over the retained (linearly independent) columns.

    bread is the unscaled inverse information (X'X)^-1, or its whitened
    counterpart for GLS; vcov is sigma2 * bread.
    """

    beta: np.ndarray
    vcov: np.ndarray
    residuals: np.ndarray
    leverages: np.ndarray
    sigma2: float
    rho: float
    loglik: float
    n: int
    k: int
    column_names: Tuple[str, ...]
    bread: np.ndarray
    dropped_columns: Tuple[str, ...] = ()
    method: str = "ols"
    theta: float = 0.0
    n_variance_params: int = 1
    theta_interval: Tuple[float, float] = (0.0, 0.0)

    def coefficient(self, name: str) -> float:
        return float(self.beta[self.column_names.index(name)])

    def block(
        self, names: Sequence[str], vcov: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, np.ndarray, List[str]]:
        """
        Coefficients and covariance (fit.vcov unless given) for the named columns.

        Names absent from the fit (dropped for collinearity) come back as
        coefficient 0 with zero covariance rows and are listed as missing.
        """
        m = len(names)
        beta = np.zeros(m)
        positions = []
        missing = []
        for i, name in enumerate(names):
            if name in self.column_names:
                j = self.column_names.index(name)
                beta[i] = self.beta[j]
                positions.append((i, j))
            else:
                missing.append(name)
        source = self.vcov if vcov is None else vcov
        block = np.zeros((m, m))
        for i, a in positions:
            for j, b in positions:
                block[i, j] = source[a, b]
        return beta, block, missing


# ----------------------------------------------------------------------------
# Design construction
# ----------------------------------------------------------------------------

def independent_columns(X: np.ndarray, tol: float = COLLINEARITY_TOL) -> List[int]:
    """
    Order-preserving rank reveal.

    Column j is kept when its distance to the span of the kept columns
    before it exceeds tol times the leading pivot (largest column norm).
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if k == 0:
        return []
    scale = float(np.max(np.linalg.norm(X, axis=0)))
    if scale == 0.0:
        return []
    threshold = tol * scale
    basis = np.zeros((n, 0))
    kept: List[int] = []
    for j in range(k):
        residual = X[:, j].copy()
        # two passes of Gram-Schmidt keep the basis orthogonal to working precision
        for _ in range(2):
            residual -= basis @ (basis.T @ residual)
        norm = float(np.linalg.norm(residual))
        if norm > threshold:
            kept.append(j)
            basis = np.column_stack([basis, residual / norm])
    return kept


def _drop_dependent(X: np.ndarray, names, roles, network, already_dropped=()) -> DesignMatrix:
    kept = independent_columns(X)
    dropped = tuple(already_dropped) + tuple(names[j] for j in range(len(names)) if j not in kept)
    for name in dropped:
        logger.debug(f"Dropped collinear or zero design column: {name}")
    if ROLE_TREATMENT in roles and roles.index(ROLE_TREATMENT) not in kept:
        raise RankDeficientError(
            f"treatment column {names[roles.index(ROLE_TREATMENT)]!r} is constant or collinear with earlier columns"
        )
    return DesignMatrix(
        X=X[:, kept],
        column_names=tuple(names[j] for j in kept),
        roles=tuple(roles[j] for j in kept),
        network=tuple(network[j] for j in kept),
        dropped_columns=dropped,
    )


def exposure_name(k: int, name: str) -> str:
    """Column name for the network-k neighbour sum of a variable."""
    return f"G{k}:{name}"


def degree_name(k: int) -> str:
    return f"F{k}"


def build_design(
    data: Dataset,
    graphs: Sequence[AdjacencyMatrix] = (),
    spec: str = "full",
    include_neighbor_intercept: bool = False,
    intercept: bool = True,
    degrees: Optional[Sequence[np.ndarray]] = None,
) -> DesignMatrix:
    """
    Assemble the regressor matrix

    Args:
        data: Unit table
        graphs: Interference graphs G_1..G_K (unused for naive)
        spec: naive -> [1 A L]; full -> [1 A L G_kA G_kL ...] (+ F_k when
            include_neighbor_intercept); degree_only -> [1 A L F_k]
        include_neighbor_intercept: Add G_k 1 = F_k to the full design
        intercept: Prepend the intercept column
        degrees: Observed degree vectors for degree_only (replaces graphs)

    Returns:
        DesignMatrix with collinear/zero columns dropped and recorded
    """
    ensure_valid(validate_choice(spec, DESIGN_SPECS, "design spec"))
    graphs = list(graphs or [])
    n = data.n

    columns: List[np.ndarray] = []
    names: List[str] = []
    roles: List[str] = []
    network: List[Optional[int]] = []

    def add(values, name, role, k=None):
        columns.append(np.asarray(values, dtype=float).ravel())
        names.append(name)
        roles.append(role)
        network.append(k)

    if intercept:
        add(np.ones(n), INTERCEPT, ROLE_INTERCEPT)
    add(data.a, data.treatment_name, ROLE_TREATMENT)
    for j, name in enumerate(data.covariate_names):
        add(data.L[:, j], name, ROLE_COVARIATE)

    if spec == "full":
        if not graphs:
            raise ValidationError("the full design needs at least one graph")
        for k, G in enumerate(graphs, start=1):
            ensure_valid(validate_rows(n, G.n, "dataset"))
            add(exposure(G, data.a), exposure_name(k, data.treatment_name), ROLE_EXPOSURE_TREATMENT, k)
            if data.L.shape[1]:
                GL = exposure(G, data.L)
                for j, name in enumerate(data.covariate_names):
                    add(GL[:, j], exposure_name(k, name), ROLE_EXPOSURE_COVARIATE, k)
        if include_neighbor_intercept:
            for k, G in enumerate(graphs, start=1):
                add(degree_summary(G).F, degree_name(k), ROLE_DEGREE, k)
    elif spec == "degree_only":
        if degrees is None:
            if not graphs:
                raise ValidationError("the degree-only design needs degrees or a graph")
            for G in graphs:
                ensure_valid(validate_rows(n, G.n, "dataset"))
            degrees = [degree_summary(G).F for G in graphs]
        for k, F in enumerate(degrees, start=1):
            F = np.asarray(F, dtype=float).ravel()
            ensure_valid(validate_rows(F.shape[0], n, "degree vector"))
            add(F, degree_name(k), ROLE_DEGREE, k)

    X = np.column_stack(columns)
    design = _drop_dependent(X, names, roles, network)
    logger.debug(f"Built {spec} design: {design.k} columns kept, dropped {list(design.dropped_columns)}")
    return design


# ----------------------------------------------------------------------------
# Fitting
# ----------------------------------------------------------------------------

def _gaussian_loglik(rss: float, n: int) -> float:
    """Profile (ML) Gaussian log-likelihood for residual sum of squares rss."""
    if rss <= 0.0:
        return math.inf
    return -0.5 * n * (math.log(2.0 * math.pi * rss / n) + 1.0)


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def _qr_solve(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-pivoted QR least squares; returns (beta, (X'X)^-1, Q)."""
    Q, R, pivot = linalg.qr(X, mode="economic", pivoting=True)
    k = X.shape[1]
    coef = linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(k)
    beta[pivot] = coef
    R_inv = linalg.solve_triangular(R, np.eye(k))
    bread_pivoted = R_inv @ R_inv.T
    bread = np.empty((k, k))
    bread[np.ix_(pivot, pivot)] = bread_pivoted
    return beta, _symmetrize(bread), Q


def _retained(X: DesignMatrix) -> DesignMatrix:
    """Drop any columns of a caller-built design that are still dependent."""
    if len(independent_columns(X.X)) == X.k:
        return X
    return _drop_dependent(np.array(X.X), X.column_names, X.roles, X.network, X.dropped_columns)


def _check_dof(n: int, k: int):
    if n <= k:
        raise RankDeficientError(
            f"{n} observations leave no residual degrees of freedom for {k} coefficients (need n > rank)"
        )


def fit_ols(X: DesignMatrix, y: np.ndarray) -> FitResult:
    """
    Ordinary least squares with sigma2 = RSS / (n - rank)

    Args:
        X: Design matrix; dependent columns are dropped and get no coefficient
        y: Outcome vector

    Returns:
        FitResult with classical vcov sigma2 (X'X)^-1
    """
    y = np.asarray(y, dtype=float).ravel()
    ensure_valid(validate_rows(y.shape[0], X.n, "outcome"))
    design = _retained(X)
    n, k = design.X.shape
    _check_dof(n, k)

    beta, bread, Q = _qr_solve(design.X, y)
    residuals = y - design.X @ beta
    leverages = np.clip(np.sum(Q * Q, axis=1), 0.0, 1.0)
    rss = float(residuals @ residuals)
    sigma2 = rss / (n - k)
    return FitResult(
        beta=beta,
        vcov=sigma2 * bread,
        residuals=residuals,
        leverages=leverages,
        sigma2=sigma2,
        rho=0.0,
        loglik=_gaussian_loglik(rss, n),
        n=n,
        k=k,
        column_names=design.column_names,
        bread=bread,
        dropped_columns=design.dropped_columns,
        method="ols",
    )


class _SpectralGLS:
    """GLS under Var(eps) = sigma^2 (I + theta G) in G's eigenbasis."""

    def __init__(self, X: np.ndarray, y: np.ndarray, G: AdjacencyMatrix):
        self.eigenvalues, self.eigenvectors = linalg.eigh(G.toarray())
        self.Xt = self.eigenvectors.T @ X
        self.yt = self.eigenvectors.T @ y
        self.n, self.k = X.shape

    def interval(self) -> Tuple[float, float]:
        """Open interval of theta for which I + theta G is positive definite."""
        lam_min = float(self.eigenvalues[0])
        lam_max = float(self.eigenvalues[-1])
        lo = -1.0 / lam_max if lam_max > SYMMETRY_TOL else -math.inf
        hi = -1.0 / lam_min if lam_min < -SYMMETRY_TOL else math.inf
        return lo, hi

    def weights(self, theta: float) -> np.ndarray:
        d = 1.0 + theta * self.eigenvalues
        if np.any(d <= 0.0):
            raise NotPositiveDefiniteError(f"I + theta*G is not positive definite at theta = {theta:.6g}")
        return d

    def solve(self, theta: float):
        d = self.weights(theta)
        root_w = 1.0 / np.sqrt(d)
        Xw = self.Xt * root_w[:, None]
        yw = self.yt * root_w
        beta, bread, Q = _qr_solve(Xw, yw)
        resid_w = yw - Xw @ beta
        rss_w = float(resid_w @ resid_w)
        return beta, bread, Q, rss_w, float(np.sum(np.log(d)))

    def profile_loglik(self, theta: float) -> float:
        try:
            _, _, _, rss_w, log_det = self.solve(theta)
        except NotPositiveDefiniteError:
            return -math.inf
        if rss_w <= 0.0:
            return math.inf
        return -0.5 * self.n * (math.log(2.0 * math.pi * rss_w / self.n) + 1.0) - 0.5 * log_det

    def maximize(self) -> float:
        lo, hi = self.interval()
        if not math.isfinite(lo) and not math.isfinite(hi):
            return 0.0
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InfeasibleThetaError("theta interval is unbounded on one side; G must have both signs of eigenvalue")
        width = hi - lo
        grid = [lo + width * i / (THETA_GRID_POINTS + 1) for i in range(1, THETA_GRID_POINTS + 1)]
        candidates = sorted(set(grid + [0.0]))
        values = [self.profile_loglik(t) for t in candidates]
        best = int(np.argmax(values))
        inner = [lo + 1e-9 * width] + candidates + [hi - 1e-9 * width]
        left, right = inner[best], inner[best + 2]
        logger.debug(f"theta interval ({lo:.6g}, {hi:.6g}); refining on ({left:.6g}, {right:.6g})")

        result = minimize_scalar(
            lambda t: -self.profile_loglik(t),
            bounds=(left, right),
            method="bounded",
            options={"xatol": THETA_XTOL},
        )
        theta = float(result.x)
        if not self.profile_loglik(theta) >= values[best]:
            theta = candidates[best]
        return theta


def fit_gls_network(
    X: DesignMatrix,
    y: np.ndarray,
    G: AdjacencyMatrix,
    known: Optional[Tuple[float, float]] = None,
) -> FitResult:
    """
    GLS with Var(eps) = sigma^2 (I + theta G)

    theta maximises the profile likelihood (sigma^2 profiled out) over the
    interval where I + theta G is positive definite; sigma2 is the ML
    estimate and rho = sigma2 * theta.

    Args:
        X: Design matrix
        y: Outcome vector
        G: Undirected (symmetric) graph
        known: Optional (a, b) giving a known Sigma = a I + b G

    Returns:
        FitResult with vcov sigma2 (X' (I + theta G)^-1 X)^-1
    """
    if G.directed or not G.is_symmetric():
        raise ValidationError("network-correlated GLS needs an undirected (symmetric) graph")
    y = np.asarray(y, dtype=float).ravel()
    ensure_valid(validate_rows(y.shape[0], X.n, "outcome"))
    ensure_valid(validate_rows(G.n, X.n, "graph"))
    design = _retained(X)
    n, k = design.X.shape
    _check_dof(n, k)

    model = _SpectralGLS(design.X, y, G)
    interval = model.interval()
    if known is not None:
        a, b = (float(v) for v in known)
        if a <= 0:
            raise ValidationError(f"known Sigma needs a > 0, got {a}")
        theta = b / a
        beta, bread, Q, rss_w, log_det = model.solve(theta)
        sigma2 = a
        loglik = -0.5 * n * math.log(2.0 * math.pi * a) - 0.5 * log_det - 0.5 * rss_w / a
        n_variance_params = 0
    else:
        theta = model.maximize()
        beta, bread, Q, rss_w, log_det = model.solve(theta)
        sigma2 = rss_w / n
        loglik = model.profile_loglik(theta)
        n_variance_params = 2 if interval != (-math.inf, math.inf) else 1

    # leverages of the whitened design, rotated back to unit coordinates
    leverages = np.clip(np.sum((model.eigenvectors @ Q) ** 2, axis=1), 0.0, 1.0)
    residuals = y - design.X @ beta
    logger.debug(f"GLS fit: theta={theta:.6g}, sigma2={sigma2:.6g}, loglik={loglik:.6g}")
    return FitResult(
        beta=beta,
        vcov=sigma2 * bread,
        residuals=residuals,
        leverages=leverages,
        sigma2=sigma2,
        rho=sigma2 * theta,
        loglik=loglik,
        n=n,
        k=k,
        column_names=design.column_names,
        bread=bread,
        dropped_columns=design.dropped_columns,
        method="gls",
        theta=theta,
        n_variance_params=n_variance_params,
        theta_interval=interval,
    )


# ----------------------------------------------------------------------------
# Covariances and model comparison
# ----------------------------------------------------------------------------

def sandwich_vcov(fit: FitResult, X: DesignMatrix, spec: VcovSpec) -> np.ndarray:
    """
    Coefficient covariance of the requested kind for an OLS fit on X

    classical returns fit.vcov; hc0..hc5 return
    (X'X)^-1 X' diag(omega) X (X'X)^-1 with leverage-adjusted omega.
    """
    if spec.kind == "classical":
        return np.array(fit.vcov)
    if spec.kind == "gls":
        if fit.method != "gls":
            raise ValidationError("gls covariance is only available from fit_gls_network")
        return np.array(fit.vcov)
    if fit.method != "ols":
        raise ValidationError(f"{spec.kind} sandwich covariance needs an OLS fit")

    Xk = X.select(fit.column_names)
    n, k = Xk.shape
    e2 = fit.residuals ** 2
    h = fit.leverages
    if spec.kind in ("hc2", "hc3", "hc4", "hc5"):
        at_one = np.flatnonzero(1.0 - h <= 1e-10)
        if at_one.size:
            raise LeverageError(int(at_one[0]), spec.kind)
    h_bar = k / n

    if spec.kind == "hc0":
        omega = e2
    elif spec.kind == "hc1":
        omega = e2 * n / (n - k)
    elif spec.kind == "hc2":
        omega = e2 / (1.0 - h)
    elif spec.kind == "hc3":
        omega = e2 / (1.0 - h) ** 2
    elif spec.kind == "hc4":
        delta = np.minimum(4.0, h / h_bar)
        omega = e2 / (1.0 - h) ** delta
    else:
        delta = np.minimum(h / h_bar, max(4.0, spec.hc5_k * float(np.max(h)) / h_bar))
        omega = e2 / np.sqrt((1.0 - h) ** delta)

    meat = (Xk * omega[:, None]).T @ Xk
    return _symmetrize(fit.bread @ meat @ fit.bread)


def aic(fit: FitResult) -> float:
    """-2 loglik + 2 (coefficients + variance parameters)"""
    if not math.isfinite(fit.loglik):
        raise DegenerateLikelihoodError("log-likelihood is unbounded (zero residual variance); AIC is undefined")
    return -2.0 * fit.loglik + 2.0 * (fit.k + fit.n_variance_params)
