"""
Network Effects App
Orchestrates the estimate, simulate and graph-info commands
"""

import dataclasses
import os
import sys
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, TextIO, Tuple

from src.config_manager import ConfigManager
from src.graph_core import (
    AdjacencyMatrix,
    degree_summary,
    matrix_power,
    row_normalize,
    total_weight_variance,
)
from src.services.data_service import DataService
from src.services.edge_list_service import EdgeListService
from src.services.effects_service import (
    EffectEstimate,
    compare_networks,
    estimate_naive,
    estimate_partially_known,
    estimate_total_known,
    variance_bias_diagnostic,
)
from src.services.regression_service import VcovSpec
from src.services.report_service import ReportService
from src.services.simulation_service import SimConfig, SimulationReport, run_simulation
from src.utils.constants import ESTIMATORS, OUTPUT_FORMATS
from src.utils.errors import DataError, ValidationError
from src.utils.validation import ensure_valid, validate_alpha, validate_choice, validate_count

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())

NORMALIZE_CHOICES = ("none", "row")


def parse_graph_family(text: str) -> Tuple[str, float, bool]:
    """
    Parse a random-graph hypothesis: "er:P", "er:P:directed", "ws" or "ba"

    Returns:
        Tuple of (family, p, directed)
    """
    parts = [part.strip().lower() for part in str(text).split(":")]
    family = parts[0]
    if family in ("ws", "ba", "fixed") and len(parts) == 1:
        return family, 0.0, False
    if family == "er" and len(parts) in (2, 3):
        try:
            p = float(parts[1])
        except ValueError:
            raise ValidationError(f"graph family {text!r}: p must be a number")
        directed = len(parts) == 3 and parts[2] == "directed"
        if len(parts) == 3 and not directed:
            raise ValidationError(f"graph family {text!r}: third field must be 'directed'")
        return family, p, directed
    raise ValidationError(f"graph family must be er:P[:directed], ws or ba; got {text!r}")


def parse_known_sigma(text: str) -> Tuple[float, float]:
    """Parse "A,B" for a known Sigma = A I + B G."""
    parts = [part.strip() for part in str(text).split(",")]
    if len(parts) != 2:
        raise ValidationError(f"known sigma must be A,B; got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ValidationError(f"known sigma must be two numbers, got {text!r}")


@dataclass
class EstimateCommandConfig:
    """Inputs of one estimate run; edges_paths are G_1..G_K in order."""

    data_path: str
    edges_paths: Tuple[str, ...] = ()
    outcome: str = "Y"
    treatment: str = "A"
    covariates: Tuple[str, ...] = ()
    estimator: str = "full"
    vcov: str = "classical"
    hc5_k: float = 0.7
    alpha: float = 0.05
    directed: bool = False
    transpose: bool = False
    normalize: str = "none"
    neighbor_intercept: bool = False
    intercept: bool = True
    power: int = 1
    extra_powers: Tuple[int, ...] = ()
    n_hint: Optional[int] = None
    nodes_path: Optional[str] = None
    degree_column: Optional[str] = None
    graph_family: Optional[str] = None
    known_sigma: Optional[Tuple[float, float]] = None
    compare: bool = False
    out: Optional[str] = None
    fmt: Optional[str] = None

    def validate(self):
        ensure_valid(validate_choice(self.estimator, ESTIMATORS, "estimator"))
        ensure_valid(validate_choice(self.normalize, NORMALIZE_CHOICES, "normalize"))
        ensure_valid(validate_alpha(self.alpha))
        ensure_valid(validate_count(self.power, "power"))
        for k in self.extra_powers:
            ensure_valid(validate_count(k, "extra power", minimum=2))
        if self.extra_powers and self.estimator not in ("full", "multi"):
            raise ValidationError("--extra-power adds networks, so it needs the full or multi estimator")
        if self.fmt is not None:
            ensure_valid(validate_choice(self.fmt, OUTPUT_FORMATS, "format"))
        if self.estimator in ("full", "multi") and not self.edges_paths:
            raise ValidationError(f"estimator {self.estimator} needs at least one --edges file")
        if self.estimator == "partial" and not (self.edges_paths or self.degree_column):
            raise ValidationError("the partial estimator needs --edges or --degree-column")
        if self.compare and len(self.edges_paths) + len(self.extra_powers) < 2:
            raise ValidationError("--compare needs at least two --edges files (or an --extra-power)")
        if self.graph_family:
            parse_graph_family(self.graph_family)


class NetworkEffectsApp:
    """Command layer: loads inputs, dispatches to the services, reports results"""

    def __init__(
        self,
        config_manager: Optional[ConfigManager] = None,
        data_service: Optional[DataService] = None,
        edge_list_service: Optional[EdgeListService] = None,
        report_service: Optional[ReportService] = None,
        stdout: Optional[TextIO] = None,
    ):
        self.config_manager = config_manager or ConfigManager()
        self.data_service = data_service or DataService()
        self.edge_list_service = edge_list_service or EdgeListService(self.data_service)
        self.report_service = report_service or ReportService()
        self.stdout = stdout or sys.stdout

    def _print(self, text: str):
        self.stdout.write(text + "\n")

    def load_graph(
        self,
        path: str,
        directed: bool = False,
        transpose: bool = False,
        n_hint: Optional[int] = None,
        nodes_path: Optional[str] = None,
        power: int = 1,
        normalize: str = "none",
    ) -> AdjacencyMatrix:
        """Read one edge list and apply the optional power and row normalisation"""
        G = self.edge_list_service.read_edge_list(
            path, directed=directed, transpose=transpose, n_hint=n_hint, nodes_path=nodes_path
        )
        if power > 1:
            G = matrix_power(G, power)
            logger.debug(f"Raised {os.path.basename(path)} to power {power}")
        if normalize == "row":
            G = row_normalize(G)
        return G

    def _load_graphs(self, config: EstimateCommandConfig, n: int) -> List[Tuple[str, AdjacencyMatrix]]:
        """
        Named graphs G_1..G_K in --edges order, followed by one G_1^k per extra power.
        """
        graphs = []
        for path in config.edges_paths:
            G = self.load_graph(
                path,
                directed=config.directed,
                transpose=config.transpose,
                n_hint=config.n_hint if config.n_hint is not None else n,
                nodes_path=config.nodes_path,
                power=config.power,
                normalize=config.normalize,
            )
            if G.n != n:
                raise DataError(f"{path}: graph has {G.n} nodes but the data has {n} rows")
            graphs.append((os.path.basename(path), G))

        if config.extra_powers:
            path = config.edges_paths[0]
            base = self.load_graph(
                path,
                directed=config.directed,
                transpose=config.transpose,
                n_hint=config.n_hint if config.n_hint is not None else n,
                nodes_path=config.nodes_path,
                power=config.power,
            )
            for k in config.extra_powers:
                G = matrix_power(base, k)
                if config.normalize == "row":
                    G = row_normalize(G)
                graphs.append((f"{os.path.basename(path)}^{k}", G))
                logger.debug(f"Added {os.path.basename(path)}^{k} as network {len(graphs)}")
        return graphs

    def _attach_diagnostics(self, estimate: EffectEstimate, family_text: str) -> EffectEstimate:
        family, p, directed = parse_graph_family(family_text)
        n = estimate.n
        variances = [total_weight_variance(family, n, p=p, directed=directed) for _ in estimate.beta_as]
        diagnostics = dict(estimate.diagnostics)
        diagnostics["graph_family"] = family_text
        diagnostics["variance_bias"] = variance_bias_diagnostic(estimate.beta_as, n, variances)
        logger.info(
            f"Under {family_text}, the conditional variance understates Var(psi) by "
            f"{-diagnostics['variance_bias']:.6g} on average"
        )
        return dataclasses.replace(estimate, diagnostics=diagnostics)

    def run_estimate(self, config: EstimateCommandConfig) -> Tuple[EffectEstimate, Optional[List[Dict[str, Any]]]]:
        """Load inputs and compute the estimate (and AIC comparison when asked)"""
        config.validate()
        data, degrees = self.data_service.load_dataset(
            config.data_path,
            config.outcome,
            config.treatment,
            config.covariates,
            degree_column=config.degree_column,
        )
        named = self._load_graphs(config, data.n) if config.edges_paths else []
        graphs = [G for _, G in named]
        vcov = VcovSpec(config.vcov, config.hc5_k)

        if config.estimator in ("full", "multi"):
            estimate = estimate_total_known(
                data,
                graphs,
                vcov,
                config.alpha,
                include_neighbor_intercept=config.neighbor_intercept,
                known_sigma=config.known_sigma,
                intercept=config.intercept,
            )
        elif config.estimator == "partial":
            if degrees is None:
                degrees = degree_summary(graphs[0]).F
            estimate = estimate_partially_known(data, degrees, vcov, config.alpha, intercept=config.intercept)
        else:
            estimate = estimate_naive(data, vcov, config.alpha, intercept=config.intercept)

        if config.graph_family and estimate.beta_as:
            estimate = self._attach_diagnostics(estimate, config.graph_family)

        comparison = None
        if config.compare:
            comparison = compare_networks(data, named, include_neighbor_intercept=config.neighbor_intercept)
        return estimate, comparison

    def cmd_estimate(self, config: EstimateCommandConfig) -> Dict[str, Any]:
        """
        estimate command

        Returns:
            The serialized estimate (with a "comparison" table when requested)
        """
        estimate, comparison = self.run_estimate(config)
        payload = self.report_service.estimate_to_dict(estimate)
        if comparison is not None:
            payload["comparison"] = [dict(row) for row in comparison]
        if config.out:
            if config.fmt == "csv" or (config.fmt is None and config.out.lower().endswith(".csv")):
                self.report_service.write(estimate, config.out, "csv")
            else:
                self.report_service.write(payload, config.out, "json")

        self._print(self.report_service.summary_line(estimate))
        for warning in estimate.warnings:
            self._print(f"  warning: {warning}")
        if comparison is not None:
            for row in comparison:
                self._print(f"  {row['name']}: AIC {row['aic']:.4f}, psi {row['psi']:.6g}")
        return payload

    def cmd_simulate(
        self,
        config: SimConfig,
        threads: int = 1,
        out: Optional[str] = None,
        fmt: Optional[str] = None,
    ) -> SimulationReport:
        """simulate command: run the study, write the report, print one line per estimator"""
        if fmt is not None:
            ensure_valid(validate_choice(fmt, OUTPUT_FORMATS, "format"))
        report = run_simulation(config, threads=threads)
        if out:
            self.report_service.write(report, out, fmt)
        self._print(
            f"n = {config.n}, graph {config.graph.label}, errors {config.errors.label}, reps = {config.reps}"
        )
        for summary in report.summaries:
            if summary.failed:
                self._print(f"  {summary.estimator}: failed on all {summary.failures} replicates")
                continue
            self._print(
                f"  {summary.estimator}: bias {summary.bias:.4g}, sd {summary.sd:.4g}, "
                f"mean se {summary.mean_se:.4g}, coverage {summary.coverage:.3f}"
                + (f", {summary.failures} failed" if summary.failures else "")
            )
        return report

    def cmd_graph_info(
        self,
        edges_path: str,
        directed: bool = False,
        transpose: bool = False,
        n_hint: Optional[int] = None,
        nodes_path: Optional[str] = None,
        power: int = 1,
        normalize: str = "none",
        out: Optional[str] = None,
        fmt: Optional[str] = None,
    ) -> Dict[str, Any]:
        """graph-info command: node count, total weight and weighted-degree summary"""
        ensure_valid(validate_count(power, "power"))
        ensure_valid(validate_choice(normalize, NORMALIZE_CHOICES, "normalize"))
        G = self.load_graph(
            edges_path,
            directed=directed,
            transpose=transpose,
            n_hint=n_hint,
            nodes_path=nodes_path,
            power=power,
            normalize=normalize,
        )
        summary = degree_summary(G)
        info = self.report_service.graph_info_to_dict(G, summary, power)
        if out:
            self.report_service.write(info, out, fmt)
        self._print(
            f"n = {G.n}, W = {summary.W:.6g}, F_bar = {summary.F_bar:.6g}, "
            f"min F = {summary.minimum:.6g}, max F = {summary.maximum:.6g}, sd F = {summary.sd:.6g}"
        )
        return info
