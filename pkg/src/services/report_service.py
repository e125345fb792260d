"""
Report Service
Serializes effect estimates, simulation reports and graph summaries to
JSON and tidy CSV
"""

import json
import math
import os
from dataclasses import asdict
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from src.graph_core import AdjacencyMatrix, DegreeSummary
from src.services.effects_service import EffectEstimate
from src.services.simulation_service import SimulationReport
from src.utils.constants import OUTPUT_FORMATS
from src.utils.errors import ValidationError
from src.utils.helpers import ensure_dir
from src.utils.validation import ensure_valid, validate_choice

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())

SUMMARY_COLUMNS = [
    "n", "graph", "errors", "reps_requested", "base_seed", "fixed_graph", "estimator",
    "reps", "failures", "bias", "sd", "mean_se", "coverage", "rmse", "mean_f_bar",
    "mean_true_psi", "mean_est_variance", "empirical_variance",
]


def _clean(value: Any) -> Any:
    """Recursively convert numpy scalars and NaN/inf to JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class ReportService:
    """Service for result serialization"""

    def estimate_to_dict(self, estimate: EffectEstimate) -> Dict[str, Any]:
        """EffectEstimate as the documented JSON object"""
        return _clean({
            "estimator": estimate.estimator,
            "psi": estimate.psi,
            "se": estimate.se,
            "ci": list(estimate.ci),
            "alpha": estimate.alpha,
            "beta_a": estimate.beta_a,
            "beta_as": list(estimate.beta_as),
            "f_bar": list(estimate.f_bar),
            "spillover": list(estimate.spillover),
            "vcov": estimate.vcov_kind,
            "n": estimate.n,
            "dropped": list(estimate.dropped),
            "warnings": list(estimate.warnings),
            "diagnostics": estimate.diagnostics,
        })

    def estimate_to_frame(self, estimate: EffectEstimate) -> pd.DataFrame:
        row: Dict[str, Any] = {
            "estimator": estimate.estimator,
            "psi": estimate.psi,
            "se": estimate.se,
            "ci_lower": estimate.ci[0],
            "ci_upper": estimate.ci[1],
            "alpha": estimate.alpha,
            "beta_a": estimate.beta_a,
            "vcov": estimate.vcov_kind,
            "n": estimate.n,
        }
        for k, (beta, f_bar) in enumerate(zip(estimate.beta_as, estimate.f_bar), start=1):
            row[f"beta_as_{k}"] = beta
            row[f"f_bar_{k}"] = f_bar
        return pd.DataFrame([row])

    def report_to_dict(self, report: SimulationReport, include_replicates: bool = True) -> Dict[str, Any]:
        """SimulationReport with a config echo, per-estimator summaries and optionally every replicate"""
        config = report.config
        payload: Dict[str, Any] = {
            "config": {
                "n": config.n,
                "graph": asdict(config.graph),
                "errors": asdict(config.errors),
                "estimators": list(config.estimators),
                "reps": config.reps,
                "base_seed": config.base_seed,
                "fixed_graph": config.fixed_graph,
                "first_rep": config.first_rep,
                "alpha": config.alpha,
            },
            "summaries": [dict(asdict(s), failed=s.failed) for s in report.summaries],
        }
        if include_replicates:
            payload["replicates"] = [asdict(r) for r in report.replicates]
        return _clean(payload)

    def report_to_frame(self, report: SimulationReport) -> pd.DataFrame:
        """One row per estimator, stable column order"""
        config = report.config
        rows = []
        for summary in report.summaries:
            row = asdict(summary)
            row.update(
                n=config.n,
                graph=config.graph.label,
                errors=config.errors.label,
                reps_requested=config.reps,
                base_seed=config.base_seed,
                fixed_graph=config.fixed_graph,
            )
            rows.append(row)
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def graph_info_to_dict(self, G: AdjacencyMatrix, summary: DegreeSummary, power: int = 1) -> Dict[str, Any]:
        return _clean({
            "n": G.n,
            "directed": G.directed,
            "power": power,
            "W": summary.W,
            "f_bar": summary.F_bar,
            "f_min": summary.minimum,
            "f_max": summary.maximum,
            "f_sd": summary.sd,
        })

    def to_json(self, payload: Dict[str, Any]) -> str:
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"

    def write(
        self,
        result: Union[EffectEstimate, SimulationReport, Dict[str, Any], List[Dict[str, Any]]],
        path: str,
        fmt: Optional[str] = None,
    ) -> str:
        """
        Write a result to disk

        Args:
            result: Estimate, simulation report, or plain dict / list of rows
            path: Output file
            fmt: json or csv (default: from the file suffix, else json)

        Returns:
            The path written
        """
        if fmt is None:
            fmt = "csv" if path.lower().endswith(".csv") else "json"
        ensure_valid(validate_choice(fmt, OUTPUT_FORMATS, "format"))
        ensure_dir(os.path.dirname(os.path.abspath(path)))

        if fmt == "json":
            if isinstance(result, EffectEstimate):
                payload = self.estimate_to_dict(result)
            elif isinstance(result, SimulationReport):
                payload = self.report_to_dict(result)
            else:
                payload = _clean(result)
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(self.to_json(payload))
        else:
            if isinstance(result, EffectEstimate):
                frame = self.estimate_to_frame(result)
            elif isinstance(result, SimulationReport):
                frame = self.report_to_frame(result)
            elif isinstance(result, dict):
                frame = pd.DataFrame([result])
            elif isinstance(result, list):
                frame = pd.DataFrame(result)
            else:
                raise ValidationError(f"cannot write {type(result).__name__} as csv")
            frame.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
        logger.info(f"Wrote {fmt} output to {path}")
        return path

    @staticmethod
    def summary_line(estimate: EffectEstimate) -> str:
        """One-line human summary for standard output"""
        level = 100.0 * (1.0 - estimate.alpha)
        return (
            f"{estimate.estimator}: psi = {estimate.psi:.6g} (SE {estimate.se:.4g}), "
            f"{level:g}% CI [{estimate.ci[0]:.6g}, {estimate.ci[1]:.6g}], vcov {estimate.vcov_kind}, n = {estimate.n}"
        )
