#!/usr/bin/env python
"""
Simulation Grid
Runs the standard operating-characteristics grid and writes one tidy CSV.

Every combination of sample size, graph family and error structure is run
with the full, partial and naive estimators (plus full_gls under correlated
errors). Configurations whose error covariance is not positive definite
are logged and skipped.

Usage:
    python scripts/simulation_grid.py --out grid.csv
    python scripts/simulation_grid.py --n 100 400 --reps 50 --threads 4
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.services.report_service import ReportService  # noqa: E402
from src.services.simulation_service import ErrorSpec, GraphSpec, SimConfig, run_simulation  # noqa: E402
from src.utils.errors import NotPositiveDefiniteError  # noqa: E402
from src.utils.logger import setup_logger  # noqa: E402

DEFAULT_SIZES = [100, 400, 900, 1600]
GRAPHS = {
    "er": GraphSpec("er", p=0.01),
    "ba": GraphSpec("ba", power=0.05, m=1),
    "ws": GraphSpec("ws", nei=10, p_rewire=0.05),
}
ERRORS = {
    "homo": ErrorSpec("homo"),
    "corr": ErrorSpec("corr", a=3.0, b=1.5),
}


def build_grid(sizes: List[int], reps: int, seed: int) -> List[SimConfig]:
    configs = []
    for n in sizes:
        for graph in GRAPHS.values():
            for name, errors in ERRORS.items():
                estimators = ("full", "partial", "naive")
                if name == "corr":
                    estimators = ("full_gls",) + estimators
                configs.append(
                    SimConfig(n=n, graph=graph, errors=errors, estimators=estimators, reps=reps, base_seed=seed)
                )
    return configs


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Run the simulation grid into one CSV")
    parser.add_argument("--n", type=int, nargs="+", default=DEFAULT_SIZES, help="sample sizes")
    parser.add_argument("--reps", type=int, default=200)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--threads", type=int, default=0, help="0 uses every core")
    parser.add_argument("--out", default="simulation_grid.csv")
    args = parser.parse_args(argv)

    logger = setup_logger()
    reporter = ReportService()
    frames = []
    for config in build_grid(args.n, args.reps, args.seed):
        logger.info(f"Running n={config.n} {config.graph.label} {config.errors.label}")
        try:
            report = run_simulation(config, threads=args.threads)
        except NotPositiveDefiniteError as e:
            logger.warning(f"Skipped n={config.n} {config.graph.label}: {e}")
            continue
        frames.append(reporter.report_to_frame(report))

    if not frames:
        logger.error("Every configuration was skipped")
        return 4

    grid = pd.concat(frames, ignore_index=True)
    grid.to_csv(args.out, index=False)
    logger.info(f"Wrote {len(grid)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
