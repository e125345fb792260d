#!/usr/bin/env python3
"""
netinterf - Main Entry Point

Total, within-unit and spillover effect estimation under network
interference, plus a seeded Monte Carlo harness.

Usage:
    python main.py estimate --data units.csv --edges edges.csv --covariates L
    python main.py simulate --graph er --p 0.01 --n 400 --reps 10 --seed 1
    python main.py graph-info --edges edges.csv
"""

import argparse
import logging
import sys
import traceback
from pathlib import Path
from typing import List, Optional

# Ensure the app directory is in the path
APP_DIR = Path(__file__).parent.absolute()
sys.path.insert(0, str(APP_DIR))

from src.utils.constants import ESTIMATORS, GRAPH_KINDS, ERROR_KINDS, OUTPUT_FORMATS, VCOV_KINDS
from src.utils.errors import EXIT_INTERRUPTED, EXIT_UNEXPECTED, NetworkEffectsError
from src.utils.helpers import split_names


def setup_logging(args: argparse.Namespace, configured_level: str = "INFO", log_file: Optional[str] = None):
    """Initialize the logging system and pick the console level."""
    try:
        from src.utils.logger import logger, set_console_level, set_log_file
    except ImportError:
        logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')
        return logging.getLogger(__name__)

    if getattr(args, "debug", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    else:
        level = logging.getLevelName(str(configured_level).upper())
        if not isinstance(level, int):
            level = logging.INFO
    set_console_level(level)
    if log_file:
        set_log_file(log_file)
    return logger


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help='JSON or TOML settings file (flags override it)')
    parser.add_argument('--out', help='Write the structured result to this file')
    parser.add_argument('--format', dest='fmt', choices=OUTPUT_FORMATS, help='Output format (default: from --out suffix)')
    parser.add_argument('--quiet', '-q', action='store_true', help='Only warnings and errors on stderr')
    parser.add_argument('--debug', '-d', action='store_true', help='Enable debug logging to console')


def _add_graph_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--directed', action='store_true', default=None, help='Edge records are one-way')
    parser.add_argument('--transpose', action='store_true', default=None,
                        help='Files list the influencer first (dst is exposed to src)')
    parser.add_argument('--n-hint', type=int, help='Node count for integer-indexed edge lists')
    parser.add_argument('--nodes', help='nodes.csv with a label column for string node IDs')
    parser.add_argument('--power', type=int, help='Use G^k (diagonal zeroed)')
    parser.add_argument('--normalize', choices=('none', 'row'), help='Row-normalize each graph')


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(
        prog='netinterf',
        description='Effect estimation under network interference',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Exit codes:
  0 success, 2 usage/validation, 3 data/parse, 4 numerical failure
        """
    )
    parser.add_argument('--version', '-v', action='version', version='%(prog)s 1.0.0')
    commands = parser.add_subparsers(dest='command', required=True)

    estimate = commands.add_parser('estimate', help='Estimate the total effect from data and edge lists')
    estimate.add_argument('--data', required=True, help='Unit CSV with a header row')
    estimate.add_argument('--edges', action='append', default=[], help='Edge list CSV (repeat for G_1..G_K)')
    estimate.add_argument('--outcome', default='Y')
    estimate.add_argument('--treatment', default='A')
    estimate.add_argument('--covariates', default='', help='Comma-separated covariate columns')
    estimate.add_argument('--estimator', choices=ESTIMATORS)
    estimate.add_argument('--vcov', choices=VCOV_KINDS)
    estimate.add_argument('--hc5-k', type=float)
    estimate.add_argument('--alpha', type=float)
    estimate.add_argument('--neighbor-intercept', action='store_true', default=None,
                          help='Add the weighted degree G 1 to the full design')
    estimate.add_argument('--no-intercept', action='store_true', help='Fit without the intercept column')
    estimate.add_argument('--degree-column', help='Observed weighted-degree column (partial estimator)')
    estimate.add_argument('--graph-family', help='Random-graph hypothesis er:P[:directed], ws or ba')
    estimate.add_argument('--known-sigma', help='Known error covariance A,B for Sigma = A I + B G (gls)')
    estimate.add_argument('--compare', action='store_true', help='Rank the edge lists by AIC')
    estimate.add_argument('--extra-power', type=int, action='append', default=[], metavar='K',
                          help='Add G^K of the first --edges file as another network (repeatable)')
    _add_graph_flags(estimate)
    _add_common(estimate)

    simulate = commands.add_parser('simulate', help='Run a seeded Monte Carlo study')
    simulate.add_argument('--n', type=int)
    simulate.add_argument('--graph', choices=GRAPH_KINDS)
    simulate.add_argument('--p', type=float, help='Edge probability (er)')
    simulate.add_argument('--power', type=float, help='Attachment power (ba)')
    simulate.add_argument('--m', type=int, help='Edges per new node (ba)')
    simulate.add_argument('--nei', type=int, help='Neighbours per side (ws)')
    simulate.add_argument('--p-rewire', type=float, help='Rewiring probability (ws)')
    simulate.add_argument('--directed', action='store_true', default=None, help='Directed er graphs')
    simulate.add_argument('--errors', choices=ERROR_KINDS)
    simulate.add_argument('--a', type=float, help='Sigma = a I + b G (corr)')
    simulate.add_argument('--b', type=float)
    simulate.add_argument('--reps', type=int)
    simulate.add_argument('--seed', type=int)
    simulate.add_argument('--first-rep', type=int, help='Index of the first replicate')
    simulate.add_argument('--estimators', help='Comma-separated subset of full,partial,naive,full_gls')
    simulate.add_argument('--fixed-graph', action='store_true', default=None)
    simulate.add_argument('--threads', type=int, help='Worker threads (0 = physical cores)')
    simulate.add_argument('--alpha', type=float)
    _add_common(simulate)

    info = commands.add_parser('graph-info', help='Summarize weighted degrees of an edge list')
    info.add_argument('--edges', required=True)
    _add_graph_flags(info)
    _add_common(info)

    return parser.parse_args(argv)


def run_command(args: argparse.Namespace) -> int:
    """Build the app from settings + flags and run one subcommand."""
    from src.app import EstimateCommandConfig, NetworkEffectsApp, parse_known_sigma
    from src.config_manager import ConfigManager

    config_manager = ConfigManager(user_config=args.config)
    setup_logging(
        args,
        config_manager.get_setting('logging.level', 'INFO'),
        config_manager.get_setting('logging.file'),
    )
    app = NetworkEffectsApp(config_manager=config_manager)

    if args.command in ('estimate', 'graph-info'):
        config_manager.apply_overrides('graph', {'directed': args.directed, 'transpose': args.transpose})
        config_manager.apply_overrides('estimate', {'power': args.power, 'normalize': args.normalize})

    if args.command == 'estimate':
        config_manager.apply_overrides('estimate', {
            'alpha': args.alpha,
            'vcov': args.vcov,
            'hc5_k': args.hc5_k,
            'estimator': args.estimator,
            'neighbor_intercept': args.neighbor_intercept,
        })
        setting = config_manager.get_setting
        config = EstimateCommandConfig(
            data_path=args.data,
            edges_paths=tuple(args.edges),
            outcome=args.outcome,
            treatment=args.treatment,
            covariates=tuple(split_names(args.covariates)),
            estimator=setting('estimate.estimator'),
            vcov=setting('estimate.vcov'),
            hc5_k=float(setting('estimate.hc5_k')),
            alpha=float(setting('estimate.alpha')),
            directed=bool(setting('graph.directed')),
            transpose=bool(setting('graph.transpose')),
            normalize=setting('estimate.normalize'),
            neighbor_intercept=bool(setting('estimate.neighbor_intercept')),
            intercept=not args.no_intercept,
            power=int(setting('estimate.power')),
            extra_powers=tuple(args.extra_power),
            n_hint=args.n_hint,
            nodes_path=args.nodes,
            degree_column=args.degree_column,
            graph_family=args.graph_family,
            known_sigma=parse_known_sigma(args.known_sigma) if args.known_sigma else None,
            compare=args.compare,
            out=args.out,
            fmt=args.fmt,
        )
        app.cmd_estimate(config)

    elif args.command == 'simulate':
        config_manager.apply_overrides('simulate', {
            'n': args.n,
            'graph': args.graph,
            'p': args.p,
            'power': args.power,
            'm': args.m,
            'nei': args.nei,
            'p_rewire': args.p_rewire,
            'directed': args.directed,
            'errors': args.errors,
            'a': args.a,
            'b': args.b,
            'reps': args.reps,
            'seed': args.seed,
            'first_rep': args.first_rep,
            'estimators': split_names(args.estimators) if args.estimators else None,
            'fixed_graph': args.fixed_graph,
            'threads': args.threads,
        })
        config_manager.apply_overrides('estimate', {'alpha': args.alpha})
        app.cmd_simulate(
            config_manager.simulation_config(),
            threads=config_manager.threads(),
            out=args.out,
            fmt=args.fmt,
        )

    else:
        setting = config_manager.get_setting
        app.cmd_graph_info(
            args.edges,
            directed=bool(setting('graph.directed')),
            transpose=bool(setting('graph.transpose')),
            n_hint=args.n_hint,
            nodes_path=args.nodes,
            power=int(setting('estimate.power')),
            normalize=setting('estimate.normalize'),
            out=args.out,
            fmt=args.fmt,
        )
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = parse_arguments(argv)
    logger = setup_logging(args)
    logger.debug(f"Arguments: {vars(args)}")

    try:
        return run_command(args)
    except NetworkEffectsError as e:
        logger.debug("Command failed", exc_info=True)
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code
    except KeyboardInterrupt:
        sys.stderr.write("\nInterrupted by user\n")
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        sys.stderr.write(f"error: unexpected failure: {e} (see logs/netinterf.log)\n")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        sys.exit(EXIT_INTERRUPTED)
    except Exception as e:
        print(f"\nFatal error: {e}", file=sys.stderr)
        traceback.print_exc()
        sys.exit(EXIT_UNEXPECTED)
