"""Command-line interface.

Subcommands: `run` (Monte Carlo drops -> run.csv), `region` (trade-off
boundary -> region.csv), `cdf` (rate CDFs -> cdf.csv).  Exit codes: 0 on
success, 2 on configuration errors, 3 on I/O errors.
"""

import argparse
import sys

import yaml

from .errors import CfIsacError, ConfigurationError, DomainError
from .scenario import ScenarioConfig
from .harness import ExperimentConfig, cs_region, run_experiment, write_cdfs


def load_config(path):
    """YAML config with a `scenario` and an `experiment` section (both optional)."""
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a mapping")
    try:
        scenario = ScenarioConfig(**(data.get("scenario") or {}))
        return ExperimentConfig(scenario=scenario, **(data.get("experiment") or {}))
    except TypeError as exc:
        raise ConfigurationError(f"unknown configuration key: {exc}") from exc


def _add_common(parser):
    parser.add_argument("--config", default=None, help="YAML configuration file")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--drops", type=int, default=None, help="number of drops")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--mode", default=None,
                        help="comma-separated modes (upc,sopc,jopc_cp,jopc_sp)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfisac",
        description="Cell-free ISAC power-control experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in [("run", "run Monte Carlo drops"),
                      ("region", "trace the comm-sensing trade-off region"),
                      ("cdf", "empirical rate CDFs")]:
        _add_common(sub.add_parser(name, help=doc))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.master_seed = args.seed
        if args.drops is not None:
            config.n_drops = args.drops
        if args.out is not None:
            config.output_dir = args.out
        if args.mode is not None:
            config.modes = [m for m in args.mode.split(",") if m]
        config.validate()
    except (ConfigurationError, DomainError, yaml.YAMLError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            run_experiment(config)
        elif args.command == "region":
            cs_region(config)
        else:
            write_cdfs(config)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except CfIsacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
