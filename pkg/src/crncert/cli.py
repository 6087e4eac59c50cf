"""Command-line interface for crncert."""
import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .certificates import candidate_certificate, certify_maxmin, certify_soc
from .common.config import Config
from .common.errors import CrncertError, NetworkParseError
from .common.logger import log_error_with_context, log_system_info, setup_logging
from .conclude import CertificationReport, render_summary, run_analysis
from .dynamics import validate_certificate, write_trajectory_csv
from .graphmods import Target, reduce
from .netio import emit_report, load_network, serialize_network

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2
EXIT_INTERRUPTED = 130


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-c", "--config",
        type=Path,
        help="Path to a YAML configuration file",
        default=None
    )
    common.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug logging"
    )
    common.add_argument("--seed", type=int, help="Master seed (default 0)")
    common.add_argument(
        "--format",
        choices=("json", "text"),
        default="json",
        help="Output format"
    )
    common.add_argument(
        "-o", "--output",
        type=Path,
        help="Write the result here instead of stdout"
    )
    return common


def create_parser() -> argparse.ArgumentParser:
    """Create command line argument parser."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="crncert",
        description="Graphical robust stability certificates for reaction networks"
    )
    parser.add_argument(
        "-v", "--version",
        action="version",
        version=f"%(prog)s {__version__}"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", parents=[common], help="Run the full certification pipeline")
    analyze.add_argument("paths", nargs="+", type=Path, help=".crn network files")
    analyze.add_argument("--siphon-cap", type=int, help="Species cap for complete siphon enumeration")
    analyze.add_argument("--minor-cap", type=int, help="Cap on Cauchy-Binet minor pairs")
    analyze.add_argument("--trials", type=int, help="Samples for the P0 check")

    reduce_cmd = commands.add_parser("reduce", parents=[common], help="Print a reduction trace")
    reduce_cmd.add_argument("path", type=Path, help=".crn network file")
    reduce_cmd.add_argument(
        "--target",
        choices=[t.value for t in Target],
        default=Target.LINEAR.value,
        help="Base class to reduce to"
    )
    reduce_cmd.add_argument(
        "--minimal",
        action="store_true",
        default=None,
        help="Keep peeling while the target still holds"
    )

    simulate = commands.add_parser("simulate", parents=[common], help="Validate a certificate numerically")
    simulate.add_argument("path", type=Path, help=".crn network file")
    simulate.add_argument("--trials", type=int, help="Number of kinetics samples")
    simulate.add_argument("--dump-traj", type=Path, help="Write the first trajectory as CSV")
    simulate.add_argument(
        "--expect-convergence",
        action="store_true",
        help="Count trajectories that have not converged at the horizon as violations"
    )
    return parser


def _load_config(args: argparse.Namespace) -> Config:
    config = Config(args.config)
    config.override(
        seed=args.seed,
        trials=getattr(args, "trials", None),
        siphon_cap=getattr(args, "siphon_cap", None),
        minor_cap=getattr(args, "minor_cap", None),
    )
    if getattr(args, "trials", None) is not None and args.command == "analyze":
        config.override(p0_trials=args.trials)
    return config


def _write(args: argparse.Namespace, text: str) -> None:
    if args.output is not None:
        args.output.write_text(text, encoding="utf-8")
        logger.info("Output written to %s", args.output)
    else:
        sys.stdout.write(text)


def cmd_analyze(args: argparse.Namespace, config: Config) -> int:
    """Analyze one or more network files, concurrently when there are several."""
    def analyze(path: Path) -> CertificationReport:
        document = load_network(path)
        return run_analysis(document.network, config)

    paths: Sequence[Path] = args.paths
    if len(paths) == 1:
        reports = [analyze(paths[0])]
    else:
        with ThreadPoolExecutor(max_workers=min(config.max_workers, len(paths))) as pool:
            reports = list(pool.map(analyze, paths))

    for report in reports:
        if args.format == "json":
            sys.stderr.write(render_summary(report))
    if args.format == "text":
        _write(args, "".join(render_summary(r) for r in reports))
    elif len(reports) == 1:
        _write(args, emit_report(reports[0]))
    else:
        _write(args, json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")

    if any(r.budget_exceeded for r in reports):
        logger.warning("A budget was exceeded; the report is partial")
        return EXIT_BUDGET
    return EXIT_OK


def cmd_reduce(args: argparse.Namespace, config: Config) -> int:
    """Print the base network and the steps that rebuild the input."""
    net = load_network(args.path).network
    trace = reduce(net, Target(args.target), branches=config.backtrack_branches,
                   budget=config.search_budget, minimal=args.minimal)
    if trace is None:
        logger.error("No %s reduction found for %s", args.target, args.path)
        return EXIT_ERROR
    if args.format == "json":
        _write(args, json.dumps(trace.to_dict(), indent=2, sort_keys=True) + "\n")
        return EXIT_OK

    lines = [f"# base ({args.target})", serialize_network(trace.base).rstrip("\n"), "# steps"]
    for index, (step, pre) in enumerate(zip(trace.steps, trace.networks()), start=1):
        params = " ".join(f"{k}={v}" for k, v in step.modification.params(pre).items())
        lines.append(f"{index}. {step.modification.kind.value} {params} [{step.licensed_by}]")
    _write(args, "\n".join(line for line in lines if line) + "\n")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, config: Config) -> int:
    """Validate the network's certificate, or falsify an uncertified candidate."""
    net = load_network(args.path).network
    cert = (certify_soc(net, config.backtrack_branches, config.search_budget)
            or certify_maxmin(net, config.backtrack_branches, config.search_budget))
    if cert is None:
        logger.info("%s has no certificate; validating the sum-of-currents candidate", args.path)
        cert = candidate_certificate(net)
    report = validate_certificate(net, cert, config.trials, config.seed, config,
                                  expect_convergence=args.expect_convergence)
    if args.dump_traj is not None and report.trajectory is not None:
        write_trajectory_csv(args.dump_traj, net, report.trajectory)

    if args.format == "json":
        _write(args, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    else:
        counts = ", ".join(f"{k}={v}" for k, v in sorted(report.counts().items())) or "none"
        _write(args, f"runs: {report.trials * report.initial_conditions}\nviolations: {counts}\n"
                     f"dini range: [{report.min_dini:.3g}, {report.max_dini:.3g}]\n")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "reduce": cmd_reduce,
    "simulate": cmd_simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = create_parser()
    args = parser.parse_args(argv)

    # Setup logging
    log_level = logging.DEBUG if args.debug else logging.INFO
    setup_logging(log_level)

    try:
        config = _load_config(args)
        setup_logging(logging.DEBUG if args.debug else config.log_level, config.log_file)
        log_system_info(logger)
        return COMMANDS[args.command](args, config)
    except NetworkParseError as e:
        logger.error("Parse error: %s", e)
        return EXIT_ERROR
    except OSError as e:
        logger.error("Cannot read input: %s", e)
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_INTERRUPTED
    except CrncertError as e:
        log_error_with_context(logger, e, {"command": args.command})
        return EXIT_ERROR
    except Exception as e:
        logger.exception("Error running %s: %s", args.command, str(e))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
