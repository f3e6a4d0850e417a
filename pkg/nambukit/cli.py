import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from nambukit.dsl import DSLException, parse
from nambukit.runner import CommandFailed, run

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

EXIT_PASSED = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='nambukit', description="Exact Nambu-Poisson calculus sessions")
    commands = parser.add_subparsers(dest='command', required=True)
    runner = commands.add_parser('run', help="Parse and execute a session file")
    runner.add_argument('file', type=Path, help="Session file")
    runner.add_argument('--seed', type=int, default=0, help="Seed for the random-point oracle (default: 0)")
    runner.add_argument('--json', action='store_true', help="Emit the report as JSON")
    runner.add_argument('--jobs', type=int, default=1, help="Shards for parallel checks (default: 1)")
    runner.add_argument('--timing', action='store_true', help="Include per-command timing in the report")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point

    Returns:
        0 when every verdict passes, 1 on a negative verdict or a failed command,
        2 on a usage or parse error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASSED

    try:
        source = args.file.read_text()
    except OSError as e:
        print(f"error: cannot read {args.file}: {e.strerror}", file=sys.stderr)
        return EXIT_USAGE

    try:
        session = parse(source)
    except DSLException as e:
        print(f"error: {args.file}: {str(e)}", file=sys.stderr)
        return EXIT_USAGE

    try:
        report = run(session, seed=args.seed, jobs=args.jobs)
    except CommandFailed as e:
        print(f"error: {args.file}: {str(e)}", file=sys.stderr)
        return EXIT_NEGATIVE

    if args.json:
        print(report.to_json(timing=args.timing))
    else:
        print(report.render_text(timing=args.timing), end='')
    return EXIT_PASSED if report.passed else EXIT_NEGATIVE
