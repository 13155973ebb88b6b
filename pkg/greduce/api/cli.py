"""
Command-line surface

    python -m greduce run --case password --search tree --strategy realign
    python -m greduce replay greduce/fixtures/password.json
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from greduce.cases.diagnostics import locality_probe, measure_overhead, monotonicity_probe
from greduce.cases.registry import case_registry, get_case
from greduce.core.config import settings
from greduce.core.exceptions import ConfigException, GReduceException
from greduce.models.schemas import AlignmentStrategy, CampaignConfig, SearchKind, build_config
from greduce.services.campaign_service import (
    FIXTURE,
    emit_report,
    record_case,
    replay,
    run_campaign,
    summarize,
    write_output,
)
from greduce.services.trace_service import serialize_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_UNSOUND = 3


def _seed(value: str):
    if value == FIXTURE:
        return value
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer or '{FIXTURE}', got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description="Generator-based input reduction")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="logging level (default: %(default)s)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("list-cases", help="list bundled cases")

    record = commands.add_parser("record", help="dump a trace file")
    record.add_argument("--case", required=True)
    record.add_argument("--seed", type=int, help="record from this seed instead of the fixture trace")
    record.add_argument("--out", type=Path, help="output file (default: stdout)")

    replay_cmd = commands.add_parser("replay", help="re-execute a trace file")
    replay_cmd.add_argument("trace", type=Path)
    replay_cmd.add_argument("--labeling", type=Path)
    replay_cmd.add_argument("--strategy", type=AlignmentStrategy, choices=list(AlignmentStrategy),
                            default=AlignmentStrategy.HALT)
    replay_cmd.add_argument("--realign-seed", type=int, default=settings.DEFAULT_REALIGN_SEED)

    run = commands.add_parser("run", help="run a reduction campaign")
    run.add_argument("--case", dest="cases", action="append", help="case name (repeatable, default: all)")
    run.add_argument("--search", dest="searches", action="append", type=SearchKind, choices=list(SearchKind))
    run.add_argument("--strategy", dest="strategies", action="append", type=AlignmentStrategy,
                     choices=list(AlignmentStrategy))
    run.add_argument("--seed", dest="seeds", action="append", type=_seed)
    run.add_argument("--realign-seed", type=int, default=settings.DEFAULT_REALIGN_SEED)
    run.add_argument("--timeout", type=float, default=settings.DEFAULT_TIMEOUT_SECONDS)
    run.add_argument("--report", type=Path, help="report file (default: stdout)")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--baselines", action="store_true", help="also run raw ddmin and choice shrinking")

    overhead = commands.add_parser("overhead", help="measure recording overhead")
    overhead.add_argument("--case", required=True)
    overhead.add_argument("--runs", type=int, default=1000)
    overhead.add_argument("--repeats", type=int, default=5)

    probe = commands.add_parser("probe", help="monotonicity or locality probe")
    probe.add_argument("--case", required=True)
    probe.add_argument("--trials", type=int, default=200)
    probe.add_argument("--kind", choices=("monotonicity", "locality"), default="monotonicity")
    return parser


def _print(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def _list_cases(args) -> int:
    for case in case_registry():
        tags = [tag for tag, on in (("dependencies", case.dependency_bearing), ("demo", case.demo)) if on]
        suffix = f" [{', '.join(tags)}]" if tags else ""
        _print(f"{case.name:10} {case.description}{suffix}\n")
    return EXIT_OK


def _record(args) -> int:
    data = serialize_trace(record_case(args.case, args.seed))
    if args.out is None:
        _print(data.decode("utf-8") + "\n")
    else:
        write_output(data, args.out)
    return EXIT_OK


def _replay(args) -> int:
    outcome = replay(args.trace, args.labeling, args.strategy, args.realign_seed)
    for event in outcome.events:
        _print(f"# {event.action.value} {event.kind.value} at {list(event.at)}\n")
    if not outcome.completed:
        _print("# halted\n")
        return EXIT_OK
    _print(outcome.input.text)
    return EXIT_OK


def _run(args) -> int:
    data = {
        "cases": args.cases or "all",
        "realign_seed": args.realign_seed,
        "timeout": args.timeout,
        "output": args.report,
        "format": args.format,
        "jobs": args.jobs,
        "baselines": args.baselines,
    }
    for field, value in (("searches", args.searches), ("strategies", args.strategies), ("seeds", args.seeds)):
        if value is not None:
            data[field] = value
    config = build_config(CampaignConfig, **data)

    reports = run_campaign(config)
    payload = emit_report(reports, config.format)
    if config.output is None:
        _print(payload.decode("utf-8"))
    else:
        write_output(payload, config.output)
    for row in summarize(reports):
        logger.info(
            f"{row['search']}/{row['strategy']}: {row['runs']} runs, quality {row['quality']:.3f}, "
            f"size {row['size_final']:.1f}, tests {row['property_tests']:.1f}"
        )
    return EXIT_OK if all(report.sound for report in reports) else EXIT_UNSOUND


def _overhead(args) -> int:
    if args.runs < 1 or args.repeats < 1:
        raise ConfigException("--runs and --repeats must be at least 1")
    report = measure_overhead(get_case(args.case), args.runs, args.repeats)
    _print(f"{report.case}: record {report.median_record * 1e6:.1f}us, bare {report.median_bare * 1e6:.1f}us, "
           f"ratio {report.ratio:.2f}\n")
    return EXIT_OK


def _probe(args) -> int:
    case = get_case(args.case)
    if args.kind == "monotonicity":
        report = monotonicity_probe(case, args.trials)
        _print(f"{report.case}: {report.violations} violations in {report.completed_pairs} completed pairs\n")
    else:
        report = locality_probe(case, args.trials)
        _print(f"{report.case}: mean similarity {report.mean_similarity:.3f} over {report.pairs} pairs\n")
    return EXIT_OK


COMMANDS = {
    "list-cases": _list_cases,
    "record": _record,
    "replay": _replay,
    "run": _run,
    "overhead": _overhead,
    "probe": _probe,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of `python -m greduce`.

    Returns:
        0 on success, 2 on a configuration error, 3 when a campaign cell ends
        unsound, 1 on any other toolkit error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    level = logging.getLevelName(args.log_level.upper())
    if not isinstance(level, int):
        sys.stderr.write(f"invalid --log-level {args.log_level!r}\n")
        return EXIT_CONFIG
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except GReduceException as e:
        logger.error(f"{e.error_code}: {e.message}")
        return e.exit_code
    except OSError as e:
        logger.error(f"IO_ERROR: {e}")
        return EXIT_ERROR


def run_main(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))
