"""
Campaign service - runs cases × searches × strategies × seeds and emits reports
"""
import csv
import hashlib
import io
import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import TypeAdapter, ValidationError

from greduce.cases.registry import CaseSpec, get_case, get_generator, reduction_cases
from greduce.core.exceptions import OracleTooLargeException, ReportIOException, SchemaException
from greduce.models.schemas import (
    REPORT_COLUMNS,
    AlignmentStrategy,
    CampaignConfig,
    ReductionReport,
    SearchConfig,
    SearchKind,
    build_config,
)
from greduce.models.trace import EMPTY_LABELING, ReducedTrace, Trace
from greduce.services.baseline_service import baseline_report, choice_delete_shrink, raw_ddmin
from greduce.services.genlib import ReexecOutcome, aligned_reexecution, record_execution, replay_trace
from greduce.services.reduction_service import greduce_from_trace
from greduce.services.trace_service import build_trace_tree, deserialize_labeling, deserialize_trace, load_json

logger = logging.getLogger(__name__)

FIXTURE = "fixture"

SeedLabel = Union[int, str]

_REPORTS = TypeAdapter(List[ReductionReport])


class Cell(NamedTuple):
    case: str
    search: SearchKind
    strategy: AlignmentStrategy
    seed: SeedLabel
    realign_seed: int
    timeout: float


def case_trace(case: CaseSpec, seed: SeedLabel) -> Trace:
    """Fixture trace for the "fixture" seed, a fresh recording otherwise"""
    if seed == FIXTURE:
        return case.fixture_trace()
    trace, _ = record_execution(case.generator, seed)
    return trace


def record_case(name: str, seed: Optional[int] = None) -> Trace:
    """
    Raises:
        UnknownCaseException: If no case has this name
    """
    return case_trace(get_case(name), FIXTURE if seed is None else seed)


def run_cell(cell: Cell) -> ReductionReport:
    """Reduce one case under one configuration"""
    case = get_case(cell.case)
    trace = case_trace(case, cell.seed)
    config = build_config(
        SearchConfig,
        search=cell.search,
        strategy=cell.strategy,
        seed=case.fixture_seed if cell.seed == FIXTURE else cell.seed,
        realign_seed=cell.realign_seed,
        timeout=cell.timeout,
    )
    result = greduce_from_trace(
        case.generator,
        trace,
        case.make_property(),
        config,
        validity=case.validity,
        case=case.name,
        seed_label=cell.seed,
    )
    return result.metrics


def run_baselines(name: str, seed: SeedLabel, timeout: float) -> List[ReductionReport]:
    """raw ddmin over the serialized input and delete-only choice shrinking, on one case"""
    case = get_case(name)
    trace = case_trace(case, seed)
    _, original = replay_trace(case.generator, trace)

    raw, raw_stats = raw_ddmin(
        original.text,
        case.tokenizer,
        lambda data: case.exhibits(data.decode("utf-8")),
        validity_text=case.valid,
        timeout=timeout,
    )
    raw_text = raw.decode("utf-8")
    reports = [
        baseline_report(
            case.name, "raw_ddmin", seed,
            size_original=case.measure_text(original.text),
            size_final=case.measure_text(raw_text),
            stats=raw_stats,
            sound=case.exhibits(raw_text),
            result_digest=hashlib.sha256(raw).hexdigest(),
        )
    ]

    shrunk, shrink_stats = choice_delete_shrink(case.generator, trace, case.make_property(), timeout=timeout)
    reports.append(
        baseline_report(
            case.name, "choice_delete", seed,
            size_original=original.total_size,
            size_final=shrunk.total_size,
            stats=shrink_stats,
            sound=case.exhibits(shrunk.text),
            result_digest=shrunk.digest,
        )
    )
    return reports


def campaign_cells(config: CampaignConfig) -> List[Cell]:
    """
    Expand a campaign into its cells, in case, search, strategy, seed order.

    Raises:
        UnknownCaseException: If a case name is not registered
    """
    cases = [c.name for c in reduction_cases()] if config.cases == "all" else [get_case(n).name for n in config.cases]
    return [
        Cell(case, search, strategy, seed, config.realign_seed, config.timeout)
        for case in cases
        for search in config.searches
        for strategy in config.strategies
        for seed in config.seeds
    ]


def _run_or_skip(cell: Cell) -> Optional[ReductionReport]:
    try:
        return run_cell(cell)
    except OracleTooLargeException as e:
        logger.warning(f"Skipping {cell.case}/{cell.search.value}/{cell.strategy.value}: {e.message}")
        return None


def run_campaign(config: CampaignConfig) -> List[ReductionReport]:
    """
    Run every cell of a campaign.

    Cells run sequentially unless `config.jobs` > 1; the report order is the
    cell order either way. Powerset cells over too many units are skipped.

    Returns:
        One report per executed cell, followed by baseline reports when requested
    """
    cells = campaign_cells(config)
    logger.info(f"Running campaign of {len(cells)} cells with {config.jobs} job(s)")

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_run_or_skip, cells))
    else:
        outcomes = []
        for i, cell in enumerate(cells):
            logger.info(f"Cell {i + 1}/{len(cells)}: {cell.case} {cell.search.value}/{cell.strategy.value} seed={cell.seed}")
            outcomes.append(_run_or_skip(cell))
    reports = [report for report in outcomes if report is not None]

    if config.baselines:
        for name in dict.fromkeys(cell.case for cell in cells):
            for seed in config.seeds:
                reports.extend(run_baselines(name, seed, config.timeout))

    unsound = [r for r in reports if not r.sound]
    if unsound:
        logger.error(f"{len(unsound)} cell(s) ended on an input that fails its property")
    return reports


###############################################################################
# Reports
###############################################################################
def emit_report(reports: Sequence[ReductionReport], fmt: str = "json") -> bytes:
    """
    Serialize reports: a JSON array in field order, or CSV with a fixed header.

    Identical reports always produce identical bytes.
    """
    if fmt == "json":
        documents = [report.model_dump(mode="json") for report in reports]
        return (json.dumps(documents, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for report in reports:
            row = report.model_dump(mode="json")
            writer.writerow([row[column] for column in REPORT_COLUMNS])
        return buffer.getvalue().encode("utf-8")
    raise ValueError(f"unknown report format '{fmt}'")


def parse_reports(data: bytes) -> List[ReductionReport]:
    """
    Raises:
        ParseException: Malformed JSON
        SchemaException: Not a list of reports
    """
    try:
        return _REPORTS.validate_python(load_json(data))
    except ValidationError as e:
        raise SchemaException(f"invalid report list: {e.error_count()} error(s)", details=e.errors()) from e


def write_output(data: bytes, path: Path) -> None:
    try:
        path.write_bytes(data)
    except OSError as e:
        logger.error(f"Could not write {path}: {e}", exc_info=True)
        raise ReportIOException(str(path), e) from e
    logger.info(f"Wrote {path}")


def summarize(reports: Sequence[ReductionReport]) -> List[Dict[str, Union[str, float, int]]]:
    """Mean quality, final size, #tests and speed per (search, strategy)"""
    groups: Dict[Tuple[str, str], List[ReductionReport]] = defaultdict(list)
    for report in reports:
        groups[(report.search, report.strategy)].append(report)

    rows = []
    for (search, strategy), members in groups.items():
        rows.append({
            "search": search,
            "strategy": strategy,
            "runs": len(members),
            "quality": float(np.mean([r.quality for r in members])),
            "size_final": float(np.mean([r.size_final for r in members])),
            "property_tests": float(np.mean([r.property_tests for r in members])),
            "speed": float(np.mean([r.speed for r in members])),
        })
    return rows


###############################################################################
# Replay
###############################################################################
def replay(
    trace_path: Path,
    labeling_path: Optional[Path] = None,
    strategy: AlignmentStrategy = AlignmentStrategy.HALT,
    realign_seed: int = 0,
) -> ReexecOutcome:
    """
    Re-execute a trace file's generator, optionally under a labeling file.

    Raises:
        ParseException, SchemaException: Malformed trace or labeling file
        UnknownGeneratorException: The trace names an unregistered generator
        InvalidLabelException: The labeling names a node that is not removable
    """
    trace = deserialize_trace(Path(trace_path).read_bytes())
    generator = get_generator(trace.generator_id)
    tree = build_trace_tree(trace)
    labeling = EMPTY_LABELING
    if labeling_path is not None:
        labeling = deserialize_labeling(tree, Path(labeling_path).read_bytes())
    logger.info(f"Replaying '{trace.generator_id}' with {len(labeling)} removed units under {strategy.value}")
    return aligned_reexecution(generator, ReducedTrace(tree, labeling), strategy, realign_seed)
