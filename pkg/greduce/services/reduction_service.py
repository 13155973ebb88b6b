"""
Reduction service - search over removal labelings with trace-aligned re-execution
"""
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from greduce.core.config import settings
from greduce.core.exceptions import OracleTooLargeException, PropertyNotExhibitedException, ReductionTimeoutException
from greduce.models.schemas import ReductionReport, SearchConfig, SearchKind
from greduce.models.trace import EMPTY_LABELING, ReducedTrace, RemovalLabeling, Trace, TraceTree
from greduce.services.genlib import (
    EventAction,
    GeneratedInput,
    GeneratorSpec,
    MismatchKind,
    ReexecOutcome,
    aligned_reexecution,
    record_execution,
)
from greduce.services.trace_service import (
    build_trace_tree,
    canonical_json,
    digest,
    kept_units,
    normalize_labeling,
    removed_nodes,
)

logger = logging.getLogger(__name__)


class PropertyTest:
    """Deterministic predicate over generated inputs, counting genuine invocations"""

    def __init__(self, predicate: Callable[[GeneratedInput], bool], name: str = "property"):
        self.predicate = predicate
        self.name = name
        self.calls = 0

    def __call__(self, generated: GeneratedInput) -> bool:
        self.calls += 1
        return bool(self.predicate(generated))

    def __repr__(self) -> str:
        return f"PropertyTest({self.name!r}, calls={self.calls})"


@dataclass(frozen=True)
class Candidate:
    holds: bool
    effective: RemovalLabeling
    input: Optional[GeneratedInput] = None


@dataclass
class SessionStats:
    property_tests: int = 0
    reexecutions: int = 0
    halted_candidates: int = 0
    completed_candidates: int = 0
    valid_candidates: int = 0
    prog_mismatches: int = 0
    dec_mismatches: int = 0
    bypassed_units: int = 0
    realigned_values: int = 0

    @property
    def validity_rate(self) -> float:
        if not self.completed_candidates:
            return 1.0
        return self.valid_candidates / self.completed_candidates

    def count(self, outcome: ReexecOutcome) -> None:
        self.reexecutions += 1
        for event in outcome.events:
            if event.kind is MismatchKind.PROG:
                self.prog_mismatches += 1
            else:
                self.dec_mismatches += 1
            if event.action is EventAction.BYPASSED:
                self.bypassed_units += 1
            elif event.action is EventAction.REALIGNED:
                self.realigned_values += 1


@dataclass(frozen=True)
class ReductionResult:
    """Final input and labeling of a reduction, with its report"""
    final_input: GeneratedInput
    final_labeling: RemovalLabeling
    metrics: ReductionReport
    history: Tuple[Tuple[str, bool], ...]
    tree: TraceTree = field(repr=False, compare=False)


def labeling_digest(labeling: RemovalLabeling) -> str:
    return digest(canonical_json(list(labeling)))


class ReductionSession:
    """
    State of one reduction: the trace tree, the accepted labeling and the
    caches that make repeated candidates free.

    The accepted labeling only ever grows; `accept` is the single place that
    moves it.
    """

    def __init__(
        self,
        gen: GeneratorSpec,
        tree: TraceTree,
        prop: PropertyTest,
        config: SearchConfig,
        validity: Optional[Callable[[GeneratedInput], bool]] = None,
    ):
        self.gen = gen
        self.tree = tree
        self.prop = prop
        self.config = config
        self.validity = validity
        self.stats = SessionStats()
        self.history: List[Tuple[str, bool]] = []
        self._outcomes: Dict[RemovalLabeling, Candidate] = {}
        self._verdicts: Dict[str, bool] = {}
        self._started = time.monotonic()
        self._deadline = self._started + config.timeout
        self.timed_out = False

        original = self._reexecute(EMPTY_LABELING)
        if not original.completed:
            raise PropertyNotExhibitedException(gen.generator_id)
        if original.input.digest != tree.trace.output_digest:
            logger.warning(f"Replayed input of '{gen.generator_id}' differs from the recorded output digest")
        self.original: GeneratedInput = original.input
        if not self._property(self.original):
            raise PropertyNotExhibitedException(gen.generator_id)
        self.labeling: RemovalLabeling = EMPTY_LABELING
        self.current: GeneratedInput = self.original
        self._outcomes[EMPTY_LABELING] = Candidate(True, EMPTY_LABELING, self.original)

    # evaluation --------------------------------------------------------------
    def _reexecute(self, labeling: RemovalLabeling) -> ReexecOutcome:
        outcome = aligned_reexecution(
            self.gen,
            ReducedTrace(self.tree, labeling),
            self.config.strategy,
            self.config.realign_seed,
            self.config.max_bypass_cascade,
        )
        self.stats.count(outcome)
        return outcome

    def _property(self, generated: GeneratedInput) -> bool:
        if self.config.cache_enabled and generated.digest in self._verdicts:
            return self._verdicts[generated.digest]
        verdict = self.prop(generated)
        self.stats.property_tests += 1
        self._verdicts[generated.digest] = verdict
        return verdict

    def check_deadline(self) -> None:
        if time.monotonic() > self._deadline:
            raise ReductionTimeoutException(self.config.timeout)

    def test_candidate(self, labeling: RemovalLabeling) -> Candidate:
        """
        Re-execute against a labeling and test the property on the result.

        A candidate holds iff the re-execution completed, the property holds and
        the input is no larger than the original.

        Raises:
            InvalidLabelException: If the labeling names a non-removable node
            ReductionTimeoutException: If the session deadline passed
        """
        key = normalize_labeling(self.tree, labeling)
        if self.config.cache_enabled and key in self._outcomes:
            return self._outcomes[key]
        self.check_deadline()

        outcome = self._reexecute(key)
        if not outcome.completed:
            self.stats.halted_candidates += 1
            candidate = Candidate(False, key)
        else:
            generated = outcome.input
            self.stats.completed_candidates += 1
            if self.validity is None or self.validity(generated):
                self.stats.valid_candidates += 1
            holds = generated.total_size <= self.original.total_size and self._property(generated)
            candidate = Candidate(holds, normalize_labeling(self.tree, outcome.effective_labeling), generated)

        self.history.append((labeling_digest(key), candidate.holds))
        self._outcomes[key] = candidate
        return candidate

    def try_remove(self, units: Iterable[int]) -> bool:
        """Test the accepted labeling plus `units`; adopt the candidate when it holds"""
        candidate = self.test_candidate(self.labeling.with_removed(*units))
        if candidate.holds:
            self.accept(candidate)
        return candidate.holds

    def accept(self, candidate: Candidate) -> None:
        # bypassed candidates hold under their effective labeling, a superset
        self.labeling = candidate.effective
        self.current = candidate.input
        logger.debug(f"Accepted {len(self.labeling)} removed units, size {candidate.input.total_size}")

    def covered(self) -> List[bool]:
        return removed_nodes(self.tree, self.labeling)

    # results -----------------------------------------------------------------
    def result(self, case: Optional[str] = None, seed: Union[int, str, None] = None) -> ReductionResult:
        wall_time = time.monotonic() - self._started
        size_original = self.original.total_size
        size_final = self.current.total_size
        metrics = ReductionReport(
            case=case or self.gen.generator_id,
            search=self.config.search.value,
            strategy=self.config.strategy.value,
            seed=self.tree.trace.seed if seed is None else seed,
            realign_seed=self.config.realign_seed,
            size_original=size_original,
            size_final=size_final,
            quality=size_final / size_original if size_original else 1.0,
            wall_time=wall_time,
            property_tests=self.stats.property_tests,
            speed=max(size_original - size_final, 0) / wall_time if wall_time > 0 else 0.0,
            validity_rate=self.stats.validity_rate,
            halted_candidates=self.stats.halted_candidates,
            prog_mismatches=self.stats.prog_mismatches,
            dec_mismatches=self.stats.dec_mismatches,
            bypassed_units=self.stats.bypassed_units,
            realigned_values=self.stats.realigned_values,
            timed_out=self.timed_out,
            sound=self._verdicts.get(self.current.digest, False),
            result_digest=self.current.digest,
        )
        return ReductionResult(
            final_input=self.current,
            final_labeling=self.labeling,
            metrics=metrics,
            history=tuple(self.history),
            tree=self.tree,
        )


def _until_timeout(driver: Callable[[ReductionSession], None]):
    """Run a search body; a timeout stops it with the best labeling so far"""

    def run(session: ReductionSession, case: Optional[str] = None,
            seed: Union[int, str, None] = None) -> ReductionResult:
        try:
            driver(session)
        except ReductionTimeoutException:
            logger.info(f"Reduction of '{session.gen.generator_id}' timed out after {session.config.timeout:g}s")
            session.timed_out = True
        return session.result(case=case, seed=seed)

    run.__name__ = driver.__name__
    run.__doc__ = driver.__doc__
    return run


###############################################################################
# Searches
###############################################################################
def _split(items: Sequence[int], parts: int) -> List[List[int]]:
    chunks = []
    start = 0
    for i in range(parts):
        stop = start + (len(items) - start) // (parts - i)
        chunks.append(list(items[start:stop]))
        start = stop
    return chunks


def ddmin_units(session: ReductionSession, units: Sequence[int]) -> None:
    """
    ddmin over `units` on top of the accepted labeling.

    Subsets first, then complements, doubling granularity up to single
    units. Ends with every remaining unit tested for removal on its own.
    """
    remaining = list(units)
    granularity = 2
    while remaining:
        granularity = min(granularity, len(remaining))
        chunks = _split(remaining, granularity)
        reduced = False

        if granularity > 1:
            for chunk in chunks:
                keep = set(chunk)
                if session.try_remove(u for u in remaining if u not in keep):
                    remaining = chunk
                    granularity = 2
                    reduced = True
                    break

        if not reduced:
            for chunk in chunks:
                if session.try_remove(chunk):
                    drop = set(chunk)
                    remaining = [u for u in remaining if u not in drop]
                    granularity = max(granularity - 1, 2)
                    reduced = True
                    break

        if reduced:
            covered = session.covered()
            remaining = [u for u in remaining if not covered[u]]
            continue
        if granularity >= len(remaining):
            break
        granularity = min(len(remaining), granularity * 2)


def _powerset(session: ReductionSession) -> None:
    """Brute force over kept-unit sets by ascending size; the first holding one is optimal"""
    tree = session.tree
    units = tree.units
    ceiling = settings.POWERSET_UNIT_CEILING
    if len(units) > ceiling:
        raise OracleTooLargeException(len(units), ceiling)

    ancestors = {unit: _unit_ancestors(tree, unit) for unit in units}
    for size in range(len(units) + 1):
        for kept in itertools.combinations(units, size):
            kept_set = set(kept)
            # a kept unit under a removed one would not actually be kept
            if any(not ancestors[u] <= kept_set for u in kept):
                continue
            if session.try_remove(u for u in units if u not in kept_set):
                logger.info(f"Powerset search found {size} kept units")
                return


def _unit_ancestors(tree: TraceTree, unit: int) -> frozenset:
    found = []
    parent = tree.nodes[unit].parent
    while parent is not None:
        if tree.nodes[parent].removable:
            found.append(parent)
        parent = tree.nodes[parent].parent
    return frozenset(found)


def _ddmin_sequence(session: ReductionSession) -> None:
    """ddmin over all removable units in document order"""
    ddmin_units(session, kept_units(session.tree, session.labeling))


def _hdd_tree(session: ReductionSession) -> None:
    """ddmin level by level over removable depth, sweeping until nothing changes"""
    tree = session.tree
    if not tree.units:
        return
    max_depth = max(tree.unit_depths.values())
    sweep = 0
    while True:
        sweep += 1
        before = session.labeling
        for depth in range(1, max_depth + 1):
            level = [u for u in kept_units(tree, session.labeling) if tree.unit_depth(u) == depth]
            ddmin_units(session, level)
        logger.debug(f"HDD sweep {sweep}: {len(session.labeling)} removed units")
        if session.labeling == before:
            break


powerset_search = _until_timeout(_powerset)
ddmin_sequence = _until_timeout(_ddmin_sequence)
hdd_tree = _until_timeout(_hdd_tree)

SEARCHES: Dict[SearchKind, Callable[[ReductionSession], ReductionResult]] = {
    SearchKind.POWERSET: powerset_search,
    SearchKind.SEQUENCE: ddmin_sequence,
    SearchKind.TREE: hdd_tree,
}


def one_minimal_check(session: ReductionSession, labeling: RemovalLabeling) -> Union[bool, int]:
    """
    Check that no single further unit can be removed.

    Returns:
        True if the labeling is 1-minimal, else the first unit whose removal still holds
    """
    for unit in kept_units(session.tree, labeling):
        if session.test_candidate(labeling.with_removed(unit)).holds:
            return unit
    return True


###############################################################################
# Entry points
###############################################################################
def greduce_from_trace(
    gen: GeneratorSpec,
    trace: Trace,
    prop: PropertyTest,
    config: Optional[SearchConfig] = None,
    validity: Optional[Callable[[GeneratedInput], bool]] = None,
    case: Optional[str] = None,
    seed_label: Union[int, str, None] = None,
) -> ReductionResult:
    """
    Reduce the input of a recorded trace.

    Args:
        gen: Generator the trace was recorded from
        trace: Recorded trace whose output exhibits the property
        prop: Property test
        config: Search and alignment settings
        validity: Optional validity checker counted into the report
        case: Case name for the report
        seed_label: Seed column of the report

    Returns:
        Final input, labeling and metrics

    Raises:
        PropertyNotExhibitedException: If the trace's own output fails the property
        OracleTooLargeException: Powerset search over too many units
    """
    config = config or SearchConfig()
    tree = build_trace_tree(trace)
    session = ReductionSession(gen, tree, prop, config, validity)
    logger.info(
        f"Reducing '{gen.generator_id}' ({len(tree.units)} units, size {session.original.total_size}) "
        f"with {config.search.value}/{config.strategy.value}"
    )
    result = SEARCHES[config.search](session, case=case, seed=seed_label)
    logger.info(
        f"Reduced '{gen.generator_id}' {result.metrics.size_original} -> {result.metrics.size_final} "
        f"in {result.metrics.property_tests} tests"
    )
    return result


def greduce(
    gen: GeneratorSpec,
    seed: int,
    prop: PropertyTest,
    config: Optional[SearchConfig] = None,
    validity: Optional[Callable[[GeneratedInput], bool]] = None,
    case: Optional[str] = None,
) -> ReductionResult:
    """Record the generator from `seed`, then reduce its input"""
    trace, _ = record_execution(gen, seed)
    return greduce_from_trace(gen, trace, prop, config, validity, case, seed)
