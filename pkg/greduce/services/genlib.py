"""
Generator combinators and their execution engines

Generators are plain callables taking a `GenContext` and drawing every random
choice through it:

    def build(ctx):
        word = ""
        def letter(ctx, i):
            nonlocal word
            word += ctx.choose_from("letter", ascii_lowercase)
        ctx.repeat("length", 20, letter)
        return word

The same callable runs under four contexts: `RecordContext` (seeded draws,
trace recorded), `AlignContext` (re-execution against a reduced trace),
`BareContext` (seeded draws, nothing recorded) and `ChoiceReplayContext`
(flat replay of a choice sequence).
"""
import abc
import enum
import functools
import hashlib
import itertools
import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from greduce.core.config import settings
from greduce.core.exceptions import (
    ContextFinishedException,
    DuplicateSiteException,
    GeneratorException,
    GReduceException,
    InvalidDomainException,
)
from greduce.core.prng import SplitMix64
from greduce.models.schemas import AlignmentStrategy
from greduce.models.trace import (
    BLOCK_MARK,
    BOOL,
    EMPTY_LABELING,
    ITERATION_MARK,
    RESERVED_SITES,
    ChoiceDomain,
    Decision,
    ExecutionPath,
    IntRange,
    OneOf,
    PathOrder,
    ReducedTrace,
    RemovalLabeling,
    Role,
    Scalar,
    Trace,
)
from greduce.services.trace_service import build_trace_tree, path_compare, removed_nodes

logger = logging.getLogger(__name__)

Size = Union[int, Tuple[int, int]]
LoopBody = Callable[["GenContext", int], None]
BlockBody = Callable[["GenContext"], None]

_PLAIN = Role.PLAIN
_LOOP_INIT = Role.LOOP_INIT
_SELECT_INIT = Role.SELECT_INIT


def size_total(size: Size) -> int:
    """Pair-valued sizes count as the sum of their parts"""
    return size if isinstance(size, int) else sum(size)


###############################################################################
# Generated inputs and generator descriptors
###############################################################################
@dataclass(frozen=True)
class GeneratedInput:
    """Generator output with its canonical text and size"""
    payload: Any = field(compare=False)
    text: str
    size: Size

    @functools.cached_property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    @property
    def total_size(self) -> int:
        return size_total(self.size)


@dataclass(frozen=True)
class GeneratorSpec:
    """A registered generator: its build callable plus serialization and size measure"""
    generator_id: str
    build: Callable[["GenContext"], Any]
    serialize: Callable[[Any], str]
    measure: Callable[[Any], Size]

    def materialize(self, payload: Any) -> GeneratedInput:
        return GeneratedInput(payload=payload, text=self.serialize(payload), size=self.measure(payload))


###############################################################################
# Draws
###############################################################################
def draw(domain: ChoiceDomain, prng: SplitMix64) -> Scalar:
    """Uniform draw from a choice domain"""
    cls = domain.__class__
    if cls is IntRange:
        return domain.lo + prng.below(domain.hi - domain.lo)
    if cls is OneOf:
        return domain.options[prng.below(len(domain.options))]
    return prng.below(2) == 1


def _caller_site(depth: int = 3) -> str:
    frame = sys._getframe(depth)
    return f"{frame.f_globals.get('__name__', '?')}:{frame.f_code.co_name}:{frame.f_lineno}"


###############################################################################
# Combinator surface
###############################################################################
class GenContext(abc.ABC):
    """
    Combinator surface handed to a generator.

    A context serves exactly one generator execution; once the generator has
    returned every combinator raises ContextFinishedException.
    """

    def __init__(self):
        self._finished = False

    def _site(self, site: Optional[str]) -> str:
        if site is None:
            site = _caller_site()
        elif site in RESERVED_SITES:
            raise ValueError(f"site label '{site}' is reserved")
        if self._finished:
            raise ContextFinishedException(site)
        return site

    def choose_int(self, site: Optional[str], lo: int, hi: int) -> int:
        """Integer in [lo, hi)"""
        site = self._site(site)
        if lo >= hi:
            raise InvalidDomainException(f"empty integer range [{lo}, {hi}) at site '{site}'")
        return self._choose(site, IntRange(lo, hi))

    def choose_from(self, site: Optional[str], options: Sequence[Scalar]) -> Scalar:
        """One value of `options`; values are matched across executions by equality"""
        site = self._site(site)
        options = tuple(options)
        if not options:
            raise InvalidDomainException(f"no options at site '{site}'")
        return self._choose(site, OneOf(options))

    def flip(self, site: Optional[str]) -> bool:
        return self._choose(self._site(site), BOOL)

    def repeat(self, site: Optional[str], max_count: int, body: LoopBody) -> int:
        """
        Reducible loop: draw n in [0, max_count) and run `body(ctx, ordinal)` n times.

        Returns:
            Number of iterations executed
        """
        site = self._site(site)
        if max_count < 1:
            raise InvalidDomainException(f"loop bound {max_count} at site '{site}' must be at least 1")
        return self._repeat(site, max_count, body)

    def maybe(self, site: Optional[str], body: BlockBody) -> bool:
        """
        Reducible selection: run `body(ctx)` on a Bool draw.

        Returns:
            Whether the body ran
        """
        return self._maybe(self._site(site), body)

    def finish(self) -> None:
        self._finished = True

    @abc.abstractmethod
    def _choose(self, site: str, domain: ChoiceDomain) -> Scalar:
        ...

    @abc.abstractmethod
    def _repeat(self, site: str, max_count: int, body: LoopBody) -> int:
        ...

    @abc.abstractmethod
    def _maybe(self, site: str, body: BlockBody) -> bool:
        ...


class BareContext(GenContext):
    """Seeded draws with no recording at all"""

    def __init__(self, seed: int):
        super().__init__()
        self._prng = SplitMix64(seed)

    def _choose(self, site, domain):
        return draw(domain, self._prng)

    def _repeat(self, site, max_count, body):
        count = self._prng.below(max_count)
        for ordinal in range(1, count + 1):
            body(self, ordinal)
        return count

    def _maybe(self, site, body):
        run = self._prng.below(2) == 1
        if run:
            body(self)
        return run


###############################################################################
# Recording
###############################################################################
class _Frame:
    __slots__ = ("path", "counts", "origin", "callers")

    def __init__(self, path: ExecutionPath, origin: Optional[ExecutionPath] = None):
        self.path = path
        self.counts: Dict[str, int] = {}
        # recorded counterpart of this frame during re-execution
        self.origin = origin
        # site -> (code, line) of the first call in this frame
        self.callers: Dict[str, Tuple[Any, int]] = {}


def _describe_caller(caller: Tuple[Any, int]) -> str:
    code, line = caller
    return f"{code.co_filename}:{code.co_name}:{line}"


class _TracingContext(GenContext):
    """Shared execution-indexing and trace bookkeeping"""

    def __init__(self):
        super().__init__()
        self._frames: List[_Frame] = [_Frame((), ())]
        self._decisions: List[Decision] = []
        self._roles: Dict[str, Role] = {}

    def _enter_site(self, site: str, role: Role) -> Tuple[_Frame, int]:
        frame = self._frames[-1]
        counts = frame.counts
        occurrence = counts.get(site, 0) + 1
        counts[site] = occurrence
        first = self._roles.setdefault(site, role)
        if first is not role:
            raise DuplicateSiteException(site, first.value, role.value)
        return frame, occurrence

    def _append(self, site: str, domain: ChoiceDomain, value: Scalar, path: ExecutionPath, role: Role) -> int:
        decisions = self._decisions
        index = len(decisions)
        decisions.append(Decision(index, site, domain, value, path, role))
        return index

    def to_trace(self, generator_id: str, seed: int, output_digest: str) -> Trace:
        return Trace(
            decisions=tuple(self._decisions),
            generator_id=generator_id,
            seed=seed,
            output_digest=output_digest,
        )


# positional Decision constructor without the Python-level __new__
_decision = functools.partial(tuple.__new__, Decision)


class RecordContext(_TracingContext):
    """
    Seeded draws, every decision recorded with its execution path.

    Within one frame a site may recur only from the call location that first
    used it in that frame, as a loop body or a recursive helper does.
    """

    def __init__(self, seed: int):
        super().__init__()
        self._prng = SplitMix64(seed)

    def _conflict(self, frame: _Frame, site: str, role: Role, where: Tuple[Any, int]) -> None:
        first = frame.callers[site]
        if first != where:
            raise DuplicateSiteException(site, _describe_caller(first), _describe_caller(where))
        raise DuplicateSiteException(site, self._roles[site].value, role.value)

    # hot paths: _enter_site and _append inlined
    def _choose(self, site, domain):
        frame = self._frames[-1]
        counts = frame.counts
        occurrence = counts[site] = counts.get(site, 0) + 1
        caller = sys._getframe(2)
        where = caller.f_code, caller.f_lineno
        if frame.callers.setdefault(site, where) != where or self._roles.setdefault(site, _PLAIN) is not _PLAIN:
            self._conflict(frame, site, _PLAIN, where)
        value = draw(domain, self._prng)
        decisions = self._decisions
        decisions.append(_decision((len(decisions), site, domain, value, frame.path + ((site, occurrence),), _PLAIN)))
        return value

    def _repeat(self, site, max_count, body):
        frame = self._frames[-1]
        counts = frame.counts
        occurrence = counts[site] = counts.get(site, 0) + 1
        caller = sys._getframe(2)
        where = caller.f_code, caller.f_lineno
        if frame.callers.setdefault(site, where) != where or self._roles.setdefault(site, _LOOP_INIT) is not _LOOP_INIT:
            self._conflict(frame, site, _LOOP_INIT, where)
        path = frame.path + ((site, occurrence),)
        count = self._prng.below(max_count)
        decisions = self._decisions
        decisions.append(_decision((len(decisions), site, IntRange(0, max_count), count, path, _LOOP_INIT)))
        frames = self._frames
        for ordinal in range(1, count + 1):
            frames.append(_Frame(path + ((ITERATION_MARK, ordinal),)))
            body(self, ordinal)
            frames.pop()
        return count

    def _maybe(self, site, body):
        frame = self._frames[-1]
        counts = frame.counts
        occurrence = counts[site] = counts.get(site, 0) + 1
        caller = sys._getframe(2)
        where = caller.f_code, caller.f_lineno
        if frame.callers.setdefault(site, where) != where or self._roles.setdefault(site, _SELECT_INIT) is not _SELECT_INIT:
            self._conflict(frame, site, _SELECT_INIT, where)
        path = frame.path + ((site, occurrence),)
        run = self._prng.below(2) == 1
        decisions = self._decisions
        decisions.append(_decision((len(decisions), site, BOOL, run, path, _SELECT_INIT)))
        if run:
            frames = self._frames
            frames.append(_Frame(path + ((BLOCK_MARK, 1),)))
            body(self)
            frames.pop()
        return run


def _run(gen: GeneratorSpec, ctx: GenContext) -> Any:
    try:
        return gen.build(ctx)
    except GReduceException:
        raise
    except Exception as e:
        logger.error(f"Generator '{gen.generator_id}' raised: {e!r}", exc_info=True)
        raise GeneratorException(gen.generator_id, e) from e
    finally:
        ctx.finish()


def record_execution(gen: GeneratorSpec, seed: int) -> Tuple[Trace, GeneratedInput]:
    """
    Run a generator from a seed and record its trace.

    Args:
        gen: Registered generator
        seed: Unsigned 64-bit seed

    Returns:
        The recorded trace and the generated input

    Raises:
        GeneratorException: If the generator raised
    """
    ctx = RecordContext(seed)
    generated = gen.materialize(_run(gen, ctx))
    return ctx.to_trace(gen.generator_id, seed, generated.digest), generated


def bare_execution(gen: GeneratorSpec, seed: int) -> GeneratedInput:
    """Same draws as record_execution, nothing recorded"""
    return gen.materialize(_run(gen, BareContext(seed)))


###############################################################################
# Trace-aligned re-execution
###############################################################################
class MismatchKind(str, enum.Enum):
    PROG = "prog_mismatch"
    DEC = "dec_mismatch"


class EventAction(str, enum.Enum):
    HALTED = "halted"
    BYPASSED = "bypassed_unit"
    REALIGNED = "realigned_fresh_value"


class MisalignmentEvent(NamedTuple):
    at: ExecutionPath
    kind: MismatchKind
    action: EventAction
    unit: Optional[int] = None


class ReexecStatus(str, enum.Enum):
    COMPLETED = "completed"
    HALTED = "halted"


@dataclass(frozen=True)
class ReexecOutcome:
    """Result of one trace-aligned re-execution"""
    status: ReexecStatus
    events: Tuple[MisalignmentEvent, ...]
    effective_labeling: RemovalLabeling
    input: Optional[GeneratedInput] = None
    trace: Optional[Trace] = None

    @property
    def completed(self) -> bool:
        return self.status is ReexecStatus.COMPLETED


class _HaltSignal(BaseException):
    # BaseException: generator `except Exception` blocks must not swallow it
    pass


class _BypassSignal(BaseException):
    def __init__(self, unit: int):
        super().__init__(unit)
        self.unit = unit


class AlignContext(_TracingContext):
    """
    Re-executes a generator so that its decisions map onto the kept decisions
    of a reduced trace.

    Each live frame carries the path of its recorded counterpart (`origin`);
    a request at live occurrence k of site s is matched against the recorded
    decision at `origin + ((s, k),)`. Loop iterations are renumbered: live
    iteration i maps to the i-th kept iteration of the recorded loop.
    """

    def __init__(self, reduced: ReducedTrace, strategy: AlignmentStrategy, realign_seed: int):
        super().__init__()
        tree = reduced.tree
        self._tree = tree
        self._strategy = strategy
        self._realign_prng = SplitMix64(realign_seed)
        self._removed = removed_nodes(tree, reduced.labeling)
        self._kept = [
            d for d in tree.trace.decisions if not self._removed[tree.decision_nodes[d.index]]
        ]
        self._kept_positions = {d.path: position for position, d in enumerate(self._kept)}
        self._next = 0
        self.events: List[MisalignmentEvent] = []

    # cursor ------------------------------------------------------------------
    def _mapped(self, frame: _Frame, site: str, occurrence: int) -> Optional[ExecutionPath]:
        return None if frame.origin is None else frame.origin + ((site, occurrence),)

    def _cursor(self, mapped: Optional[ExecutionPath]) -> Optional[Decision]:
        if self._strategy is AlignmentStrategy.REALIGN and mapped is not None:
            self._resync(mapped)
        return self._kept[self._next] if self._next < len(self._kept) else None

    def _resync(self, mapped: ExecutionPath) -> None:
        position = self._kept_positions.get(mapped)
        if position is not None:
            if position > self._next:
                logger.debug(f"Re-aligned cursor {self._next} -> {position} at {mapped}")
                self._next = position
            return
        kept = self._kept
        while self._next < len(kept) and path_compare(kept[self._next].path, mapped) is PathOrder.BEFORE:
            self._next += 1

    @staticmethod
    def _matches(recorded: Optional[Decision], mapped: Optional[ExecutionPath], role: Role) -> bool:
        return recorded is not None and mapped is not None and recorded.path == mapped and recorded.role is role

    # strategies --------------------------------------------------------------
    def _halt(self, at: ExecutionPath, kind: MismatchKind):
        self.events.append(MisalignmentEvent(at, kind, EventAction.HALTED))
        raise _HaltSignal()

    def _bypass(self, at: ExecutionPath, kind: MismatchKind, unit: Optional[int]):
        if unit is None:
            # nothing removable encloses the decision: stop like halt
            self._halt(at, kind)
        self.events.append(MisalignmentEvent(at, kind, EventAction.BYPASSED, unit))
        raise _BypassSignal(unit)

    def _fresh(self, at: ExecutionPath, kind: MismatchKind, domain: ChoiceDomain) -> Scalar:
        self.events.append(MisalignmentEvent(at, kind, EventAction.REALIGNED))
        return draw(domain, self._realign_prng)

    def _mismatch(self, at: ExecutionPath, kind: MismatchKind, domain: ChoiceDomain,
                  recorded: Optional[Decision]) -> Scalar:
        logger.debug(f"{kind.value} at {at} under {self._strategy.value}")
        if self._strategy is AlignmentStrategy.HALT:
            self._halt(at, kind)
        if self._strategy is AlignmentStrategy.BYPASS:
            self._bypass(at, kind, None if recorded is None else self._tree.enclosing_unit(recorded.index))
        return self._fresh(at, kind, domain)

    # combinators -------------------------------------------------------------
    def _choose(self, site, domain):
        frame, occurrence = self._enter_site(site, Role.PLAIN)
        path = frame.path + ((site, occurrence),)
        mapped = self._mapped(frame, site, occurrence)
        recorded = self._cursor(mapped)
        if self._matches(recorded, mapped, Role.PLAIN):
            if domain.contains(recorded.value):
                self._next += 1
                value = recorded.value
            else:
                value = self._mismatch(path, MismatchKind.DEC, domain, recorded)
        else:
            value = self._mismatch(path, MismatchKind.PROG, domain, recorded)
        self._append(site, domain, value, path, Role.PLAIN)
        return value

    def _repeat(self, site, max_count, body):
        frame, occurrence = self._enter_site(site, Role.LOOP_INIT)
        path = frame.path + ((site, occurrence),)
        mapped = self._mapped(frame, site, occurrence)
        domain = IntRange(0, max_count)
        recorded = self._cursor(mapped)
        origins: List[ExecutionPath] = []
        if self._matches(recorded, mapped, Role.LOOP_INIT):
            loop = self._tree.node_at(mapped)
            kept = [child for child in loop.children if not self._removed[child]]
            origins = [self._tree.nodes[child].path for child in kept]
            if domain.contains(len(kept)):
                self._next += 1
                count = len(kept)
            elif self._strategy is AlignmentStrategy.BYPASS:
                # shrinking the loop is the only way to make its count valid again
                self._bypass(path, MismatchKind.DEC, kept[-1])
            else:
                count = self._mismatch(path, MismatchKind.DEC, domain, recorded)
        else:
            count = self._mismatch(path, MismatchKind.PROG, domain, recorded)

        index = self._append(site, domain, 0, path, Role.LOOP_INIT)
        frames = self._frames
        executed = 0
        for ordinal in range(1, count + 1):
            origin = origins[ordinal - 1] if ordinal <= len(origins) else None
            frames.append(_Frame(path + ((ITERATION_MARK, ordinal),), origin))
            body(self, ordinal)
            frames.pop()
            executed += 1
        self._decisions[index] = self._decisions[index]._replace(value=executed)
        return executed

    def _maybe(self, site, body):
        frame, occurrence = self._enter_site(site, Role.SELECT_INIT)
        path = frame.path + ((site, occurrence),)
        mapped = self._mapped(frame, site, occurrence)
        recorded = self._cursor(mapped)
        origin = None
        if self._matches(recorded, mapped, Role.SELECT_INIT):
            self._next += 1
            selection = self._tree.node_at(mapped)
            block = selection.children[0] if selection.children else None
            run = block is not None and not self._removed[block]
            if run:
                origin = self._tree.nodes[block].path
        else:
            run = self._mismatch(path, MismatchKind.PROG, BOOL, recorded)
        self._append(site, BOOL, run, path, Role.SELECT_INIT)
        if run:
            self._frames.append(_Frame(path + ((BLOCK_MARK, 1),), origin))
            body(self)
            self._frames.pop()
        return run


def aligned_reexecution(
    gen: GeneratorSpec,
    reduced: ReducedTrace,
    strategy: AlignmentStrategy,
    realign_seed: int = settings.DEFAULT_REALIGN_SEED,
    max_bypass_cascade: int = settings.MAX_BYPASS_CASCADE,
) -> ReexecOutcome:
    """
    Re-execute a generator in alignment with a reduced trace.

    Bypass restarts the execution with the enclosing unit added to the
    labeling, which is the same as flipping that unit's init decision and
    continuing; at most `max_bypass_cascade` units are added before the
    re-execution halts.

    Args:
        gen: Generator the trace was recorded from
        reduced: Trace tree plus removal labeling
        strategy: Reaction to infeasible alignment
        realign_seed: Seed of the stream serving fresh values under realign
        max_bypass_cascade: Cap on units added by bypass

    Returns:
        Completed outcome with input, new trace and effective labeling, or Halted

    Raises:
        GeneratorException: If the generator raised
    """
    labeling = reduced.labeling
    events: List[MisalignmentEvent] = []
    for bypassed in itertools.count():
        ctx = AlignContext(ReducedTrace(reduced.tree, labeling), strategy, realign_seed)
        try:
            payload = _run(gen, ctx)
        except _HaltSignal:
            events.extend(ctx.events)
            return ReexecOutcome(ReexecStatus.HALTED, tuple(events), labeling)
        except _BypassSignal as signal:
            events.extend(ctx.events)
            if bypassed >= max_bypass_cascade:
                logger.info(f"Bypass cascade for '{gen.generator_id}' exceeded {max_bypass_cascade} units")
                return ReexecOutcome(ReexecStatus.HALTED, tuple(events), labeling)
            labeling = labeling.with_removed(signal.unit)
            continue
        events.extend(ctx.events)
        generated = gen.materialize(payload)
        trace = ctx.to_trace(gen.generator_id, reduced.tree.trace.seed, generated.digest)
        return ReexecOutcome(ReexecStatus.COMPLETED, tuple(events), labeling, generated, trace)


###############################################################################
# Flat choice-sequence replay
###############################################################################
class Choice(NamedTuple):
    domain: ChoiceDomain
    value: Scalar


ChoiceSequence = Tuple[Choice, ...]


def choice_sequence(trace: Trace) -> ChoiceSequence:
    """The trace's decisions without structure"""
    return tuple(Choice(d.domain, d.value) for d in trace.decisions)


class ChoiceReplayContext(GenContext):
    """
    Replays a choice sequence in order. A recorded value invalid for the live
    domain is replaced by a fresh draw, and so is every request past the end
    of the sequence.
    """

    def __init__(self, choices: Sequence[Choice], fresh_seed: int = 0):
        super().__init__()
        self._choices = choices
        self._position = 0
        self._prng = SplitMix64(fresh_seed)
        self.realized: List[Choice] = []
        self.substituted = 0

    def _choose(self, site, domain):
        value = None
        if self._position < len(self._choices):
            candidate = self._choices[self._position].value
            if domain.contains(candidate):
                value = candidate
        if value is None:
            value = draw(domain, self._prng)
            self.substituted += 1
        self._position += 1
        self.realized.append(Choice(domain, value))
        return value

    def _repeat(self, site, max_count, body):
        count = self._choose(site, IntRange(0, max_count))
        for ordinal in range(1, count + 1):
            body(self, ordinal)
        return count

    def _maybe(self, site, body):
        run = self._choose(site, BOOL)
        if run:
            body(self)
        return run


def replay_choices(gen: GeneratorSpec, choices: Sequence[Choice], fresh_seed: int = 0
                   ) -> Tuple[GeneratedInput, ChoiceSequence]:
    """
    Run a generator over a flat choice sequence.

    Returns:
        The generated input and the choice sequence actually consumed
    """
    ctx = ChoiceReplayContext(choices, fresh_seed)
    generated = gen.materialize(_run(gen, ctx))
    return generated, tuple(ctx.realized)


def replay_trace(gen: GeneratorSpec, trace: Trace) -> Tuple[Trace, GeneratedInput]:
    """Identity re-execution of a trace (no removals); halts on any misalignment"""
    outcome = aligned_reexecution(gen, ReducedTrace(build_trace_tree(trace), EMPTY_LABELING), AlignmentStrategy.HALT)
    if not outcome.completed:
        raise GeneratorException(gen.generator_id, RuntimeError(f"trace does not replay: {outcome.events}"))
    return outcome.trace, outcome.input
