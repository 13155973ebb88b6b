"""
Baseline reducers: ddmin over the serialized input and delete-only shrinking of
the flat choice sequence
"""
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple, TypeVar

from greduce.core.config import settings
from greduce.core.exceptions import PropertyNotExhibitedException, ReductionTimeoutException
from greduce.models.schemas import ReductionReport
from greduce.models.trace import Trace
from greduce.services.genlib import (
    GeneratedInput,
    GeneratorSpec,
    choice_sequence,
    replay_choices,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

TOKENIZERS: Dict[str, Callable[[str], List[str]]] = {
    "lines": lambda text: text.splitlines(keepends=True),
    "chars": list,
}


@dataclass(frozen=True)
class TokenView:
    """A serialized input cut into atomic chunks"""
    tokens: Tuple[str, ...]
    joiner: str = ""

    @classmethod
    def of(cls, text: str, tokenizer: str = "lines") -> "TokenView":
        if tokenizer not in TOKENIZERS:
            raise ValueError(f"unknown tokenizer '{tokenizer}', expected one of {sorted(TOKENIZERS)}")
        return cls(tuple(TOKENIZERS[tokenizer](text)))

    def reassemble(self, indices: Optional[Sequence[int]] = None) -> str:
        if indices is None:
            return self.joiner.join(self.tokens)
        return self.joiner.join(self.tokens[i] for i in indices)


@dataclass
class BaselineStats:
    tests: int = 0
    attempted: int = 0
    valid: int = 0
    wall_time: float = 0.0
    timed_out: bool = False

    @property
    def validity_rate(self) -> float:
        return self.valid / self.attempted if self.attempted else 1.0


class ListReducer:
    """
    Zeller-Hildebrandt ddmin over a list configuration.

    `test(config)` decides whether a sub-list still fails; outcomes are cached
    by `key(config)`. `best` always holds the smallest failing configuration
    found, so a timeout simply stops the loop.
    """

    def __init__(self, items: Sequence[T], test: Callable[[List[T]], bool],
                 key: Callable[[List[T]], Hashable], timeout: float):
        self.best: List[T] = list(items)
        self._test = test
        self._key = key
        self._timeout = timeout
        self._deadline = time.monotonic() + timeout
        self._outcomes: Dict[Hashable, bool] = {}

    def _passes(self, config: List[T]) -> bool:
        key = self._key(config)
        if key not in self._outcomes:
            if time.monotonic() > self._deadline:
                raise ReductionTimeoutException(self._timeout)
            self._outcomes[key] = self._test(config)
        return self._outcomes[key]

    def run(self) -> List[T]:
        config = self.best
        granularity = 2
        while len(config) >= 2:
            granularity = min(granularity, len(config))
            size = len(config)
            bounds = [size * i // granularity for i in range(granularity + 1)]
            chunks = [config[bounds[i]:bounds[i + 1]] for i in range(granularity)]
            reduced = False

            for chunk in chunks:
                if self._passes(chunk):
                    config, granularity, reduced = chunk, 2, True
                    break

            if not reduced and granularity > 2:
                for i in range(granularity):
                    complement = [item for j, chunk in enumerate(chunks) if j != i for item in chunk]
                    if self._passes(complement):
                        config, granularity, reduced = complement, max(granularity - 1, 2), True
                        break

            if reduced:
                self.best = config
                continue
            if granularity >= len(config):
                break
            granularity = min(len(config), granularity * 2)
        return self.best


def raw_ddmin(
    text: str,
    tokenizer: str,
    p_raw: Callable[[bytes], bool],
    validity_text: Optional[Callable[[str], bool]] = None,
    timeout: float = settings.DEFAULT_TIMEOUT_SECONDS,
) -> Tuple[bytes, BaselineStats]:
    """
    ddmin over the tokens of a serialized input.

    Args:
        text: Serialized original input
        tokenizer: "lines" or "chars"
        p_raw: Property over candidate bytes
        validity_text: Validity checker of the rendered input, for the validity rate
        timeout: Seconds before returning the best so far

    Returns:
        Reduced bytes and statistics
    """
    view = TokenView.of(text, tokenizer)
    stats = BaselineStats()
    started = time.monotonic()
    if not p_raw(text.encode("utf-8")):
        raise PropertyNotExhibitedException("raw input")
    stats.tests += 1

    def test(indices: List[int]) -> bool:
        candidate = view.reassemble(indices)
        stats.attempted += 1
        if validity_text is None or validity_text(candidate):
            stats.valid += 1
        stats.tests += 1
        return p_raw(candidate.encode("utf-8"))

    reducer = ListReducer(range(len(view.tokens)), test, lambda c: view.reassemble(c), timeout)
    try:
        reducer.run()
    except ReductionTimeoutException:
        stats.timed_out = True
    stats.wall_time = time.monotonic() - started
    result = view.reassemble(reducer.best).encode("utf-8")
    logger.info(f"raw ddmin ({tokenizer}): {len(text)} -> {len(result)} bytes in {stats.tests} tests")
    return result, stats


def choice_delete_shrink(
    gen: GeneratorSpec,
    trace: Trace,
    prop: Callable[[GeneratedInput], bool],
    fresh_seed: int = 0,
    timeout: float = settings.DEFAULT_TIMEOUT_SECONDS,
) -> Tuple[GeneratedInput, BaselineStats]:
    """
    Delete-only shrinking of the flat choice sequence.

    Each candidate keeps a subsequence of the recorded choices and replays it;
    values invalid for the live domain and requests past the end are served
    fresh draws, so every candidate is a valid generator output.

    Returns:
        Reduced input and statistics
    """
    choices = choice_sequence(trace)
    stats = BaselineStats()
    started = time.monotonic()
    original, _ = replay_choices(gen, choices, fresh_seed)
    verdicts: Dict[str, bool] = {}

    def evaluate(generated: GeneratedInput) -> bool:
        if generated.digest not in verdicts:
            stats.tests += 1
            verdicts[generated.digest] = (
                generated.total_size <= original.total_size and bool(prop(generated))
            )
        return verdicts[generated.digest]

    if not evaluate(original):
        raise PropertyNotExhibitedException(gen.generator_id)

    def test(indices: List[int]) -> bool:
        generated, _ = replay_choices(gen, [choices[i] for i in indices], fresh_seed)
        stats.attempted += 1
        stats.valid += 1
        return evaluate(generated)

    reducer = ListReducer(range(len(choices)), test, tuple, timeout)
    try:
        reducer.run()
    except ReductionTimeoutException:
        stats.timed_out = True
    final, _ = replay_choices(gen, [choices[i] for i in reducer.best], fresh_seed)
    stats.wall_time = time.monotonic() - started
    logger.info(
        f"choice delete shrink '{gen.generator_id}': {len(choices)} -> {len(reducer.best)} choices "
        f"in {stats.tests} tests"
    )
    return final, stats


def baseline_report(
    case: str,
    search: str,
    seed,
    size_original: int,
    size_final: int,
    stats: BaselineStats,
    sound: bool,
    result_digest: str,
) -> ReductionReport:
    """Report a baseline run in the same schema as a reduction"""
    return ReductionReport(
        case=case,
        search=search,
        strategy="none",
        seed=seed,
        realign_seed=0,
        size_original=size_original,
        size_final=size_final,
        quality=size_final / size_original if size_original else 1.0,
        wall_time=stats.wall_time,
        property_tests=stats.tests,
        speed=max(size_original - size_final, 0) / stats.wall_time if stats.wall_time > 0 else 0.0,
        validity_rate=stats.validity_rate,
        halted_candidates=0,
        prog_mismatches=0,
        dec_mismatches=0,
        bypassed_units=0,
        realigned_values=0,
        timed_out=stats.timed_out,
        sound=sound,
        result_digest=result_digest,
    )
