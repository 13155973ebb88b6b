"""
Registry of bundled cases: generator, injected bug, validity checker, fixture
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Tuple

from greduce.cases import digest, digraph, expr, nested, password, pop
from greduce.core.config import settings
from greduce.core.exceptions import UnknownCaseException, UnknownGeneratorException
from greduce.models.trace import Trace
from greduce.services.genlib import GeneratedInput, GeneratorSpec, record_execution, size_total
from greduce.services.reduction_service import PropertyTest
from greduce.services.trace_service import deserialize_trace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaseSpec:
    """
    A bundled reduction subject.

    `exhibits` and `valid` work on serialized text so the same checks serve
    generator outputs and raw-ddmin candidates. Demo cases illustrate
    caveats and are excluded from reduction acceptance.
    """
    name: str
    generator: GeneratorSpec
    exhibits: Callable[[str], bool]
    valid: Callable[[str], bool]
    parse: Callable[[str], Any]
    tokenizer: str = "lines"
    fixture: Optional[str] = None
    fixture_seed: int = 0
    dependency_bearing: bool = False
    demo: bool = False
    text_size: Optional[Callable[[str], int]] = None
    description: str = ""

    def make_property(self) -> PropertyTest:
        """Fresh property test (its call counter starts at zero)"""
        return PropertyTest(lambda generated: self.exhibits(generated.text), name=f"{self.name}-bug")

    def validity(self, generated: GeneratedInput) -> bool:
        return self.valid(generated.text)

    def measure_text(self, text: str) -> int:
        if self.text_size is not None:
            return self.text_size(text)
        try:
            return size_total(self.generator.measure(self.parse(text)))
        except ValueError:
            return len(text)

    def fixture_trace(self) -> Trace:
        """The shipped fixture trace, or a recording from the fixture seed"""
        if self.fixture is None:
            trace, _ = record_execution(self.generator, self.fixture_seed)
            return trace
        return _load_fixture(self.fixture)


@lru_cache(maxsize=None)
def _load_fixture(filename: str) -> Trace:
    path = settings.FIXTURES_DIR / filename
    logger.debug(f"Loading fixture trace {path}")
    return deserialize_trace(path.read_bytes())


_CASES: Tuple[CaseSpec, ...] = (
    CaseSpec(
        name="password",
        generator=password.GENERATOR,
        exhibits=password.exhibits,
        valid=password.valid,
        parse=password.parse,
        tokenizer="chars",
        fixture="password.json",
        fixture_seed=889624,
        description="doubled random word; bug needs a 'c'",
    ),
    CaseSpec(
        name="nested",
        generator=nested.GENERATOR,
        exhibits=nested.exhibits,
        valid=nested.valid,
        parse=nested.parse,
        tokenizer="chars",
        fixture="nested.json",
        fixture_seed=875,
        description="heads with optional signs and leaf groups; bug needs a 'y' in a group",
    ),
    CaseSpec(
        name="digraph",
        generator=digraph.GENERATOR,
        exhibits=digraph.exhibits,
        valid=digraph.valid,
        parse=digraph.parse,
        fixture="digraph.json",
        fixture_seed=11407,
        dependency_bearing=True,
        description="directed graph; bug needs a self-loop reachable from node 0",
    ),
    CaseSpec(
        name="expr",
        generator=expr.GENERATOR,
        exhibits=expr.exhibits,
        valid=expr.valid,
        parse=expr.parse,
        fixture="expr.json",
        fixture_seed=13047552402,
        dependency_bearing=True,
        description="let-bound integer expressions; evaluator crashes on division under double negation",
    ),
    CaseSpec(
        name="pop",
        generator=pop.GENERATOR,
        exhibits=pop.exhibits,
        valid=pop.valid,
        parse=pop.parse,
        tokenizer="chars",
        demo=True,
        description="non-monotone demo: a block that pops from the output",
    ),
    CaseSpec(
        name="digest",
        generator=digest.GENERATOR,
        exhibits=digest.exhibits,
        valid=digest.valid,
        parse=digest.parse,
        tokenizer="chars",
        demo=True,
        text_size=digest.text_size,
        description="non-local demo: truncated hash of a random word",
    ),
)

_BY_NAME: Dict[str, CaseSpec] = {case.name: case for case in _CASES}


def case_registry() -> Tuple[CaseSpec, ...]:
    return _CASES


def reduction_cases() -> List[CaseSpec]:
    """Cases that take part in reduction campaigns"""
    return [case for case in _CASES if not case.demo]


def get_case(name: str) -> CaseSpec:
    """
    Raises:
        UnknownCaseException: If no case has this name
    """
    try:
        return _BY_NAME[name]
    except KeyError:
        raise UnknownCaseException(name) from None


def get_generator(generator_id: str) -> GeneratorSpec:
    """
    Raises:
        UnknownGeneratorException: If no bundled case provides this generator
    """
    for case in _CASES:
        if case.generator.generator_id == generator_id:
            return case.generator
    raise UnknownGeneratorException(generator_id)
