"""
Pydantic schemas for trace files, labeling files, configurations and reports
"""
from enum import Enum
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    StrictBool,
    StrictInt,
    StrictStr,
    ValidationError,
    field_validator,
    model_validator,
)

from greduce.core.config import settings
from greduce.core.exceptions import ConfigException

U64 = Annotated[int, Field(ge=0, le=2**64 - 1)]
ScalarValue = Union[StrictBool, StrictInt, StrictStr]


class SearchKind(str, Enum):
    POWERSET = "powerset"
    SEQUENCE = "seq"
    TREE = "tree"


class AlignmentStrategy(str, Enum):
    HALT = "halt"
    BYPASS = "bypass"
    REALIGN = "realign"


###############################################################################
# Trace and labeling files
###############################################################################
class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class IntRangeDocument(_Document):
    kind: Literal["int_range"]
    lo: StrictInt
    hi: StrictInt

    @model_validator(mode="after")
    def check_bounds(self):
        if self.lo >= self.hi:
            raise ValueError(f"empty range [{self.lo}, {self.hi})")
        return self


class OneOfDocument(_Document):
    kind: Literal["one_of"]
    options: List[ScalarValue] = Field(min_length=1)


class BoolDocument(_Document):
    kind: Literal["bool"]


DomainDocument = Annotated[
    Union[IntRangeDocument, OneOfDocument, BoolDocument],
    Field(discriminator="kind"),
]


class DecisionDocument(_Document):
    index: StrictInt = Field(ge=0)
    site: StrictStr = Field(min_length=1)
    role: Literal["plain", "loop_init", "select_init"]
    domain: DomainDocument
    value: ScalarValue
    path: List[Tuple[StrictStr, StrictInt]] = Field(min_length=1)


class TraceDocument(_Document):
    version: StrictStr
    generator_id: StrictStr
    seed: U64
    output_digest: StrictStr
    decisions: List[DecisionDocument]


class LabelingDocument(_Document):
    version: StrictStr
    removed: List[List[Tuple[StrictStr, StrictInt]]]


###############################################################################
# Configurations
###############################################################################
class SearchConfig(BaseModel):
    """Settings of one reduction run"""
    model_config = ConfigDict(frozen=True)

    search: SearchKind = SearchKind.TREE
    strategy: AlignmentStrategy = AlignmentStrategy.REALIGN
    seed: U64 = 0
    realign_seed: U64 = settings.DEFAULT_REALIGN_SEED
    timeout: float = Field(default=settings.DEFAULT_TIMEOUT_SECONDS, gt=0)
    max_bypass_cascade: int = Field(default=settings.MAX_BYPASS_CASCADE, gt=0)
    cache_enabled: bool = settings.CACHE_ENABLED


class CampaignConfig(BaseModel):
    """Cross product of cases, searches, strategies and seeds"""
    model_config = ConfigDict(frozen=True)

    cases: Union[Literal["all"], List[str]] = "all"
    searches: List[SearchKind] = Field(default_factory=lambda: [SearchKind.TREE])
    strategies: List[AlignmentStrategy] = Field(default_factory=lambda: [AlignmentStrategy.REALIGN])
    seeds: List[Union[U64, Literal["fixture"]]] = Field(default_factory=lambda: ["fixture"])
    realign_seed: U64 = settings.DEFAULT_REALIGN_SEED
    timeout: float = Field(default=settings.DEFAULT_TIMEOUT_SECONDS, gt=0)
    output: Optional[Path] = None
    format: Literal["json", "csv"] = "json"
    jobs: int = Field(default=1, gt=0)
    baselines: bool = False

    @field_validator("cases", "searches", "strategies", "seeds")
    @classmethod
    def non_empty(cls, value):
        if not value:
            raise ValueError("must not be empty")
        return value


def build_config(model, **data):
    """Construct a configuration model, surfacing violations as ConfigException"""
    try:
        return model(**data)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
        raise ConfigException(f"invalid {model.__name__}: {problems}", details=e.errors()) from e


###############################################################################
# Reports
###############################################################################
class ReductionReport(BaseModel):
    """Metrics of one reduction run"""
    model_config = ConfigDict(frozen=True)

    version: str = settings.REPORT_FORMAT_VERSION
    case: str
    search: str
    strategy: str
    seed: Union[int, str]
    realign_seed: int
    size_original: int
    size_final: int
    quality: float = Field(ge=0, le=1)
    wall_time: float = Field(ge=0)
    property_tests: int = Field(ge=0)
    speed: float = Field(ge=0)
    validity_rate: float = Field(ge=0, le=1)
    halted_candidates: int = Field(ge=0)
    prog_mismatches: int = Field(ge=0)
    dec_mismatches: int = Field(ge=0)
    bypassed_units: int = Field(ge=0)
    realigned_values: int = Field(ge=0)
    timed_out: bool = False
    sound: bool = True
    result_digest: str


REPORT_COLUMNS: Tuple[str, ...] = tuple(name for name in ReductionReport.model_fields if name != "version")
TIMING_COLUMNS: Tuple[str, ...] = ("wall_time", "speed")
