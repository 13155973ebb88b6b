"""
Property oracles over observed crash messages
"""
import difflib
from functools import partial

from pydantic import BaseModel, ConfigDict, Field

from greduce.core.config import settings
from greduce.services.reduction_service import PropertyTest


class SimilaritySpec(BaseModel):
    """Expected crash message and the similarity that still counts as the same crash"""
    model_config = ConfigDict(frozen=True)

    expected_message: str
    threshold: float = Field(default=settings.SIMILARITY_THRESHOLD, ge=0.0, le=1.0)


def similarity_ratio(a: str, b: str) -> float:
    """
    Ratcliff/Obershelp similarity 2M/T.

    Two empty strings are identical (1.0).
    """
    return difflib.SequenceMatcher(None, a, b, autojunk=False).ratio()


def matches(spec: SimilaritySpec, observed: str) -> bool:
    return observed == spec.expected_message or similarity_ratio(observed, spec.expected_message) >= spec.threshold


def crash_oracle(spec: SimilaritySpec) -> PropertyTest:
    """Property over an observed message: equal to, or close enough to, the expected one"""
    return PropertyTest(partial(matches, spec), name=f"crash~{spec.threshold:g}")
