"""
End-to-end checks over the bundled cases
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greduce.cases.oracles import SimilaritySpec, matches, similarity_ratio
from greduce.cases.diagnostics import measure_overhead, monotonicity_probe
from greduce.cases.registry import case_registry, get_case, reduction_cases
from greduce.models.schemas import TIMING_COLUMNS, AlignmentStrategy, CampaignConfig, SearchConfig, SearchKind
from greduce.models.trace import EMPTY_LABELING, ReducedTrace
from greduce.services.campaign_service import emit_report, run_baselines, run_campaign
from greduce.services.baseline_service import choice_delete_shrink, raw_ddmin
from greduce.services.genlib import aligned_reexecution, record_execution, replay_trace
from greduce.services.reduction_service import (
    SEARCHES,
    ReductionSession,
    greduce_from_trace,
    one_minimal_check,
)
from greduce.services.trace_service import build_trace_tree

# fixed seed of the fresh-value stream under which realign reaches the smallest expr crash and the smallest digraph
REALIGN_SEED = 20
GLOBAL_MINIMUM = {"password": 4, "nested": 6, "digraph": 4, "expr": 5}
# recorded traces that exhibit the bug
ORDERING_SUITE = [("digraph", seed) for seed in (10, 18, 21, 48, 62, 68, 100, 102, 106, 139, 162, 173)] + [
    ("expr", seed) for seed in (26, 29, 34, 38, 51, 54, 91, 116, 117, 137, 151, 174)
]


def _reduce(case, **config):
    return greduce_from_trace(
        case.generator, case.fixture_trace(), case.make_property(), SearchConfig(**config), case.validity
    )


@pytest.mark.parametrize("search", list(SearchKind))
@pytest.mark.parametrize("strategy", list(AlignmentStrategy))
def test_motivating_example(search, strategy):
    result = _reduce(get_case("password"), search=search, strategy=strategy)
    assert result.final_input.text == "c\nc\n"


@pytest.mark.parametrize("case", reduction_cases(), ids=lambda case: case.name)
@pytest.mark.parametrize("strategy", [AlignmentStrategy.HALT, AlignmentStrategy.REALIGN])
def test_searches_agree_with_powerset(case, strategy):
    tree = build_trace_tree(case.fixture_trace())
    assert len(tree.units) <= 12
    config = SearchConfig(strategy=strategy, realign_seed=REALIGN_SEED)
    optimum = _reduce(case, search=SearchKind.POWERSET, strategy=strategy, realign_seed=REALIGN_SEED)

    for search in (SearchKind.SEQUENCE, SearchKind.TREE):
        session = ReductionSession(case.generator, tree, case.make_property(), config.model_copy(update={"search": search}))
        result = SEARCHES[search](session)
        assert one_minimal_check(session, session.labeling) is True
        assert result.metrics.size_final >= optimum.metrics.size_final
        if case.name in ("password", "nested"):
            assert result.metrics.size_final == optimum.metrics.size_final


def test_completed_candidates_stay_valid():
    config = CampaignConfig(
        searches=[SearchKind.SEQUENCE, SearchKind.TREE],
        strategies=list(AlignmentStrategy),
    )
    reports = run_campaign(config)
    assert len(reports) >= 20
    assert all(report.validity_rate == 1.0 for report in reports)

    raw, _ = run_baselines("digraph", "fixture", timeout=60)
    assert raw.validity_rate < 1.0


def test_strategy_ordering():
    sizes = {strategy: [] for strategy in AlignmentStrategy}
    for name, seed in ORDERING_SUITE:
        case = get_case(name)
        assert case.dependency_bearing
        trace, generated = record_execution(case.generator, seed)
        assert case.exhibits(generated.text)
        for strategy in AlignmentStrategy:
            result = greduce_from_trace(
                case.generator, trace, case.make_property(), SearchConfig(strategy=strategy), case.validity
            )
            sizes[strategy].append(result.metrics.size_final)

    assert len(set(ORDERING_SUITE)) >= 20
    realign, bypass, halt = (np.mean(sizes[s]) for s in (AlignmentStrategy.REALIGN, AlignmentStrategy.BYPASS,
                                                          AlignmentStrategy.HALT))
    assert realign <= bypass <= halt
    assert realign < halt
    assert all(r <= h for r, h in zip(sizes[AlignmentStrategy.REALIGN], sizes[AlignmentStrategy.HALT]))
    # halting leaves the digraph fixture untouched
    digraph = _reduce(get_case("digraph"), strategy=AlignmentStrategy.HALT)
    assert digraph.metrics.size_final == digraph.metrics.size_original


def test_tree_search_on_nesting():
    case = get_case("nested")
    seq = _reduce(case, search=SearchKind.SEQUENCE)
    tree = _reduce(case, search=SearchKind.TREE)
    assert tree.metrics.property_tests < seq.metrics.property_tests
    assert tree.metrics.size_final <= seq.metrics.size_final


@pytest.mark.parametrize("case", reduction_cases(), ids=lambda case: case.name)
def test_baseline_comparison(case):
    result = _reduce(case, strategy=AlignmentStrategy.REALIGN, realign_seed=REALIGN_SEED)
    assert result.metrics.size_final == GLOBAL_MINIMUM[case.name]

    trace = case.fixture_trace()
    shrunk, _ = choice_delete_shrink(case.generator, trace, case.make_property())
    assert result.metrics.size_final <= shrunk.total_size

    _, original = replay_trace(case.generator, trace)
    raw, _ = raw_ddmin(original.text, case.tokenizer, lambda data: case.exhibits(data.decode()))
    if case.valid(raw.decode()):
        assert result.metrics.size_final <= case.measure_text(raw.decode())


def test_campaigns_are_deterministic():
    config = CampaignConfig(searches=list(SearchKind), strategies=list(AlignmentStrategy), seeds=["fixture"])

    def emitted():
        reports = [r.model_copy(update={column: 0.0 for column in TIMING_COLUMNS}) for r in run_campaign(config)]
        return emit_report(reports)

    assert emitted() == emitted()


@pytest.mark.parametrize("case", case_registry(), ids=lambda case: case.name)
@settings(max_examples=200, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**64 - 1))
def test_identity_alignment(case, seed):
    trace, generated = record_execution(case.generator, seed)
    outcome = aligned_reexecution(case.generator, ReducedTrace(build_trace_tree(trace), EMPTY_LABELING),
                                  AlignmentStrategy.HALT)
    assert outcome.completed
    assert outcome.events == ()
    assert outcome.input.text.encode() == generated.text.encode()


@pytest.mark.parametrize("case", reduction_cases(), ids=lambda case: case.name)
def test_recording_overhead(case):
    report = measure_overhead(case, runs=1000, repeats=5)
    assert report.ratio <= 2.0


def test_similarity_oracle():
    assert similarity_ratio("abcd", "bcde") == 0.75
    assert matches(SimilaritySpec(expected_message="abcdf"), "abcde")
    expected = "x" * 79 + "b" * 21
    assert not matches(SimilaritySpec(expected_message=expected), "x" * 79 + "a" * 21)


@pytest.mark.parametrize("case", reduction_cases(), ids=lambda case: case.name)
def test_monotonicity(case):
    assert monotonicity_probe(case, trials=200).violations == 0


def test_monotonicity_catches_pop():
    assert monotonicity_probe(get_case("pop"), trials=200).violations >= 1
