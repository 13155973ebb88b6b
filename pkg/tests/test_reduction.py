import hashlib

import pytest

from greduce.cases.registry import get_case
from greduce.core.config import Settings
from greduce.core.exceptions import InvalidLabelException, OracleTooLargeException, PropertyNotExhibitedException
from greduce.models.schemas import AlignmentStrategy, SearchConfig, SearchKind
from greduce.models.trace import BOOL, Decision, RemovalLabeling, Role, Trace
from greduce.services import reduction_service
from greduce.services.reduction_service import (
    PropertyTest,
    ReductionSession,
    ddmin_sequence,
    greduce,
    greduce_from_trace,
    hdd_tree,
    one_minimal_check,
)
from greduce.services.trace_service import build_trace_tree
from tests import counting
from tests.units import NESTED_UNITS, PASSWORD_UNITS

A1, B1, C11, A2, C21, C22 = NESTED_UNITS


def _session(tree, case, **config):
    case = get_case(case)
    return ReductionSession(case.generator, tree, case.make_property(), SearchConfig(**config), case.validity)


def _reduce(name, **config):
    case = get_case(name)
    prop = case.make_property()
    result = greduce_from_trace(case.generator, case.fixture_trace(), prop, SearchConfig(**config), case.validity)
    return result, prop


class TestSession:
    def test_original_must_exhibit(self, password_tree):
        gen = get_case("password").generator
        with pytest.raises(PropertyNotExhibitedException):
            ReductionSession(gen, password_tree, PropertyTest(lambda g: False), SearchConfig())

    def test_outcomes_are_cached(self, nested_tree):
        session = _session(nested_tree, "nested", strategy=AlignmentStrategy.HALT)
        first = session.test_candidate(RemovalLabeling.of([A1]))
        runs, tests = session.stats.reexecutions, session.prop.calls
        assert session.test_candidate(RemovalLabeling.of([A1])) is first
        assert (session.stats.reexecutions, session.prop.calls) == (runs, tests)

    def test_cache_key_is_normalized(self, nested_tree):
        session = _session(nested_tree, "nested")
        first = session.test_candidate(RemovalLabeling.of([A2]))
        assert session.test_candidate(RemovalLabeling.of([A2, C21, C22])) is first
        assert first.holds is False

    def test_property_verdicts_are_cached_by_output(self):
        tree = build_trace_tree(counting.trace())
        prop = PropertyTest(lambda g: "1" in g.text.split(":")[1])
        session = ReductionSession(counting.GENERATOR, tree, prop, SearchConfig(strategy=AlignmentStrategy.BYPASS))
        # any one x iteration gone: same count, same bypassed y iteration
        first = session.test_candidate(RemovalLabeling.of([counting.X_UNITS[0]]))
        calls = prop.calls
        second = session.test_candidate(RemovalLabeling.of([counting.X_UNITS[1]]))
        assert first.input.text == second.input.text == "2:10"
        assert prop.calls == calls

    def test_cache_disabled(self, nested_tree):
        session = _session(nested_tree, "nested", cache_enabled=False)
        session.test_candidate(RemovalLabeling.of([A1]))
        runs, calls = session.stats.reexecutions, session.prop.calls
        session.test_candidate(RemovalLabeling.of([A1]))
        assert session.stats.reexecutions == runs + 1
        assert session.prop.calls == calls + 1

    def test_invalid_label(self, nested_tree):
        session = _session(nested_tree, "nested")
        with pytest.raises(InvalidLabelException):
            session.test_candidate(RemovalLabeling.of([3]))

    def test_larger_output_never_holds(self):
        gen = get_case("pop").generator
        trace = Trace(
            decisions=(Decision(0, "pop", BOOL, True, (("pop", 1),), Role.SELECT_INIT),),
            generator_id="pop",
            seed=0,
            output_digest=hashlib.sha256(b"[1]").hexdigest(),
        )
        tree = build_trace_tree(trace)
        session = ReductionSession(gen, tree, get_case("pop").make_property(), SearchConfig())
        assert session.original.text == "[1]"

        candidate = session.test_candidate(RemovalLabeling.of([2]))
        assert candidate.input.text == "[1, 2]"
        assert not candidate.holds
        assert session.prop.calls == 1

    def test_bypass_adopts_effective_labeling(self):
        tree = build_trace_tree(counting.trace())
        prop = PropertyTest(lambda g: "1" in g.text.split(":")[1])
        session = ReductionSession(counting.GENERATOR, tree, prop, SearchConfig(strategy=AlignmentStrategy.BYPASS))
        assert session.try_remove(counting.X_UNITS[:2])
        assert session.labeling.removed == frozenset({2, 3, 8, 10})
        assert session.current.text == "1:1"


class TestSearches:
    @pytest.mark.parametrize("search", list(SearchKind))
    @pytest.mark.parametrize("strategy", list(AlignmentStrategy))
    def test_password(self, search, strategy):
        result, prop = _reduce("password", search=search, strategy=strategy)
        assert result.final_input.text == "c\nc\n"
        assert result.final_labeling == RemovalLabeling.of(PASSWORD_UNITS[:2])
        assert result.metrics.quality == 0.5
        assert result.metrics.property_tests == prop.calls
        assert result.metrics.sound

    @pytest.mark.parametrize("search", [SearchKind.SEQUENCE, SearchKind.TREE])
    def test_nested(self, search):
        result, _ = _reduce("nested", search=search)
        assert result.final_input.text == "[q(y)]"
        assert set(result.final_labeling.removed) == {A1, C22}

    def test_tree_needs_fewer_tests_on_nesting(self):
        seq, _ = _reduce("nested", search=SearchKind.SEQUENCE)
        tree, _ = _reduce("nested", search=SearchKind.TREE)
        assert tree.metrics.property_tests < seq.metrics.property_tests

    @pytest.mark.parametrize("driver", [ddmin_sequence, hdd_tree])
    def test_results_are_one_minimal(self, nested_tree, driver):
        session = _session(nested_tree, "nested")
        driver(session)
        assert one_minimal_check(session, session.labeling) is True

    def test_one_minimal_check_reports_a_unit(self, nested_tree):
        session = _session(nested_tree, "nested")
        assert one_minimal_check(session, RemovalLabeling()) == A1

    def test_powerset_ceiling(self, monkeypatch):
        monkeypatch.setattr(reduction_service, "settings", Settings(POWERSET_UNIT_CEILING=2))
        with pytest.raises(OracleTooLargeException) as e:
            _reduce("password", search=SearchKind.POWERSET)
        assert e.value.details == {"units": 3, "ceiling": 2}

    def test_timeout_keeps_original(self):
        result, _ = _reduce("password", timeout=1e-9)
        assert result.metrics.timed_out
        assert result.final_input.text == "abc\nabc\n"
        assert result.metrics.quality == 1.0
        assert result.metrics.sound

    def test_history_records_each_candidate(self):
        result, _ = _reduce("password", search=SearchKind.SEQUENCE)
        assert len(result.history) == len({digest for digest, _ in result.history})
        assert any(holds for _, holds in result.history)

    def test_greduce_records_from_seed(self):
        case = get_case("password")
        prop = PropertyTest(lambda g: True)
        result = greduce(case.generator, 3, prop, SearchConfig(search=SearchKind.SEQUENCE))
        # the empty word is the smallest output of the generator
        assert result.final_input.text == "\n\n"
        assert result.metrics.seed == 3


class TestDependencies:
    """Digraph edges name earlier nodes: removing a node invalidates recorded endpoints"""

    @pytest.mark.parametrize("search", list(SearchKind))
    def test_halt_and_bypass_cannot_drop_nodes(self, search):
        for strategy in (AlignmentStrategy.HALT, AlignmentStrategy.BYPASS):
            result, _ = _reduce("digraph", search=search, strategy=strategy)
            assert result.metrics.size_final == 6

    @pytest.mark.parametrize("search", list(SearchKind))
    def test_realign_drops_nodes(self, search):
        result, _ = _reduce("digraph", search=search, strategy=AlignmentStrategy.REALIGN, realign_seed=20)
        assert result.final_input.text == "node 0\nnode 1\nnode 2\nedge 0 0\n"
        assert result.metrics.size_final == 4
        assert result.metrics.realigned_values > 0

    def test_realign_depends_on_the_fresh_stream(self):
        result, _ = _reduce("digraph", search=SearchKind.TREE, strategy=AlignmentStrategy.REALIGN, realign_seed=0)
        assert result.metrics.size_final == 6
        assert result.final_labeling == RemovalLabeling()

    def test_halted_candidates_counted(self):
        result, _ = _reduce("digraph", search=SearchKind.SEQUENCE, strategy=AlignmentStrategy.HALT)
        assert result.metrics.halted_candidates > 0
        metrics = result.metrics
        assert metrics.prog_mismatches + metrics.dec_mismatches >= metrics.halted_candidates

    def test_expr_global_minimum(self):
        for search in SearchKind:
            result, _ = _reduce("expr", search=search, strategy=AlignmentStrategy.REALIGN, realign_seed=20)
            assert result.metrics.size_final == 5
            assert result.metrics.sound

    def test_expr_without_fresh_values(self):
        for strategy in (AlignmentStrategy.HALT, AlignmentStrategy.BYPASS):
            result, _ = _reduce("expr", search=SearchKind.TREE, strategy=strategy)
            assert result.metrics.size_final == 9
