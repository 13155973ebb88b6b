import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greduce.cases.registry import reduction_cases
from greduce.core.exceptions import InvalidLabelException, MalformedTraceException, ParseException, SchemaException
from greduce.models.trace import (
    BOOL,
    Decision,
    IntRange,
    NodeKind,
    OneOf,
    PathOrder,
    RemovalLabeling,
    Role,
    Trace,
)
from greduce.services.genlib import record_execution
from greduce.services.trace_service import (
    build_trace_tree,
    canonical_json,
    deserialize_labeling,
    deserialize_trace,
    kept_units,
    normalize_labeling,
    path_compare,
    removal_closure,
    removed_nodes,
    serialize_labeling,
    serialize_trace,
    tree_decisions,
)
from tests.units import DIGRAPH_UNITS, NESTED_UNITS, PASSWORD_UNITS

A1, B1, C11, A2, C21, C22 = NESTED_UNITS


def _trace(*decisions):
    return Trace(decisions=tuple(decisions), generator_id="t", seed=0, output_digest="")


class TestPathCompare:
    def test_prefix_comes_first(self):
        assert path_compare((("n", 1),), (("n", 1), ("*", 1))) is PathOrder.BEFORE
        assert path_compare((("n", 1), ("*", 1)), (("n", 1),)) is PathOrder.AFTER

    def test_occurrence_decides_on_same_site(self):
        assert path_compare((("n", 1), ("*", 1), ("a", 1)), (("n", 1), ("*", 2))) is PathOrder.BEFORE
        assert path_compare((("n", 1), ("*", 3)), (("n", 1), ("*", 2), ("a", 1))) is PathOrder.AFTER

    def test_equal_and_divergent(self):
        assert path_compare((("a", 2),), (("a", 2),)) is PathOrder.EQUAL
        assert path_compare((("node", 1), ("*", 2)), (("edge", 1), ("*", 1))) is PathOrder.DIVERGENT


class TestTreeConstruction:
    def test_password_shape(self, password_tree):
        tree = password_tree
        assert tree.units == PASSWORD_UNITS
        assert tree.nodes[1].kind is NodeKind.LOOP
        assert [tree.nodes[u].ordinal for u in tree.units] == [1, 2, 3]
        assert all(tree.nodes[u].kind is NodeKind.ITERATION for u in tree.units)

    def test_nested_units_and_depths(self, nested_tree):
        tree = nested_tree
        assert tree.units == NESTED_UNITS
        assert tree.nodes[B1].kind is NodeKind.BLOCK
        assert [tree.unit_depth(u) for u in tree.units] == [1, 2, 2, 1, 2, 2]

    def test_nested_block_and_group_are_siblings(self, nested_tree):
        tree = nested_tree
        kinds = [tree.nodes[u].kind for u in tree.units]
        assert kinds == [NodeKind.ITERATION, NodeKind.BLOCK] + [NodeKind.ITERATION] * 4
        selection, group = tree.nodes[B1].parent, tree.nodes[C11].parent
        assert tree.nodes[selection].kind is NodeKind.SELECTION
        assert tree.nodes[group].kind is NodeKind.LOOP
        assert tree.nodes[selection].parent == tree.nodes[group].parent == A1
        assert tree.nodes[C21].parent == tree.nodes[C22].parent
        assert tree.nodes[tree.nodes[C21].parent].parent == A2

    def test_decisions_in_preorder(self, nested_tree, digraph_tree):
        for tree in (nested_tree, digraph_tree):
            assert tree_decisions(tree) == list(range(len(tree.trace.decisions)))

    def test_spans_are_contiguous(self, nested_tree):
        spans = [nested_tree.nodes[u].span for u in NESTED_UNITS]
        assert spans == [(1, 6), (3, 4), (5, 6), (6, 11), (9, 10), (10, 11)]

    def test_enclosing_unit(self, nested_tree):
        tree = nested_tree
        assert tree.enclosing_unit(0) is None
        assert tree.enclosing_unit(1) == A1
        assert tree.enclosing_unit(3) == B1
        assert tree.enclosing_unit(4) == A1
        assert tree.enclosing_unit(5) == C11

    def test_node_at(self, nested_tree):
        assert nested_tree.node_at((("n", 1), ("*", 1), ("b", 1), ("?", 1))).id == B1
        assert nested_tree.node_at((("n", 1), ("*", 9))) is None

    def test_units_never_out_of_order(self, nested_tree, digraph_tree):
        for tree in (nested_tree, digraph_tree):
            units = list(tree.units)
            assert units == sorted(set(units))
            for i, earlier in enumerate(units):
                for later in units[i + 1:]:
                    order = path_compare(tree.nodes[earlier].path, tree.nodes[later].path)
                    assert order not in (PathOrder.AFTER, PathOrder.EQUAL)

    def test_decision_free_iterations_are_materialized(self):
        tree = build_trace_tree(_trace(Decision(0, "n", IntRange(0, 5), 2, (("n", 1),), Role.LOOP_INIT)))
        assert len(tree.units) == 2
        assert all(tree.nodes[u].span == (1, 1) for u in tree.units)

    def test_empty_block_is_materialized(self):
        tree = build_trace_tree(_trace(Decision(0, "pop", BOOL, True, (("pop", 1),), Role.SELECT_INIT)))
        assert [tree.nodes[u].kind for u in tree.units] == [NodeKind.BLOCK]

    def test_digraph_siblings(self, digraph_tree):
        assert digraph_tree.units == DIGRAPH_UNITS


class TestMalformedTraces:
    def test_iteration_beyond_count(self):
        with pytest.raises(MalformedTraceException):
            build_trace_tree(_trace(
                Decision(0, "n", IntRange(0, 5), 1, (("n", 1),), Role.LOOP_INIT),
                Decision(1, "c", BOOL, True, (("n", 1), ("*", 2), ("c", 1)), Role.PLAIN),
            ))

    def test_block_under_false_selection(self):
        with pytest.raises(MalformedTraceException):
            build_trace_tree(_trace(
                Decision(0, "b", BOOL, False, (("b", 1),), Role.SELECT_INIT),
                Decision(1, "c", BOOL, True, (("b", 1), ("?", 1), ("c", 1)), Role.PLAIN),
            ))

    def test_index_out_of_sequence(self):
        with pytest.raises(MalformedTraceException) as e:
            build_trace_tree(_trace(Decision(3, "c", BOOL, True, (("c", 1),), Role.PLAIN)))
        assert e.value.details == {"index": 0}

    def test_value_outside_domain(self):
        with pytest.raises(MalformedTraceException):
            build_trace_tree(_trace(Decision(0, "c", OneOf(("x",)), "y", (("c", 1),), Role.PLAIN)))

    def test_out_of_order_iterations(self):
        with pytest.raises(MalformedTraceException):
            build_trace_tree(_trace(
                Decision(0, "n", IntRange(0, 5), 3, (("n", 1),), Role.LOOP_INIT),
                Decision(1, "c", BOOL, True, (("n", 1), ("*", 2), ("c", 1)), Role.PLAIN),
                Decision(2, "c", BOOL, True, (("n", 1), ("*", 1), ("c", 1)), Role.PLAIN),
            ))


class TestLabelings:
    def test_closure_is_subtree_span(self, nested_tree):
        assert removal_closure(nested_tree, RemovalLabeling.of([B1])) == frozenset({3})
        assert removal_closure(nested_tree, RemovalLabeling.of([A1])) == frozenset(range(1, 6))

    def test_empty_labeling_removes_nothing(self, nested_tree):
        assert removal_closure(nested_tree, RemovalLabeling()) == frozenset()
        assert not any(removed_nodes(nested_tree, RemovalLabeling()))

    def test_normalize_drops_covered_units(self, nested_tree):
        assert normalize_labeling(nested_tree, RemovalLabeling.of([A1, B1, C11])) == RemovalLabeling.of([A1])
        assert normalize_labeling(nested_tree, RemovalLabeling.of([C11, A2])) == RemovalLabeling.of([C11, A2])

    def test_kept_units(self, nested_tree):
        assert kept_units(nested_tree, RemovalLabeling.of([B1])) == [A1, C11, A2, C21, C22]

    def test_non_unit_label_rejected(self, nested_tree):
        with pytest.raises(InvalidLabelException):
            removal_closure(nested_tree, RemovalLabeling.of([1]))
        with pytest.raises(InvalidLabelException):
            normalize_labeling(nested_tree, RemovalLabeling.of([99]))


class TestTraceFiles:
    def test_canonical_json(self):
        assert canonical_json({"b": 1, "a": [1, "x"]}) == b'{"a":[1,"x"],"b":1}'

    def test_trace_round_trip(self, nested_tree):
        trace = nested_tree.trace
        data = serialize_trace(trace)
        assert not data.endswith(b"\n")
        assert deserialize_trace(data) == trace

    def test_parse_error_offset(self):
        with pytest.raises(ParseException) as e:
            deserialize_trace(b'{"a" 1}')
        assert e.value.offset == 5

    def test_wrong_version(self, password_tree):
        document = json.loads(serialize_trace(password_tree.trace))
        document["version"] = "greduce-trace/0"
        with pytest.raises(SchemaException):
            deserialize_trace(json.dumps(document).encode())

    def test_schema_violation(self, password_tree):
        document = json.loads(serialize_trace(password_tree.trace))
        document["decisions"][0]["role"] = "loop"
        with pytest.raises(SchemaException):
            deserialize_trace(json.dumps(document).encode())

    def test_labeling_file(self, password_tree):
        labeling = RemovalLabeling.of(PASSWORD_UNITS[:2])
        data = serialize_labeling(password_tree, labeling)
        assert json.loads(data)["removed"] == [[["n", 1], ["*", 1]], [["n", 1], ["*", 2]]]
        assert deserialize_labeling(password_tree, data) == labeling

    def test_labeling_file_names_a_loop(self, password_tree):
        data = json.dumps({"version": "greduce-labeling/1", "removed": [[["n", 1]]]}).encode()
        with pytest.raises(InvalidLabelException):
            deserialize_labeling(password_tree, data)


RECORDINGS = st.builds(
    lambda case, seed: record_execution(case.generator, seed)[0],
    st.sampled_from(reduction_cases()),
    st.integers(min_value=0, max_value=2**64 - 1),
)


def _labeling(tree, data):
    mask = data.draw(st.lists(st.booleans(), min_size=len(tree.units), max_size=len(tree.units)))
    return RemovalLabeling.of(unit for unit, drop in zip(tree.units, mask) if drop)


class TestRecordedTraces:
    """Properties over traces recorded from random seeds of the bundled generators"""

    @settings(max_examples=100, deadline=None)
    @given(trace=RECORDINGS, data=st.data())
    def test_closure_is_monotone(self, trace, data):
        tree = build_trace_tree(trace)
        larger = _labeling(tree, data)
        smaller = RemovalLabeling.of(unit for unit in sorted(larger.removed) if data.draw(st.booleans()))
        assert removal_closure(tree, smaller) <= removal_closure(tree, larger)
        assert normalize_labeling(tree, larger).removed <= larger.removed

    @settings(max_examples=100, deadline=None)
    @given(trace=RECORDINGS, data=st.data())
    def test_closure_matches_ancestor_scan(self, trace, data):
        tree = build_trace_tree(trace)
        labeling = _labeling(tree, data)
        expected = set()
        for index, node in enumerate(tree.decision_nodes):
            while node is not None and node not in labeling.removed:
                node = tree.nodes[node].parent
            if node is not None:
                expected.add(index)
        assert removal_closure(tree, labeling) == expected
        flags = removed_nodes(tree, labeling)
        assert {i for i, node in enumerate(tree.decision_nodes) if flags[node]} == expected

    @settings(max_examples=100, deadline=None)
    @given(trace=RECORDINGS)
    def test_canonical_form_is_idempotent(self, trace):
        data = serialize_trace(trace)
        assert serialize_trace(deserialize_trace(data)) == data
        assert deserialize_trace(data) == trace

    @settings(max_examples=100, deadline=None)
    @given(trace=RECORDINGS)
    def test_tree_and_sequence_agree(self, trace):
        tree = build_trace_tree(trace)
        assert tree_decisions(tree) == list(range(len(trace.decisions)))
        iterations = sum(d.value for d in trace.decisions if d.role is Role.LOOP_INIT)
        blocks = sum(1 for d in trace.decisions if d.role is Role.SELECT_INIT and d.value)
        assert len(tree.units) == iterations + blocks
        for node in tree.nodes:
            if node.decision is not None:
                assert tree.decision_nodes[node.decision] == node.id
            start, stop = node.span
            assert all(tree.contains(node.id, tree.decision_nodes[i]) for i in range(start, stop))
            if node.parent is not None:
                parent = tree.nodes[node.parent].span
                assert parent[0] <= start <= stop <= parent[1]
