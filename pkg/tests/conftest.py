"""
Shared fixtures: bundled cases, their fixture traces and trees
"""
import pytest

from greduce.cases.registry import get_case
from greduce.models.trace import ReducedTrace, RemovalLabeling
from greduce.services.trace_service import build_trace_tree


@pytest.fixture
def case_tree():
    """Tree of a case's fixture trace"""

    def build(name):
        return build_trace_tree(get_case(name).fixture_trace())

    return build


@pytest.fixture
def reduced():
    def build(tree, *removed):
        return ReducedTrace(tree, RemovalLabeling.of(removed))

    return build


@pytest.fixture
def password_tree(case_tree):
    return case_tree("password")


@pytest.fixture
def nested_tree(case_tree):
    return case_tree("nested")


@pytest.fixture
def digraph_tree(case_tree):
    return case_tree("digraph")


@pytest.fixture
def expr_tree(case_tree):
    return case_tree("expr")
