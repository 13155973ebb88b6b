"""
Trace data model: choice domains, decisions, traces, trace trees and removal labelings
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, NamedTuple, Optional, Tuple, Union

Site = str
Scalar = Union[bool, int, str]
Frame = Tuple[str, int]
ExecutionPath = Tuple[Frame, ...]

ITERATION_MARK = "*"
BLOCK_MARK = "?"
RESERVED_SITES = frozenset({ITERATION_MARK, BLOCK_MARK})


class Role(str, Enum):
    PLAIN = "plain"
    LOOP_INIT = "loop_init"
    SELECT_INIT = "select_init"


class PathOrder(str, Enum):
    BEFORE = "before"
    EQUAL = "equal"
    AFTER = "after"
    DIVERGENT = "divergent"


class IntRange(NamedTuple):
    """Integers lo <= v < hi"""
    lo: int
    hi: int

    kind = "int_range"

    def contains(self, value: Scalar) -> bool:
        return type(value) is int and self.lo <= value < self.hi


class OneOf(NamedTuple):
    """Membership by value among an ordered option list"""
    options: Tuple[Scalar, ...]

    kind = "one_of"

    def contains(self, value: Scalar) -> bool:
        # bool is an int subclass; True must not match an option 1
        return any(type(option) is type(value) and option == value for option in self.options)


class BoolDomain(NamedTuple):
    kind = "bool"

    def contains(self, value: Scalar) -> bool:
        return type(value) is bool


BOOL = BoolDomain()

ChoiceDomain = Union[IntRange, OneOf, BoolDomain]


class Decision(NamedTuple):
    """One recorded random choice"""
    index: int
    site: Site
    domain: ChoiceDomain
    value: Scalar
    path: ExecutionPath
    role: Role


@dataclass(frozen=True)
class Trace:
    """Decision sequence of one generator execution"""
    decisions: Tuple[Decision, ...]
    generator_id: str
    seed: int
    output_digest: str

    def __len__(self) -> int:
        return len(self.decisions)


class NodeKind(str, Enum):
    ROOT = "root"
    LOOP = "loop"
    ITERATION = "iteration"
    SELECTION = "selection"
    BLOCK = "block"
    LEAF = "leaf"


REMOVABLE_KINDS = frozenset({NodeKind.ITERATION, NodeKind.BLOCK})


@dataclass(frozen=True)
class TraceNode:
    """
    One node of a trace tree.

    `decision` is the Leaf's decision or the init decision of a Loop/Selection.
    `span` is the half-open range of decision indices in the subtree and
    `end` the exclusive bound of the subtree's node ids (ids are pre-order).
    """
    id: int
    kind: NodeKind
    path: ExecutionPath
    parent: Optional[int]
    children: Tuple[int, ...]
    decision: Optional[int]
    ordinal: Optional[int]
    span: Tuple[int, int]
    end: int

    @property
    def removable(self) -> bool:
        return self.kind in REMOVABLE_KINDS


@dataclass(frozen=True)
class RemovalLabeling:
    """Explicit set of removed Iteration/Block node ids"""
    removed: FrozenSet[int] = frozenset()

    @classmethod
    def of(cls, nodes: Iterable[int]) -> "RemovalLabeling":
        return cls(frozenset(nodes))

    def with_removed(self, *nodes: int) -> "RemovalLabeling":
        return RemovalLabeling(self.removed.union(nodes))

    def union(self, other: "RemovalLabeling") -> "RemovalLabeling":
        return RemovalLabeling(self.removed | other.removed)

    def issubset(self, other: "RemovalLabeling") -> bool:
        return self.removed <= other.removed

    def __contains__(self, node: object) -> bool:
        return node in self.removed

    def __len__(self) -> int:
        return len(self.removed)

    def __iter__(self):
        return iter(sorted(self.removed))


EMPTY_LABELING = RemovalLabeling()


@dataclass(frozen=True)
class TraceTree:
    """Hierarchical view of a trace; node 0 is the root"""
    trace: Trace
    nodes: Tuple[TraceNode, ...]
    units: Tuple[int, ...]
    decision_nodes: Tuple[int, ...]
    enclosing_units: Tuple[Optional[int], ...]
    unit_depths: Dict[int, int] = field(compare=False)
    by_path: Dict[ExecutionPath, int] = field(compare=False)

    @property
    def root(self) -> TraceNode:
        return self.nodes[0]

    def node(self, node_id: int) -> TraceNode:
        return self.nodes[node_id]

    def node_at(self, path: ExecutionPath) -> Optional[TraceNode]:
        node_id = self.by_path.get(path)
        return None if node_id is None else self.nodes[node_id]

    def is_unit(self, node_id: object) -> bool:
        return (
            isinstance(node_id, int)
            and 0 <= node_id < len(self.nodes)
            and self.nodes[node_id].removable
        )

    def enclosing_unit(self, decision_index: int) -> Optional[int]:
        """Smallest removable unit containing the decision"""
        return self.enclosing_units[decision_index]

    def unit_depth(self, node_id: int) -> int:
        return self.unit_depths[node_id]

    def contains(self, ancestor: int, node_id: int) -> bool:
        return ancestor <= node_id < self.nodes[ancestor].end

    def decision(self, index: int) -> Decision:
        return self.trace.decisions[index]


@dataclass(frozen=True)
class ReducedTrace:
    """A trace tree with some removable units struck out"""
    tree: TraceTree
    labeling: RemovalLabeling = EMPTY_LABELING
