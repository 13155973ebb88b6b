"""
Trace service - tree construction, removal closures, path ordering and trace files
"""
import hashlib
import json
import logging
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from pydantic import ValidationError

from greduce.core.config import settings
from greduce.core.exceptions import InvalidLabelException, MalformedTraceException, ParseException, SchemaException
from greduce.models.schemas import LabelingDocument, TraceDocument
from greduce.models.trace import (
    BLOCK_MARK,
    BOOL,
    ITERATION_MARK,
    RESERVED_SITES,
    ChoiceDomain,
    Decision,
    ExecutionPath,
    IntRange,
    NodeKind,
    OneOf,
    PathOrder,
    RemovalLabeling,
    Role,
    Trace,
    TraceNode,
    TraceTree,
)

logger = logging.getLogger(__name__)


def canonical_json(document: Any) -> bytes:
    """Sorted keys, no insignificant whitespace, UTF-8"""
    return json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


###############################################################################
# Path ordering
###############################################################################
def path_compare(a: ExecutionPath, b: ExecutionPath) -> PathOrder:
    """
    Order two execution paths.

    A strict prefix comes first (pre-order); otherwise the first differing
    frame decides by occurrence when both frames name the same site, and the
    paths are divergent when the sites differ.
    """
    for (site_a, occ_a), (site_b, occ_b) in zip(a, b):
        if site_a != site_b:
            return PathOrder.DIVERGENT
        if occ_a != occ_b:
            return PathOrder.BEFORE if occ_a < occ_b else PathOrder.AFTER
    if len(a) == len(b):
        return PathOrder.EQUAL
    return PathOrder.BEFORE if len(a) < len(b) else PathOrder.AFTER


###############################################################################
# Tree construction
###############################################################################
class _Draft:
    __slots__ = ("id", "kind", "path", "parent", "children", "decision", "ordinal", "start", "stop", "end", "count")

    def __init__(self, node_id, kind, path, parent, decision=None, ordinal=None, start=0, count=0):
        self.id = node_id
        self.kind = kind
        self.path = path
        self.parent = parent
        self.children: List[int] = []
        self.decision = decision
        self.ordinal = ordinal
        self.start = start
        self.stop = start
        self.end = node_id + 1
        # loop: drawn iteration count; selection: 1 if the block runs
        self.count = count


class _TreeBuilder:
    def __init__(self, trace: Trace):
        self.trace = trace
        self.drafts: List[_Draft] = [_Draft(0, NodeKind.ROOT, (), None)]
        self.stack: List[_Draft] = [self.drafts[0]]
        self.decision_nodes: List[int] = []

    def _add(self, kind, path, parent: _Draft, **kwargs) -> _Draft:
        draft = _Draft(len(self.drafts), kind, path, parent.id, **kwargs)
        self.drafts.append(draft)
        parent.children.append(draft.id)
        return draft

    def _open_iteration(self, loop: _Draft, ordinal: int, at: int) -> _Draft:
        return self._add(NodeKind.ITERATION, loop.path + ((ITERATION_MARK, ordinal),), loop, ordinal=ordinal, start=at)

    def _close(self, draft: _Draft, at: int) -> None:
        if draft.kind is NodeKind.LOOP:
            for ordinal in range(len(draft.children) + 1, draft.count + 1):
                self._seal(self._open_iteration(draft, ordinal, at), at)
        elif draft.kind is NodeKind.SELECTION and draft.count and not draft.children:
            self._seal(self._add(NodeKind.BLOCK, draft.path + ((BLOCK_MARK, 1),), draft, start=at), at)
        self._seal(draft, at)

    def _seal(self, draft: _Draft, at: int) -> None:
        draft.stop = at
        draft.end = len(self.drafts)

    def _enter(self, frame_path: ExecutionPath, index: int) -> _Draft:
        """Pop to the frame owning `frame_path`, opening an iteration or block if needed"""
        while not _is_prefix(self.stack[-1].path, frame_path):
            self._close(self.stack.pop(), index)
        top = self.stack[-1]
        rest = frame_path[len(top.path):]
        if not rest:
            if top.kind in (NodeKind.LOOP, NodeKind.SELECTION):
                raise MalformedTraceException(f"decision directly inside {top.kind.value} {list(top.path)}", index)
            return top
        if len(rest) != 1:
            raise MalformedTraceException(f"frame {list(frame_path)} has no open structural parent", index)
        mark, ordinal = rest[0]
        if top.kind is NodeKind.LOOP and mark == ITERATION_MARK:
            opened = len(top.children)
            if ordinal <= opened:
                raise MalformedTraceException(f"iteration {ordinal} of loop {list(top.path)} out of order", index)
            if ordinal > top.count:
                raise MalformedTraceException(
                    f"iteration {ordinal} of loop {list(top.path)} exceeds its count {top.count}", index
                )
            for missing in range(opened + 1, ordinal):
                self._seal(self._open_iteration(top, missing, index), index)
            child = self._open_iteration(top, ordinal, index)
        elif top.kind is NodeKind.SELECTION and mark == BLOCK_MARK and ordinal == 1:
            if not top.count:
                raise MalformedTraceException(f"block under false selection {list(top.path)}", index)
            if top.children:
                raise MalformedTraceException(f"second block under selection {list(top.path)}", index)
            child = self._add(NodeKind.BLOCK, frame_path, top, start=index)
        else:
            raise MalformedTraceException(f"frame {list(frame_path)} has no open structural parent", index)
        self.stack.append(child)
        return child

    def add(self, decision: Decision, index: int) -> None:
        _check_decision(decision, index)
        parent = self._enter(decision.path[:-1], index)
        if decision.role is Role.PLAIN:
            node = self._add(NodeKind.LEAF, decision.path, parent, decision=index, start=index)
            node.stop = index + 1
        elif decision.role is Role.LOOP_INIT:
            node = self._add(NodeKind.LOOP, decision.path, parent, decision=index, start=index, count=decision.value)
            self.stack.append(node)
        else:
            node = self._add(NodeKind.SELECTION, decision.path, parent, decision=index, start=index,
                             count=int(decision.value))
            self.stack.append(node)
        self.decision_nodes.append(node.id)

    def finish(self) -> TraceTree:
        total = len(self.trace.decisions)
        while self.stack:
            self._close(self.stack.pop(), total)

        nodes = tuple(
            TraceNode(
                id=d.id,
                kind=d.kind,
                path=d.path,
                parent=d.parent,
                children=tuple(d.children),
                decision=d.decision,
                ordinal=d.ordinal,
                span=(d.start, d.stop),
                end=d.end,
            )
            for d in self.drafts
        )
        units = tuple(n.id for n in nodes if n.removable)

        depths: Dict[int, int] = {}
        for unit in units:
            ancestor = _nearest_unit(nodes, nodes[unit].parent)
            depths[unit] = 1 if ancestor is None else depths[ancestor] + 1

        enclosing = []
        for node_id in self.decision_nodes:
            node = nodes[node_id]
            start = node.id if node.kind is NodeKind.LEAF else node.parent
            enclosing.append(_nearest_unit(nodes, start))

        by_path = {n.path: n.id for n in nodes}
        if len(by_path) != len(nodes):
            raise MalformedTraceException("execution paths are not unique")

        return TraceTree(
            trace=self.trace,
            nodes=nodes,
            units=units,
            decision_nodes=tuple(self.decision_nodes),
            enclosing_units=tuple(enclosing),
            unit_depths=depths,
            by_path=by_path,
        )


def _is_prefix(prefix: ExecutionPath, path: ExecutionPath) -> bool:
    return len(prefix) <= len(path) and path[:len(prefix)] == prefix


def _nearest_unit(nodes: Sequence[TraceNode], node_id: Optional[int]) -> Optional[int]:
    while node_id is not None:
        node = nodes[node_id]
        if node.removable:
            return node_id
        node_id = node.parent
    return None


def _check_decision(decision: Decision, index: int) -> None:
    if decision.index != index:
        raise MalformedTraceException(f"index {decision.index} out of sequence", index)
    if not decision.path or decision.path[-1][0] != decision.site or decision.path[-1][1] < 1:
        raise MalformedTraceException(f"path {list(decision.path)} does not end at site '{decision.site}'", index)
    if decision.site in RESERVED_SITES:
        raise MalformedTraceException(f"reserved site label '{decision.site}'", index)
    if not decision.domain.contains(decision.value):
        raise MalformedTraceException(f"value {decision.value!r} outside its domain", index)
    if decision.role is Role.LOOP_INIT and not (isinstance(decision.domain, IntRange) and decision.domain.lo == 0):
        raise MalformedTraceException("loop init must draw from IntRange(0, N)", index)
    if decision.role is Role.SELECT_INIT and decision.domain != BOOL:
        raise MalformedTraceException("selection init must draw from Bool", index)


def build_trace_tree(trace: Trace) -> TraceTree:
    """
    Build the hierarchical view of a trace.

    Args:
        trace: Recorded trace

    Returns:
        Tree whose in-order init/leaf decisions reproduce `trace.decisions`

    Raises:
        MalformedTraceException: If the nesting recorded in the paths is inconsistent
    """
    builder = _TreeBuilder(trace)
    for index, decision in enumerate(trace.decisions):
        builder.add(decision, index)
    tree = builder.finish()
    logger.debug(f"Built tree for '{trace.generator_id}': {len(tree.nodes)} nodes, {len(tree.units)} removable units")
    return tree


def tree_decisions(tree: TraceTree) -> List[int]:
    """Decision indices in tree pre-order (init references and leaves)"""
    return [node.decision for node in tree.nodes if node.decision is not None]


###############################################################################
# Removable units and closures
###############################################################################
def removable_units(tree: TraceTree) -> Tuple[int, ...]:
    """All Iteration and Block nodes in document order"""
    return tree.units


def _check_labeling(tree: TraceTree, labeling: RemovalLabeling) -> None:
    for node_id in labeling.removed:
        if not tree.is_unit(node_id):
            raise InvalidLabelException(node_id)


def removal_closure(tree: TraceTree, labeling: RemovalLabeling) -> FrozenSet[int]:
    """
    Decision indices removed by a labeling.

    Raises:
        InvalidLabelException: If the labeling names a node that is not a removable unit
    """
    _check_labeling(tree, labeling)
    removed: Set[int] = set()
    for node_id in labeling.removed:
        removed.update(range(*tree.nodes[node_id].span))
    return frozenset(removed)


def removed_nodes(tree: TraceTree, labeling: RemovalLabeling) -> List[bool]:
    """Per-node flag: node lies in the subtree of a labeled unit"""
    _check_labeling(tree, labeling)
    flags = [False] * len(tree.nodes)
    for node_id in labeling.removed:
        for inner in range(node_id, tree.nodes[node_id].end):
            flags[inner] = True
    return flags


def normalize_labeling(tree: TraceTree, labeling: RemovalLabeling) -> RemovalLabeling:
    """Drop labeled units already covered by a labeled ancestor"""
    _check_labeling(tree, labeling)
    kept = []
    covered_until = -1
    for node_id in sorted(labeling.removed):
        if node_id < covered_until:
            continue
        kept.append(node_id)
        covered_until = tree.nodes[node_id].end
    return RemovalLabeling.of(kept)


def kept_units(tree: TraceTree, labeling: RemovalLabeling) -> List[int]:
    """Removable units not covered by the labeling, in document order"""
    flags = removed_nodes(tree, labeling)
    return [unit for unit in tree.units if not flags[unit]]


###############################################################################
# Trace files
###############################################################################
def _domain_document(domain: ChoiceDomain) -> Dict[str, Any]:
    if isinstance(domain, IntRange):
        return {"kind": "int_range", "lo": domain.lo, "hi": domain.hi}
    if isinstance(domain, OneOf):
        return {"kind": "one_of", "options": list(domain.options)}
    return {"kind": "bool"}


def trace_document(trace: Trace) -> Dict[str, Any]:
    return {
        "version": settings.TRACE_FORMAT_VERSION,
        "generator_id": trace.generator_id,
        "seed": trace.seed,
        "output_digest": trace.output_digest,
        "decisions": [
            {
                "index": d.index,
                "site": d.site,
                "role": d.role.value,
                "domain": _domain_document(d.domain),
                "value": d.value,
                "path": [[site, occurrence] for site, occurrence in d.path],
            }
            for d in trace.decisions
        ],
    }


def serialize_trace(trace: Trace) -> bytes:
    """Canonical JSON bytes of a trace"""
    return canonical_json(trace_document(trace))


def load_json(data: bytes) -> Any:
    """
    Parse a JSON document.

    Raises:
        ParseException: With the byte offset of the first malformed position
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseException(f"invalid UTF-8: {e.reason}", e.start) from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseException(e.msg, len(text[:e.pos].encode("utf-8"))) from e


def _validate(model, document: Any, version: str):
    if isinstance(document, dict) and "version" in document and document["version"] != version:
        raise SchemaException(f"unsupported version {document['version']!r}, expected {version!r}")
    try:
        return model.model_validate(document)
    except ValidationError as e:
        raise SchemaException(f"invalid {model.__name__}: {e.error_count()} error(s)", details=e.errors()) from e


def _domain_from(document) -> ChoiceDomain:
    if document.kind == "int_range":
        return IntRange(document.lo, document.hi)
    if document.kind == "one_of":
        return OneOf(tuple(document.options))
    return BOOL


def deserialize_trace(data: bytes) -> Trace:
    """
    Parse a trace file.

    Raises:
        ParseException: Malformed JSON
        SchemaException: Wrong version or schema violation
    """
    document = _validate(TraceDocument, load_json(data), settings.TRACE_FORMAT_VERSION)
    decisions = tuple(
        Decision(
            index=d.index,
            site=d.site,
            domain=_domain_from(d.domain),
            value=d.value,
            path=tuple((site, occurrence) for site, occurrence in d.path),
            role=Role(d.role),
        )
        for d in document.decisions
    )
    return Trace(
        decisions=decisions,
        generator_id=document.generator_id,
        seed=document.seed,
        output_digest=document.output_digest,
    )


def serialize_labeling(tree: TraceTree, labeling: RemovalLabeling) -> bytes:
    _check_labeling(tree, labeling)
    return canonical_json({
        "version": settings.LABELING_FORMAT_VERSION,
        "removed": [[[site, occ] for site, occ in tree.nodes[n].path] for n in sorted(labeling.removed)],
    })


def deserialize_labeling(tree: TraceTree, data: bytes) -> RemovalLabeling:
    """
    Parse a labeling file against the tree it refers to.

    Raises:
        ParseException, SchemaException: Malformed document
        InvalidLabelException: A path that is not an Iteration or Block of the tree
    """
    document = _validate(LabelingDocument, load_json(data), settings.LABELING_FORMAT_VERSION)
    removed = []
    for raw in document.removed:
        node = tree.node_at(tuple((site, occ) for site, occ in raw))
        if node is None or not node.removable:
            raise InvalidLabelException([list(frame) for frame in raw])
        removed.append(node.id)
    return RemovalLabeling.of(removed)
