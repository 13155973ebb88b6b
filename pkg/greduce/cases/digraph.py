"""
Directed graphs with optional node colours

Nodes 0 to 2 always exist; further nodes are numbered in creation order and
every edge endpoint is drawn from the finished node list:

    node 0
    node 1
    node 2
    node 3 red
    edge 0 3
    edge 3 3

The injected bug fires on a self-loop reachable from node 0.
"""
from collections import deque
from typing import Dict, List, NamedTuple, Set, Tuple

from greduce.services.genlib import GenContext, GeneratorSpec

COLORS = ("red", "green", "blue")
MIN_NODES = 3
MAX_NODES = 30
EDGES_PER_NODE = 4


class Graph(NamedTuple):
    nodes: Tuple[int, ...]
    edges: Tuple[Tuple[int, int], ...]
    colors: Dict[int, str]


def build(ctx: GenContext) -> Graph:
    nodes: List[int] = list(range(MIN_NODES))
    colors: Dict[int, str] = {}
    edges: List[Tuple[int, int]] = []

    def node(ctx: GenContext, ordinal: int) -> None:
        ident = len(nodes)
        nodes.append(ident)

        def attribute(ctx: GenContext) -> None:
            colors[ident] = ctx.choose_from("color", COLORS)

        ctx.maybe("attr", attribute)

    def edge(ctx: GenContext, ordinal: int) -> None:
        source = ctx.choose_from("src", nodes)
        edges.append((source, ctx.choose_from("dst", nodes)))

    ctx.repeat("node", MAX_NODES - MIN_NODES + 1, node)
    ctx.repeat("edge", EDGES_PER_NODE * len(nodes), edge)
    return Graph(tuple(nodes), tuple(edges), colors)


def render(graph: Graph) -> str:
    lines = []
    for ident in graph.nodes:
        color = graph.colors.get(ident)
        lines.append(f"node {ident}" if color is None else f"node {ident} {color}")
    lines.extend(f"edge {source} {target}" for source, target in graph.edges)
    return "".join(line + "\n" for line in lines)


def measure(graph: Graph) -> Tuple[int, int]:
    return len(graph.nodes), len(graph.edges)


def parse(text: str) -> Graph:
    """Lenient reading: malformed lines are skipped, undeclared endpoints accepted"""
    nodes: List[int] = []
    colors: Dict[int, str] = {}
    edges: List[Tuple[int, int]] = []
    for line in text.splitlines():
        fields = line.split()
        try:
            if len(fields) in (2, 3) and fields[0] == "node":
                ident = int(fields[1])
                nodes.append(ident)
                if len(fields) == 3:
                    colors[ident] = fields[2]
            elif len(fields) == 3 and fields[0] == "edge":
                edges.append((int(fields[1]), int(fields[2])))
        except ValueError:
            continue
    return Graph(tuple(nodes), tuple(edges), colors)


def valid(text: str) -> bool:
    """Strict reading: the shapes the generator can produce and nothing else"""
    declared: Set[int] = set()
    edges = 0
    for line in text.splitlines(keepends=True):
        if not line.endswith("\n"):
            return False
        fields = line.split()
        if not fields:
            return False
        if fields[0] == "node" and len(fields) in (2, 3):
            if edges or fields[1] != str(len(declared)):
                return False
            if len(fields) == 3 and (fields[2] not in COLORS or len(declared) < MIN_NODES):
                return False
            declared.add(len(declared))
        elif fields[0] == "edge" and len(fields) == 3:
            if not all(f.isdigit() and int(f) in declared for f in fields[1:]):
                return False
            edges += 1
        else:
            return False
    return MIN_NODES <= len(declared) <= MAX_NODES and edges < EDGES_PER_NODE * len(declared)


def reachable(graph: Graph, start: int = 0) -> Set[int]:
    successors: Dict[int, List[int]] = {}
    for source, target in graph.edges:
        successors.setdefault(source, []).append(target)
    seen = {start}
    queue = deque([start])
    while queue:
        for target in successors.get(queue.popleft(), ()):
            if target not in seen:
                seen.add(target)
                queue.append(target)
    return seen


def exhibits(text: str) -> bool:
    """Some self-loop is reachable from node 0"""
    graph = parse(text)
    seen = reachable(graph)
    return any(source == target and source in seen for source, target in graph.edges)


GENERATOR = GeneratorSpec("digraph", build, render, measure)
