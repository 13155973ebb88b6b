"""
Three-level nesting: up to three heads in brackets, each head carrying an
optional sign and a parenthesised group of up to three leaves

    [p+(xy)q()]

The sign selection and the leaf loop are siblings inside a head, so a head
holds both a Block and the Iterations of its group.
"""
import re
from typing import List

from greduce.services.genlib import GenContext, GeneratorSpec

HEADS = ("p", "q")
SIGNS = ("+", "-")
LEAVES = ("x", "y")
MAX_HEADS = 4
MAX_LEAVES = 4

_SHAPE = re.compile(r"\[(?:[pq][+-]?\([xy]{0,%d}\)){0,%d}\]" % (MAX_LEAVES - 1, MAX_HEADS - 1))
_BUG = re.compile(r"\([^)]*y")


def build(ctx: GenContext) -> str:
    parts: List[str] = ["["]

    def leaf(ctx: GenContext, ordinal: int) -> None:
        parts.append(ctx.choose_from("c", LEAVES))

    def sign(ctx: GenContext) -> None:
        parts.append(ctx.choose_from("d", SIGNS))

    def head(ctx: GenContext, ordinal: int) -> None:
        parts.append(ctx.choose_from("a", HEADS))
        ctx.maybe("b", sign)
        parts.append("(")
        ctx.repeat("m", MAX_LEAVES, leaf)
        parts.append(")")

    ctx.repeat("n", MAX_HEADS, head)
    parts.append("]")
    return "".join(parts)


def render(text: str) -> str:
    return text


def measure(text: str) -> int:
    return len(text)


def parse(text: str) -> str:
    return text


def valid(text: str) -> bool:
    return _SHAPE.fullmatch(text) is not None


def exhibits(text: str) -> bool:
    """A group containing 'y'"""
    return _BUG.search(text) is not None


GENERATOR = GeneratorSpec("nested", build, render, measure)
