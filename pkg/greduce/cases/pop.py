"""
Non-monotone demo: a selection whose block shrinks the output

    x = [1, 2]
    if coin:
        x.pop()

Removing the block makes the output larger, so reductions over this generator
are not guaranteed to shrink anything.
"""
import json
from typing import List

from greduce.services.genlib import GenContext, GeneratorSpec


def build(ctx: GenContext) -> List[int]:
    x = [1, 2]

    def pop(ctx: GenContext) -> None:
        x.pop()

    ctx.maybe("pop", pop)
    return x


def render(x: List[int]) -> str:
    return json.dumps(x)


def measure(x: List[int]) -> int:
    return len(x)


def parse(text: str) -> List[int]:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(str(e)) from e
    if not isinstance(value, list):
        raise ValueError("not a list")
    return value


def valid(text: str) -> bool:
    return text in ("[1, 2]", "[1]")


def exhibits(text: str) -> bool:
    try:
        return 1 in parse(text)
    except ValueError:
        return False


GENERATOR = GeneratorSpec("pop", build, render, measure)
