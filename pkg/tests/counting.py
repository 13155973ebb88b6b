"""
Two dependent loops: the bound of "y" is one more than the iterations of "x"

Recorded trace used by the tests, output "3:101":

    x  loop_init  IntRange(0, 4)  3
    y  loop_init  IntRange(0, 4)  3
    v  plain      IntRange(0, 2)  1, 0, 1

Tree units: X1 2, X2 3, X3 4 (no decisions), Y1 6, Y2 8, Y3 10.
"""
import hashlib

from greduce.models.trace import Decision, IntRange, Role, Trace
from greduce.services.genlib import GeneratorSpec

X_UNITS = (2, 3, 4)
Y_UNITS = (6, 8, 10)


def build(ctx):
    xs = []
    ctx.repeat("x", 4, lambda c, i: xs.append(i))
    ys = []
    ctx.repeat("y", len(xs) + 1, lambda c, i: ys.append(c.choose_int("v", 0, 2)))
    return len(xs), tuple(ys)


def render(payload):
    x, ys = payload
    return f"{x}:{''.join(map(str, ys))}"


def measure(payload):
    x, ys = payload
    return x + len(ys)


GENERATOR = GeneratorSpec("counting", build, render, measure)


def trace() -> Trace:
    decisions = [
        Decision(0, "x", IntRange(0, 4), 3, (("x", 1),), Role.LOOP_INIT),
        Decision(1, "y", IntRange(0, 4), 3, (("y", 1),), Role.LOOP_INIT),
    ]
    for i, value in enumerate((1, 0, 1), start=1):
        decisions.append(
            Decision(len(decisions), "v", IntRange(0, 2), value, (("y", 1), ("*", i), ("v", 1)), Role.PLAIN)
        )
    return Trace(
        decisions=tuple(decisions),
        generator_id="counting",
        seed=0,
        output_digest=hashlib.sha256(b"3:101").hexdigest(),
    )
