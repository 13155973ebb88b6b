"""
Non-local demo: the hex digest of a random word, truncated to twice its length

A one-letter change of the word changes the whole output, so outputs of nearby
traces share almost nothing.
"""
import hashlib
import re
from string import ascii_lowercase
from typing import NamedTuple

from greduce.services.genlib import GenContext, GeneratorSpec

LETTERS = tuple(ascii_lowercase)
MAX_LENGTH = 20

_SHAPE = re.compile(r"[0-9a-f]{0,%d}" % (2 * (MAX_LENGTH - 1)))


class Hashed(NamedTuple):
    word: str
    hex: str


def build(ctx: GenContext) -> Hashed:
    letters = []

    def letter(ctx: GenContext, ordinal: int) -> None:
        letters.append(ctx.choose_from("letter", LETTERS))

    ctx.repeat("n", MAX_LENGTH, letter)
    word = "".join(letters)
    return Hashed(word, hashlib.sha256(word.encode("utf-8")).hexdigest()[:2 * len(word)])


def render(hashed: Hashed) -> str:
    return hashed.hex


def measure(hashed: Hashed) -> int:
    return len(hashed.word)


def parse(text: str) -> str:
    return text


def text_size(text: str) -> int:
    return len(text) // 2


def valid(text: str) -> bool:
    return len(text) % 2 == 0 and _SHAPE.fullmatch(text) is not None


def exhibits(text: str) -> bool:
    return True


GENERATOR = GeneratorSpec("digest", build, render, measure)
