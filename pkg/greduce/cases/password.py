"""
Doubled random word: up to 19 lowercase letters, a newline, the whole repeated
"""
import re
from string import ascii_lowercase

from greduce.services.genlib import GenContext, GeneratorSpec

LETTERS = tuple(ascii_lowercase)
MAX_LENGTH = 20

_SHAPE = re.compile(r"([a-z]{0,%d})\n\1\n" % (MAX_LENGTH - 1))


def build(ctx: GenContext) -> str:
    letters = []

    def letter(ctx: GenContext, ordinal: int) -> None:
        letters.append(ctx.choose_from("letter", LETTERS))

    ctx.repeat("n", MAX_LENGTH, letter)
    word = "".join(letters) + "\n"
    return word + word


def render(word: str) -> str:
    return word


def measure(word: str) -> int:
    return len(word)


def parse(text: str) -> str:
    return text


def valid(text: str) -> bool:
    return _SHAPE.fullmatch(text) is not None


def exhibits(text: str) -> bool:
    """Newline-terminated, two equal halves and a 'c' somewhere"""
    half = len(text) // 2
    return text.endswith("\n") and text[:half] == text[half:] and "c" in text


GENERATOR = GeneratorSpec("password", build, render, measure)
