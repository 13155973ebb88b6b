"""
Integer expressions with let-bindings and a buggy constant folder

    let v0 = 7;
    let v1 = v0;
    return -(-((v1 / 2))) + 5;

Variables are drawn from the names bound so far. The evaluator crashes when a
division sits directly under two negations.
"""
import re
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple, Union

from greduce.cases.oracles import SimilaritySpec, matches
from greduce.core.config import settings
from greduce.services.genlib import GenContext, GeneratorSpec

MAX_DEPTH = 4
MAX_LETS = 4
MAX_TERMS = 4
MAX_LITERAL = 10

CRASH = SimilaritySpec(expected_message="internal error: cannot fold 7 / 2 under double negation")


class Num(NamedTuple):
    value: int


class Var(NamedTuple):
    name: str


class Neg(NamedTuple):
    operand: "Expr"


class Add(NamedTuple):
    left: "Expr"
    right: "Expr"


class Div(NamedTuple):
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Neg, Add, Div]


class Let(NamedTuple):
    name: str
    value: Expr


class Program(NamedTuple):
    lets: Tuple[Let, ...]
    terms: Tuple[Expr, ...]


class FoldCrash(Exception):
    """The injected evaluator bug"""


class UnboundName(Exception):
    pass


###############################################################################
# Generator
###############################################################################
def _expression(ctx: GenContext, scope: List[str], depth: int) -> Expr:
    unchecked = settings.EXPR_UNCHECKED_IDENTIFIERS
    kinds = ["num"]
    if scope or unchecked:
        kinds.append("var")
    if depth < MAX_DEPTH:
        kinds.extend(("neg", "add", "div"))

    kind = ctx.choose_from("kind", kinds)
    if kind == "num":
        return Num(ctx.choose_int("num", 0, MAX_LITERAL))
    if kind == "var":
        names = scope + [f"v{len(scope)}"] if unchecked else scope
        return Var(ctx.choose_from("var", names))
    if kind == "neg":
        return Neg(_expression(ctx, scope, depth + 1))
    left = _expression(ctx, scope, depth + 1)
    right = _expression(ctx, scope, depth + 1)
    return Add(left, right) if kind == "add" else Div(left, right)


def build(ctx: GenContext) -> Program:
    scope: List[str] = []
    lets: List[Let] = []
    terms: List[Expr] = []

    def binding(ctx: GenContext, ordinal: int) -> None:
        value = _expression(ctx, scope, 0)
        name = f"v{len(scope)}"
        scope.append(name)
        lets.append(Let(name, value))

    def term(ctx: GenContext, ordinal: int) -> None:
        terms.append(_expression(ctx, scope, 0))

    ctx.repeat("let", MAX_LETS, binding)
    ctx.repeat("term", MAX_TERMS, term)
    return Program(tuple(lets), tuple(terms))


###############################################################################
# Text form
###############################################################################
def show(expr: Expr) -> str:
    if isinstance(expr, Num):
        return str(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"-({show(expr.operand)})"
    operator = "+" if isinstance(expr, Add) else "/"
    return f"({show(expr.left)} {operator} {show(expr.right)})"


def render(program: Program) -> str:
    lines = [f"let {let.name} = {show(let.value)};" for let in program.lets]
    terms = " + ".join(show(term) for term in program.terms)
    lines.append(f"return {terms};" if terms else "return;")
    return "".join(line + "\n" for line in lines)


def _size(expr: Expr) -> int:
    if isinstance(expr, (Num, Var)):
        return 1
    if isinstance(expr, Neg):
        return 1 + _size(expr.operand)
    return 1 + _size(expr.left) + _size(expr.right)


def measure(program: Program) -> int:
    """Syntax-tree nodes, one per binding plus its expression"""
    return sum(1 + _size(let.value) for let in program.lets) + sum(_size(term) for term in program.terms)


_TOKEN = re.compile(r"\s*(let\b|return\b|v\d+|\d+|[-+/()=;])")


class _Parser:
    def __init__(self, text: str):
        self.tokens = self._tokenize(text)
        self.position = 0

    @staticmethod
    def _tokenize(text: str) -> List[str]:
        tokens, offset = [], 0
        while offset < len(text):
            if text[offset:].strip() == "":
                break
            match = _TOKEN.match(text, offset)
            if match is None:
                raise ValueError(f"unexpected character at offset {offset}")
            tokens.append(match.group(1))
            offset = match.end()
        return tokens

    def _peek(self) -> Optional[str]:
        return self.tokens[self.position] if self.position < len(self.tokens) else None

    def _take(self, expected: Optional[str] = None) -> str:
        token = self._peek()
        if token is None or (expected is not None and token != expected):
            raise ValueError(f"expected {expected or 'a token'} at token {self.position}, got {token!r}")
        self.position += 1
        return token

    def expression(self) -> Expr:
        token = self._take()
        if token.isdigit():
            return Num(int(token))
        if token.startswith("v"):
            return Var(token)
        if token == "-":
            self._take("(")
            operand = self.expression()
            self._take(")")
            return Neg(operand)
        if token == "(":
            left = self.expression()
            operator = self._take()
            if operator not in ("+", "/"):
                raise ValueError(f"unknown operator {operator!r}")
            right = self.expression()
            self._take(")")
            return Add(left, right) if operator == "+" else Div(left, right)
        raise ValueError(f"unexpected token {token!r}")

    def program(self) -> Program:
        lets = []
        while self._peek() == "let":
            self._take("let")
            name = self._take()
            if not name.startswith("v"):
                raise ValueError(f"bad binding name {name!r}")
            self._take("=")
            lets.append(Let(name, self.expression()))
            self._take(";")
        self._take("return")
        terms = []
        if self._peek() != ";":
            terms.append(self.expression())
            while self._peek() == "+":
                self._take("+")
                terms.append(self.expression())
        self._take(";")
        if self._peek() is not None:
            raise ValueError("trailing tokens after return")
        return Program(tuple(lets), tuple(terms))


def parse(text: str) -> Program:
    """
    Raises:
        ValueError: If the text is not a program
    """
    return _Parser(text).program()


def _names(expr: Expr) -> Iterator[str]:
    if isinstance(expr, Var):
        yield expr.name
    elif isinstance(expr, Neg):
        yield from _names(expr.operand)
    elif isinstance(expr, (Add, Div)):
        yield from _names(expr.left)
        yield from _names(expr.right)


def valid(text: str) -> bool:
    """Parses, binds v0, v1, ... in order and uses no name before its binding"""
    try:
        program = parse(text)
    except ValueError:
        return False
    if len(program.lets) >= MAX_LETS or len(program.terms) >= MAX_TERMS:
        return False
    bound = set()
    for index, let in enumerate(program.lets):
        if let.name != f"v{index}" or not set(_names(let.value)) <= bound:
            return False
        bound.add(let.name)
    return all(set(_names(term)) <= bound for term in program.terms)


###############################################################################
# Evaluation
###############################################################################
def _evaluate(expr: Expr, env: Dict[str, int], negations: int = 0) -> int:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        if expr.name not in env:
            raise UnboundName(expr.name)
        return env[expr.name]
    if isinstance(expr, Neg):
        return -_evaluate(expr.operand, env, negations + 1)
    left = _evaluate(expr.left, env)
    right = _evaluate(expr.right, env)
    if isinstance(expr, Add):
        return left + right
    if negations >= 2:
        raise FoldCrash(f"internal error: cannot fold {left} / {right} under double negation")
    return left // right if right else 0


def evaluate(program: Program) -> int:
    env: Dict[str, int] = {}
    for let in program.lets:
        env[let.name] = _evaluate(let.value, env)
    return sum(_evaluate(term, env) for term in program.terms)


def crash_message(text: str) -> str:
    """Message of the injected crash, or "" when the program evaluates or does not parse"""
    try:
        evaluate(parse(text))
    except FoldCrash as e:
        return str(e)
    except (ValueError, UnboundName):
        return ""
    return ""


def exhibits(text: str) -> bool:
    message = crash_message(text)
    return bool(message) and matches(CRASH, message)


GENERATOR = GeneratorSpec("expr", build, render, measure)
