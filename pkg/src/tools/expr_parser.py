"""
Arithmetic expressions: tokenizer, Pratt parser, canonical printer and a
floating-point oracle.

Binding powers, loosest first:

    + -      10  left associative
    * /      20  left associative
    prefix - 25  so that -a^2 is -(a^2)
    ^        30  right associative, exponent must fold to a nonnegative integer

A minus sign applied directly to a number literal is part of the literal:
"-2" and "-(2)" both parse to Literal(-2.0). Chained exponents fold into a
single literal exponent: 2^3^2 is Pow(2, 9).
"""
import math
import re
from dataclasses import dataclass
from typing import Iterator, NoReturn, Union

import numpy as np

from qcm.errors import DivisorNearZero, EncodingRangeError, ExprSyntaxError
from qcm.settings import DEFAULT_SETTINGS

MAX_EXPONENT = 1 << 16


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


Expr = Union[Literal, Neg, Add, Sub, Mul, Div, Pow]

BINARY_NODES = {"+": Add, "-": Sub, "*": Mul, "/": Div}
SYMBOLS = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


# --- tokenizer ---

@dataclass(frozen=True)
class Token:
    kind: str  # "number", one of "+-*/^()", or "end"
    text: str
    offset: int


NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
TOKEN_RE = re.compile(rf"(?:(?P<number>{NUMBER})|(?P<op>[-+*/^()]))")

OPERAND_START = ["(", "+", "-", "number"]
AFTER_OPERAND = ["+", "-", "*", "/", "^"]


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        match = TOKEN_RE.match(text, pos)
        if match is None:
            raise ExprSyntaxError(
                f"unexpected character {text[pos]!r}",
                _byte_offset(text, pos),
                OPERAND_START + AFTER_OPERAND + [")"],
            )
        number = match.group("number")
        if number is not None:
            tokens.append(Token("number", number, _byte_offset(text, pos)))
        else:
            tokens.append(Token(match.group("op"), match.group("op"), _byte_offset(text, pos)))
        pos = match.end()
    tokens.append(Token("end", "", _byte_offset(text, len(text))))
    return tokens


# --- parser ---

LEFT_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
PREFIX_BP = 25


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def fail(self, token: Token, expected: list[str]) -> NoReturn:
        found = "end of input" if token.kind == "end" else repr(token.text)
        raise ExprSyntaxError(f"unexpected {found}", token.offset, expected)

    def parse(self) -> Expr:
        ast = self.expression()
        token = self.peek()
        if token.kind != "end":
            self.fail(token, AFTER_OPERAND + ["end of input"])
        return ast

    def expression(self, rbp: int = 0) -> Expr:
        left = self.nud(self.advance())
        while rbp < LEFT_BP.get(self.peek().kind, 0):
            left = self.led(self.advance(), left)
        return left

    def nud(self, token: Token) -> Expr:
        if token.kind == "number":
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"literal {token.text} overflows a double", token.offset, ["number"])
            return Literal(value)
        if token.kind == "(":
            inner = self.expression()
            closing = self.peek()
            if closing.kind != ")":
                self.fail(closing, AFTER_OPERAND + [")"])
            self.advance()
            return inner
        if token.kind in ("-", "+"):
            operand = self.expression(PREFIX_BP)
            if token.kind == "+":
                return operand
            if isinstance(operand, Literal):
                return Literal(-operand.value)
            return Neg(operand)
        self.fail(token, OPERAND_START)

    def led(self, token: Token, left: Expr) -> Expr:
        if token.kind == "^":
            start = self.peek()
            exponent = _literal_exponent(self.expression(LEFT_BP["^"] - 1))
            if exponent is None:
                raise ExprSyntaxError("exponent must be a nonnegative integer literal", start.offset, ["integer"])
            return Pow(left, exponent)
        right = self.expression(LEFT_BP[token.kind])
        return BINARY_NODES[token.kind](left, right)


def _literal_exponent(node: Expr) -> int | None:
    if isinstance(node, Literal):
        value = node.value
        if value >= 0 and value == int(value) and value <= MAX_EXPONENT:
            return int(value)
        return None
    if isinstance(node, Pow):
        base = _literal_exponent(node.base)
        if base is None or (base > 1 and node.exponent * math.log2(base) > math.log2(MAX_EXPONENT)):
            return None
        return base**node.exponent
    return None


def parse(text: str) -> Expr:
    return Parser(text).parse()


# --- printing and inspection ---

def _literal_text(value: float) -> str:
    text = repr(float(value))
    return f"({text})" if text.startswith("-") else text


def to_text(ast: Expr) -> str:
    """Canonical, fully parenthesized form; parse(to_text(ast)) == ast."""
    match ast:
        case Literal(value):
            return _literal_text(value)
        case Neg(child):
            return f"(-{to_text(child)})"
        case Pow(base, exponent):
            return f"({to_text(base)}^{exponent})"
        case Add(left, right) | Sub(left, right) | Mul(left, right) | Div(left, right):
            return f"({to_text(left)} {SYMBOLS[type(ast)]} {to_text(right)})"
    raise TypeError(f"not an expression node: {ast!r}")


def shape_key(ast: Expr) -> tuple:
    """The tree with literal values erased; exponents are part of the shape."""
    match ast:
        case Literal():
            return ("lit",)
        case Neg(child):
            return ("neg", shape_key(child))
        case Pow(base, exponent):
            return ("pow", exponent, shape_key(base))
        case Add(left, right) | Sub(left, right) | Mul(left, right) | Div(left, right):
            return (SYMBOLS[type(ast)], shape_key(left), shape_key(right))
    raise TypeError(f"not an expression node: {ast!r}")


def subexpressions(ast: Expr) -> Iterator[Expr]:
    """Every node of the tree, children before parents."""
    match ast:
        case Neg(child):
            yield from subexpressions(child)
        case Pow(base, _):
            yield from subexpressions(base)
        case Add(left, right) | Sub(left, right) | Mul(left, right) | Div(left, right):
            yield from subexpressions(left)
            yield from subexpressions(right)
    yield ast


def oracle(ast: Expr, divisor_guard: float = DEFAULT_SETTINGS.divisor_guard) -> float:
    """Ordinary floating-point evaluation; divisors below the guard are rejected."""
    match ast:
        case Literal(value):
            return value
        case Neg(child):
            return -oracle(child, divisor_guard)
        case Add(left, right):
            return oracle(left, divisor_guard) + oracle(right, divisor_guard)
        case Sub(left, right):
            return oracle(left, divisor_guard) - oracle(right, divisor_guard)
        case Mul(left, right):
            return oracle(left, divisor_guard) * oracle(right, divisor_guard)
        case Div(left, right):
            divisor = oracle(right, divisor_guard)
            if abs(divisor) < divisor_guard:
                raise DivisorNearZero(f"divisor {to_text(right)} = {divisor:.3e} is below the guard {divisor_guard:.1e}")
            return oracle(left, divisor_guard) / divisor
        case Pow(base, exponent):
            try:
                return oracle(base, divisor_guard) ** exponent
            except OverflowError:
                raise EncodingRangeError(f"{to_text(ast)} overflows a double") from None
    raise TypeError(f"not an expression node: {ast!r}")


def random_expr(
    rng: np.random.Generator,
    depth: int,
    low: float = -5.0,
    high: float = 5.0,
    max_exponent: int = 3,
) -> Expr:
    """Random well-formed expression of depth <= `depth` with literals in [low, high]."""
    if depth <= 0 or rng.random() < 0.25:
        return Literal(float(rng.uniform(low, high)))
    kind = rng.choice(["neg", "pow", "+", "-", "*", "/"], p=[0.1, 0.1, 0.2, 0.2, 0.2, 0.2])
    if kind == "neg":
        child = random_expr(rng, depth - 1, low, high, max_exponent)
        # a negated literal is just a negative literal
        return Literal(-child.value) if isinstance(child, Literal) else Neg(child)
    if kind == "pow":
        return Pow(random_expr(rng, depth - 1, low, high, max_exponent), int(rng.integers(0, max_exponent + 1)))
    left = random_expr(rng, depth - 1, low, high, max_exponent)
    right = random_expr(rng, depth - 1, low, high, max_exponent)
    return BINARY_NODES[str(kind)](left, right)
