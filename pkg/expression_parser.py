#!/usr/bin/env python3
"""
Transmutation Toolkit - Expression Parser
Recursive-descent parser and numpy evaluator for potentials and boundary data
"""

import re
import math
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Sequence, Tuple, Union

import numpy as np

from numerics import PotentialSpec
from transmutation_errors import DomainError, ParseError

logger = logging.getLogger(__name__)

FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sinh": np.sinh,
    "cosh": np.cosh,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

POTENTIAL_VARIABLES = frozenset({"x"})
PLANE_VARIABLES = frozenset({"x", "y"})

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)

Span = Tuple[int, int]


# =============================================================================
# AST
# =============================================================================

@dataclass(frozen=True)
class Number:
    value: float
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Variable:
    name: str
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Constant:
    name: str
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    span: Span = field(default=(0, 0), compare=False)


Node = Union[Number, Variable, Constant, Unary, Binary, Call]


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    position: int


def tokenize(text: str) -> List[_Token]:
    tokens = []
    position = 0
    while position < len(text):
        match = _TOKEN.match(text, position)
        if match is None:
            raise ParseError(text, position, "a number, a name, an operator or a parenthesis")
        if match.lastgroup != "ws":
            tokens.append(_Token(match.lastgroup, match.group(), position))
        position = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# =============================================================================
# parser
# =============================================================================

class _Parser:
    """expr := term (('+'|'-') term)*
    term := unary (('*'|'/') unary)*
    unary := '-' unary | power
    power := primary ('^' unary)?
    primary := number | name | name '(' expr ')' | '(' expr ')'
    """

    def __init__(self, text: str, variables: FrozenSet[str]):
        self.text = text
        self.variables = variables
        self.tokens = tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def _expect(self, text: str) -> _Token:
        if self.current.text != text:
            raise ParseError(self.text, self.current.position, repr(text))
        return self._advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "end":
            raise ParseError(self.text, self.current.position, "an operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.current.text in ("+", "-"):
            op = self._advance().text
            right = self.term()
            node = Binary(op, node, right, span=(node.span[0], right.span[1]))
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.current.text in ("*", "/"):
            op = self._advance().text
            right = self.unary()
            node = Binary(op, node, right, span=(node.span[0], right.span[1]))
        return node

    def unary(self) -> Node:
        if self.current.text == "-":
            start = self._advance().position
            operand = self.unary()
            return Unary("-", operand, span=(start, operand.span[1]))
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.current.text == "^":
            self._advance()
            exponent = self.unary()
            return Binary("^", base, exponent, span=(base.span[0], exponent.span[1]))
        return base

    def primary(self) -> Node:
        token = self.current
        if token.kind == "number":
            value = float(token.text)
            if not math.isfinite(value):
                raise ParseError(self.text, token.position, f"a finite number (got {token.text!r})")
            self._advance()
            return Number(value, span=(token.position, token.position + len(token.text)))
        if token.kind == "name":
            self._advance()
            span = (token.position, token.position + len(token.text))
            if token.text in FUNCTIONS:
                self._expect("(")
                arg = self.expr()
                close = self._expect(")")
                return Call(token.text, arg, span=(span[0], close.position + 1))
            if token.text in CONSTANTS:
                return Constant(token.text, span=span)
            if token.text in self.variables:
                return Variable(token.text, span=span)
            allowed = ", ".join(sorted(self.variables | set(CONSTANTS) | set(FUNCTIONS)))
            raise ParseError(self.text, token.position, f"one of {allowed} (got {token.text!r})")
        if token.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        raise ParseError(self.text, token.position, "a number, a name or '('")


# =============================================================================
# printing and evaluation
# =============================================================================

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_PRECEDENCE = 3
_ATOM_PRECEDENCE = 5


def _precedence(node: Node) -> int:
    if isinstance(node, Binary):
        return _PRECEDENCE[node.op]
    if isinstance(node, Unary):
        return _UNARY_PRECEDENCE
    return _ATOM_PRECEDENCE


def _wrap(node: Node, parenthesize: bool) -> str:
    text = pretty(node)
    return f"({text})" if parenthesize else text


def pretty(node: Node) -> str:
    """Text with the fewest parentheses that re-parses to the same tree"""
    if isinstance(node, Number):
        return repr(node.value)
    if isinstance(node, (Variable, Constant)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    if isinstance(node, Unary):
        return "-" + _wrap(node.operand, _precedence(node.operand) < _UNARY_PRECEDENCE)
    p = _PRECEDENCE[node.op]
    if node.op == "^":
        left = _wrap(node.left, _precedence(node.left) <= p)
        right = _wrap(node.right, _precedence(node.right) < _UNARY_PRECEDENCE)
        return f"{left}^{right}"
    left = _wrap(node.left, _precedence(node.left) < p)
    right = _wrap(node.right, _precedence(node.right) <= p)
    return f"{left} {node.op} {right}"


def _evaluate(node: Node, env: Dict[str, np.ndarray]) -> np.ndarray:
    if isinstance(node, Number):
        return np.asarray(node.value)
    if isinstance(node, Constant):
        return np.asarray(CONSTANTS[node.name])
    if isinstance(node, Variable):
        return env[node.name]
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_evaluate(node.arg, env))
    if isinstance(node, Unary):
        return -_evaluate(node.operand, env)
    left = _evaluate(node.left, env)
    right = _evaluate(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left / right
    return np.power(left, right)


def _free_variables(node: Node) -> FrozenSet[str]:
    if isinstance(node, Variable):
        return frozenset({node.name})
    if isinstance(node, (Unary, Call)):
        return _free_variables(node.operand if isinstance(node, Unary) else node.arg)
    if isinstance(node, Binary):
        return _free_variables(node.left) | _free_variables(node.right)
    return frozenset()


@dataclass(frozen=True)
class Expression:
    """Parsed expression with its source text and allowed variables"""
    root: Node
    text: str = field(compare=False)
    variables: FrozenSet[str] = field(default=POTENTIAL_VARIABLES, compare=False)

    @property
    def free_variables(self) -> FrozenSet[str]:
        return _free_variables(self.root)

    def evaluate(self, **values) -> np.ndarray:
        missing = self.free_variables - set(values)
        if missing:
            raise DomainError(f"expression {self.text!r} needs values for {sorted(missing)}")
        env = {name: np.asarray(v, dtype=float) for name, v in values.items()}
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _evaluate(self.root, env)

    def __call__(self, x, y=None) -> np.ndarray:
        values = {"x": x} if y is None else {"x": x, "y": y}
        shape = np.broadcast_shapes(*(np.shape(v) for v in values.values()))
        return np.broadcast_to(self.evaluate(**values), shape)

    def pretty(self) -> str:
        return pretty(self.root)


def parse_expression(text: str, variables: Sequence[str] = POTENTIAL_VARIABLES) -> Expression:
    """Parse text over the given variable names; unknown identifiers are errors"""
    allowed = frozenset(variables)
    root = _Parser(text, allowed).parse()
    logger.debug(f"Parsed {text!r} as {pretty(root)!r}")
    return Expression(root=root, text=text, variables=allowed)


def potential_from_expression(
    text: str,
    principal_value_ok: bool = False,
    breakpoints: Sequence[float] = (),
) -> PotentialSpec:
    """PotentialSpec q(x) from text; x-free expressions become constant potentials"""
    expression = parse_expression(text, POTENTIAL_VARIABLES)
    if not expression.free_variables:
        value = float(expression.evaluate())
        if not math.isfinite(value):
            raise DomainError(f"constant potential {text!r} is not finite")
        return PotentialSpec.constant(value)
    return PotentialSpec(
        lambda x: expression(x),
        label=expression.pretty(),
        breakpoints=breakpoints,
        principal_value_ok=principal_value_ok,
    )
