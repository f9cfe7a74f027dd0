"""Parser for the branching quantum assembly.

Statements are ``;``-terminated, ``#`` starts a line comment, labels are
``name:``.  Grammar:

    label:                      Label
    <mnemonic> q<N> ;           Gate without angle
    <mnemonic>(expr) q<N> ;     Gate with angle expression
    measure q<N> -> <cbit> ;    MeasureStmt
    bnz <cbit>, <label> ;       Bnz (branch if the bit is non-zero)
    goto <label> ;              Goto
    halt ;                      Halt
    id q<N> ;                   Id (path balancing; dropped by the assembler)

Angle expressions support numeric literals, ``pi``, ``*``, ``/``, unary
minus, and parentheses.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class Gate:
    mnemonic: str
    angle: float | None
    qubit: int


@dataclass(frozen=True)
class MeasureStmt:
    qubit: int
    cbit: str


@dataclass(frozen=True)
class Bnz:
    cbit: str
    target: str


@dataclass(frozen=True)
class Goto:
    target: str


@dataclass(frozen=True)
class Halt:
    pass


@dataclass(frozen=True)
class Id:
    qubit: int


AsmStatement = Union[Label, Gate, MeasureStmt, Bnz, Goto, Halt, Id]

KNOWN_GATES = {"x", "y", "z", "h", "s", "sdg", "sx"}
ANGLE_GATES = {"rx", "ry", "rz", "delay"}

_NUM = r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(
    r"\s*(?:(?P<num>" + _NUM + r")|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>->|[():;,*/-]))")


def _tokenize(line: str, lineno: int):
    tokens = []
    pos = 0
    while pos < len(line):
        if line[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(line, pos)
        if not m:
            raise ParseError(f"line {lineno}: cannot tokenize near "
                             f"{line[pos:pos + 10]!r}")
        tokens.append((m.lastgroup, m.group(m.lastgroup), lineno))
        pos = m.end()
    return tokens


class _ExprParser:
    """expr := unary (('*' | '/') unary)* ; unary := '-' unary | atom ;
    atom := NUMBER | 'pi' | '(' expr ')'"""

    def __init__(self, tokens, lineno):
        self.tokens = tokens
        self.pos = 0
        self.lineno = lineno

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        if tok is None:
            raise ParseError(f"line {self.lineno}: unexpected end of "
                             "angle expression")
        self.pos += 1
        return tok

    def parse(self) -> float:
        value = self._expr()
        if self._peek() is not None:
            raise ParseError(f"line {self.lineno}: trailing tokens in "
                             "angle expression")
        return value

    def _expr(self) -> float:
        value = self._unary()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in ("*", "/"):
                self._next()
                rhs = self._unary()
                if tok[1] == "*":
                    value *= rhs
                else:
                    value /= rhs
            else:
                return value

    def _unary(self) -> float:
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self._next()
            return -self._unary()
        return self._atom()

    def _atom(self) -> float:
        kind, text, _ = self._next()
        if kind == "num":
            return float(text)
        if kind == "name" and text == "pi":
            return math.pi
        if kind == "op" and text == "(":
            value = self._expr()
            kind, text, _ = self._next()
            if text != ")":
                raise ParseError(f"line {self.lineno}: expected ')'")
            return value
        raise ParseError(f"line {self.lineno}: bad token {text!r} in "
                         "angle expression")


def eval_angle(tokens, lineno) -> float:
    return _ExprParser(tokens, lineno).parse()


def _parse_qubit(tok, lineno) -> int:
    kind, text, _ = tok
    if kind == "name" and re.fullmatch(r"q\d+", text):
        return int(text[1:])
    raise ParseError(f"line {lineno}: expected qubit (q<N>), got {text!r}")


def parse_asm(text: str) -> list:
    """Parse assembly text into statements; resolves labels in a second
    pass and rejects duplicates and undefined branch targets."""
    statements: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        tokens = _tokenize(line, lineno)
        while tokens:
            stmt, tokens = _parse_statement(tokens, lineno)
            if stmt is not None:
                statements.append(stmt)
    if not statements:
        raise ParseError("empty program")
    labels = set()
    for stmt in statements:
        if isinstance(stmt, Label):
            if stmt.name in labels:
                raise ParseError(f"duplicate label {stmt.name!r}")
            labels.add(stmt.name)
    for stmt in statements:
        target = getattr(stmt, "target", None)
        if target is not None and target not in labels:
            raise ParseError(f"undefined label {target!r}")
    return statements


def _expect_semicolon(tokens, lineno):
    if not tokens or tokens[0][1] != ";":
        raise ParseError(f"line {lineno}: missing ';'")
    return tokens[1:]


def _parse_statement(tokens, lineno):
    kind, text, _ = tokens[0]
    if kind == "name" and len(tokens) > 1 and tokens[1][1] == ":":
        return Label(text), tokens[2:]
    if kind != "name":
        raise ParseError(f"line {lineno}: expected statement, got {text!r}")
    if text == "halt":
        return Halt(), _expect_semicolon(tokens[1:], lineno)
    if text == "goto":
        if len(tokens) < 2 or tokens[1][0] != "name":
            raise ParseError(f"line {lineno}: goto needs a label")
        return Goto(tokens[1][1]), _expect_semicolon(tokens[2:], lineno)
    if text == "bnz":
        if (len(tokens) < 4 or tokens[1][0] != "name"
                or tokens[2][1] != "," or tokens[3][0] != "name"):
            raise ParseError(f"line {lineno}: bnz needs 'bnz <bit>, <label>'")
        return Bnz(tokens[1][1], tokens[3][1]), \
            _expect_semicolon(tokens[4:], lineno)
    if text == "measure":
        if len(tokens) < 4 or tokens[2][1] != "->" or tokens[3][0] != "name":
            raise ParseError(
                f"line {lineno}: measure needs 'measure q<N> -> <bit>'")
        qubit = _parse_qubit(tokens[1], lineno)
        return MeasureStmt(qubit, tokens[3][1]), \
            _expect_semicolon(tokens[4:], lineno)
    if text == "id":
        qubit = _parse_qubit(tokens[1], lineno) if len(tokens) > 1 else None
        if qubit is None:
            raise ParseError(f"line {lineno}: id needs a qubit")
        return Id(qubit), _expect_semicolon(tokens[2:], lineno)
    # gate, with or without angle
    mnemonic = text
    rest = tokens[1:]
    angle = None
    if rest and rest[0][1] == "(":
        depth = 0
        for i, tok in enumerate(rest):
            if tok[1] == "(":
                depth += 1
            elif tok[1] == ")":
                depth -= 1
                if depth == 0:
                    angle = eval_angle(rest[1:i], lineno)
                    rest = rest[i + 1:]
                    break
        else:
            raise ParseError(f"line {lineno}: unbalanced parentheses")
    if mnemonic in ANGLE_GATES:
        if angle is None:
            raise ParseError(f"line {lineno}: {mnemonic} needs an angle")
    elif mnemonic in KNOWN_GATES:
        if angle is not None:
            raise ParseError(f"line {lineno}: {mnemonic} takes no angle")
    else:
        raise ParseError(f"line {lineno}: unknown mnemonic {mnemonic!r}")
    if not rest:
        raise ParseError(f"line {lineno}: {mnemonic} needs a qubit")
    qubit = _parse_qubit(rest[0], lineno)
    return Gate(mnemonic, angle, qubit), _expect_semicolon(rest[1:], lineno)
