"""
Abstract syntax of MiniLang, the filter language that both an input program P and its hardened
counterpart H(P) are written in.

Nodes are frozen dataclasses. Every node carries a :py:class:`SourceSpan`, but spans are excluded
from comparison, so ``==`` on two programs is structural equality of their ASTs.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Tuple, Union

from pathharden.crypto_runtime import Digest

U64_MAX = 2 ** 64 - 1

# Runtime value of a MiniLang expression of type int or string.
Value = Union[int, bytes]


@dataclass(frozen=True)
class SourceSpan:
    """
    A position in MiniLang source text.

    :param line: 1-based line number
    :param column: 1-based column, counted in characters
    :param offset: 0-based byte offset into the UTF-8 encoded source
    """
    line: int
    column: int
    offset: int

    def __str__(self):
        return f'{self.line}:{self.column}'

    def serializable(self):
        return {'line': self.line, 'column': self.column, 'offset': self.offset}


NO_SPAN = SourceSpan(1, 1, 0)


def _span():
    return field(default=NO_SPAN, compare=False, repr=False)


class ValueType(Enum):
    INT = 'int'
    STRING = 'string'
    BOOL = 'bool'

    def __str__(self):
        return self.value


class CmpOp(Enum):
    EQ = '=='
    NE = '!='
    LT = '<'
    LE = '<='
    GT = '>'
    GE = '>='

    @property
    def is_order(self) -> bool:
        return self not in (CmpOp.EQ, CmpOp.NE)

    def __str__(self):
        return self.value


# Expressions

@dataclass(frozen=True)
class IntLit:
    value: int
    span: SourceSpan = _span()


@dataclass(frozen=True)
class StrLit:
    value: bytes
    span: SourceSpan = _span()


@dataclass(frozen=True)
class DigestLit:
    digest: Digest
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Cmp:
    op: CmpOp
    lhs: 'Expr'
    rhs: 'Expr'
    span: SourceSpan = _span()


@dataclass(frozen=True)
class And:
    lhs: 'Expr'
    rhs: 'Expr'
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Or:
    lhs: 'Expr'
    rhs: 'Expr'
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Not:
    operand: 'Expr'
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Contains:
    haystack: 'Expr'
    needle: 'Expr'
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Length:
    operand: 'Expr'
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Substring:
    operand: 'Expr'
    start: 'Expr'
    length: 'Expr'
    span: SourceSpan = _span()


@dataclass(frozen=True)
class HashEq:
    operand: 'Expr'
    digest: 'Expr'
    span: SourceSpan = _span()


@dataclass(frozen=True)
class HashContains:
    haystack: 'Expr'
    digest: 'Expr'
    window_len: int
    span: SourceSpan = _span()


Expr = Union[IntLit, StrLit, DigestLit, Var, Cmp, And, Or, Not, Contains, Length, Substring,
             HashEq, HashContains]
Literal = Union[IntLit, StrLit]


# Statements

@dataclass(frozen=True)
class Let:
    name: str
    value: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Tuple['Stmt', ...]
    orelse: Optional[Tuple['Stmt', ...]] = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Accept:
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Reject:
    span: SourceSpan = _span()


Stmt = Union[Let, If, Accept, Reject]


@dataclass(frozen=True)
class InputDecl:
    name: str
    type: ValueType
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Program:
    """
    A MiniLang filter: declared inputs followed by a statement list. Falling off the end of the
    body accepts the input.
    """
    inputs: Tuple[InputDecl, ...]
    body: Tuple[Stmt, ...]
    span: SourceSpan = _span()

    def input_types(self):
        return {decl.name: decl.type for decl in self.inputs}

    def if_sites(self) -> Iterator[If]:
        """Yield every If statement in source order, outer before nested."""
        yield from iter_ifs(self.body)


def iter_ifs(block: Tuple[Stmt, ...]) -> Iterator[If]:
    for stmt in block:
        if isinstance(stmt, If):
            yield stmt
            yield from iter_ifs(stmt.then)
            if stmt.orelse is not None:
                yield from iter_ifs(stmt.orelse)


def children(expr: Expr) -> Tuple[Expr, ...]:
    """The direct sub-expressions of ``expr``, left to right."""
    if isinstance(expr, Cmp):
        return expr.lhs, expr.rhs
    if isinstance(expr, (And, Or)):
        return expr.lhs, expr.rhs
    if isinstance(expr, (Not, Length)):
        return (expr.operand,)
    if isinstance(expr, Contains):
        return expr.haystack, expr.needle
    if isinstance(expr, Substring):
        return expr.operand, expr.start, expr.length
    if isinstance(expr, HashEq):
        return expr.operand, expr.digest
    if isinstance(expr, HashContains):
        return expr.haystack, expr.digest
    return ()


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal of an expression tree."""
    yield expr
    for child in children(expr):
        yield from walk(child)


def literal_value(expr: Expr) -> Optional[Value]:
    if isinstance(expr, (IntLit, StrLit)):
        return expr.value
    return None


def flatten_or(expr: Expr) -> Tuple[Expr, ...]:
    """Disjuncts of an Or-chain, in source order."""
    if isinstance(expr, Or):
        return flatten_or(expr.lhs) + flatten_or(expr.rhs)
    return (expr,)


def flatten_and(expr: Expr) -> Tuple[Expr, ...]:
    if isinstance(expr, And):
        return flatten_and(expr.lhs) + flatten_and(expr.rhs)
    return (expr,)


def or_chain(disjuncts, span: SourceSpan = NO_SPAN) -> Expr:
    """Left-associated Or over one or more disjuncts."""
    disjuncts = list(disjuncts)
    result = disjuncts[0]
    for disjunct in disjuncts[1:]:
        result = Or(result, disjunct, span=span)
    return result
