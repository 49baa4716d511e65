"""
Canonical text rendering of MiniLang programs: one statement per line, two-space indentation,
the fewest parentheses that re-parse to the same tree.
"""
from typing import List, Tuple

from pathharden.minilang.ast import (Accept, And, Cmp, Contains, DigestLit, Expr, HashContains,
                                     HashEq, If, IntLit, Length, Let, Not, Or, Program, Reject,
                                     Stmt, StrLit, Substring, Var)

INDENT = '  '

_OR, _AND, _NOT, _CMP, _PRIMARY = range(1, 6)


def escape_bytes(value: bytes) -> str:
    """
    Escape a byte string for a MiniLang string literal (without the quotes). Printable ASCII is
    kept, except ``"`` and ``\\``; every other byte becomes ``\\xNN``.
    """
    out = []
    for byte in value:
        if byte == 0x22:
            out.append('\\"')
        elif byte == 0x5c:
            out.append('\\\\')
        elif 0x20 <= byte < 0x7f:
            out.append(chr(byte))
        else:
            out.append(f'\\x{byte:02x}')
    return ''.join(out)


def quote_bytes(value: bytes) -> str:
    return f'"{escape_bytes(value)}"'


def _precedence(expr: Expr) -> int:
    if isinstance(expr, Or):
        return _OR
    if isinstance(expr, And):
        return _AND
    if isinstance(expr, Not):
        return _NOT
    if isinstance(expr, Cmp):
        return _CMP
    return _PRIMARY


def _wrap(expr: Expr, min_precedence: int) -> str:
    text = format_expr(expr)
    if _precedence(expr) < min_precedence:
        return f'({text})'
    return text


def format_expr(expr: Expr) -> str:
    """Canonical text of a single expression."""
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, StrLit):
        return quote_bytes(expr.value)
    if isinstance(expr, DigestLit):
        return f'digest"{expr.digest.to_literal()}"'
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Or):
        return f'{_wrap(expr.lhs, _OR)} || {_wrap(expr.rhs, _OR + 1)}'
    if isinstance(expr, And):
        return f'{_wrap(expr.lhs, _AND)} && {_wrap(expr.rhs, _AND + 1)}'
    if isinstance(expr, Not):
        return f'!{_wrap(expr.operand, _NOT)}'
    if isinstance(expr, Cmp):
        # comparisons do not chain: both operands must be primaries
        return f'{_wrap(expr.lhs, _PRIMARY)} {expr.op} {_wrap(expr.rhs, _PRIMARY)}'
    if isinstance(expr, Contains):
        return f'contains({format_expr(expr.haystack)}, {format_expr(expr.needle)})'
    if isinstance(expr, Length):
        return f'length({format_expr(expr.operand)})'
    if isinstance(expr, Substring):
        return (f'substring({format_expr(expr.operand)}, {format_expr(expr.start)}, '
                f'{format_expr(expr.length)})')
    if isinstance(expr, HashEq):
        return f'hash_eq({format_expr(expr.operand)}, {format_expr(expr.digest)})'
    if isinstance(expr, HashContains):
        return (f'hash_contains({format_expr(expr.haystack)}, {format_expr(expr.digest)}, '
                f'{expr.window_len})')
    raise TypeError(f'Not a MiniLang expression: {expr!r}')


def _format_block(block: Tuple[Stmt, ...], depth: int, lines: List[str]):
    pad = INDENT * depth
    for stmt in block:
        if isinstance(stmt, Let):
            lines.append(f'{pad}let {stmt.name} = {format_expr(stmt.value)};')
        elif isinstance(stmt, Accept):
            lines.append(f'{pad}accept;')
        elif isinstance(stmt, Reject):
            lines.append(f'{pad}reject;')
        elif isinstance(stmt, If):
            lines.append(f'{pad}if ({format_expr(stmt.cond)}) {{')
            _format_block(stmt.then, depth + 1, lines)
            if stmt.orelse is not None:
                lines.append(f'{pad}}} else {{')
                _format_block(stmt.orelse, depth + 1, lines)
            lines.append(f'{pad}}}')
        else:
            raise TypeError(f'Not a MiniLang statement: {stmt!r}')


def pretty_print(program: Program) -> str:
    """
    Deterministic canonical text for ``program``; ``parse(pretty_print(p)) == p`` for every
    valid program ``p``.

    :param program: a valid program
    :return: the program text, newline terminated (empty for an empty program)
    """
    lines = [f'input {decl.name}: {decl.type};' for decl in program.inputs]
    _format_block(program.body, 0, lines)
    return '\n'.join(lines) + '\n' if lines else ''
