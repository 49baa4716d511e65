"""
MiniLang parser built on a lark LALR grammar.

Source text is parsed into a lark tree with positions, which :py:class:`_ProgramBuilder` turns
into the frozen AST of :py:mod:`pathharden.minilang.ast`. Any failure, including malformed
UTF-8, surfaces as a :py:class:`~pathharden.minilang.diagnostics.ParseError` carrying the span of
the first offending character.
"""
import functools
import logging
import re
from typing import Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import (LarkError, UnexpectedCharacters, UnexpectedEOF, UnexpectedInput,
                             UnexpectedToken, VisitError)

from pathharden.crypto_runtime import Digest, InvalidDigestLiteral
from pathharden.minilang.ast import (U64_MAX, Accept, And, Cmp, CmpOp, Contains, DigestLit,
                                     HashContains, HashEq, If, InputDecl, IntLit, Length, Let, Not,
                                     Or, Program, Reject, SourceSpan, StrLit, Substring, ValueType,
                                     Var, children)
from pathharden.minilang.diagnostics import ParseError
from pathharden.minilang.validate import check_valid

log = logging.getLogger(__name__)

# deepest statement and expression nesting a program may have
MAX_NESTING_DEPTH = 200

MINILANG_GRAMMAR = r'''
start: decl* stmt*

decl: "input" NAME ":" NAME ";"

?stmt: "let" NAME "=" expr ";"                      -> let_stmt
     | "if" "(" expr ")" block ["else" block]       -> if_stmt
     | "accept" ";"                                 -> accept_stmt
     | "reject" ";"                                 -> reject_stmt

block: "{" stmt* "}"

?expr: or_expr
?or_expr: and_expr ("||" and_expr)*
?and_expr: not_expr ("&&" not_expr)*
?not_expr: "!" not_expr                             -> not_
         | cmp_expr
?cmp_expr: primary CMP_OP primary                   -> cmp
         | primary
?primary: NUMBER                                    -> int_lit
        | STRLIT                                    -> str_lit
        | DIGEST                                    -> digest_lit
        | NAME                                      -> var
        | "(" expr ")"
        | "contains" "(" expr "," expr ")"          -> contains
        | "length" "(" expr ")"                     -> length
        | "substring" "(" expr "," expr "," expr ")" -> substring
        | "hash_eq" "(" expr "," expr ")"           -> hash_eq
        | "hash_contains" "(" expr "," expr "," NUMBER ")" -> hash_contains

CMP_OP: "==" | "!=" | "<=" | ">=" | "<" | ">"
DIGEST.2: /digest"[^"\n]*"/
STRLIT: /"(\\x[0-9a-fA-F]{2}|\\["\\]|[^"\\\n])*"/
NUMBER: /[0-9]+/
NAME: /[A-Za-z_][A-Za-z0-9_]*/
COMMENT: /\/\/[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
'''

_ESCAPE = re.compile(r'\\x([0-9a-fA-F]{2})|\\(["\\])|\\(.?)', re.S)


@functools.lru_cache(maxsize=None)
def _lark() -> Lark:
    return Lark(MINILANG_GRAMMAR, parser='lalr', propagate_positions=True,
                maybe_placeholders=True)


def unescape_bytes(text: str) -> bytes:
    """
    Decode the body of a MiniLang string literal (without the surrounding quotes) to bytes.

    ``\\xNN``, ``\\"`` and ``\\\\`` are the only escapes; any other character is UTF-8 encoded.

    :param text: escaped text
    :return: the byte string it denotes
    """
    out = bytearray()
    pos = 0
    for ma in _ESCAPE.finditer(text):
        out += text[pos:ma.start()].encode('utf-8')
        if ma.group(1) is not None:
            out.append(int(ma.group(1), 16))
        elif ma.group(2) is not None:
            out += ma.group(2).encode('ascii')
        else:
            raise ValueError(f"Bad escape sequence '\\{ma.group(3)}' in '{text}'")
        pos = ma.end()
    out += text[pos:].encode('utf-8')
    return bytes(out)


class _Positions:
    """Maps lark character positions to spans with UTF-8 byte offsets."""

    def __init__(self, source: str):
        self.source = source
        self._ascii = source.isascii()

    def span(self, pos: int) -> SourceSpan:
        pos = max(0, min(pos, len(self.source)))
        prefix = self.source[:pos]
        line = prefix.count('\n') + 1
        column = pos - (prefix.rfind('\n') + 1) + 1
        offset = pos if self._ascii else len(prefix.encode('utf-8'))
        return SourceSpan(line, column, offset)

    def of_meta(self, meta) -> SourceSpan:
        if getattr(meta, 'empty', True):
            return SourceSpan(1, 1, 0)
        return self.span(meta.start_pos)

    def of_token(self, token: Token) -> SourceSpan:
        return self.span(token.start_pos)


class _ProgramBuilder(Transformer):
    """Builds AST nodes bottom-up from the lark parse tree."""

    def __init__(self, positions: _Positions):
        super().__init__(visit_tokens=False)
        self.pos = positions

    @v_args(meta=True)
    def start(self, meta, children):
        decls = tuple(c for c in children if isinstance(c, InputDecl))
        body = tuple(c for c in children if not isinstance(c, InputDecl))
        return Program(decls, body, span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def decl(self, meta, children):
        name, type_name = children
        try:
            value_type = ValueType(str(type_name))
        except ValueError:
            value_type = None
        if value_type not in (ValueType.INT, ValueType.STRING):
            raise ParseError(f"unknown input type '{type_name}', expected 'int' or 'string'",
                             self.pos.of_token(type_name))
        return InputDecl(str(name), value_type, span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def let_stmt(self, meta, children):
        name, value = children
        return Let(str(name), value, span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def if_stmt(self, meta, children):
        cond, then, orelse = children
        return If(cond, then, orelse, span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def accept_stmt(self, meta, children):
        return Accept(span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def reject_stmt(self, meta, children):
        return Reject(span=self.pos.of_meta(meta))

    def block(self, children):
        return tuple(children)

    @v_args(meta=True)
    def or_expr(self, meta, children):
        span = self.pos.of_meta(meta)
        result = children[0]
        for operand in children[1:]:
            result = Or(result, operand, span=span)
        return result

    @v_args(meta=True)
    def and_expr(self, meta, children):
        span = self.pos.of_meta(meta)
        result = children[0]
        for operand in children[1:]:
            result = And(result, operand, span=span)
        return result

    @v_args(meta=True)
    def not_(self, meta, children):
        return Not(children[0], span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def cmp(self, meta, children):
        lhs, op, rhs = children
        return Cmp(CmpOp(str(op)), lhs, rhs, span=self.pos.of_meta(meta))

    def _int(self, token: Token) -> int:
        value = int(token)
        if value > U64_MAX:
            raise ParseError(f'integer literal {token} does not fit in 64 bits',
                             self.pos.of_token(token))
        return value

    def int_lit(self, children):
        token = children[0]
        return IntLit(self._int(token), span=self.pos.of_token(token))

    def str_lit(self, children):
        token = children[0]
        return StrLit(unescape_bytes(str(token)[1:-1]), span=self.pos.of_token(token))

    def digest_lit(self, children):
        token = children[0]
        try:
            digest = Digest.from_literal(str(token)[len('digest"'):-1])
        except InvalidDigestLiteral as e:
            raise ParseError(str(e), self.pos.of_token(token))
        return DigestLit(digest, span=self.pos.of_token(token))

    def var(self, children):
        token = children[0]
        return Var(str(token), span=self.pos.of_token(token))

    @v_args(meta=True)
    def contains(self, meta, children):
        return Contains(*children, span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def length(self, meta, children):
        return Length(*children, span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def substring(self, meta, children):
        return Substring(*children, span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def hash_eq(self, meta, children):
        return HashEq(*children, span=self.pos.of_meta(meta))

    @v_args(meta=True)
    def hash_contains(self, meta, children):
        haystack, digest, window = children
        return HashContains(haystack, digest, self._int(window), span=self.pos.of_meta(meta))


def _lark_error_to_parse_error(e: UnexpectedInput, positions: _Positions) -> ParseError:
    pos = getattr(e, 'pos_in_stream', None)
    if isinstance(e, UnexpectedEOF) or pos is None or pos < 0:
        pos = len(positions.source)
    if isinstance(e, UnexpectedCharacters):
        message = f'unexpected character {positions.source[pos:pos + 1]!r}'
    elif isinstance(e, UnexpectedToken):
        if e.token.type == '$END':
            message = 'unexpected end of input'
            pos = len(positions.source)
        else:
            message = (f'unexpected {e.token.type} {str(e.token)!r}, expected one of '
                       f'{", ".join(sorted(e.expected))}')
    else:
        message = 'unexpected end of input'
    return ParseError(message, positions.span(pos))


def parse(source: Union[str, bytes], check: bool = True) -> Program:
    """
    Parse MiniLang source text into a :py:class:`~pathharden.minilang.ast.Program`.

    >>> parse('input x: int; if (x == 7) { reject; } accept;')

    :param source: program text, or its UTF-8 encoding
    :param check: if true (the default) also validate scoping and typing
    :return: the program
    :raises ParseError: on a syntax error, with the span of the first failure
    :raises ValidationError: if ``check`` and the program is ill-scoped or ill-typed; the
        exception's ``errors`` lists every violation
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode('utf-8')
        except UnicodeDecodeError as e:
            prefix = bytes(source)[:e.start].decode('utf-8')
            raise ParseError(f'invalid UTF-8 byte 0x{bytes(source)[e.start]:02x}',
                             _Positions(prefix).span(len(prefix)))

    positions = _Positions(source)
    try:
        tree = _lark().parse(source)
        program = _ProgramBuilder(positions).transform(tree)
    except RecursionError:
        raise ParseError('program nested too deeply', positions.span(0)) from None
    except VisitError as e:
        if isinstance(e.orig_exc, ParseError):
            raise e.orig_exc
        if isinstance(e.orig_exc, RecursionError):
            raise ParseError('program nested too deeply', positions.span(0)) from None
        raise ParseError(str(e.orig_exc), positions.span(0))
    except UnexpectedInput as e:
        raise _lark_error_to_parse_error(e, positions)
    except LarkError as e:
        raise ParseError(str(e), positions.span(0))

    depth = nesting_depth(program)
    if depth > MAX_NESTING_DEPTH:
        raise ParseError(f'program nests {depth} levels deep, more than {MAX_NESTING_DEPTH}',
                         positions.span(0))
    if check:
        check_valid(program)
    return program


def nesting_depth(program: Program) -> int:
    """Deepest chain of nested statements and expression nodes in ``program``."""
    deepest = 0
    pending = [(stmt, 1) for stmt in program.body]
    while pending:
        node, depth = pending.pop()
        deepest = max(deepest, depth)
        if isinstance(node, If):
            nested = (node.cond,) + tuple(node.then) + tuple(node.orelse or ())
        elif isinstance(node, Let):
            nested = (node.value,)
        elif isinstance(node, (Accept, Reject)):
            nested = ()
        else:
            nested = children(node)
        pending.extend((child, depth + 1) for child in nested)
    return deepest


def parse_file(path: str, check: bool = True) -> Program:
    """Parse the ``.ml1`` file at ``path``; see :py:func:`parse`."""
    with open(path, 'rb') as f:
        return parse(f.read(), check=check)
