"""
Scope and type checking for MiniLang programs.
"""
from typing import Dict, List, Optional

from pathharden.minilang.ast import (U64_MAX, And, Cmp, Contains, DigestLit, Expr, HashContains,
                                     HashEq, If, IntLit, Length, Let, Not, Or, Program, StrLit,
                                     Substring, ValueType, Var)
from pathharden.minilang import diagnostics as diag
from pathharden.minilang.diagnostics import ValidationError


def validate(program: Program) -> List[ValidationError]:
    """
    Check every Program invariant: no undeclared, forward or shadowing references, well-typed
    expressions, digest literals only as the digest argument of ``hash_eq``/``hash_contains``, and
    window lengths of at least 1.

    :param program: the program to check
    :return: all violations in source order; empty iff the program is valid
    """
    return _Checker().check(program)


def check_valid(program: Program):
    """
    :raises ValidationError: the first violation in source order, its ``errors`` listing all
        of them
    """
    errors = validate(program)
    if errors:
        first = errors[0]
        raise ValidationError(first.code, first.message, first.span, errors=errors)


class _Checker:

    def __init__(self):
        self.errors = []  # type: List[ValidationError]
        self.inputs = {}  # type: Dict[str, ValueType]
        self.scopes = []  # type: List[Dict[str, ValueType]]

    def error(self, code, message, span):
        self.errors.append(ValidationError(code, message, span))

    def check(self, program: Program) -> List[ValidationError]:
        for decl in program.inputs:
            if decl.name in self.inputs:
                self.error(diag.DUPLICATE_DECLARATION, f"input '{decl.name}' is declared twice",
                           decl.span)
            else:
                self.inputs[decl.name] = decl.type
        self.check_block(program.body)
        return self.errors

    def lookup(self, name: str) -> Optional[ValueType]:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return self.inputs.get(name)

    def check_block(self, block):
        self.scopes.append({})
        for stmt in block:
            if isinstance(stmt, Let):
                value_type = self.infer(stmt.value)
                if stmt.name in self.inputs:
                    self.error(diag.SHADOWED_INPUT, f"let '{stmt.name}' shadows an input",
                               stmt.span)
                elif self.lookup(stmt.name) is not None:
                    self.error(diag.DUPLICATE_BINDING, f"'{stmt.name}' is already bound",
                               stmt.span)
                elif value_type is not None:
                    self.scopes[-1][stmt.name] = value_type
            elif isinstance(stmt, If):
                cond_type = self.infer(stmt.cond)
                if cond_type is not None and cond_type != ValueType.BOOL:
                    self.error(diag.CONDITION_NOT_BOOLEAN,
                               f'if condition has type {cond_type}, expected bool', stmt.span)
                self.check_block(stmt.then)
                if stmt.orelse is not None:
                    self.check_block(stmt.orelse)
        self.scopes.pop()

    def expect(self, expr: Expr, expected: ValueType, context: str) -> bool:
        actual = self.infer(expr)
        if actual is None:
            return False
        if actual != expected:
            self.error(diag.INVALID_OPERAND_TYPE,
                       f'{context} requires {expected}, got {actual}', expr.span)
            return False
        return True

    def infer(self, expr: Expr) -> Optional[ValueType]:
        """Type of ``expr``, or None if an error below it has already been reported."""
        if isinstance(expr, IntLit):
            if not 0 <= expr.value <= U64_MAX:
                self.error(diag.INTEGER_OUT_OF_RANGE,
                           f'{expr.value} is not an unsigned 64-bit integer', expr.span)
                return None
            return ValueType.INT
        if isinstance(expr, StrLit):
            return ValueType.STRING
        if isinstance(expr, DigestLit):
            self.error(diag.DIGEST_OUTSIDE_HASH_BUILTIN,
                       'digest literals may only appear as the digest argument of hash_eq or '
                       'hash_contains', expr.span)
            return None
        if isinstance(expr, Var):
            value_type = self.lookup(expr.name)
            if value_type is None:
                self.error(diag.UNDECLARED_VARIABLE, f"'{expr.name}' is not declared", expr.span)
            return value_type
        if isinstance(expr, Cmp):
            lhs, rhs = self.infer(expr.lhs), self.infer(expr.rhs)
            if lhs is None or rhs is None:
                return ValueType.BOOL
            if ValueType.BOOL in (lhs, rhs):
                self.error(diag.INVALID_OPERAND_TYPE,
                           f"'{expr.op}' compares ints or strings, got {lhs} and {rhs}",
                           expr.span)
            elif lhs != rhs:
                self.error(diag.TYPE_MISMATCH, f"'{expr.op}' between {lhs} and {rhs}", expr.span)
            return ValueType.BOOL
        if isinstance(expr, (And, Or)):
            name = '&&' if isinstance(expr, And) else '||'
            self.expect(expr.lhs, ValueType.BOOL, f"'{name}'")
            self.expect(expr.rhs, ValueType.BOOL, f"'{name}'")
            return ValueType.BOOL
        if isinstance(expr, Not):
            self.expect(expr.operand, ValueType.BOOL, "'!'")
            return ValueType.BOOL
        if isinstance(expr, Contains):
            self.expect(expr.haystack, ValueType.STRING, 'contains')
            self.expect(expr.needle, ValueType.STRING, 'contains')
            return ValueType.BOOL
        if isinstance(expr, Length):
            self.expect(expr.operand, ValueType.STRING, 'length')
            return ValueType.INT
        if isinstance(expr, Substring):
            self.expect(expr.operand, ValueType.STRING, 'substring')
            self.expect(expr.start, ValueType.INT, 'substring start')
            self.expect(expr.length, ValueType.INT, 'substring length')
            return ValueType.STRING
        if isinstance(expr, HashEq):
            operand = self.infer(expr.operand)
            if operand == ValueType.BOOL:
                self.error(diag.INVALID_OPERAND_TYPE, 'hash_eq requires an int or string operand',
                           expr.operand.span)
            self.check_digest_arg(expr.digest, 'hash_eq')
            return ValueType.BOOL
        if isinstance(expr, HashContains):
            self.expect(expr.haystack, ValueType.STRING, 'hash_contains')
            self.check_digest_arg(expr.digest, 'hash_contains')
            if not 1 <= expr.window_len <= U64_MAX:
                self.error(diag.INVALID_WINDOW_LENGTH,
                           f'window length must be at least 1, got {expr.window_len}', expr.span)
            return ValueType.BOOL
        raise TypeError(f'Not a MiniLang expression: {expr!r}')

    def check_digest_arg(self, expr: Expr, builtin: str):
        if not isinstance(expr, DigestLit):
            self.infer(expr)
            self.error(diag.DIGEST_EXPECTED, f'{builtin} requires a digest literal argument',
                       expr.span)
