from typing import List, Optional

from pathharden.minilang.ast import NO_SPAN, SourceSpan


class ParseError(ValueError):
    """MiniLang source is not derivable from the grammar; ``span`` marks the first failure."""

    def __init__(self, message: str, span: SourceSpan = NO_SPAN):
        super().__init__(f'{span}: {message}')
        self.message = message
        self.span = span

    def serializable(self):
        return {'code': 'SyntaxError', 'message': self.message, 'span': self.span.serializable()}


class ValidationError(ValueError):
    """
    A scope or typing violation in a syntactically valid program.

    :py:func:`~pathharden.minilang.validate.validate` returns these as values. When
    :py:func:`~pathharden.minilang.parser.parse` raises one it is the first violation found and
    ``errors`` holds all of them.
    """

    def __init__(self, code: str, message: str, span: SourceSpan = NO_SPAN,
                 errors: Optional[List['ValidationError']] = None):
        super().__init__(f'{span}: {code}: {message}')
        self.code = code
        self.message = message
        self.span = span
        self.errors = errors if errors is not None else [self]

    def __eq__(self, other):
        if not isinstance(other, ValidationError):
            return NotImplemented
        return (self.code, self.message, self.span) == (other.code, other.message, other.span)

    def __hash__(self):
        return hash((self.code, self.message, self.span))

    def __repr__(self):
        return f'ValidationError({self.code}, {self.span})'

    def serializable(self):
        return {'code': self.code, 'message': self.message, 'span': self.span.serializable()}


# Stable machine-readable validation codes.
UNDECLARED_VARIABLE = 'UndeclaredVariable'
DUPLICATE_DECLARATION = 'DuplicateDeclaration'
SHADOWED_INPUT = 'ShadowedInput'
DUPLICATE_BINDING = 'DuplicateBinding'
TYPE_MISMATCH = 'TypeMismatch'
INVALID_OPERAND_TYPE = 'InvalidOperandType'
CONDITION_NOT_BOOLEAN = 'ConditionNotBoolean'
DIGEST_OUTSIDE_HASH_BUILTIN = 'DigestOutsideHashBuiltin'
DIGEST_EXPECTED = 'DigestExpected'
INVALID_WINDOW_LENGTH = 'InvalidWindowLength'
INTEGER_OUT_OF_RANGE = 'IntegerOutOfRange'
