"""
Classification of conditionals by how hard it is to find a satisfying input from black-box
queries alone.

A conditional that tests an input against a high-entropy constant (point equality, membership in
a small set of such constants, or containment of a long needle) can be rewritten to compare
digests instead, and then reveals nothing about the constant. Order comparisons cannot: whatever
the constant, it is recovered by binary search in about ``log2(domain)`` queries. Constants with
few bits of entropy are found by exhaustive search whether hashed or not.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from math import log2
from typing import List, Optional, Tuple

from pathharden.minilang.ast import (And, Cmp, CmpOp, Contains, DigestLit, Expr, HashContains,
                                     HashEq, IntLit, Not, Or, Program, SourceSpan, StrLit, Value,
                                     Var, flatten_or, literal_value, NO_SPAN)
from pathharden.minilang.printer import format_expr

log = logging.getLogger(__name__)

INT_ENTROPY_BITS = 64


class ClassificationKind(Enum):
    POINT_EQUALITY = 'PointEquality'
    SET_MEMBERSHIP = 'SetMembership'
    SUBSTRING_MATCH = 'SubstringMatch'
    ALREADY_HARDENED = 'AlreadyHardened'
    RANGE_CHECK = 'RangeCheck'
    SMALL_GUESSING_DOMAIN = 'SmallGuessingDomain'
    NON_CONSTANT_COMPARAND = 'NonConstantComparand'
    UNSUPPORTED = 'Unsupported'

    @property
    def hardenable(self) -> bool:
        return self in HARDENABLE_KINDS

    def __str__(self):
        return self.value


HARDENABLE_KINDS = frozenset({ClassificationKind.POINT_EQUALITY,
                              ClassificationKind.SET_MEMBERSHIP,
                              ClassificationKind.SUBSTRING_MATCH})


@dataclass(frozen=True)
class ClassifierPolicy:
    """
    :param theta: minimum guess cost, in bits, for a conditional to be hardenable
    :param min_needle_len: minimum length in bytes of a hardenable substring needle
    :param charset_bits_per_byte: entropy credited to each byte of a string constant; lower it
        for constants drawn from a small alphabet (e.g. about 3.32 for decimal digits)
    """
    theta: float = 64
    min_needle_len: int = 8
    charset_bits_per_byte: float = 8

    def __post_init__(self):
        if self.theta < 1:
            raise ValueError(f'theta must be at least 1 bit, got {self.theta}.')
        if self.min_needle_len < 1:
            raise ValueError(f'min_needle_len must be at least 1, got {self.min_needle_len}.')
        if not 1 <= self.charset_bits_per_byte <= 8:
            raise ValueError('charset_bits_per_byte must lie in [1, 8], got '
                             f'{self.charset_bits_per_byte}.')

    def entropy(self, value: Value) -> float:
        """Entropy credited to a literal: 64 bits for an int, len * bits per byte for a string."""
        if isinstance(value, bytes):
            return len(value) * self.charset_bits_per_byte
        return float(INT_ENTROPY_BITS)


@dataclass(frozen=True)
class Classification:
    """
    The verdict on one conditional.

    :param site: span of the classified condition
    :param kind: the classification
    :param guess_cost_bits: log2 of the expected number of black-box queries to find a
        satisfying input
    :param reason: one-line human-readable explanation
    :param subject: the input-derived expression under test (the variable of an equality, the
        haystack of a containment, the compared side of a range check), if any
    :param constants: the constants it is compared against, in source order, duplicates removed
    :param domain_bits: bit width of the subject's domain, for range checks
    :param site_index: source-order index of the If, when produced by :py:func:`scan_program`
    """
    site: SourceSpan
    kind: ClassificationKind
    guess_cost_bits: float
    reason: str
    subject: Optional[Expr] = None
    constants: Tuple[Value, ...] = ()
    domain_bits: Optional[int] = None
    site_index: Optional[int] = None
    detail: str = ''

    @property
    def hardenable(self) -> bool:
        return self.kind.hardenable

    @property
    def variable(self) -> Optional[str]:
        return self.subject.name if isinstance(self.subject, Var) else None

    def serializable(self):
        return {
            'site': self.site_index,
            'span': self.site.serializable(),
            'kind': str(self.kind),
            'detail': self.detail,
            'guess_cost_bits': self.guess_cost_bits,
            'hardenable': self.hardenable,
            'reason': self.reason,
        }


def _is_literal(expr: Expr) -> bool:
    return isinstance(expr, (IntLit, StrLit))


def _split_literal(cmp: Cmp) -> Optional[Tuple[Expr, Expr]]:
    """(other side, literal side) of a comparison with exactly one literal operand."""
    if _is_literal(cmp.rhs) and not _is_literal(cmp.lhs):
        return cmp.lhs, cmp.rhs
    if _is_literal(cmp.lhs) and not _is_literal(cmp.rhs):
        return cmp.rhs, cmp.lhs
    return None


def _domain_bits(subject_literal: Expr) -> int:
    if isinstance(subject_literal, StrLit):
        return 8 * max(len(subject_literal.value), 1)
    return INT_ENTROPY_BITS


def _leaves(expr: Expr) -> Tuple[Expr, ...]:
    if isinstance(expr, (And, Or)):
        return _leaves(expr.lhs) + _leaves(expr.rhs)
    return (expr,)


def _result(expr, kind, cost, reason, **kwargs) -> Classification:
    return Classification(site=getattr(expr, 'span', NO_SPAN), kind=kind,
                          guess_cost_bits=float(cost), reason=reason, detail=format_expr(expr),
                          **kwargs)


def _classify_range(expr: Expr) -> Optional[Classification]:
    """RangeCheck when every leaf of an And/Or tree is an order comparison with a literal."""
    leaves = _leaves(expr)
    if not all(isinstance(leaf, Cmp) and leaf.op.is_order for leaf in leaves):
        return None
    splits = [_split_literal(leaf) for leaf in leaves]
    if any(split is None for split in splits):
        return None
    subject, literal = splits[0]
    bits = max(_domain_bits(lit) for _, lit in splits)
    return _result(expr, ClassificationKind.RANGE_CHECK, log2(bits),
                   'order comparison against a constant: recoverable by binary search',
                   subject=subject, constants=tuple(literal_value(lit) for _, lit in splits),
                   domain_bits=bits)


def _equality_disjunct(expr: Expr) -> Optional[Tuple[Var, Value]]:
    if isinstance(expr, Cmp) and expr.op == CmpOp.EQ:
        split = _split_literal(expr)
        if split is not None and isinstance(split[0], Var):
            return split[0], literal_value(split[1])
    return None


def _dedupe(values) -> Tuple[Value, ...]:
    seen = []
    for value in values:
        if value not in seen:
            seen.append(value)
    return tuple(seen)


def _classify_equalities(expr: Expr, policy: ClassifierPolicy) -> Optional[Classification]:
    disjuncts = flatten_or(expr)
    pairs = [_equality_disjunct(d) for d in disjuncts]
    if any(pair is None for pair in pairs):
        return None
    variables = {var.name for var, _ in pairs}
    if len(variables) > 1:
        return _result(expr, ClassificationKind.UNSUPPORTED, 0,
                       'disjunction of equalities on different variables', subject=None)
    subject = pairs[0][0]
    constants = _dedupe(value for _, value in pairs)
    min_entropy = min(policy.entropy(value) for value in constants)
    if len(disjuncts) == 1:
        if min_entropy >= policy.theta:
            return _result(expr, ClassificationKind.POINT_EQUALITY, min_entropy,
                           'equality with a high-entropy constant', subject=subject,
                           constants=constants)
        return _result(expr, ClassificationKind.SMALL_GUESSING_DOMAIN, min_entropy,
                       f'constant carries {min_entropy:g} bits, below the {policy.theta:g}-bit '
                       'threshold: recoverable by exhaustive search',
                       subject=subject, constants=constants)
    cost = max(min_entropy - log2(len(constants)), 0.0)
    if min_entropy >= policy.theta:
        return _result(expr, ClassificationKind.SET_MEMBERSHIP, cost,
                       f'membership in a set of {len(constants)} high-entropy constants',
                       subject=subject, constants=constants)
    return _result(expr, ClassificationKind.SMALL_GUESSING_DOMAIN, cost,
                   f'weakest constant carries {min_entropy:g} bits, below the '
                   f'{policy.theta:g}-bit threshold: recoverable by exhaustive search',
                   subject=subject, constants=constants)


def _classify_contains(expr: Contains, policy: ClassifierPolicy) -> Classification:
    if not isinstance(expr.needle, StrLit):
        if _is_literal(expr.haystack):
            return _result(expr, ClassificationKind.UNSUPPORTED, 0,
                           'searches a constant for an input-derived needle')
        return _result(expr, ClassificationKind.NON_CONSTANT_COMPARAND, 0,
                       'needle is not a constant')
    if _is_literal(expr.haystack):
        return _result(expr, ClassificationKind.UNSUPPORTED, 0, 'constant condition')
    needle = expr.needle.value
    bits = policy.entropy(needle)
    if len(needle) >= policy.min_needle_len and bits >= policy.theta:
        return _result(expr, ClassificationKind.SUBSTRING_MATCH, bits,
                       f'contains a {len(needle)}-byte high-entropy needle',
                       subject=expr.haystack, constants=(needle,))
    return _result(expr, ClassificationKind.SMALL_GUESSING_DOMAIN, bits,
                   f'{len(needle)}-byte needle: recoverable by searching through all possible '
                   'characters', subject=expr.haystack, constants=(needle,))


def _classify_hashed(expr: Expr) -> Optional[Classification]:
    if isinstance(expr, HashContains) and isinstance(expr.digest, DigestLit):
        return _result(expr, ClassificationKind.ALREADY_HARDENED, expr.digest.digest.bits,
                       'already compares digests', subject=expr.haystack)
    disjuncts = flatten_or(expr)
    if all(isinstance(d, HashEq) and isinstance(d.digest, DigestLit) for d in disjuncts):
        bits = min(d.digest.digest.bits for d in disjuncts)
        return _result(expr, ClassificationKind.ALREADY_HARDENED,
                       max(bits - log2(len(disjuncts)), 0.0), 'already compares digests',
                       subject=disjuncts[0].operand)
    return None


def classify_conditional(e: Expr, policy: ClassifierPolicy = ClassifierPolicy()) -> Classification:
    """
    Classify one boolean condition. Total: every condition receives a classification.

    :param e: a type-correct boolean expression
    :param policy: thresholds and entropy model
    :return: the classification
    """
    hashed = _classify_hashed(e)
    if hashed is not None:
        return hashed

    ranged = _classify_range(e)
    if ranged is not None:
        return ranged

    equalities = _classify_equalities(e, policy)
    if equalities is not None:
        return equalities

    if isinstance(e, Contains):
        return _classify_contains(e, policy)

    if isinstance(e, Cmp):
        if e.op == CmpOp.NE:
            return _result(e, ClassificationKind.UNSUPPORTED, 0,
                           'inequality is satisfied by almost every input: hardening it offers '
                           'no security benefit')
        if not _is_literal(e.lhs) and not _is_literal(e.rhs):
            return _result(e, ClassificationKind.NON_CONSTANT_COMPARAND, 0,
                           'both sides are input-derived')
        if _is_literal(e.lhs) and _is_literal(e.rhs):
            return _result(e, ClassificationKind.UNSUPPORTED, 0, 'constant condition')
        return _result(e, ClassificationKind.UNSUPPORTED, 0,
                       'equality on a computed expression; bind it with let to harden it')

    if isinstance(e, Not):
        return _result(e, ClassificationKind.UNSUPPORTED, 0,
                       'negated condition is satisfied by almost every input')
    if isinstance(e, (And, Or)):
        return _result(e, ClassificationKind.UNSUPPORTED, 0,
                       'mixes a comparison with other logic')
    return _result(e, ClassificationKind.UNSUPPORTED, 0, 'not a comparison against a constant')


def scan_program(p: Program, policy: ClassifierPolicy = ClassifierPolicy()) \
        -> List[Classification]:
    """
    Classify every If condition of ``p``, in source order, nested Ifs included.

    :param p: a valid program
    :param policy: thresholds and entropy model
    :return: one classification per If site
    """
    results = []
    for idx, site in enumerate(p.if_sites()):
        classification = classify_conditional(site.cond, policy)
        classification = replace(classification, site_index=idx)
        log.debug('site %d at %s: %s (%.2f bits)', idx, classification.site,
                  classification.kind, classification.guess_cost_bits)
        results.append(classification)
    return results


def estimate_guess_cost(c: Classification) -> float:
    """
    Expected black-box guessing work for a classified site, in bits. For a range check this is
    the exponent of the binary-search query count, log2(log2(domain)).
    """
    return c.guess_cost_bits
