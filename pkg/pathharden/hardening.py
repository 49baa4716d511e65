"""
The path hardener: rewrites conditionals that compare inputs against high-entropy constants into
comparisons of precomputed digests, so the constants no longer appear in the program.

Rewrite rules, applied to the condition of an If and nowhere else:

- R1 point equality: ``v == a`` becomes ``hash_eq(v, D(a))``,
- R2 set membership: ``v == a1 || ... || v == ak`` becomes ``hash_eq(v, D(a1)) || ...``, disjunct
  order preserved,
- R3 substring match: ``contains(h, s)`` becomes ``hash_contains(h, D(s), len(s))``.

The hardened program still reveals how many constants an R2 site has, the length of an R3
needle, and whether an R1 constant is an int or a string.
"""
import logging
import os
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import sympy

from pathharden import FORMAT_VERSION
from pathharden.classifier import (Classification, ClassificationKind, ClassifierPolicy,
                                   scan_program)
from pathharden.crypto_runtime import Digest, HashConfig, digest, encode_value, fp_bound
from pathharden.minilang.ast import (DigestLit, Expr, HashContains, HashEq, If, IntLit, Program,
                                     StrLit, Value, Var, or_chain, walk)
from pathharden.minilang.printer import escape_bytes, pretty_print
from pathharden.minilang.validate import check_valid

log = logging.getLogger(__name__)

# haystack length in bytes, the free variable of R3 false-positive bounds
N = sympy.Symbol('n', integer=True, nonnegative=True)

DEFAULT_SALT_BYTES = 16
DEFAULT_REFERENCE_LENGTH = 1024

RANGE_RATIONALE = 'recoverable by binary search'

_SLOWDOWN = {
    'R1': 'one SHA-256 per evaluation',
    'R2': 'up to one SHA-256 per constant per evaluation',
    'R3': 'one SHA-256 per window: linear in the input length',
}


class StrictModeViolation(ValueError):
    """
    Strict hardening found sites that cannot be hardened.

    :param sites: the offending classifications
    """

    def __init__(self, sites: List[Classification]):
        self.sites = list(sites)
        listing = '; '.join(f'{c.site} {c.kind}: {c.reason}' for c in self.sites)
        super().__init__(f'{len(self.sites)} site(s) cannot be hardened: {listing}')


class HardeningMode(Enum):
    STRICT = 'strict'
    BEST_EFFORT = 'best-effort'

    def __str__(self):
        return self.value


class RewriteRule(Enum):
    R1 = 'R1'
    R2 = 'R2'
    R3 = 'R3'
    NONE = 'none'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class HardeningPolicy:
    """
    :param classifier: thresholds deciding which sites are hardenable
    :param hash_config: digest configuration; None draws a fresh salt from ``salt_source``
    :param mode: strict refuses programs with any unhardenable site
    :param salt_source: callable returning n random bytes
    :param salt_bytes: length of a drawn salt
    :param truncate_bits: digest width used with a drawn salt
    """
    classifier: ClassifierPolicy = ClassifierPolicy()
    hash_config: Optional[HashConfig] = None
    mode: HardeningMode = HardeningMode.STRICT
    salt_source: Callable[[int], bytes] = field(default=os.urandom, compare=False, repr=False)
    salt_bytes: int = DEFAULT_SALT_BYTES
    truncate_bits: int = 256

    def resolve_hash_config(self) -> HashConfig:
        if self.hash_config is not None:
            return self.hash_config
        return HashConfig(salt=self.salt_source(self.salt_bytes),
                          truncate_bits=self.truncate_bits)


@dataclass(frozen=True)
class SiteReport:
    """
    What happened to one If site.

    :param fp_bound: false-positive bound of the rewritten condition, a sympy expression in the
        haystack length ``n`` (constant except for R3)
    """
    site_index: int
    classification: Classification
    rule: RewriteRule
    digests: Tuple[Digest, ...] = ()
    window_len: Optional[int] = None
    fp_bound: sympy.Expr = sympy.Integer(0)

    @property
    def hardened(self) -> bool:
        return self.rule != RewriteRule.NONE

    def comparisons(self, n: int) -> int:
        """Digest comparisons one evaluation may make on an input of ``n`` bytes."""
        if self.rule == RewriteRule.R3:
            return max(n - self.window_len + 1, 0)
        return len(self.digests)

    def fp_at(self, n: int) -> float:
        if not self.hardened:
            return 0.0
        return fp_bound(self.comparisons(n), self.digests[0].bits)

    def serializable(self, reference_length: int = DEFAULT_REFERENCE_LENGTH):
        return {
            'site': self.site_index,
            'span': self.classification.site.serializable(),
            'classification': str(self.classification.kind),
            'reason': self.classification.reason,
            'rule': str(self.rule),
            'digests': [d.to_literal() for d in self.digests],
            'window_len': self.window_len,
            'fp_bound': str(self.fp_bound),
            'fp_bound_at_reference': self.fp_at(reference_length),
            'guess_cost_bits': self.classification.guess_cost_bits,
        }


@dataclass(frozen=True)
class ScrubbedSecret:
    """A hardened constant and whether its plaintext is absent from the hardened program."""
    value: Value
    absent: bool

    def serializable(self):
        if isinstance(self.value, bytes):
            return {'type': 'string', 'value': escape_bytes(self.value), 'absent': self.absent}
        return {'type': 'int', 'value': self.value, 'absent': self.absent}


@dataclass(frozen=True)
class HardeningReport:
    sites: Tuple[SiteReport, ...]
    hash_config: Optional[HashConfig]
    mode: HardeningMode
    secrets_scrubbed: Tuple[ScrubbedSecret, ...] = ()

    @property
    def hardened_count(self) -> int:
        return sum(site.hardened for site in self.sites)

    @property
    def skipped_count(self) -> int:
        return len(self.sites) - self.hardened_count

    @property
    def total_fp_bound(self) -> sympy.Expr:
        """Union bound over all sites, as an expression in ``n``."""
        return sympy.Add(*(site.fp_bound for site in self.sites))

    def total_fp_at(self, n: int) -> float:
        return min(sum(site.fp_at(n) for site in self.sites), 1.0)

    def serializable(self, reference_length: int = DEFAULT_REFERENCE_LENGTH):
        config = self.hash_config
        return {
            'format_version': FORMAT_VERSION,
            'mode': str(self.mode),
            'hash_config': None if config is None else {
                'algorithm': config.algorithm,
                'truncate_bits': config.truncate_bits,
                'salt': config.salt.hex() if config.salt is not None else None,
            },
            'sites': [site.serializable(reference_length) for site in self.sites],
            'hardened': self.hardened_count,
            'skipped': self.skipped_count,
            'total_fp_bound': str(self.total_fp_bound),
            'reference_length': reference_length,
            'total_fp_bound_at_reference': self.total_fp_at(reference_length),
            'secrets_scrubbed': [s.serializable() for s in self.secrets_scrubbed],
        }


def _digest_of(value: Value, config: HashConfig) -> Digest:
    return digest(encode_value(value), config)


def _rewrite(cond: Expr, c: Classification, config: HashConfig) \
        -> Tuple[Expr, RewriteRule, Tuple[Digest, ...], Optional[int], sympy.Expr]:
    unit = sympy.Integer(2) ** -config.truncate_bits
    digests = tuple(_digest_of(value, config) for value in c.constants)
    if c.kind == ClassificationKind.POINT_EQUALITY:
        new = HashEq(c.subject, DigestLit(digests[0], span=cond.span), span=cond.span)
        return new, RewriteRule.R1, digests, None, unit
    if c.kind == ClassificationKind.SET_MEMBERSHIP:
        disjuncts = [HashEq(c.subject, DigestLit(d, span=cond.span), span=cond.span)
                     for d in digests]
        return (or_chain(disjuncts, span=cond.span), RewriteRule.R2, digests, None,
                len(digests) * unit)
    if c.kind == ClassificationKind.SUBSTRING_MATCH:
        window = len(c.constants[0])
        new = HashContains(c.subject, DigestLit(digests[0], span=cond.span), window,
                           span=cond.span)
        return new, RewriteRule.R3, digests, window, sympy.Max(N - window + 1, 0) * unit
    raise ValueError(f'{c.kind} is not hardenable')


def _rebuild(block, replacements) -> Tuple:
    out = []
    for stmt in block:
        if isinstance(stmt, If):
            cond = replacements.get(id(stmt), stmt.cond)
            then = _rebuild(stmt.then, replacements)
            orelse = _rebuild(stmt.orelse, replacements) if stmt.orelse is not None else None
            stmt = If(cond, then, orelse, span=stmt.span)
        out.append(stmt)
    return tuple(out)


def _literals(program: Program):
    for site in program.if_sites():
        yield from walk(site.cond)
    for stmt in _all_statements(program.body):
        value = getattr(stmt, 'value', None)
        if value is not None:
            yield from walk(value)


def _all_statements(block):
    for stmt in block:
        yield stmt
        if isinstance(stmt, If):
            yield from _all_statements(stmt.then)
            if stmt.orelse is not None:
                yield from _all_statements(stmt.orelse)


def _plaintext_absent(secret: Value, program: Program, text: bytes) -> bool:
    if isinstance(secret, bytes):
        if secret in text or escape_bytes(secret).encode('ascii') in text:
            return False
        lit_type = StrLit
    else:
        lit_type = IntLit
    return not any(isinstance(node, lit_type) and node.value == secret
                   for node in _literals(program))


def harden_program(p: Program, policy: HardeningPolicy = HardeningPolicy()) \
        -> Tuple[Program, HardeningReport]:
    """
    Rewrite every hardenable If condition of ``p`` into a digest comparison.

    Only If conditions change; declarations, statements and their order are kept. A program
    with nothing to rewrite (for instance one that is already hardened) is returned unchanged.

    :param p: the program to harden
    :param policy: classification thresholds, digest configuration and mode
    :return: the hardened program and a report of what was done to each site
    :raises ValidationError: if ``p`` is invalid
    :raises StrictModeViolation: in strict mode, if any site is neither hardenable nor already
        hardened
    """
    check_valid(p)
    classifications = scan_program(p, policy.classifier)
    if policy.mode == HardeningMode.STRICT:
        offending = [c for c in classifications
                     if not c.hardenable and c.kind != ClassificationKind.ALREADY_HARDENED]
        if offending:
            raise StrictModeViolation(offending)

    config = policy.resolve_hash_config() if any(c.hardenable for c in classifications) \
        else policy.hash_config
    replacements = {}
    site_reports = []
    secrets = []
    for site, c in zip(p.if_sites(), classifications):
        if not c.hardenable:
            log.info('site %d at %s: %s, not rewritten', c.site_index, c.site, c.kind)
            site_reports.append(SiteReport(c.site_index, c, RewriteRule.NONE))
            continue
        new_cond, rule, digests, window, bound = _rewrite(site.cond, c, config)
        replacements[id(site)] = new_cond
        log.info('site %d at %s: %s rewritten by %s', c.site_index, c.site, c.kind, rule)
        site_reports.append(SiteReport(c.site_index, c, rule, digests, window, bound))
        secrets.extend(value for value in c.constants if value not in secrets)

    if not replacements:
        return p, HardeningReport(tuple(site_reports), config, policy.mode)

    hardened = Program(p.inputs, _rebuild(p.body, replacements), span=p.span)
    text = pretty_print(hardened).encode('utf-8')
    scrubbed = tuple(ScrubbedSecret(value, _plaintext_absent(value, hardened, text))
                     for value in secrets)
    for secret in scrubbed:
        if not secret.absent:
            warnings.warn(f'Plaintext of hardened constant {secret.serializable()["value"]!r} '
                          f'still occurs in the hardened program.')
    return hardened, HardeningReport(tuple(site_reports), config, policy.mode, scrubbed)


def explain_report(r: HardeningReport, reference_length: int = DEFAULT_REFERENCE_LENGTH) -> str:
    """
    Human-readable summary of a hardening report: per-site verdicts, slowdown per rule and the
    total false-positive bound at ``reference_length`` input bytes.
    """
    if not r.sites:
        return '0 sites: nothing to harden.\n'
    lines = [f'{len(r.sites)} sites: {r.hardened_count} hardened, {r.skipped_count} skipped '
             f'({r.mode} mode).']
    if r.hash_config is not None and r.hardened_count:
        salt = r.hash_config.salt.hex() if r.hash_config.salt is not None else 'none'
        lines.append(f'Digests: {r.hash_config.algorithm} truncated to '
                     f'{r.hash_config.truncate_bits} bits, salt {salt}.')
    for site in r.sites:
        c = site.classification
        head = f'site {site.site_index} at {c.site}: {c.kind}'
        if not site.hardened:
            reason = c.reason
            if c.kind == ClassificationKind.RANGE_CHECK and RANGE_RATIONALE not in reason:
                reason = f'{reason}: {RANGE_RATIONALE}'
            lines.append(f'{head}, skipped: {reason}.')
            continue
        d = site.digests[0].bits
        if site.rule == RewriteRule.R3:
            shape = (f'window {site.window_len}, fp bound m x 2^-{d} with '
                     f'm = {sympy.Max(N - site.window_len + 1, 0)} windows')
        elif site.rule == RewriteRule.R2:
            shape = f'{len(site.digests)} digests, fp bound {len(site.digests)} x 2^-{d}'
        else:
            shape = f'fp bound 2^-{d}'
        lines.append(f'{head} -> {site.rule}, {shape}; guess cost '
                     f'{c.guess_cost_bits:g} bits; cost: {_SLOWDOWN[str(site.rule)]}.')
    lines.append(f'Total false-positive bound at n = {reference_length}: '
                 f'{r.total_fp_at(reference_length):.3g} ({r.total_fp_bound}).')
    return '\n'.join(lines) + '\n'
