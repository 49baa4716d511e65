"""
Black-box attacks on single conditionals.

A :py:class:`ConditionalOracle` exposes one If condition of a program as a predicate of one
input, all other inputs fixed. The attackers only ever call it; every call is counted. Range
checks fall to binary search, small guessing domains to exhaustive enumeration, and hardened
conditions resist both within any realistic budget unless the secret is in the attacker's
dictionary, which no hardening can prevent.
"""
import itertools
import logging
import threading
from dataclasses import dataclass
from enum import Enum
from math import ceil, log2
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from pathharden import FORMAT_VERSION
from pathharden.classifier import Classification, ClassificationKind
from pathharden.interpreter import (InputGeneratorSpec, Interpreter, IntGenerator,
                                    StringGenerator, ValueGenerator, format_value, trial_rng)
from pathharden.minilang.ast import HashContains, Program, StrLit, Value, ValueType, Var, walk
from pathharden.minilang.printer import format_expr

log = logging.getLogger(__name__)

U64_DOMAIN = (0, 2 ** 64)


class ClassificationMismatch(ValueError):
    """Classifications do not correspond to the If sites of the attacked program."""


class ConditionalOracle:
    """
    One If condition of ``program`` as a black-box predicate of the input ``variable``.

    :param program: a valid program
    :param site: source-order index of the If
    :param variable: the attacked input
    :param fixed: values of every other declared input
    """

    def __init__(self, program: Program, site: int, variable: str, fixed=None):
        self._interpreter = Interpreter(program)
        self.site = site
        self.variable = variable
        self.value_type = program.input_types()[variable]
        self.fixed = dict(fixed or {})
        self._lock = threading.Lock()
        self._queries = 0

    @property
    def queries(self) -> int:
        return self._queries

    def __call__(self, value: Value) -> bool:
        with self._lock:
            self._queries += 1
        binding = dict(self.fixed)
        binding[self.variable] = value
        return self._interpreter.condition(self.site, binding)[0]

    @classmethod
    def for_site(cls, program: Program, site: int, seed: int = 0) -> Optional['ConditionalOracle']:
        """
        The oracle of the ``site``-th If, attacking the one input its condition depends on
        (directly or through ``let`` bindings). Other inputs are fixed at values drawn from
        the default generators under ``(seed, site)``.

        :return: the oracle, or None when the condition depends on no input or on several
        """
        variables = condition_inputs(program, site)
        if len(variables) != 1:
            return None
        variable = variables[0]
        others = InputGeneratorSpec.for_program(program, plant_fraction=0.0).sample(
            trial_rng(seed, site))
        del others[variable]
        return cls(program, site, variable, others)


def condition_inputs(program: Program, site: int) -> List[str]:
    """Declared inputs the condition of the ``site``-th If depends on, in declaration order."""
    interpreter = Interpreter(program)
    names = {node.name for node in walk(interpreter.sites[site].cond) if isinstance(node, Var)}
    for let in reversed(interpreter.visible_lets(site)):
        if let.name in names:
            names.discard(let.name)
            names.update(node.name for node in walk(let.value) if isinstance(node, Var))
    return [decl.name for decl in program.inputs if decl.name in names]


class AttackerKind(Enum):
    BINARY_SEARCH = 'BinarySearch'
    EXHAUSTIVE = 'Exhaustive'
    DICTIONARY = 'Dictionary'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class AttackOutcome:
    """
    :param queries: oracle queries spent searching, at most ``budget``
    :param total_queries: all oracle queries, the search plus the one confirming a success
        (binary search confirms its witness during bisection and spends none)
    :param recovered: for binary search the threshold (smallest value at which the oracle
        flips); otherwise the satisfying value found
    :param witness: a satisfying value the oracle has answered true for
    """
    attacker: AttackerKind
    success: bool
    queries: int
    budget: int
    seed: int = 0
    recovered: Optional[Value] = None
    witness: Optional[Value] = None
    total_queries: int = 0

    def serializable(self):
        return {
            'attacker': str(self.attacker),
            'success': self.success,
            'queries': self.queries,
            'total_queries': self.total_queries,
            'budget': self.budget,
            'seed': self.seed,
            'recovered': None if self.recovered is None else format_value(self.recovered),
            'witness': None if self.witness is None else format_value(self.witness),
        }


def _confirmed(o: ConditionalOracle, attacker, queries, budget, seed, recovered, witness,
               start) -> AttackOutcome:
    success = o(witness)
    if not success:
        log.debug('%s: confirmation query failed', attacker)
    return AttackOutcome(attacker, success, queries, budget, seed,
                         recovered if success else None, witness if success else None,
                         o.queries - start)


def binary_search_budget(lo: int, hi: int) -> int:
    return ceil(log2(hi - lo)) + 2


def binary_search_attack(o: ConditionalOracle, lo: int = U64_DOMAIN[0],
                         hi: int = U64_DOMAIN[1]) -> AttackOutcome:
    """
    Find the threshold of a monotone oracle over ``[lo, hi)`` by bisection.

    The oracle is queried at both ends of the domain; unless the answers differ there is no
    threshold to find and the attack fails. Bisection between the ends then locates the
    smallest value at which the answer differs from the one at ``lo``. One of the two values
    bracketing it satisfies the oracle and was already queried, so it is the witness.

    :return: the outcome; at most ``ceil(log2(hi - lo)) + 2`` queries in total
    """
    if not lo < hi:
        raise ValueError(f'Empty domain [{lo}, {hi}).')
    budget = binary_search_budget(lo, hi)
    start = o.queries
    at_lo = o(lo)
    if hi - lo < 2 or o(hi - 1) == at_lo:
        queries = o.queries - start
        log.debug('binary search: answer does not flip over [%d, %d)', lo, hi)
        return AttackOutcome(AttackerKind.BINARY_SEARCH, False, queries, budget,
                             total_queries=queries)
    # o(left) == at_lo and o(right) != at_lo throughout
    left, right = lo, hi - 1
    while right - left > 1:
        mid = (left + right) // 2
        if o(mid) == at_lo:
            left = mid
        else:
            right = mid
    queries = o.queries - start
    witness = left if at_lo else right
    return AttackOutcome(AttackerKind.BINARY_SEARCH, True, queries, budget, 0, right, witness,
                         total_queries=queries)


def _search(o: ConditionalOracle, attacker: AttackerKind, candidates: Iterable[Value],
            budget: int, seed: int, show_progress_bar: bool) -> AttackOutcome:
    if budget < 1:
        raise ValueError(f'Attack budget must be at least 1, got {budget}.')
    start = o.queries
    bounded = itertools.islice(candidates, budget)
    for candidate in tqdm(bounded, total=budget, disable=not show_progress_bar):
        if o(candidate):
            return _confirmed(o, attacker, o.queries - start, budget, seed, candidate,
                              candidate, start)
    queries = o.queries - start
    return AttackOutcome(attacker, False, queries, budget, seed, total_queries=queries)


def exhaustive_attack(o: ConditionalOracle, candidates: Iterable[Value], budget: int,
                      show_progress_bar: bool = False) -> AttackOutcome:
    """
    Query ``candidates`` in enumeration order until one satisfies the oracle or ``budget``
    queries are spent.
    """
    return _search(o, AttackerKind.EXHAUSTIVE, candidates, budget, 0, show_progress_bar)


def dictionary_attack(o: ConditionalOracle, gen: ValueGenerator, budget: int, seed: int,
                      words: Sequence[Value] = (), show_progress_bar: bool = False) \
        -> AttackOutcome:
    """
    Query ``words`` in order, then values drawn from ``gen``, ``budget`` queries at most.
    Reproducible under ``seed``.

    :param o: the oracle
    :param gen: generator of random guesses
    :param budget: maximum number of search queries, at least 1
    :param seed: seed of the random guesses
    :param words: guesses tried before any random one
    """
    rng = np.random.default_rng(seed)
    guesses = itertools.chain(words, iter(lambda: gen.sample(rng), None))
    return _search(o, AttackerKind.DICTIONARY, guesses, budget, seed, show_progress_bar)


def enumerate_strings(min_len: int = 1) -> Iterator[bytes]:
    """All byte strings of length ``min_len``, ``min_len + 1``, ..., each length in byte order."""
    for length in itertools.count(min_len):
        for chars in itertools.product(range(256), repeat=length):
            yield bytes(chars)


def enumerate_domain(value_type: ValueType) -> Iterator[Value]:
    if value_type == ValueType.INT:
        return iter(range(*U64_DOMAIN))
    return enumerate_strings()


@dataclass(frozen=True)
class AttackBudgets:
    """
    :param dictionary: query budget of a dictionary attack
    :param exhaustive: query budget of an exhaustive attack
    :param seed: seed of fixed inputs and random guesses
    :param dictionary_words: guesses a dictionary attack tries first
    """
    dictionary: int = 10 ** 6
    exhaustive: int = 10 ** 6
    seed: int = 0
    dictionary_words: Tuple[Value, ...] = ()

    def __post_init__(self):
        if self.dictionary < 1 or self.exhaustive < 1:
            raise ValueError('Attack budgets must be at least 1.')


class SiteStatus(Enum):
    CRACKED = 'cracked'
    RESISTED = 'resisted'
    INCONCLUSIVE = 'inconclusive'
    NOT_ASSESSED = 'not assessed'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SiteAttack:
    site_index: int
    classification: Classification
    status: SiteStatus
    variable: Optional[str] = None
    outcomes: Tuple[AttackOutcome, ...] = ()
    predicted_queries: Optional[int] = None
    consistent: Optional[bool] = None

    def serializable(self):
        return {
            'site': self.site_index,
            'span': self.classification.site.serializable(),
            'kind': str(self.classification.kind),
            'variable': self.variable,
            'status': str(self.status),
            'predicted_queries': self.predicted_queries,
            'consistent': self.consistent,
            'outcomes': [outcome.serializable() for outcome in self.outcomes],
        }


@dataclass(frozen=True)
class AttackReport:
    sites: Tuple[SiteAttack, ...]
    budgets: AttackBudgets

    @property
    def passed(self) -> bool:
        return all(site.consistent is not False for site in self.sites)

    @property
    def verdict(self) -> str:
        return 'PASS' if self.passed else 'FAIL'

    def serializable(self):
        return {
            'format_version': FORMAT_VERSION,
            'verdict': self.verdict,
            'budgets': {'dictionary': self.budgets.dictionary,
                        'exhaustive': self.budgets.exhaustive, 'seed': self.budgets.seed},
            'sites': [site.serializable() for site in self.sites],
        }


def _guess_length(classification: Classification, program: Program, site: int) -> Optional[int]:
    """Length of string guesses: the needle, window or constant length the program reveals."""
    cond = Interpreter(program).sites[site].cond
    for node in walk(cond):
        if isinstance(node, HashContains):
            return node.window_len
    strings = [c for c in classification.constants if isinstance(c, bytes)]
    if strings:
        return max(len(s) for s in strings)
    literals = [node.value for node in walk(cond) if isinstance(node, StrLit)]
    return max((len(s) for s in literals), default=None)


def _enumeration_size(max_len: int) -> int:
    return sum(256 ** length for length in range(1, max_len + 1))


def _check_correspondence(p: Program, classifications: Sequence[Classification]):
    sites = list(p.if_sites())
    if len(sites) != len(classifications):
        raise ClassificationMismatch(f'Program has {len(sites)} If sites but '
                                     f'{len(classifications)} classifications were given.')
    for idx, (site, c) in enumerate(zip(sites, classifications)):
        if c.site != site.cond.span or c.detail != format_expr(site.cond):
            raise ClassificationMismatch(f'Classification {idx} ({c.detail} at {c.site}) does not '
                                         f'match the condition at {site.cond.span}.')


def attack_report(p: Program, classifications: Sequence[Classification],
                  budgets: AttackBudgets = AttackBudgets(),
                  show_progress_bar: bool = False) -> AttackReport:
    """
    Attack every classified site with the attacker its classification predicts, and check that
    the outcome agrees with the classification.

    Range checks get binary search over the u64 domain; small guessing domains get exhaustive
    enumeration; hardenable and already-hardened sites get a dictionary attack and an
    exhaustive one. The verdict is PASS iff every non-hardenable site is cracked within its
    predicted query count and no hardenable site is cracked. Sites whose prediction exceeds the
    budget are inconclusive, sites without a single attackable input are not assessed; neither
    affects the verdict.

    :param p: a valid program
    :param classifications: ``scan_program(p)``
    :param budgets: query budgets and seed
    :return: per-site outcomes and the verdict
    :raises ClassificationMismatch: if ``classifications`` do not belong to ``p``
    """
    _check_correspondence(p, classifications)
    results = []
    for idx, c in enumerate(classifications):
        result = _attack_site(p, idx, c, budgets, show_progress_bar)
        log.info('site %d at %s (%s): %s', idx, c.site, c.kind, result.status)
        results.append(result)
    report = AttackReport(tuple(results), budgets)
    log.info('attack consistency verdict: %s', report.verdict)
    return report


def _attack_site(p: Program, idx: int, c: Classification, budgets: AttackBudgets,
                 show_progress_bar: bool) -> SiteAttack:
    kind = c.kind
    attackable = kind in (ClassificationKind.RANGE_CHECK, ClassificationKind.SMALL_GUESSING_DOMAIN,
                          ClassificationKind.ALREADY_HARDENED) or kind.hardenable
    o = ConditionalOracle.for_site(p, idx, budgets.seed) if attackable else None
    if o is None:
        return SiteAttack(idx, c, SiteStatus.NOT_ASSESSED)

    if kind == ClassificationKind.RANGE_CHECK:
        if o.value_type != ValueType.INT:
            return SiteAttack(idx, c, SiteStatus.NOT_ASSESSED, o.variable)
        predicted = binary_search_budget(*U64_DOMAIN)
        outcome = binary_search_attack(o)
        cracked = outcome.success and outcome.total_queries <= predicted
        return SiteAttack(idx, c, SiteStatus.CRACKED if cracked else SiteStatus.RESISTED,
                          o.variable, (outcome,), predicted, cracked)

    if kind == ClassificationKind.SMALL_GUESSING_DOMAIN:
        if o.value_type == ValueType.INT:
            return SiteAttack(idx, c, SiteStatus.INCONCLUSIVE, o.variable,
                              predicted_queries=2 ** 64)
        length = _guess_length(c, p, idx) or 1
        predicted = _enumeration_size(length)
        if predicted > budgets.exhaustive:
            return SiteAttack(idx, c, SiteStatus.INCONCLUSIVE, o.variable,
                              predicted_queries=predicted)
        outcome = exhaustive_attack(o, enumerate_strings(), budgets.exhaustive,
                                    show_progress_bar)
        cracked = outcome.success and outcome.queries <= predicted
        return SiteAttack(idx, c, SiteStatus.CRACKED if cracked else SiteStatus.RESISTED,
                          o.variable, (outcome,), predicted, cracked)

    if o.value_type == ValueType.INT:
        gen = IntGenerator()  # type: ValueGenerator
    else:
        length = _guess_length(c, p, idx) or 16
        gen = StringGenerator(min_len=length, max_len=length)
    words = tuple(w for w in budgets.dictionary_words
                  if isinstance(w, bytes) == (o.value_type == ValueType.STRING))
    outcomes = [dictionary_attack(o, gen, budgets.dictionary, budgets.seed, words,
                                  show_progress_bar)]
    if not outcomes[0].success:
        outcomes.append(exhaustive_attack(o, enumerate_domain(o.value_type), budgets.exhaustive,
                                          show_progress_bar))
    cracked = any(outcome.success for outcome in outcomes)
    return SiteAttack(idx, c, SiteStatus.CRACKED if cracked else SiteStatus.RESISTED,
                      o.variable, tuple(outcomes), None, not cracked)
