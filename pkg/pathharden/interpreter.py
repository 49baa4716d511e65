"""
Deterministic execution of MiniLang programs with cost accounting, and the sampled equivalence
check that compares a program with its hardened counterpart.

Cost is measured in interpreter counters rather than wall-clock time:

- ``steps``: statements executed plus expression nodes evaluated, plus one step per window
  position examined by ``contains`` and one per window hashed by ``hash_contains``,
- ``hash_invocations``: SHA-256 computations,
- ``bytes_hashed``: bytes fed to SHA-256, salt included.
"""
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from pathharden import FORMAT_VERSION
from pathharden.crypto_runtime import encode_value, hash_contains, hash_eq
from pathharden.minilang.ast import (U64_MAX, Accept, And, Cmp, CmpOp, Contains, DigestLit, Expr,
                                     HashContains, HashEq, If, IntLit, Length, Let, Not, Or,
                                     Program, Reject, StrLit, Substring, Value, ValueType, Var,
                                     walk)
from pathharden.minilang.printer import escape_bytes

log = logging.getLogger(__name__)

InputBinding = Mapping[str, Value]

COST_COUNTERS = ('steps', 'hash_invocations', 'bytes_hashed')


class TypeFault(ValueError):
    """A runtime type error; only reachable for programs that were never validated."""


class BindingError(ValueError):
    """An input binding does not match the program's declarations."""


class GeneratorMismatch(ValueError):
    """An input generator's shape disagrees with the program's declarations."""


class Verdict(Enum):
    ACCEPT = 'accept'
    REJECT = 'reject'

    def __str__(self):
        return self.value


@dataclass
class SiteCost:
    """Cost spent evaluating the condition of one If site."""
    evaluations: int = 0
    steps: int = 0
    hash_invocations: int = 0
    bytes_hashed: int = 0


@dataclass
class CostReport:
    """
    Counters for one evaluation. ``per_site`` has one entry per If site in source order; sites
    that were never reached have zero evaluations.
    """
    steps: int = 0
    hash_invocations: int = 0
    bytes_hashed: int = 0
    per_site: List[SiteCost] = field(default_factory=list)

    def counters(self) -> Tuple[int, int, int]:
        return self.steps, self.hash_invocations, self.bytes_hashed

    def serializable(self):
        return {
            'steps': self.steps,
            'hash_invocations': self.hash_invocations,
            'bytes_hashed': self.bytes_hashed,
            'per_site': [vars(site) for site in self.per_site],
        }


def check_binding(program: Program, binding: InputBinding):
    """
    :raises BindingError: unless ``binding`` covers every declared input exactly once with a
        value of the declared type
    """
    declared = program.input_types()
    missing = [name for name in declared if name not in binding]
    extra = [name for name in binding if name not in declared]
    if missing or extra:
        raise BindingError(f'Binding does not match declarations: missing {missing}, '
                           f'unexpected {extra}.')
    for name, value_type in declared.items():
        value = binding[name]
        if value_type == ValueType.INT:
            if not _is_int(value) or not 0 <= value <= U64_MAX:
                raise BindingError(f"Input '{name}' needs an unsigned 64-bit integer, "
                                   f"got {value!r}.")
        elif not isinstance(value, bytes):
            raise BindingError(f"Input '{name}' needs a byte string, got {value!r}.")


def _is_int(value) -> bool:
    return isinstance(value, int) and type(value) is not bool


class Interpreter:
    """
    Evaluates one program many times. Site bookkeeping (the source-order index of every If and
    the ``let`` statements lexically visible at it) is computed once.

    :param program: a valid program
    """

    def __init__(self, program: Program):
        self.program = program
        self.sites = list(program.if_sites())  # type: List[If]
        self._site_index = {id(site): idx for idx, site in enumerate(self.sites)}
        self._site_lets = {}  # type: Dict[int, Tuple[Let, ...]]
        self._collect_scopes(program.body, ())
        self._eval_by_type = {
            IntLit: self._literal,
            StrLit: self._literal,
            Var: self._var,
            Cmp: self._cmp,
            And: self._and,
            Or: self._or,
            Not: self._not,
            Contains: self._contains,
            Length: self._length,
            Substring: self._substring,
            HashEq: self._hash_eq,
            HashContains: self._hash_contains,
        }  # type: Dict[type, Callable]

    def _collect_scopes(self, block, visible: Tuple[Let, ...]):
        lets = list(visible)
        for stmt in block:
            if isinstance(stmt, Let):
                lets.append(stmt)
            elif isinstance(stmt, If):
                self._site_lets[self._site_index[id(stmt)]] = tuple(lets)
                self._collect_scopes(stmt.then, tuple(lets))
                if stmt.orelse is not None:
                    self._collect_scopes(stmt.orelse, tuple(lets))

    def visible_lets(self, site: int) -> Tuple[Let, ...]:
        """The let statements in scope at the condition of the ``site``-th If, in order."""
        return self._site_lets[site]

    def _new_cost(self) -> CostReport:
        return CostReport(per_site=[SiteCost() for _ in self.sites])

    def evaluate(self, binding: InputBinding) -> Tuple[Verdict, CostReport]:
        """
        Run the program on ``binding``.

        :param binding: a value for every declared input
        :return: the verdict and the cost of the run
        """
        check_binding(self.program, binding)
        cost = self._new_cost()
        verdict = self._exec_block(self.program.body, dict(binding), cost)
        return verdict if verdict is not None else Verdict.ACCEPT, cost

    def condition(self, site: int, binding: InputBinding) -> Tuple[bool, CostReport]:
        """
        Evaluate only the condition of the ``site``-th If, after the ``let`` bindings lexically
        visible at it. Enclosing conditions are not evaluated.

        :param site: source-order index of the If
        :param binding: a value for every declared input
        :return: the condition's value and the cost of computing it
        """
        check_binding(self.program, binding)
        cost = self._new_cost()
        env = dict(binding)
        for let in self._site_lets[site]:
            env[let.name] = self.eval(let.value, env, cost)
        return self._site_condition(self.sites[site], site, env, cost), cost

    def _site_condition(self, stmt: If, idx: int, env, cost: CostReport) -> bool:
        before = cost.counters()
        value = self.eval(stmt.cond, env, cost)
        site = cost.per_site[idx]
        site.evaluations += 1
        site.steps += cost.steps - before[0]
        site.hash_invocations += cost.hash_invocations - before[1]
        site.bytes_hashed += cost.bytes_hashed - before[2]
        if type(value) is not bool:
            raise TypeFault(f'{stmt.span}: if condition evaluated to {value!r}')
        return value

    def _exec_block(self, block, env, cost: CostReport) -> Optional[Verdict]:
        for stmt in block:
            cost.steps += 1
            if isinstance(stmt, Let):
                env[stmt.name] = self.eval(stmt.value, env, cost)
            elif isinstance(stmt, If):
                idx = self._site_index[id(stmt)]
                if self._site_condition(stmt, idx, env, cost):
                    verdict = self._exec_block(stmt.then, dict(env), cost)
                elif stmt.orelse is not None:
                    verdict = self._exec_block(stmt.orelse, dict(env), cost)
                else:
                    verdict = None
                if verdict is not None:
                    return verdict
            elif isinstance(stmt, Accept):
                return Verdict.ACCEPT
            elif isinstance(stmt, Reject):
                return Verdict.REJECT
            else:
                raise TypeFault(f'Not a MiniLang statement: {stmt!r}')
        return None

    def eval(self, expr: Expr, env, cost: CostReport):
        cost.steps += 1
        try:
            handler = self._eval_by_type[type(expr)]
        except KeyError:
            raise TypeFault(f'{expr.span}: cannot evaluate {type(expr).__name__}') from None
        return handler(expr, env, cost)

    def _string(self, expr: Expr, env, cost: CostReport) -> bytes:
        value = self.eval(expr, env, cost)
        if not isinstance(value, bytes):
            raise TypeFault(f'{expr.span}: expected a string, got {value!r}')
        return value

    def _int(self, expr: Expr, env, cost: CostReport) -> int:
        value = self.eval(expr, env, cost)
        if not _is_int(value):
            raise TypeFault(f'{expr.span}: expected an int, got {value!r}')
        return value

    def _bool(self, expr: Expr, env, cost: CostReport) -> bool:
        value = self.eval(expr, env, cost)
        if type(value) is not bool:
            raise TypeFault(f'{expr.span}: expected a bool, got {value!r}')
        return value

    def _literal(self, expr, env, cost):
        return expr.value

    def _var(self, expr: Var, env, cost):
        try:
            return env[expr.name]
        except KeyError:
            raise TypeFault(f"{expr.span}: '{expr.name}' is unbound") from None

    def _cmp(self, expr: Cmp, env, cost):
        lhs = self.eval(expr.lhs, env, cost)
        rhs = self.eval(expr.rhs, env, cost)
        if not ((_is_int(lhs) and _is_int(rhs))
                or (isinstance(lhs, bytes) and isinstance(rhs, bytes))):
            raise TypeFault(f"{expr.span}: cannot compare {lhs!r} {expr.op} {rhs!r}")
        if expr.op == CmpOp.EQ:
            return lhs == rhs
        if expr.op == CmpOp.NE:
            return lhs != rhs
        if expr.op == CmpOp.LT:
            return lhs < rhs
        if expr.op == CmpOp.LE:
            return lhs <= rhs
        if expr.op == CmpOp.GT:
            return lhs > rhs
        return lhs >= rhs

    def _and(self, expr: And, env, cost):
        return self._bool(expr.lhs, env, cost) and self._bool(expr.rhs, env, cost)

    def _or(self, expr: Or, env, cost):
        return self._bool(expr.lhs, env, cost) or self._bool(expr.rhs, env, cost)

    def _not(self, expr: Not, env, cost):
        return not self._bool(expr.operand, env, cost)

    def _contains(self, expr: Contains, env, cost):
        haystack = self._string(expr.haystack, env, cost)
        needle = self._string(expr.needle, env, cost)
        at = haystack.find(needle)
        # charged as a naive scan: one step per window position examined
        if at >= 0:
            cost.steps += at + 1
            return True
        cost.steps += max(len(haystack) - len(needle) + 1, 0)
        return False

    def _length(self, expr: Length, env, cost):
        return len(self._string(expr.operand, env, cost))

    def _substring(self, expr: Substring, env, cost):
        value = self._string(expr.operand, env, cost)
        start = self._int(expr.start, env, cost)
        length = self._int(expr.length, env, cost)
        if start + length > len(value):
            return b''
        return value[start:start + length]

    def _digest(self, expr: Expr):
        if not isinstance(expr, DigestLit):
            raise TypeFault(f'{expr.span}: expected a digest literal')
        return expr.digest

    def _hash_eq(self, expr: HashEq, env, cost):
        value = self.eval(expr.operand, env, cost)
        if not (_is_int(value) or isinstance(value, bytes)):
            raise TypeFault(f'{expr.span}: cannot hash {value!r}')
        target = self._digest(expr.digest)
        cost.hash_invocations += 1
        cost.bytes_hashed += len(target.config.salt_bytes) + len(encode_value(value))
        return hash_eq(value, target)

    def _hash_contains(self, expr: HashContains, env, cost):
        haystack = self._string(expr.haystack, env, cost)
        target = self._digest(expr.digest)
        found, windows = hash_contains(haystack, target, expr.window_len)
        cost.steps += windows
        cost.hash_invocations += windows
        cost.bytes_hashed += windows * (len(target.config.salt_bytes) + 1 + expr.window_len)
        return found


def evaluate(program: Program, binding: InputBinding) -> Tuple[Verdict, CostReport]:
    """
    Run ``program`` on ``binding``; falling off the end of the body accepts.

    :param program: a valid program
    :param binding: a value for every declared input
    :return: the verdict and the cost report of the run
    """
    return Interpreter(program).evaluate(binding)


# Input generation

@dataclass(frozen=True)
class IntGenerator:
    """
    Uniform unsigned integers in ``[low, high)``; with probability ``plant_fraction`` one of
    ``planted`` instead.
    """
    low: int = 0
    high: int = 2 ** 64
    planted: Tuple[int, ...] = ()
    plant_fraction: float = 0.0

    value_type = ValueType.INT

    def __post_init__(self):
        if not 0 <= self.low < self.high <= 2 ** 64:
            raise ValueError(f'Need 0 <= low < high <= 2^64, got [{self.low}, {self.high}).')
        if not 0.0 <= self.plant_fraction <= 1.0:
            raise ValueError('plant_fraction must lie in [0, 1].')

    def sample(self, rng: np.random.Generator) -> int:
        if self.planted and rng.random() < self.plant_fraction:
            return int(self.planted[int(rng.integers(len(self.planted)))])
        span = self.high - self.low
        if span == 2 ** 64:
            return int.from_bytes(rng.bytes(8), 'big')
        return self.low + int(rng.integers(0, span, dtype=np.uint64))

    @property
    def can_plant(self) -> bool:
        return bool(self.planted) and self.plant_fraction > 0


@dataclass(frozen=True)
class StringGenerator:
    """
    Random byte strings with length uniform in ``[min_len, max_len]``, drawn from ``alphabet``
    (all 256 byte values if None). With probability ``plant_fraction`` one of ``planted`` is
    embedded at a random position, or one of the ``anchored`` ``(offset, value)`` pairs is
    written at its offset. The string grows if it is too short to hold the plant.
    """
    min_len: int = 0
    max_len: int = 64
    alphabet: Optional[bytes] = None
    planted: Tuple[bytes, ...] = ()
    plant_fraction: float = 0.0
    anchored: Tuple[Tuple[int, bytes], ...] = ()

    value_type = ValueType.STRING

    def __post_init__(self):
        if not 0 <= self.min_len <= self.max_len:
            raise ValueError(f'Need 0 <= min_len <= max_len, got {self.min_len}, {self.max_len}.')
        if self.alphabet is not None and len(self.alphabet) == 0:
            raise ValueError('alphabet must not be empty.')
        if any(offset < 0 for offset, _ in self.anchored):
            raise ValueError('anchored offsets must be non-negative.')
        if not 0.0 <= self.plant_fraction <= 1.0:
            raise ValueError('plant_fraction must lie in [0, 1].')

    def _random_bytes(self, rng: np.random.Generator, n: int) -> bytes:
        if self.alphabet is None:
            return rng.bytes(n)
        symbols = np.frombuffer(self.alphabet, dtype=np.uint8)
        return rng.choice(symbols, size=n).tobytes()

    def sample(self, rng: np.random.Generator) -> bytes:
        length = int(rng.integers(self.min_len, self.max_len + 1))
        n_plants = len(self.planted) + len(self.anchored)
        if n_plants and rng.random() < self.plant_fraction:
            pick = int(rng.integers(n_plants))
            if pick < len(self.planted):
                needle = self.planted[pick]
                body = self._random_bytes(rng, max(length - len(needle), 0))
                at = int(rng.integers(0, len(body) + 1))
                return body[:at] + needle + body[at:]
            offset, value = self.anchored[pick - len(self.planted)]
            body = self._random_bytes(rng, max(length, offset + len(value)))
            return body[:offset] + value + body[offset + len(value):]
        return self._random_bytes(rng, length)

    @property
    def can_plant(self) -> bool:
        return bool(self.planted or self.anchored) and self.plant_fraction > 0


ValueGenerator = Union[IntGenerator, StringGenerator]


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """The random generator of one trial, derived from (seed, trial index) only."""
    return np.random.default_rng([seed, trial])


@dataclass(frozen=True)
class InputGeneratorSpec:
    """
    One value generator per declared input.

    :param generators: generator for each input name
    """
    generators: Mapping[str, ValueGenerator]

    def check(self, program: Program):
        """:raises GeneratorMismatch: unless the generators match the declarations"""
        declared = program.input_types()
        if set(declared) != set(self.generators):
            raise GeneratorMismatch(f'Generator covers {sorted(self.generators)} but the program '
                                    f'declares {sorted(declared)}.')
        for name, value_type in declared.items():
            if self.generators[name].value_type != value_type:
                raise GeneratorMismatch(f"Input '{name}' is {value_type} but its generator "
                                        f"produces {self.generators[name].value_type}.")

    @property
    def plants(self) -> bool:
        return any(g.can_plant for g in self.generators.values())

    def sample(self, rng: np.random.Generator) -> Dict[str, Value]:
        return {name: gen.sample(rng) for name, gen in self.generators.items()}

    @classmethod
    def for_program(cls, program: Program, plant_fraction: float = 0.01, min_len: int = 0,
                    max_len: int = 64) -> 'InputGeneratorSpec':
        """
        Default generators for ``program``'s inputs, planting the constants its conditions
        compare each input against in a ``plant_fraction`` of samples: whole values, the values
        either side of an integer bound, embedded needles for ``contains``, and values written
        at their offset when the comparison is against a let-bound ``substring`` of the input
        with literal bounds.
        """
        planted = {decl.name: [] for decl in program.inputs}
        anchored = {decl.name: [] for decl in program.inputs}
        interp = Interpreter(program)
        for idx, site in enumerate(interp.sites):
            lets = {let.name: let.value for let in interp.visible_lets(idx)}
            for node in walk(site.cond):
                for name, offset, value in _compared_constants(node, lets):
                    target = planted if offset is None else anchored
                    entry = value if offset is None else (offset, value)
                    if name in target and entry not in target[name]:
                        target[name].append(entry)
        generators = {}
        for decl in program.inputs:
            values = tuple(planted[decl.name])
            at_offsets = tuple(anchored[decl.name])
            fraction = plant_fraction if values or at_offsets else 0.0
            if decl.type == ValueType.INT:
                generators[decl.name] = IntGenerator(planted=values, plant_fraction=fraction)
            else:
                generators[decl.name] = StringGenerator(min_len=min_len, max_len=max_len,
                                                        planted=values, plant_fraction=fraction,
                                                        anchored=at_offsets)
        return cls(generators)


def _resolve_alias(expr: Expr, lets: Mapping[str, Expr]) -> Expr:
    while isinstance(expr, Var) and expr.name in lets:
        expr = lets[expr.name]
    return expr


def _compared_constants(node: Expr, lets: Mapping[str, Expr]):
    """Yields (input name, offset or None, constant) for each value worth planting."""
    if isinstance(node, Cmp):
        for operand, lit in ((node.lhs, node.rhs), (node.rhs, node.lhs)):
            if not isinstance(lit, (IntLit, StrLit)):
                continue
            target = _resolve_alias(operand, lets)
            if isinstance(target, Var):
                if node.op in (CmpOp.EQ, CmpOp.NE):
                    yield target.name, None, lit.value
                elif isinstance(lit, IntLit):
                    # both sides of an integer bound
                    for value in (lit.value - 1, lit.value, lit.value + 1):
                        if 0 <= value <= U64_MAX:
                            yield target.name, None, value
            elif (isinstance(target, Substring) and isinstance(lit, StrLit)
                  and node.op in (CmpOp.EQ, CmpOp.NE)):
                source = _resolve_alias(target.operand, lets)
                if (isinstance(source, Var) and isinstance(target.start, IntLit)
                        and isinstance(target.length, IntLit)
                        and target.length.value == len(lit.value)):
                    yield source.name, target.start.value, lit.value
    elif isinstance(node, Contains) and isinstance(node.needle, StrLit):
        haystack = _resolve_alias(node.haystack, lets)
        if isinstance(haystack, Var):
            yield haystack.name, None, node.needle.value


# Equivalence checking

def format_value(value: Value):
    """JSON form of an input value: ints as numbers, strings in MiniLang escape syntax."""
    if isinstance(value, bytes):
        return escape_bytes(value)
    return int(value)


@dataclass(frozen=True)
class Divergence:
    trial: int
    inputs: Dict[str, Value]
    verdict_p: Verdict
    verdict_q: Verdict

    @property
    def is_false_positive(self) -> bool:
        """q rejects what p accepts: the direction a digest collision produces."""
        return self.verdict_p == Verdict.ACCEPT and self.verdict_q == Verdict.REJECT

    def serializable(self):
        return {
            'trial': self.trial,
            'inputs': {name: format_value(value) for name, value in self.inputs.items()},
            'verdict_p': str(self.verdict_p),
            'verdict_q': str(self.verdict_q),
        }


def _finite_or_none(x: float) -> Optional[float]:
    # inf is not valid JSON
    return float(x) if np.isfinite(x) else None


@dataclass(frozen=True)
class RatioSummary:
    min: float
    median: float
    max: float

    @classmethod
    def of(cls, ratios: np.ndarray) -> 'RatioSummary':
        return cls(float(np.min(ratios)), float(np.median(ratios)), float(np.max(ratios)))

    def serializable(self):
        return {'min': _finite_or_none(self.min), 'median': _finite_or_none(self.median),
                'max': _finite_or_none(self.max)}


@dataclass(frozen=True)
class DivergenceReport:
    """
    Outcome of :py:func:`equivalence_check`: every input on which the verdicts differ and the
    per-counter distribution of q's cost over p's cost.
    """
    trials: int
    seed: int
    divergences: Tuple[Divergence, ...]
    cost_ratio: Mapping[str, RatioSummary]
    total_cost_p: Mapping[str, int]
    total_cost_q: Mapping[str, int]

    @property
    def false_positives(self) -> int:
        return sum(d.is_false_positive for d in self.divergences)

    @property
    def false_negatives(self) -> int:
        return sum(not d.is_false_positive for d in self.divergences)

    def serializable(self):
        return {
            'format_version': FORMAT_VERSION,
            'trials': self.trials,
            'seed': self.seed,
            'divergences': [d.serializable() for d in self.divergences],
            'false_positives': self.false_positives,
            'false_negatives': self.false_negatives,
            'cost_ratio': {k: v.serializable() for k, v in self.cost_ratio.items()},
            'total_cost_p': dict(self.total_cost_p),
            'total_cost_q': dict(self.total_cost_q),
        }


def _ratio(p_cost: int, q_cost: int) -> float:
    if p_cost == 0:
        return 1.0 if q_cost == 0 else np.inf
    return q_cost / p_cost


def _run_trials(p: Program, q: Program, gen: InputGeneratorSpec, seed: int,
                trial_indices: Sequence[int], show_progress_bar: bool = False):
    interp_p, interp_q = Interpreter(p), Interpreter(q)
    divergences = []
    ratios = np.empty((len(trial_indices), len(COST_COUNTERS)))
    totals_p = np.zeros(len(COST_COUNTERS), dtype=np.int64)
    totals_q = np.zeros(len(COST_COUNTERS), dtype=np.int64)
    for row, trial in enumerate(tqdm(trial_indices, disable=not show_progress_bar)):
        inputs = gen.sample(trial_rng(seed, trial))
        verdict_p, cost_p = interp_p.evaluate(inputs)
        verdict_q, cost_q = interp_q.evaluate(inputs)
        if verdict_p != verdict_q:
            log.debug('trial %d diverges: p %s, q %s', trial, verdict_p, verdict_q)
            divergences.append(Divergence(trial, inputs, verdict_p, verdict_q))
        counters_p, counters_q = cost_p.counters(), cost_q.counters()
        ratios[row] = [_ratio(a, b) for a, b in zip(counters_p, counters_q)]
        totals_p += counters_p
        totals_q += counters_q
    return divergences, ratios, totals_p, totals_q


def equivalence_check(p: Program, q: Program, gen: InputGeneratorSpec, trials: int, seed: int,
                      show_progress_bar: bool = False, num_workers: int = 1) -> DivergenceReport:
    """
    Run ``p`` and ``q`` on ``trials`` pseudo-random inputs and report every input on which their
    verdicts differ.

    The inputs of trial ``i`` depend only on ``(seed, i)``, so the report is identical for any
    ``num_workers``.

    :param p: the reference program, typically the unhardened filter
    :param q: the program under test, typically ``harden_program(p)``
    :param gen: input generators matching the (shared) declarations
    :param trials: number of inputs to try, at least 1
    :param seed: seed of the trial inputs
    :param show_progress_bar: displays a progress bar via tqdm if true.
    :param num_workers: number of worker processes; 1 runs in this process
    :return: the divergence report
    :raises GeneratorMismatch: if ``gen`` does not match the declarations
    """
    if p.input_types() != q.input_types():
        raise ValueError('Programs must declare identical inputs to be compared.')
    if trials < 1:
        raise ValueError(f'Need at least one trial, got {trials}.')
    gen.check(p)
    if not gen.plants:
        warnings.warn('The input generator plants no secret values; the reject path of a '
                      'high-entropy condition is unlikely to be exercised.')

    if num_workers > 1:
        chunks = [list(range(start, trials, num_workers)) for start in range(num_workers)]
        chunks = [chunk for chunk in chunks if chunk]
        with ProcessPoolExecutor(max_workers=num_workers) as pool:
            results = list(pool.map(_run_trials, [p] * len(chunks), [q] * len(chunks),
                                    [gen] * len(chunks), [seed] * len(chunks), chunks))
    else:
        results = [_run_trials(p, q, gen, seed, range(trials), show_progress_bar)]

    divergences = sorted((d for result in results for d in result[0]), key=lambda d: d.trial)
    ratios = np.concatenate([result[1] for result in results])
    totals_p = sum(result[2] for result in results)
    totals_q = sum(result[3] for result in results)
    report = DivergenceReport(
        trials=trials,
        seed=seed,
        divergences=tuple(divergences),
        cost_ratio={name: RatioSummary.of(ratios[:, col])
                    for col, name in enumerate(COST_COUNTERS)},
        total_cost_p={name: int(v) for name, v in zip(COST_COUNTERS, totals_p)},
        total_cost_q={name: int(v) for name, v in zip(COST_COUNTERS, totals_q)},
    )
    log.info('equivalence check: %d trials, %d divergences (%d false positives)', trials,
             len(report.divergences), report.false_positives)
    return report


def cost_scaling(p: Program, q: Program, lengths: Sequence[int], seed: int = 0,
                 string_input: Optional[str] = None, repeats: int = 3) -> pd.DataFrame:
    """
    Measure how the cost of ``p`` and ``q`` grows with the length of one string input.

    For each length, ``repeats`` random inputs (no planted secrets) of exactly that length are
    run through both programs; other inputs come from the default generators.

    :param p: the reference program
    :param q: the program under test
    :param lengths: input lengths in bytes
    :param seed: seed of the random inputs
    :param string_input: the string input to vary; defaults to the first declared one
    :param repeats: number of random inputs averaged per length
    :return: a DataFrame with one row per length: mean counters of p and q and the ratio of
        q's steps to p's
    """
    if string_input is None:
        strings = [d.name for d in p.inputs if d.type == ValueType.STRING]
        if not strings:
            raise ValueError('Program declares no string input to scale.')
        string_input = strings[0]
    defaults = InputGeneratorSpec.for_program(p, plant_fraction=0.0)
    interp_p, interp_q = Interpreter(p), Interpreter(q)
    rows = []
    for n in lengths:
        scaled = dict(defaults.generators)
        scaled[string_input] = StringGenerator(min_len=n, max_len=n)
        gen = InputGeneratorSpec(scaled)
        costs_p, costs_q = [], []
        for rep in range(repeats):
            inputs = gen.sample(trial_rng(seed, n * repeats + rep))
            costs_p.append(interp_p.evaluate(inputs)[1].counters())
            costs_q.append(interp_q.evaluate(inputs)[1].counters())
        mean_p, mean_q = np.mean(costs_p, axis=0), np.mean(costs_q, axis=0)
        row = {'length': n}
        row.update({f'{name}_p': v for name, v in zip(COST_COUNTERS, mean_p)})
        row.update({f'{name}_q': v for name, v in zip(COST_COUNTERS, mean_q)})
        row['steps_ratio'] = _ratio(mean_p[0], mean_q[0])
        rows.append(row)
    return pd.DataFrame(rows)
