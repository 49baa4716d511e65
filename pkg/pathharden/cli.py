"""
Command line entry point: ``pathharden <subcommand>``.

Exit status is 0 on success, 1 on an operational failure (divergence found, strict-mode
violation, attack consistency FAIL) and 2 on a usage, parse or validation error. Standard
output carries only program text or, under ``--json``, a single JSON document; logs and
diagnostics go to standard error.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from pathharden import FORMAT_VERSION, __version__
from pathharden.analysis.fitting import fit_cost_scaling, fit_result_to_json, r_squared
from pathharden.attacks import AttackBudgets, attack_report
from pathharden.classifier import ClassifierPolicy, scan_program
from pathharden.crypto_runtime import HashConfig
from pathharden.hardening import (DEFAULT_REFERENCE_LENGTH, HardeningMode, HardeningPolicy,
                                  StrictModeViolation, explain_report, harden_program)
from pathharden.interpreter import (BindingError, InputGeneratorSpec, cost_scaling,
                                    equivalence_check, evaluate)
from pathharden.minilang import ParseError, ValidationError, parse_file, pretty_print
from pathharden.minilang.parser import unescape_bytes
from pathharden.utils import dumps, parse_binding, to_json

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SEED_ENV = 'PATHHARDEN_SEED'


class UsageError(ValueError):
    """A flag value that argparse accepted but that makes no sense."""


def _emit(doc):
    sys.stdout.write(dumps(doc))
    sys.stdout.write('\n')


def _classifier_policy(args) -> ClassifierPolicy:
    return ClassifierPolicy(theta=args.min_entropy_bits, min_needle_len=args.min_needle_len,
                            charset_bits_per_byte=args.charset_bits_per_byte)


def _default_seed() -> int:
    text = os.environ.get(SEED_ENV)
    if text is None:
        return 0
    try:
        return int(text)
    except ValueError:
        raise UsageError(f'{SEED_ENV} must be an integer, got {text!r}.') from None


def _check_syntax(args) -> int:
    program = parse_file(args.file)
    if args.json:
        doc = {'format_version': FORMAT_VERSION, 'ok': True,
               'inputs': {d.name: str(d.type) for d in program.inputs},
               'sites': sum(1 for _ in program.if_sites())}
        if args.format:
            doc['text'] = pretty_print(program)
        _emit(doc)
    elif args.format:
        sys.stdout.write(pretty_print(program))
    else:
        print(f'OK: {args.file}', file=sys.stderr)
    return EXIT_OK


def _classify(args) -> int:
    program = parse_file(args.file)
    classifications = scan_program(program, _classifier_policy(args))
    if args.json:
        _emit({'format_version': FORMAT_VERSION,
               'sites': [c.serializable() for c in classifications]})
    else:
        for c in classifications:
            verdict = 'hardenable' if c.hardenable else 'not hardenable'
            print(f'{args.file}:{c.site}: {c.kind} ({verdict}, {c.guess_cost_bits:g} bits): '
                  f'{c.reason}')
    return EXIT_OK


def _hash_config(args) -> Optional[HashConfig]:
    try:
        HashConfig(truncate_bits=args.truncate_bits)
    except ValueError as e:
        raise UsageError(f'--truncate-bits: {e}') from None
    if args.salt is not None:
        try:
            salt = bytes.fromhex(args.salt)
        except ValueError:
            raise UsageError(f'--salt must be hexadecimal, got {args.salt!r}.') from None
        return HashConfig(salt=salt, truncate_bits=args.truncate_bits)
    if args.no_salt:
        return HashConfig(truncate_bits=args.truncate_bits)
    return None


def _harden(args) -> int:
    program = parse_file(args.file)
    policy = HardeningPolicy(classifier=_classifier_policy(args), hash_config=_hash_config(args),
                             mode=HardeningMode(args.mode), truncate_bits=args.truncate_bits)
    try:
        hardened, report = harden_program(program, policy)
    except StrictModeViolation as e:
        log.error('%s: %s', args.file, e)
        if args.json:
            _emit({'format_version': FORMAT_VERSION, 'error': 'StrictModeViolation',
                   'sites': [c.serializable() for c in e.sites]})
        return EXIT_FAILURE

    text = pretty_print(hardened)
    if args.output:
        with open(args.output, 'w', encoding='utf-8') as f:
            f.write(text)
    if args.report:
        to_json(args.report, report.serializable(args.reference_length))
    if args.json:
        doc = report.serializable(args.reference_length)
        if not args.output:
            doc['program'] = text
        _emit(doc)
    else:
        if not args.output:
            sys.stdout.write(text)
        sys.stderr.write(explain_report(report, args.reference_length))
    return EXIT_OK


def _run(args) -> int:
    program = parse_file(args.file)
    binding = parse_binding(program, args.input)
    verdict, cost = evaluate(program, binding)
    if args.json:
        _emit({'format_version': FORMAT_VERSION, 'verdict': str(verdict),
               'cost': cost.serializable()})
    else:
        print(verdict)
        log.info('steps %d, hash invocations %d, bytes hashed %d', *cost.counters())
    return EXIT_OK


def _scaling_lengths(text: str) -> List[int]:
    try:
        lengths = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise UsageError(f'--scaling-lengths needs comma-separated integers, got {text!r}.') \
            from None
    if len(lengths) < 3 or any(n < 0 for n in lengths):
        raise UsageError('--scaling-lengths needs at least three non-negative lengths.')
    return lengths


def _check(args) -> int:
    if args.trials < 1:
        raise UsageError(f'--trials must be at least 1, got {args.trials}.')
    if args.workers < 1:
        raise UsageError(f'--workers must be at least 1, got {args.workers}.')
    if not 0.0 <= args.plant_fraction <= 1.0:
        raise UsageError(f'--plant-fraction must lie in [0, 1], got {args.plant_fraction}.')
    if args.max_len < 0:
        raise UsageError(f'--max-len must be non-negative, got {args.max_len}.')
    p = parse_file(args.original)
    q = parse_file(args.hardened)
    seed = args.seed if args.seed is not None else _default_seed()
    gen = InputGeneratorSpec.for_program(p, plant_fraction=args.plant_fraction,
                                         max_len=args.max_len)
    report = equivalence_check(p, q, gen, args.trials, seed, show_progress_bar=args.progress,
                               num_workers=args.workers)
    doc = report.serializable()
    if args.scaling_lengths:
        table = cost_scaling(p, q, _scaling_lengths(args.scaling_lengths), seed)
        fit = fit_cost_scaling(table)
        doc['cost_scaling'] = {'table': table.to_dict(orient='records'),
                               'fit': fit_result_to_json(fit)}
    if args.json:
        _emit(doc)
    else:
        print(f'{report.trials} trials, {len(report.divergences)} divergences '
              f'({report.false_positives} false positives, {report.false_negatives} false '
              f'negatives)')
        for name, summary in report.cost_ratio.items():
            print(f'cost ratio {name}: min {summary.min:.3g}, median {summary.median:.3g}, '
                  f'max {summary.max:.3g}')
        if args.scaling_lengths:
            print(f'hardened steps vs length: R^2 = {r_squared(fit):.4f}')
    return EXIT_FAILURE if report.divergences else EXIT_OK


def _attack(args) -> int:
    exhaustive_budget = args.budget if args.exhaustive_budget is None else args.exhaustive_budget
    for flag, value in (('--budget', args.budget), ('--exhaustive-budget', exhaustive_budget)):
        if value < 1:
            raise UsageError(f'{flag} must be at least 1, got {value}.')
    program = parse_file(args.file)
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        words = tuple(unescape_bytes(w) for w in args.word) + tuple(args.int_word)
    except ValueError as e:
        raise UsageError(f'Bad --word: {e}') from None
    budgets = AttackBudgets(dictionary=args.budget,
                            exhaustive=exhaustive_budget, seed=seed, dictionary_words=words)
    classifications = scan_program(program, _classifier_policy(args))
    report = attack_report(program, classifications, budgets, show_progress_bar=args.progress)
    if args.report:
        to_json(args.report, report)
    if args.json:
        _emit(report)
    else:
        for site in report.sites:
            queries = ', '.join(f'{o.attacker} {"cracked" if o.success else "failed"} after '
                                f'{o.total_queries} queries' for o in site.outcomes)
            print(f'{args.file}:{site.classification.site}: {site.classification.kind}: '
                  f'{site.status}{": " + queries if queries else ""}')
        print(report.verdict)
    return EXIT_OK if report.passed else EXIT_FAILURE


def _add_classifier_flags(parser):
    defaults = ClassifierPolicy()
    parser.add_argument('--min-entropy-bits', type=float, default=defaults.theta,
                        help='guess-cost threshold in bits (default %(default)s)')
    parser.add_argument('--min-needle-len', type=int, default=defaults.min_needle_len,
                        help='minimum hardenable needle length in bytes (default %(default)s)')
    parser.add_argument('--charset-bits-per-byte', type=float,
                        default=defaults.charset_bits_per_byte,
                        help='entropy credited per string byte (default %(default)s)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pathharden',
                                     description='Harden conditionals of MiniLang filters '
                                                 'against black-box secret recovery.')
    parser.add_argument('--version', action='version',
                        version=f'pathharden {__version__} (format {FORMAT_VERSION})')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='log more (repeat for debug output)')
    sub = parser.add_subparsers(dest='command', required=True)

    check_syntax = sub.add_parser('check-syntax', help='parse and validate a program')
    check_syntax.add_argument('file')
    check_syntax.add_argument('--format', action='store_true', help='print canonical text')
    check_syntax.set_defaults(handler=_check_syntax)

    classify = sub.add_parser('classify', help='classify every conditional')
    classify.add_argument('file')
    _add_classifier_flags(classify)
    classify.set_defaults(handler=_classify)

    harden = sub.add_parser('harden', help='rewrite hardenable conditionals')
    harden.add_argument('file')
    harden.add_argument('-o', '--output', help='write the hardened program here')
    mode = harden.add_mutually_exclusive_group()
    mode.add_argument('--strict', dest='mode', action='store_const',
                      const=HardeningMode.STRICT.value)
    mode.add_argument('--best-effort', dest='mode', action='store_const',
                      const=HardeningMode.BEST_EFFORT.value)
    salt = harden.add_mutually_exclusive_group()
    salt.add_argument('--salt', help='salt as hex (default: 16 fresh random bytes)')
    salt.add_argument('--no-salt', action='store_true')
    harden.add_argument('--truncate-bits', type=int, default=256)
    harden.add_argument('--report', help='write the hardening report JSON here')
    harden.add_argument('--reference-length', type=int, default=DEFAULT_REFERENCE_LENGTH,
                        help='input length at which to evaluate false-positive bounds')
    _add_classifier_flags(harden)
    harden.set_defaults(handler=_harden, mode=HardeningMode.STRICT.value)

    run = sub.add_parser('run', help='evaluate a program on one input')
    run.add_argument('file')
    run.add_argument('--input', action='append', default=[], metavar='NAME=VALUE')
    run.set_defaults(handler=_run)

    check = sub.add_parser('check', help='sampled equivalence check of two programs')
    check.add_argument('original')
    check.add_argument('hardened')
    check.add_argument('--trials', type=int, default=10000)
    check.add_argument('--seed', type=int, help=f'default: ${SEED_ENV} or 0')
    check.add_argument('--plant-fraction', type=float, default=0.01)
    check.add_argument('--max-len', type=int, default=64)
    check.add_argument('--workers', type=int, default=1)
    check.add_argument('--scaling-lengths', help='comma-separated input lengths')
    check.add_argument('--progress', action='store_true')
    check.set_defaults(handler=_check)

    attack = sub.add_parser('attack', help='black-box attacks on every conditional')
    attack.add_argument('file')
    attack.add_argument('--budget', type=int, default=10 ** 6)
    attack.add_argument('--exhaustive-budget', type=int)
    attack.add_argument('--seed', type=int, help=f'default: ${SEED_ENV} or 0')
    attack.add_argument('--word', action='append', default=[],
                        help='string guess tried first (MiniLang escapes)')
    attack.add_argument('--int-word', action='append', type=int, default=[])
    attack.add_argument('--report', help='write the attack report JSON here')
    attack.add_argument('--progress', action='store_true')
    _add_classifier_flags(attack)
    attack.set_defaults(handler=_attack)

    for subparser in (check_syntax, classify, harden, run, check, attack):
        subparser.add_argument('--json', action='store_true',
                               help='print one JSON document on standard output')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        return args.handler(args)
    except (ParseError, ValidationError) as e:
        errors = getattr(e, 'errors', [e])
        if getattr(args, 'json', False):
            _emit({'format_version': FORMAT_VERSION, 'ok': False,
                   'errors': [err.serializable() for err in errors]})
        for err in errors:
            code = getattr(err, 'code', 'SyntaxError')
            print(f'{getattr(args, "file", "")}:{err.span}: {code}: {err.message}',
                  file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, BindingError, OSError) as e:
        print(f'pathharden: {e}', file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        log.error('%s', e)
        return EXIT_FAILURE
