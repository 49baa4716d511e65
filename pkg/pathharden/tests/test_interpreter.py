import numpy as np
import pandas as pd
import pytest

from pathharden.crypto_runtime import HashConfig
from pathharden.hardening import harden_program, HardeningPolicy
from pathharden.interpreter import (BindingError, CostReport, GeneratorMismatch,
                                    InputGeneratorSpec, IntGenerator, Interpreter, StringGenerator,
                                    TypeFault, Verdict, cost_scaling, equivalence_check, evaluate,
                                    trial_rng)
from pathharden.minilang import parse
from pathharden.tests.conftest import load_corpus

POINT_FILTER = parse('input x: int; if (x == 7) { reject; } accept;')
SECRET = b'2250738585072011'


def test_point_filter():
    assert evaluate(POINT_FILTER, {'x': 7})[0] == Verdict.REJECT
    assert evaluate(POINT_FILTER, {'x': 8})[0] == Verdict.ACCEPT


def test_php_filter(php_filter):
    verdict, cost = evaluate(php_filter, {'req': b'GET /?n=2.2250738585072011e-308 HTTP/1.1'})
    assert verdict == Verdict.REJECT
    verdict, cost = evaluate(php_filter, {'req': b'hello'})
    assert verdict == Verdict.ACCEPT
    assert cost.hash_invocations == 0
    assert cost.bytes_hashed == 0


def test_fall_through_accepts():
    assert evaluate(parse(''), {})[0] == Verdict.ACCEPT
    program = parse('input x: int; if (x == 1) { let a = 2; }')
    assert evaluate(program, {'x': 1})[0] == Verdict.ACCEPT


def test_step_counts():
    # if, cmp, var, literal, then the terminating statement
    assert evaluate(POINT_FILTER, {'x': 8})[1].steps == 5
    assert evaluate(POINT_FILTER, {'x': 7})[1].steps == 5


def test_contains_charges_window_positions():
    program = parse('input s: string; if (contains(s, "ab")) { reject; }')
    # four expression nodes and the if, then one step per position examined
    assert evaluate(program, {'s': b'xxab'})[1].steps == 1 + 3 + 3 + 1
    assert evaluate(program, {'s': b'xxxx'})[1].steps == 1 + 3 + 3
    assert evaluate(program, {'s': b'a'})[1].steps == 1 + 3 + 0


def test_hash_cost_accounting(php_filter):
    salt = b'\x00' * 16
    hardened, _ = harden_program(php_filter, HardeningPolicy(hash_config=HashConfig(salt=salt)))
    req = b'z' * 100
    verdict, cost = evaluate(hardened, {'req': req})
    windows = len(req) - len(SECRET) + 1
    assert verdict == Verdict.ACCEPT
    assert cost.hash_invocations == windows
    assert cost.bytes_hashed == windows * (len(salt) + 1 + len(SECRET))
    assert cost.per_site[0].hash_invocations == windows

    program = parse('input x: int; if (hash_eq(x, digest"sha256/t8/s0102:00")) { reject; }')
    cost = evaluate(program, {'x': 5})[1]
    assert cost.hash_invocations == 1
    assert cost.bytes_hashed == 2 + 9


def test_per_site_costs():
    program = parse('''
        input x: int;
        input s: string;
        if (x == 1) {
            if (contains(s, "abc")) { reject; }
        }
        if (length(s) > 3) { reject; }
    ''')
    cost = evaluate(program, {'x': 2, 's': b'abcd'})[1]
    assert [site.evaluations for site in cost.per_site] == [1, 0, 1]
    assert cost.per_site[1].steps == 0
    assert sum(site.steps for site in cost.per_site) < cost.steps


def test_substring_is_total():
    program = parse('input s: string; let p = substring(s, 2, 5); if (p == "") { reject; }')
    assert evaluate(program, {'s': b'abc'})[0] == Verdict.REJECT
    assert evaluate(program, {'s': b'abcdefg'})[0] == Verdict.ACCEPT
    program = parse('input s: string; if (substring(s, 1, 2) == "bc") { reject; }')
    assert evaluate(program, {'s': b'abc'})[0] == Verdict.REJECT


def test_string_order_is_bytewise():
    program = parse('input s: string; if (s < "b") { reject; }')
    assert evaluate(program, {'s': b'a\xff'})[0] == Verdict.REJECT
    assert evaluate(program, {'s': b'b'})[0] == Verdict.ACCEPT


def test_determinism(php_filter):
    binding = {'req': b'abc2250738585072011'}
    assert evaluate(php_filter, binding) == evaluate(php_filter, binding)


@pytest.mark.parametrize('binding', [{}, {'x': 1, 'y': 2}, {'x': b'7'}, {'x': True},
                                     {'x': 2 ** 64}, {'x': -1}, {'x': np.uint64(7)}])
def test_binding_errors(binding):
    with pytest.raises(BindingError):
        evaluate(POINT_FILTER, binding)


def test_type_fault_on_unvalidated_program():
    program = parse('input x: int; if (length(x) == 1) { reject; }', check=False)
    with pytest.raises(TypeFault):
        evaluate(program, {'x': 1})


def test_condition_ignores_enclosing_branches():
    program = parse('''
        input x: int;
        let limit = 1000;
        if (x == 1) {
            reject;
        } else {
            if (x < limit) { accept; }
        }
    ''')
    interpreter = Interpreter(program)
    assert [let.name for let in interpreter.visible_lets(1)] == ['limit']
    assert interpreter.condition(1, {'x': 1})[0]
    assert not interpreter.condition(1, {'x': 5000})[0]
    value, cost = interpreter.condition(0, {'x': 1})
    assert value and cost.per_site[0].evaluations == 1


def test_generators_are_reproducible():
    gen = InputGeneratorSpec({'x': IntGenerator(), 's': StringGenerator(max_len=32)})
    assert gen.sample(trial_rng(3, 7)) == gen.sample(trial_rng(3, 7))
    assert gen.sample(trial_rng(3, 7)) != gen.sample(trial_rng(3, 8))


def test_string_generator():
    rng = np.random.default_rng(0)
    gen = StringGenerator(min_len=4, max_len=10, alphabet=b'xy')
    for _ in range(50):
        s = gen.sample(rng)
        assert 4 <= len(s) <= 10
        assert set(s) <= set(b'xy')

    planted = StringGenerator(max_len=8, planted=(SECRET,), plant_fraction=1.0)
    for _ in range(50):
        assert SECRET in planted.sample(rng)


def test_int_generator():
    rng = np.random.default_rng(0)
    gen = IntGenerator(low=10, high=20)
    assert all(10 <= gen.sample(rng) < 20 for _ in range(100))
    assert IntGenerator(planted=(7,), plant_fraction=1.0).sample(rng) == 7
    with pytest.raises(ValueError):
        IntGenerator(low=5, high=5)
    with pytest.raises(ValueError):
        StringGenerator(plant_fraction=1.5)


def test_for_program_plants_constants(php_filter):
    gen = InputGeneratorSpec.for_program(php_filter, plant_fraction=0.5)
    assert gen.generators['req'].planted == (SECRET,)
    assert gen.plants
    gen = InputGeneratorSpec.for_program(POINT_FILTER)
    assert gen.generators['x'].planted == (7,)


def test_string_generator_anchored_plants():
    rng = np.random.default_rng(0)
    gen = StringGenerator(max_len=4, anchored=((3, b'KEY'),), plant_fraction=1.0)
    assert gen.can_plant
    for _ in range(50):
        s = gen.sample(rng)
        assert len(s) >= 6
        assert s[3:6] == b'KEY'
    assert not StringGenerator(anchored=((0, b'a'),)).can_plant


def test_for_program_plants_through_lets():
    program = load_corpus('multi_site.ml1')
    gen = InputGeneratorSpec.for_program(program, plant_fraction=0.3)
    assert gen.generators['cmd'].anchored == ((0, b'DEBUG-UNLOCK'),)
    assert gen.generators['cmd'].planted == (b'\x00\x01\x02\x03\x04\x05\x06\x07\xff',)
    assert gen.generators['uid'].planted == (13835058055282163729,)

    interp = Interpreter(program)
    evaluations = [0, 0, 0]
    verdicts = set()
    for trial in range(2000):
        verdict, cost = interp.evaluate(gen.sample(trial_rng(0, trial)))
        verdicts.add(verdict)
        for idx, site in enumerate(cost.per_site):
            evaluations[idx] += site.evaluations
    assert all(count > 0 for count in evaluations)
    assert verdicts == {Verdict.ACCEPT, Verdict.REJECT}


def test_for_program_follows_let_aliases():
    program = parse('input s: string; let t = s; let head = substring(t, 2, 3); '
                    'if (head == "abc" || t == "whole") { reject; }')
    gen = InputGeneratorSpec.for_program(program, plant_fraction=0.5).generators['s']
    assert gen.anchored == ((2, b'abc'),)
    assert gen.planted == (b'whole',)
    # a substring length that disagrees with the constant can never match
    program = parse('input s: string; let head = substring(s, 0, 2); '
                    'if (head == "abc") { reject; }')
    assert not InputGeneratorSpec.for_program(program).plants


def test_generator_mismatch(php_filter):
    with pytest.raises(GeneratorMismatch):
        InputGeneratorSpec({'x': IntGenerator()}).check(php_filter)
    with pytest.raises(GeneratorMismatch):
        InputGeneratorSpec({'req': IntGenerator()}).check(php_filter)


def test_equivalence_reflexive(php_filter):
    gen = InputGeneratorSpec.for_program(php_filter, plant_fraction=0.1)
    report = equivalence_check(php_filter, php_filter, gen, trials=100, seed=1)
    assert report.divergences == ()
    for summary in report.cost_ratio.values():
        assert (summary.min, summary.median, summary.max) == (1.0, 1.0, 1.0)


def test_equivalence_hardened(php_filter):
    hardened, _ = harden_program(php_filter, HardeningPolicy(hash_config=HashConfig()))
    gen = InputGeneratorSpec.for_program(php_filter, plant_fraction=0.01)
    report = equivalence_check(php_filter, hardened, gen, trials=2000, seed=42)
    assert report.divergences == ()
    assert report.total_cost_q['hash_invocations'] > 0
    ratios = report.serializable()['cost_ratio']
    # the original hashes nothing, the hardened program usually does
    assert ratios['hash_invocations']['max'] is None


def test_equivalence_reports_divergences():
    accept_all = parse('input x: int; accept;')
    gen = InputGeneratorSpec.for_program(POINT_FILTER, plant_fraction=0.5)
    report = equivalence_check(POINT_FILTER, accept_all, gen, trials=200, seed=0)
    assert 50 < len(report.divergences) < 150
    assert report.false_positives == 0
    assert report.false_negatives == len(report.divergences)
    first = report.divergences[0]
    assert first.inputs == {'x': 7}
    assert first.verdict_p == Verdict.REJECT and first.verdict_q == Verdict.ACCEPT
    assert report.serializable()['divergences'][0]['inputs'] == {'x': 7}


def test_equivalence_is_deterministic_across_workers(php_filter):
    hardened, _ = harden_program(php_filter, HardeningPolicy(hash_config=HashConfig()))
    gen = InputGeneratorSpec.for_program(php_filter, plant_fraction=0.05)
    single = equivalence_check(php_filter, hardened, gen, trials=300, seed=9)
    fanned = equivalence_check(php_filter, hardened, gen, trials=300, seed=9, num_workers=3)
    assert single == fanned


def test_equivalence_warns_without_planting(php_filter):
    gen = InputGeneratorSpec.for_program(php_filter, plant_fraction=0.0)
    with pytest.warns(UserWarning):
        equivalence_check(php_filter, php_filter, gen, trials=10, seed=0)


def test_equivalence_preconditions(php_filter):
    gen = InputGeneratorSpec.for_program(php_filter)
    with pytest.raises(ValueError):
        equivalence_check(php_filter, POINT_FILTER, gen, trials=10, seed=0)
    with pytest.raises(ValueError):
        equivalence_check(php_filter, php_filter, gen, trials=0, seed=0)


def test_cost_scaling(php_filter):
    hardened, _ = harden_program(php_filter, HardeningPolicy(hash_config=HashConfig()))
    table = cost_scaling(php_filter, hardened, [64, 128, 256], seed=0)
    assert isinstance(table, pd.DataFrame)
    assert list(table['length']) == [64, 128, 256]
    assert list(table['hash_invocations_q']) == [64 - 15, 128 - 15, 256 - 15]
    # one step per window either way; the hashing shows up in bytes_hashed
    assert np.allclose(table['steps_ratio'], 1.0, atol=0.1)
    assert (table['bytes_hashed_q'] > table['bytes_hashed_p']).all()


def test_cost_report_serializable():
    cost = evaluate(POINT_FILTER, {'x': 7})[1]
    assert isinstance(cost, CostReport)
    doc = cost.serializable()
    assert doc['steps'] == 5
    assert doc['per_site'] == [{'evaluations': 1, 'steps': 3, 'hash_invocations': 0,
                                'bytes_hashed': 0}]
