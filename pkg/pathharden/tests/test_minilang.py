import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathharden.crypto_runtime import Digest, HashConfig
from pathharden.minilang import (Accept, And, Cmp, CmpOp, Contains, DigestLit, HashContains,
                                 HashEq, If, InputDecl, IntLit, Length, Let, Not, Or, ParseError,
                                 Program, Reject, SourceSpan, StrLit, Substring, ValidationError,
                                 ValueType, Var, escape_bytes, format_expr, parse, pretty_print,
                                 unescape_bytes, validate)
from pathharden.minilang import diagnostics as diag
from pathharden.minilang.parser import MAX_NESTING_DEPTH, nesting_depth

POINT_FILTER = 'input x: int; if (x == 7) { reject; } accept;'
PHP_FILTER = 'input s: string; if (contains(s, "2250738585072011")) { reject; } accept;'


def test_parse_point_filter():
    program = parse(POINT_FILTER)
    expected = Program(
        inputs=(InputDecl('x', ValueType.INT),),
        body=(If(Cmp(CmpOp.EQ, Var('x'), IntLit(7)), (Reject(),)), Accept()))
    assert program == expected
    assert program.input_types() == {'x': ValueType.INT}


def test_parse_php_filter():
    program = parse(PHP_FILTER)
    site, = program.if_sites()
    assert site.cond == Contains(Var('s'), StrLit(b'2250738585072011'))
    assert site.span == SourceSpan(1, 18, 17)
    assert site.cond.needle.span == SourceSpan(1, 34, 33)


def test_spans_ignored_by_equality():
    assert parse(POINT_FILTER) == parse('input x: int;\n\nif (x == 7) {\n  reject;\n}\naccept;\n')


def test_byte_offsets_count_utf8():
    program = parse('// café\ninput s: string;\nif (s == "é") { reject; }')
    site, = program.if_sites()
    assert site.span.line == 3
    assert site.span.column == 1
    assert site.span.offset == len('// café\ninput s: string;\n'.encode('utf-8'))
    assert site.cond.rhs.value == 'é'.encode('utf-8')


def test_comments_and_else():
    program = parse('''
        input n: int;   // request size
        if (n > 10) {
          reject;
        } else {
          accept;
        }
    ''')
    site, = program.if_sites()
    assert site.orelse == (Accept(),)


def test_nested_ifs_in_source_order():
    program = parse('''
        input x: int;
        input s: string;
        if (x == 1) {
            if (contains(s, "a")) { reject; }
        } else {
            if (x == 2) { accept; }
        }
        if (length(s) < 4) { reject; }
    ''')
    conds = [format_expr(site.cond) for site in program.if_sites()]
    assert conds == ['x == 1', 'contains(s, "a")', 'x == 2', 'length(s) < 4']


def test_operator_precedence():
    program = parse('input x: int; if (!x == 1 || x == 2 && x != 3) { reject; }')
    cond = next(program.if_sites()).cond
    assert cond == Or(Not(Cmp(CmpOp.EQ, Var('x'), IntLit(1))),
                      And(Cmp(CmpOp.EQ, Var('x'), IntLit(2)), Cmp(CmpOp.NE, Var('x'), IntLit(3))))


def test_string_escapes():
    assert unescape_bytes(r'a\x00\xFF\"\\b') == b'a\x00\xff"\\b'
    with pytest.raises(ValueError):
        unescape_bytes(r'\n')
    assert escape_bytes(b'a\x00"\\\x7f ~') == r'a\x00\"\\\x7f ~'


@pytest.mark.parametrize('literal, value', [
    (r'"a\"b"', b'a"b'),
    (r'"\"x\""', b'"x"'),
    (r'"a\\"', b'a\\'),
    (r'"\\\""', b'\\"'),
])
def test_escaped_quotes_stay_inside_string_literal(literal, value):
    program = parse(f'input s: string; if (s == {literal} || s == "z") {{ reject; }}')
    cond = next(program.if_sites()).cond
    assert cond == Or(Cmp(CmpOp.EQ, Var('s'), StrLit(value)),
                      Cmp(CmpOp.EQ, Var('s'), StrLit(b'z')))
    assert parse(pretty_print(program)) == program


def test_unterminated_escaped_quote_is_parse_error():
    with pytest.raises(ParseError):
        parse(r'input s: string; if (s == "a\") { reject; }')


def test_deep_nesting_is_parse_error():
    with pytest.raises(ParseError, match='nest'):
        parse('input x: int; if (' + '!' * 1000 + '(x == 1)) { reject; }')
    disjuncts = ' || '.join(f'x == {i}' for i in range(MAX_NESTING_DEPTH + 10))
    with pytest.raises(ParseError, match='nest'):
        parse(f'input x: int; if ({disjuncts}) {{ reject; }}')
    program = parse('input x: int; if (' + '!' * 100 + '(x == 1)) { reject; }')
    assert nesting_depth(program) <= MAX_NESTING_DEPTH
    assert parse(pretty_print(program)) == program


def test_digest_literal_parses():
    d = Digest(HashConfig(salt=b'\x01\x02', truncate_bits=16), b'\xab\xcd')
    program = parse(f'input x: int; if (hash_eq(x, digest"{d}")) {{ reject; }}')
    cond = next(program.if_sites()).cond
    assert cond == HashEq(Var('x'), DigestLit(d))
    assert 'hash_eq(x, digest"sha256/t16/s0102:abcd")' in pretty_print(program)


def test_pretty_print_canonical():
    text = pretty_print(parse(POINT_FILTER))
    assert text == 'input x: int;\nif (x == 7) {\n  reject;\n}\naccept;\n'
    assert pretty_print(Program((), ())) == ''


@pytest.mark.parametrize('source, line, column', [
    ('input x: int; if (x == 7) { reject }', 1, 36),
    ('input x: int;\nif x == 7 { reject; }', 2, 4),
    ('input x: float;', 1, 10),
    ('input x: int; if (x == 18446744073709551616) { reject; }', 1, 24),
    ('input s: string; if (s == "\\q") { reject; }', 1, 1),
    ('input x: int; if (hash_eq(x, digest"sha256:zz")) { reject; }', 1, 30),
    ('input s: string; if (s == "abc', 1, 27),
    ('input x: int; $', 1, 15),
])
def test_parse_errors(source, line, column):
    with pytest.raises(ParseError) as exc_info:
        parse(source)
    span = exc_info.value.span
    assert span.line == line
    if column != 1:
        assert span.column == column


def test_parse_error_on_bad_utf8():
    with pytest.raises(ParseError):
        parse(b'input s: string; if (s == "\xff\xfe") { reject; }')


def test_type_mismatch():
    with pytest.raises(ValidationError) as exc_info:
        parse('input x: int; if (x == "a") { reject; }')
    assert exc_info.value.code == diag.TYPE_MISMATCH
    assert exc_info.value.span == SourceSpan(1, 19, 18)


def test_all_validation_errors_reported():
    source = 'input x: int;\nif (y == 1) { reject; }\nif (contains(x, "a")) { reject; }'
    with pytest.raises(ValidationError) as exc_info:
        parse(source)
    codes = [e.code for e in exc_info.value.errors]
    assert codes == [diag.UNDECLARED_VARIABLE, diag.INVALID_OPERAND_TYPE]
    assert exc_info.value.errors[0].span.line == 2
    for error in exc_info.value.errors:
        assert 0 <= error.span.offset < len(source)


@pytest.mark.parametrize('source, code', [
    ('input x: int; if (y == 1) { reject; }', diag.UNDECLARED_VARIABLE),
    ('input x: int; input x: string;', diag.DUPLICATE_DECLARATION),
    ('input x: int; let x = 1;', diag.SHADOWED_INPUT),
    ('input x: int; let a = 1; if (x == 1) { let a = 2; }', diag.DUPLICATE_BINDING),
    ('input x: int; if (x) { reject; }', diag.CONDITION_NOT_BOOLEAN),
    ('input x: int; if (length(x) == 1) { reject; }', diag.INVALID_OPERAND_TYPE),
    ('input x: int; if (x == 1 && x) { reject; }', diag.INVALID_OPERAND_TYPE),
    ('input x: int; let a = 1; if (hash_eq(x, a)) { reject; }', diag.DIGEST_EXPECTED),
    ('input s: string; if (hash_contains(s, digest"sha256/t8:00", 0)) { reject; }',
     diag.INVALID_WINDOW_LENGTH),
    ('input s: string; if (a == 1) { reject; } let a = 1;', diag.UNDECLARED_VARIABLE),
])
def test_validation_codes(source, code):
    program = parse(source, check=False)
    assert [e.code for e in validate(program)] == [code]


def test_digest_outside_builtin():
    d = DigestLit(Digest(HashConfig(truncate_bits=8), b'\x00'))
    program = Program((InputDecl('x', ValueType.INT),),
                      (Let('a', d), If(Cmp(CmpOp.EQ, Var('x'), IntLit(1)), (Reject(),))))
    assert [e.code for e in validate(program)] == [diag.DIGEST_OUTSIDE_HASH_BUILTIN]


def test_let_scoping():
    # sibling blocks may reuse a name; a let is not visible after its block
    ok = parse('input x: int; if (x == 1) { let a = 1; } else { let a = 2; }')
    assert validate(ok) == []
    program = parse('input x: int; if (x == 1) { let a = 1; } if (a == 1) { reject; }',
                    check=False)
    assert [e.code for e in validate(program)] == [diag.UNDECLARED_VARIABLE]


# Random valid programs

INPUTS = (InputDecl('x', ValueType.INT), InputDecl('y', ValueType.INT),
          InputDecl('s', ValueType.STRING), InputDecl('t', ValueType.STRING))


class _ProgramGenerator:

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.lets = 0

    def choice(self, options):
        return options[int(self.rng.integers(len(options)))]

    def random_bytes(self, max_len=8):
        alphabet = b'ab"\\\x00\xff 9'
        n = int(self.rng.integers(0, max_len + 1))
        return bytes(self.choice(alphabet) for _ in range(n))

    def digest(self):
        bits = 8 * int(self.rng.integers(1, 33))
        salt = self.rng.bytes(int(self.rng.integers(1, 5))) if self.rng.random() < 0.5 else None
        return DigestLit(Digest(HashConfig(salt=salt, truncate_bits=bits),
                                self.rng.bytes(bits // 8)))

    def expr(self, value_type, scope, depth):
        leaf = depth <= 0 or self.rng.random() < 0.3
        names = [n for n, t in scope.items() if t == value_type]
        if value_type == ValueType.INT:
            if leaf:
                if names and self.rng.random() < 0.5:
                    return Var(self.choice(names))
                value = int.from_bytes(self.rng.bytes(8), 'big')
                return IntLit(value >> int(self.rng.integers(64)))
            return Length(self.expr(ValueType.STRING, scope, depth - 1))
        if value_type == ValueType.STRING:
            if leaf:
                if names and self.rng.random() < 0.5:
                    return Var(self.choice(names))
                return StrLit(self.random_bytes())
            return Substring(self.expr(ValueType.STRING, scope, depth - 1),
                             self.expr(ValueType.INT, scope, depth - 1),
                             self.expr(ValueType.INT, scope, depth - 1))
        kind = self.choice(['cmp', 'and', 'or', 'not', 'contains', 'hash_eq', 'hash_contains'])
        if leaf:
            kind = self.choice(['cmp', 'contains', 'hash_eq'])
        if kind == 'cmp':
            operand_type = self.choice([ValueType.INT, ValueType.STRING])
            return Cmp(self.choice(list(CmpOp)), self.expr(operand_type, scope, 0),
                       self.expr(operand_type, scope, 0))
        if kind == 'and':
            return And(self.expr(ValueType.BOOL, scope, depth - 1),
                       self.expr(ValueType.BOOL, scope, depth - 1))
        if kind == 'or':
            return Or(self.expr(ValueType.BOOL, scope, depth - 1),
                      self.expr(ValueType.BOOL, scope, depth - 1))
        if kind == 'not':
            return Not(self.expr(ValueType.BOOL, scope, depth - 1))
        if kind == 'contains':
            return Contains(self.expr(ValueType.STRING, scope, depth - 1),
                            self.expr(ValueType.STRING, scope, depth - 1))
        if kind == 'hash_eq':
            operand_type = self.choice([ValueType.INT, ValueType.STRING])
            return HashEq(self.expr(operand_type, scope, depth - 1), self.digest())
        return HashContains(self.expr(ValueType.STRING, scope, depth - 1), self.digest(),
                            int(self.rng.integers(1, 20)))

    def block(self, scope, depth):
        scope = dict(scope)
        stmts = []
        for _ in range(int(self.rng.integers(0, 4))):
            kind = self.choice(['let', 'if', 'accept', 'reject'] if depth > 0 else
                               ['let', 'accept', 'reject'])
            if kind == 'let':
                name = f'v{self.lets}'
                self.lets += 1
                value_type = self.choice([ValueType.INT, ValueType.STRING])
                stmts.append(Let(name, self.expr(value_type, scope, 2)))
                scope[name] = value_type
            elif kind == 'if':
                orelse = self.block(scope, depth - 1) if self.rng.random() < 0.5 else None
                stmts.append(If(self.expr(ValueType.BOOL, scope, 3), self.block(scope, depth - 1),
                                orelse))
            else:
                stmts.append(Accept() if kind == 'accept' else Reject())
        return tuple(stmts)

    def program(self):
        scope = {decl.name: decl.type for decl in INPUTS}
        return Program(INPUTS, self.block(scope, 3))


def random_program(seed: int) -> Program:
    return _ProgramGenerator(np.random.default_rng(seed)).program()


def test_random_programs_are_valid():
    for seed in range(50):
        assert validate(random_program(seed)) == []


def test_round_trip_fixpoint():
    for seed in range(1000):
        program = random_program(seed)
        text = pretty_print(program)
        reparsed = parse(text)
        assert reparsed == program, text
        assert pretty_print(reparsed) == text


def test_round_trip_corpus():
    from pathharden.tests.conftest import CORPUS_FILES, load_corpus
    for name in CORPUS_FILES:
        program = load_corpus(name)
        assert parse(pretty_print(program)) == program


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_parse_is_total_on_bytes(data):
    try:
        parse(data)
    except (ParseError, ValidationError):
        pass


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet='inputx:;{}()!=<>&|"\\ abcdefghijklmnorstuvwyz0123456789_\n',
               max_size=120))
def test_parse_is_total_on_text(text):
    try:
        parse(text)
    except (ParseError, ValidationError):
        pass
