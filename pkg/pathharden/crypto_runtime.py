"""
Deterministic hashing primitives that hardened MiniLang programs execute against.

A hardened conditional never sees the plaintext of the constant it tests; it compares a digest
of its operand against a digest computed when the program was hardened. This module provides the
value encoding that is hashed, the digest type and its text format, the sliding-window matcher
behind ``hash_contains`` and the union bound on false positives caused by collisions.
"""
import hashlib
import hmac
import re
from dataclasses import dataclass
from typing import Optional, Tuple, Union

ALGORITHM = 'sha256'
FULL_DIGEST_BITS = 256
MAX_SALT_BYTES = 32

INT_TAG = b'\x01'
STRING_TAG = b'\x02'

_DIGEST_LITERAL = re.compile(r'^sha256(?:/t(?P<bits>[0-9]+))?(?:/s(?P<salt>[0-9a-f]*))?'
                             r':(?P<hex>[0-9a-f]*)$')


class ConfigMismatch(ValueError):
    """Two digests computed under different hash configurations were compared."""


class InvalidDigestLiteral(ValueError):
    """Text is not a well-formed ``sha256[/t<bits>][/s<hex>]:<hex>`` digest literal."""


@dataclass(frozen=True)
class HashConfig:
    """
    How a digest is computed: SHA-256 over ``salt || data``, keeping the first
    ``truncate_bits / 8`` bytes.

    The salt is public (it is printed next to the digest); it only defeats precomputed
    dictionaries of digests. Truncation below 256 bits exists to make collisions frequent enough
    to measure.

    :param salt: optional salt of at most 32 bytes; an empty salt is the same as no salt
    :param truncate_bits: digest width, a multiple of 8 between 8 and 256
    """
    salt: Optional[bytes] = None
    truncate_bits: int = FULL_DIGEST_BITS
    algorithm: str = ALGORITHM

    def __post_init__(self):
        if self.algorithm != ALGORITHM:
            raise ValueError(f'Unsupported hash algorithm {self.algorithm}; only sha256 is '
                             f'available.')
        if self.salt is not None:
            if len(self.salt) > MAX_SALT_BYTES:
                raise ValueError(f'Salt must be at most {MAX_SALT_BYTES} bytes, '
                                 f'got {len(self.salt)}.')
            if len(self.salt) == 0:
                object.__setattr__(self, 'salt', None)
        if not 8 <= self.truncate_bits <= FULL_DIGEST_BITS or self.truncate_bits % 8 != 0:
            raise ValueError(f'truncate_bits must be a multiple of 8 in [8, 256], '
                             f'got {self.truncate_bits}.')

    @property
    def digest_bytes(self) -> int:
        return self.truncate_bits // 8

    @property
    def salt_bytes(self) -> bytes:
        return self.salt or b''


@dataclass(frozen=True)
class Digest:
    """
    A (possibly truncated, possibly salted) SHA-256 digest together with the configuration that
    produced it.
    """
    config: HashConfig
    value: bytes

    def __post_init__(self):
        if len(self.value) != self.config.digest_bytes:
            raise ValueError(f'Digest of {self.config.truncate_bits} bits must be '
                             f'{self.config.digest_bytes} bytes, got {len(self.value)}.')

    @property
    def bits(self) -> int:
        return self.config.truncate_bits

    def to_literal(self) -> str:
        """Render as ``sha256[/t<bits>][/s<salthex>]:<hex>``, lowercase, no whitespace."""
        text = ALGORITHM
        if self.config.truncate_bits != FULL_DIGEST_BITS:
            text += f'/t{self.config.truncate_bits}'
        if self.config.salt is not None:
            text += f'/s{self.config.salt.hex()}'
        return f'{text}:{self.value.hex()}'

    @classmethod
    def from_literal(cls, text: str) -> 'Digest':
        """The opposite of :py:meth:`to_literal`."""
        ma = _DIGEST_LITERAL.match(text)
        if ma is None:
            raise InvalidDigestLiteral(f"Couldn't parse digest literal '{text}'")
        bits = int(ma.group('bits')) if ma.group('bits') is not None else FULL_DIGEST_BITS
        salt_hex = ma.group('salt')
        try:
            salt = bytes.fromhex(salt_hex) if salt_hex else None
            value = bytes.fromhex(ma.group('hex'))
            return cls(HashConfig(salt=salt, truncate_bits=bits), value)
        except ValueError as e:
            raise InvalidDigestLiteral(f"Bad digest literal '{text}': {e}") from e

    def __str__(self):
        return self.to_literal()


def encode_value(value: Union[int, bytes]) -> bytes:
    """
    Injective, type-tagged byte encoding of a MiniLang value.

    An unsigned 64-bit integer becomes ``0x01`` followed by 8 big-endian bytes, a byte string
    becomes ``0x02`` followed by its raw bytes. The tag keeps ``x == 50`` and ``x == "2"`` from
    ever producing the same digest input.

    :param value: an int in [0, 2^64) or a byte string
    :return: the encoded bytes
    """
    if isinstance(value, bool):
        raise TypeError('Booleans have no MiniLang encoding.')
    if isinstance(value, int):
        if not 0 <= value < 2 ** 64:
            raise ValueError(f'{value} is not an unsigned 64-bit integer.')
        return INT_TAG + value.to_bytes(8, 'big')
    if isinstance(value, (bytes, bytearray)):
        return STRING_TAG + bytes(value)
    raise TypeError(f'Cannot encode value of type {type(value).__name__}.')


def _hasher(config: HashConfig):
    h = hashlib.sha256()
    if config.salt is not None:
        h.update(config.salt)
    return h


def digest(data: bytes, config: HashConfig = HashConfig()) -> Digest:
    """
    SHA-256 of ``salt || data`` truncated to ``config.truncate_bits``.

    :param data: bytes to hash, normally the output of :py:func:`encode_value`
    :param config: the hash configuration
    :return: the digest
    """
    h = _hasher(config)
    h.update(data)
    return Digest(config, h.digest()[:config.digest_bytes])


def digest_eq(a: Digest, b: Digest) -> bool:
    """
    Compare two digests without exiting early on the first differing byte.

    :raises ConfigMismatch: if the digests were computed under different configurations
    """
    if a.config != b.config:
        raise ConfigMismatch(f'Cannot compare digests {a.to_literal()} and {b.to_literal()}: '
                             f'configurations differ.')
    return hmac.compare_digest(a.value, b.value)


def hash_eq(value: Union[int, bytes], target: Digest) -> bool:
    """Whether the digest of ``encode_value(value)`` under ``target.config`` equals ``target``."""
    return digest_eq(digest(encode_value(value), target.config), target)


def hash_contains(haystack: bytes, target: Digest, window_len: int) -> Tuple[bool, int]:
    """
    Test whether some full window of ``haystack`` hashes to ``target``.

    Windows ``haystack[i:i + window_len]`` for ``0 <= i <= len(haystack) - window_len`` are each
    encoded as strings and hashed under ``target.config``. Only full windows are examined, so a
    haystack shorter than the window never matches. Scanning stops at the first match.

    :param haystack: the bytes to scan
    :param target: digest of the encoded secret
    :param window_len: secret length in bytes, at least 1
    :return: whether a window matched, and the number of windows hashed
    """
    if window_len < 1:
        raise ValueError(f'window_len must be at least 1, got {window_len}.')
    base = _hasher(target.config)
    base.update(STRING_TAG)
    n_bytes = target.config.digest_bytes
    windows = 0
    for i in range(len(haystack) - window_len + 1):
        h = base.copy()
        h.update(haystack[i:i + window_len])
        windows += 1
        if hmac.compare_digest(h.digest()[:n_bytes], target.value):
            return True, windows
    return False, windows


def fp_bound(m: int, d: int) -> float:
    """
    Union bound on the probability that at least one of ``m`` digest comparisons at ``d`` bits
    collides: ``min(m * 2^-d, 1)``.

    :param m: number of comparisons, at least 0
    :param d: digest width in bits, at least 1
    :return: the bound, a probability
    """
    if m < 0:
        raise ValueError(f'Comparison count must be non-negative, got {m}.')
    if d < 1:
        raise ValueError(f'Digest width must be at least 1 bit, got {d}.')
    if m == 0:
        return 0.0
    return min(m * 2.0 ** -d, 1.0)
