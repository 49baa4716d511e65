import json
from enum import Enum
from json import JSONEncoder
from typing import Dict, Sequence

import numpy as np

from pathharden.interpreter import BindingError
from pathharden.minilang.ast import Program, Value, ValueType
from pathharden.minilang.parser import unescape_bytes
from pathharden.minilang.printer import escape_bytes


class ReportEncoder(JSONEncoder):
    """Encodes pathharden reports, numpy scalars, enums and byte strings."""

    def default(self, o):
        if hasattr(o, 'serializable'):
            return o.serializable()
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o) if np.isfinite(o) else None
        if isinstance(o, Enum):
            return str(o)
        if isinstance(o, bytes):
            return escape_bytes(o)
        return super().default(o)


def dumps(obj) -> str:
    """One JSON document; non-finite floats are rejected rather than written as bare Infinity."""
    return json.dumps(obj, cls=ReportEncoder, indent=2, ensure_ascii=False, allow_nan=False)


def to_json(fn, obj):
    """Convenience method to save pathharden reports as a JSON file. See :py:func:`read_json`."""
    with open(fn, 'w') as f:
        f.write(dumps(obj))
        f.write('\n')
    return fn


def read_json(fn):
    """Convenience method to read a JSON file written by :py:func:`to_json`."""
    with open(fn) as f:
        return json.load(f)


def parse_value(text: str, value_type: ValueType) -> Value:
    """
    Parse a command-line input value: a decimal integer for int inputs, MiniLang string-literal
    body syntax (``\\xNN``, ``\\"``, ``\\\\`` escapes) for string inputs.
    """
    if value_type == ValueType.INT:
        try:
            return int(text, 10)
        except ValueError:
            raise BindingError(f"'{text}' is not a decimal integer.") from None
    try:
        return unescape_bytes(text)
    except ValueError as e:
        raise BindingError(f"Bad string value '{text}': {e}") from None


def parse_binding(program: Program, assignments: Sequence[str]) -> Dict[str, Value]:
    """
    Turn ``name=value`` strings into an input binding for ``program``.

    :raises BindingError: on a malformed assignment or an undeclared or repeated name
    """
    types = program.input_types()
    binding = {}
    for assignment in assignments:
        name, sep, text = assignment.partition('=')
        if not sep:
            raise BindingError(f"Expected name=value, got '{assignment}'.")
        if name not in types:
            raise BindingError(f"'{name}' is not a declared input.")
        if name in binding:
            raise BindingError(f"'{name}' is bound twice.")
        binding[name] = parse_value(text, types[name])
    return binding
