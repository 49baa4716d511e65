from .ast import *
from .diagnostics import ParseError, ValidationError
from .parser import parse, parse_file, unescape_bytes
from .printer import escape_bytes, format_expr, pretty_print, quote_bytes
from .validate import check_valid, validate
