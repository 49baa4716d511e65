__version__ = "0.1.0"

# Version of every JSON document the tool writes (top-level ``format_version`` field).
FORMAT_VERSION = 1
