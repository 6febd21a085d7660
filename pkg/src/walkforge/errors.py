"""Exception types shared across the package.

Two broad families matter for the CLI exit-code mapping: bad input or
configuration (exit 2) and state/mode mismatches between artifacts
(exit 3). Anything else is an internal error (exit 1).
"""


class WalkforgeError(Exception):
    """Base class for all package errors."""


class InputError(WalkforgeError):
    """Bad input data or configuration (CLI exit code 2)."""


class ParseError(InputError):
    """Malformed record in an input file; message carries the location."""


class ConfigError(InputError):
    """Invalid parameter combination."""


class StateMismatchError(WalkforgeError):
    """Artifacts that do not belong together (CLI exit code 3)."""


class VersionMismatchError(StateMismatchError):
    """Corpus/graph/delta versions out of sync."""


class ModeMismatchError(StateMismatchError):
    """Walk mode of a corpus does not match the requested operation."""


class AppendOrderError(StateMismatchError):
    """Batch timestamps predate data already in the graph."""


class UnknownNodeError(WalkforgeError, KeyError):
    """Node id not present in the graph."""
