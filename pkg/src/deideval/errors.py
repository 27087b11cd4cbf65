"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: InputError -> 2, BackendError and
ProtocolError -> 3.
"""


class DeidevalError(Exception):
    """Base class for all toolkit errors."""


class InputError(DeidevalError):
    """Malformed or inconsistent caller-supplied data."""


class BackendError(DeidevalError):
    """A remote backend could not be reached (retries exhausted)."""


class ProtocolError(DeidevalError):
    """A backend answered, but not in the agreed format."""
