"""Exception types shared across the package.

The three classes map one-to-one onto the CLI exit codes: usage errors
exit 2, data errors exit 3, and numeric guard refusals exit 4.
"""


class UsageError(ValueError):
    """An argument is outside its domain or an operation was misused."""


class DataError(ValueError):
    """Input data violates the expected schema or an invariant."""


class GuardError(RuntimeError):
    """A computation was refused because it exceeds a resource guard."""
