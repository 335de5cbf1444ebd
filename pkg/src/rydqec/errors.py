"""Exception types shared across the package.

ValidationError signals rejected inputs (CLI exit code 2); IntegrityError
signals a numerical consistency failure in a computed object (exit code 3).
"""


class ValidationError(ValueError):
    """Input rejected before any computation ran."""


class IntegrityError(RuntimeError):
    """A computed object violated one of its internal consistency checks."""
