"""Exception types shared across walklab modules."""


class WalklabError(Exception):
    """Base class for all walklab errors."""


class MemoryCapError(WalklabError):
    """Ball enumeration would exceed the configured memory cap."""


class SizeCapError(WalklabError):
    """Input exceeds a hard size cap of an exhaustive routine."""


class RadiusTooSmallError(WalklabError):
    """Requested radius exceeds the enumerated ball radius."""


class EmptySetError(WalklabError):
    """A nonempty vertex set was required."""


class RangeError(WalklabError):
    """Requested argument lies outside a table's covered range."""


class DegenerateError(WalklabError):
    """Growth-based bound is degenerate (no radius gap between n and n/2)."""


class OutOfRangeError(WalklabError):
    """Generalized inverse queried outside the closure of the range.

    ``side`` is ``"below"`` or ``"above"`` the attainable range.
    """

    def __init__(self, message, side):
        super().__init__(message)
        self.side = side


class NoConvergenceError(WalklabError):
    """Iterative solver failed to reach the requested tolerance."""


class NotDoublingError(WalklabError):
    """Doubling diagnostic below threshold where doubling was required."""


class HypothesisFailError(WalklabError):
    """Power-compression hypothesis fails on the table range.

    ``witness`` holds an argument at which the hypothesis inequality fails.
    """

    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


class InsufficientDataError(WalklabError):
    """Too few grid points for a fit."""


class LeakageError(WalklabError):
    """Truncation leakage exceeds the budget required by an exact check."""


class ConfigInvalidError(WalklabError):
    """Run configuration failed schema validation.

    ``pointer`` is a JSON-pointer to the offending field.
    """

    def __init__(self, message, pointer):
        super().__init__(message)
        self.pointer = pointer


class MissingInputError(WalklabError):
    """Report aggregation found no usable inputs."""
