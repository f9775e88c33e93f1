"""Exception types raised across the package."""


class EmwrcError(Exception):
    """Base class for all package errors."""


class ErasedOperand(EmwrcError):
    pass


class InconsistentSystem(EmwrcError):
    """Elimination produced 0 = 1; honest channel inputs never do this."""


class TooFewUsers(EmwrcError):
    pass


class SchemeMismatch(EmwrcError):
    pass


class DomainError(EmwrcError, ValueError):
    pass


class NegativeMass(EmwrcError, ValueError):
    pass


class TooLarge(EmwrcError):
    """Exhaustive enumeration would exceed the configured pattern guard."""


class RoundLimitExceeded(EmwrcError):
    pass


class ConfigError(EmwrcError, ValueError):
    pass
