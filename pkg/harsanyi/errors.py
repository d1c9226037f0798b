"""
Exception hierarchy for the harsanyi package.

Each error also derives from the builtin it refines, so callers that only
catch ValueError / ArithmeticError keep working.
"""


class HarsanyiError(Exception):
    """Base class for all package errors"""


class CapacityError(HarsanyiError, ValueError):
    """A size limit was exceeded (player cap, selector pool size)."""


class NumericError(HarsanyiError, ArithmeticError):
    """A non-finite value appeared; `where` names the subset, unit, sample or epoch."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class ContractError(HarsanyiError, ValueError):
    """A precondition on arguments was violated."""


class BudgetError(HarsanyiError, ValueError):
    """An estimator was given fewer inferences than it needs."""


class RankError(HarsanyiError, ArithmeticError):
    """The KernelSHAP system is singular."""


class ConfigError(HarsanyiError, ValueError):
    """Schema validation failed; `messages` holds the per-field errors."""

    def __init__(self, message, messages=None):
        super().__init__(message)
        self.messages = messages or {}


class SchemaError(HarsanyiError, ValueError):
    """Dataset columns do not match what ingestion expects."""


class ModelFileError(HarsanyiError, ValueError):
    """Base class for model persistence failures."""


class VersionError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


class TopologyError(ModelFileError):
    pass


class ChannelCoherenceError(HarsanyiError, ValueError):
    """Receptive fields disagree across channels at one location."""
