"""Exception hierarchy for the workbench.

Every error raised on purpose by this package derives from RandoptError so
callers can catch workbench failures without swallowing programming bugs.
"""

from __future__ import annotations


class RandoptError(Exception):
    """Base class for all workbench errors."""


class ParameterError(RandoptError, ValueError):
    """A caller-supplied parameter is out of range or inconsistent."""


class CapacityError(RandoptError):
    """A size cap was exceeded (instance too large for an exact routine)."""


class BudgetExceededError(RandoptError):
    """A search exhausted its node/flip budget without reaching a verdict.

    Distinct from a negative verdict: the question is left open.
    """

    def __init__(self, message: str, spent: int | None = None):
        super().__init__(message)
        self.spent = spent


class StalledWalkError(RandoptError):
    """Guided walk stalled twice; carries the partial trajectory."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class GridError(RandoptError):
    """PDE grid is too small or malformed for the requested mixture."""


class FormatError(RandoptError):
    """Base class for serialization failures."""


class CorruptHeaderError(FormatError):
    """Magic bytes or fixed header fields do not parse."""


class VersionMismatchError(FormatError):
    """Serialized with an unsupported format version."""


class TruncatedPayloadError(FormatError):
    """The byte stream ends before the declared payload does."""


class TypeMismatchError(FormatError):
    """Type tag does not match the expected or embedded structure."""


class SchemaError(RandoptError):
    """Experiment config failed validation (unknown key, bad type, ...)."""


class IntegrityError(RandoptError):
    """Run directory contents disagree with the manifest."""


class InsufficientDataError(RandoptError):
    """Not enough samples/points for the requested statistic or fit."""
