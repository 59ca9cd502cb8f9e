"""Exception hierarchy shared by every module.

All validation failures derive from :class:`ValidationError` so the CLI can map
them onto a single exit code; failures raised while fitting derive from
:class:`EstimationError`.
"""

from __future__ import annotations


class LongTermError(Exception):
    """Base class for all package errors."""


class ValidationError(LongTermError, ValueError):
    """Input data or configuration breaks a documented invariant."""


class EstimationError(LongTermError, RuntimeError):
    """A fitting step could not produce a usable model."""


class RowError(ValidationError):
    """A specific CSV/data row is invalid; ``row`` is its 0-based index."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class MissingColumn(ValidationError):
    pass


class InvalidGroup(RowError):
    pass


class NonBinaryTreatment(RowError):
    pass


class ExperimentalRowHasOutcome(RowError):
    pass


class ObservationalRowMissingOutcome(RowError):
    pass


class NonFiniteValue(RowError):
    pass


class StratumTooSmall(ValidationError):
    pass


class UnevenSpacing(ValidationError):
    pass


class HorizonNotOnGrid(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NoValidCandidate(ValidationError):
    pass


class MissingExperimentalOutcome(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class EmptyTraining(EstimationError):
    pass


class SingularSystem(EstimationError):
    pass


class EmptyStratum(EstimationError):
    def __init__(self, group: str, arm: int):
        self.group = group
        self.arm = arm
        super().__init__(f"no rows in stratum group={group}, a={arm}")


class AllPairsDegenerate(EstimationError):
    pass


class ZeroVariance(EstimationError):
    pass


class OracleSpecViolatesAssumption(ValidationError):
    def __init__(self, assumption: str, cell: str):
        self.assumption = assumption
        self.cell = cell
        super().__init__(f"{assumption} violated at {cell}")
