"""fairsched: risk-scored inspection scheduling with group-fairness accounting.

Builds critical-violation risk models from inspection histories, turns
their scores into schedules under count-preserving policies, and measures
how efficiency and per-group detection times trade off under
cross-validated evaluation.
"""

__version__ = "0.1.0"


class FairschedError(Exception):
    """Base class for package errors."""


class SchemaError(FairschedError):
    """A required input column or schema entry is missing."""


class DataError(FairschedError):
    """Input data violates a precondition (spans, labels, coverage)."""


class UnmappedRegionError(DataError):
    """A zip code has no entry in the region table."""


class DegenerateLabelsError(DataError):
    """Training labels contain only one class."""


class MissingFeatureError(DataError):
    """A row does not supply a feature the model requires."""


class UndefinedEfficiencyError(DataError):
    """Efficiency is undefined: no positive-label inspections in scope."""


class NumericError(FairschedError):
    """A numeric computation could not produce a defined result."""
