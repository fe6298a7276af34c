"""Exception hierarchy shared across the pipeline stages."""

from __future__ import annotations


class ChargecastError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ChargecastError):
    """Invalid run configuration (bad flag value, missing input file)."""


class DataError(ChargecastError):
    """Invalid or inconsistent input data."""


class SchemaError(DataError):
    """Input file does not match its documented schema."""


class DuplicateZoneId(DataError):
    """Two zone features share the same id."""


class UnknownCell(DataError):
    """A trip row references a cell id absent from the cell-to-zone mapping."""


class DegenerateGeometry(DataError):
    """A geometric input has zero area or is otherwise unusable."""


class InvalidTolerance(ChargecastError):
    """A tolerance parameter is non-positive."""


class SamplingStalled(ChargecastError):
    """Rejection sampling acceptance rate fell below the viability floor."""


class FitDiverged(ChargecastError):
    """No optimizer start converged to a usable parameter pair."""


class DegenerateData(DataError):
    """Fit input is underdetermined or identically zero."""


class DimensionMismatch(DataError):
    """Matrix operands do not share zone dimensions."""


class InvalidFraction(DataError):
    """A fraction argument lies outside [0, 1]."""


class MissingSpec(ConfigError):
    """Charger spec list does not cover a required technology."""


class EmptyPoiAreas(DataError):
    """Non-residential demand present but no POI areas to split it over."""


class BackendFailure(ChargecastError):
    """One or more routing-backend requests failed after retries.

    ``failures`` holds (origin_index, dest_index, cause) triples for every
    pair that could not be resolved.
    """

    def __init__(self, failures):
        self.failures = list(failures)
        pairs = ", ".join(f"({i},{j}): {c}" for i, j, c in self.failures[:10])
        more = "" if len(self.failures) <= 10 else f" (+{len(self.failures) - 10} more)"
        super().__init__(f"{len(self.failures)} routing request(s) failed: {pairs}{more}")


class PipelineError(ChargecastError):
    """A pipeline stage failed; carries the stage name and partial diagnostics."""

    def __init__(self, stage, cause, diagnostics=None):
        self.stage = stage
        self.cause = cause
        self.diagnostics = diagnostics
        super().__init__(f"stage '{stage}' failed: {cause}")
