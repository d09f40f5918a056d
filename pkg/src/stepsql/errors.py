"""Exception types shared across the package."""

from __future__ import annotations


class StepSqlError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(StepSqlError):
    """Schema file is malformed or violates a schema invariant.

    ``locus`` names the offending line or field path when known.
    """

    def __init__(self, message: str, locus: str | None = None):
        self.locus = locus
        super().__init__(f"{message} (at {locus})" if locus else message)


class SqlSyntaxError(StepSqlError):
    """SQL text failed to parse; ``position`` is a character offset."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (position {position})")


class UnknownNameError(StepSqlError):
    """A table or column reference did not resolve against the schema."""


class SqlTypeError(StepSqlError):
    """A literal is incompatible with the referenced column's type."""


class BindingError(StepSqlError):
    """Value assignment does not match the placeholder set of a template."""


class CoverageError(StepSqlError):
    """Gold SQL references a table or column outside the chosen listing."""


class RecordFormatError(StepSqlError):
    """A record or corpus line is malformed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ReservedTokenError(StepSqlError):
    """Question text contains a reserved separator token."""


class ContractViolationError(StepSqlError):
    """A submodel produced output outside its interface contract."""


class NoValidCandidatesError(StepSqlError):
    """Every generated SQL candidate was rejected by the validity filter."""

    def __init__(self, rejected: list | None = None):
        self.rejected = list(rejected or [])
        super().__init__("no candidate survived the validity filter")


class NoTemplateApplicableError(StepSqlError):
    """The heuristic generator found no template covering the input."""


class UnfillablePlaceholderError(StepSqlError):
    """No question span fills a value placeholder within the distance bound."""

    def __init__(self, index: int, column: str):
        self.index = index
        self.column = column
        super().__init__(f"no span fills placeholder {index} (column {column})")


class OffsetMismatchError(StepSqlError):
    """An entity mapping does not fit the question it is applied to."""


class BackendUnavailableError(StepSqlError):
    """A remote submodel backend could not be reached or answered badly."""


class ProviderUnavailableError(StepSqlError):
    """A paraphrase provider could not be reached."""


class StageFailureError(StepSqlError):
    """A pipeline stage produced no usable output.

    ``stage`` names the failing stage; ``trace`` carries the partial trace
    accumulated before the failure.
    """

    def __init__(self, stage: str, message: str, trace=None):
        self.stage = stage
        self.trace = trace
        super().__init__(f"stage {stage}: {message}")
