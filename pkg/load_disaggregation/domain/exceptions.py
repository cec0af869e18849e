"""Domain exceptions with stable error codes."""

from typing import Optional


class DisaggregationError(Exception):
    """Base error for the disaggregation pipeline.

    ``is_validation`` separates bad inputs (CLI exit code 1) from failures that
    happen while computing on valid inputs (exit code 2).
    """

    is_validation: bool = True

    def __init__(self, error: str, description: Optional[str] = None) -> None:
        self.error = error
        self.description = description
        message = f"{error}: {description}" if description else error
        super().__init__(message)

    def to_dict(self) -> dict[str, str]:
        """Serialize the error for machine-readable output."""
        detail = {"error": self.error}
        if self.description:
            detail["error_description"] = self.description
        return detail


class ScenarioValidationError(DisaggregationError):
    """A scenario violates a structural invariant."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("invalid_scenario", description)


class SchemaError(DisaggregationError):
    """A scenario file does not match its schema."""

    def __init__(
        self,
        file: str,
        description: str,
        row: Optional[int] = None,
        column: Optional[str] = None,
    ) -> None:
        self.file = file
        self.row = row
        self.column = column
        location = file
        if row is not None:
            location += f", row {row}"
        if column is not None:
            location += f", column '{column}'"
        super().__init__("schema_violation", f"{location}: {description}")


class FieldValidationError(DisaggregationError):
    """A per-agent field has invalid values or keys."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("invalid_field", description)


class WeightValidationError(DisaggregationError):
    """Allocation weights are not valid per-source distributions."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("invalid_weights", description)


class KeyMismatchError(DisaggregationError):
    """Two per-agent fields are keyed to different agent sets."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("key_mismatch", description or "Agent key sets differ")


class RegionMismatchError(DisaggregationError):
    """Two reports cover different region sets."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("region_mismatch", description or "Region sets differ")


class NetworkMismatchError(DisaggregationError):
    """Two power-flow solutions belong to different networks."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("network_mismatch", description or "Solutions use different networks")


class InsufficientSampleError(DisaggregationError):
    """Too few observations for a statistic."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("insufficient_sample", description)


class MethodSpecError(DisaggregationError):
    """A method configuration cannot be executed."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("invalid_method", description)


class ManifestError(DisaggregationError):
    """An experiment manifest is missing or malformed."""

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("invalid_manifest", description)


class DegenerateFieldError(DisaggregationError):
    """An auxiliary field has no usable spread (e.g. zero median)."""

    is_validation = False

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("degenerate_field", description)


class TrainingDivergedError(DisaggregationError):
    """The training loss grew beyond the divergence threshold."""

    is_validation = False

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("training_diverged", description)


class TrainingAbortedError(DisaggregationError):
    """Training produced a non-finite loss or gradient."""

    is_validation = False

    def __init__(self, description: Optional[str] = None) -> None:
        super().__init__("training_aborted", description)
