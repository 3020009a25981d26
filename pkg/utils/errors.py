"""
Error Handling Framework for Outbreak Stacking

Custom exceptions for different error scenarios:
- Configuration errors (bad YAML, bad grid file, missing stage inputs)
- Data errors (invalid series, schema drift in persisted files, generation)
- Computation errors (distribution domains, insufficient history)
- Evaluation errors (degenerate curve inputs, missing result cells)
- Model errors (feature schema mismatch)

All exceptions inherit from SurveillanceError for easy catching. The CLI maps
any SurveillanceError to exit code 2.

Usage:
    from utils.errors import DomainError, InsufficientHistoryError

    try:
        stats = window_stats(series, t=3, m=7)
    except InsufficientHistoryError as e:
        logger.warning("Skipping week", error=e.to_dict())
"""

from typing import Any, Dict, List, Optional


# ============================================================================
# Base Exception
# ============================================================================


class SurveillanceError(Exception):
    """
    Base exception for all outbreak-stacking errors

    All custom exceptions inherit from this for easy catching.
    """

    def __init__(
        self,
        message: str,
        code: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        """
        Initialize error

        Args:
            message: Human-readable error message
            code: Error code for programmatic handling
            context: Additional error context
        """
        self.message = message
        self.code = code or self.__class__.__name__
        self.context = context or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to dictionary for logging and manifests"""
        return {
            "error_type": self.__class__.__name__,
            "code": self.code,
            "message": self.message,
            "context": self.context,
        }

    def __str__(self) -> str:
        if self.context:
            context_str = ", ".join(f"{k}={v}" for k, v in self.context.items())
            return f"{self.message} ({context_str})"
        return self.message

    def __reduce__(self):
        # subclass constructors differ; rebuild from state for process pools
        return (_rebuild_error, (self.__class__, self.message, self.code, self.context))


def _rebuild_error(cls, message: str, code: str, context: Dict[str, Any]) -> SurveillanceError:
    error = cls.__new__(cls)
    SurveillanceError.__init__(error, message, code, context)
    return error


# ============================================================================
# Configuration Errors
# ============================================================================


class ConfigurationError(SurveillanceError):
    """Configuration-related errors"""

    pass


class InvalidConfigError(ConfigurationError):
    """Invalid configuration value or unparsable config file"""

    def __init__(self, field: str, value: Any, reason: str):
        super().__init__(
            message=f"Invalid configuration for '{field}': {reason}",
            code="INVALID_CONFIG",
            context={"field": field, "value": str(value), "reason": reason},
        )


class MissingInputError(ConfigurationError):
    """A stage input produced by an earlier stage does not exist"""

    def __init__(self, path: str, stage: str):
        super().__init__(
            message=f"Missing input for stage '{stage}': {path}",
            code="MISSING_INPUT",
            context={"path": path, "stage": stage},
        )


# ============================================================================
# Data Errors
# ============================================================================


class DataError(SurveillanceError):
    """Count data and persisted-file errors"""

    pass


class InvalidSeriesError(DataError):
    """A count series or outbreak span violates its invariants"""

    def __init__(self, series_id: str, reason: str):
        super().__init__(
            message=f"Invalid series {series_id}: {reason}",
            code="INVALID_SERIES",
            context={"series_id": series_id, "reason": reason},
        )


class SchemaMismatchError(DataError):
    """A persisted table does not have the documented columns"""

    def __init__(self, schema: str, expected: List[str], got: List[str]):
        super().__init__(
            message=f"Schema mismatch for {schema}",
            code="SCHEMA_MISMATCH",
            context={"schema": schema, "expected": expected, "got": got},
        )


class GenerationError(DataError):
    """Synthetic data generation failed"""

    def __init__(self, test_case: int, reason: str, **kwargs):
        super().__init__(
            message=f"Generation failed for test case {test_case}: {reason}",
            code="GENERATION_FAILED",
            context={"test_case": test_case, "reason": reason, **kwargs},
        )


# ============================================================================
# Computation Errors
# ============================================================================


class ComputationError(SurveillanceError):
    """Numerical computation errors"""

    pass


class DomainError(ComputationError):
    """A distribution parameter is outside its domain"""

    def __init__(self, function: str, parameter: str, value: Any):
        super().__init__(
            message=f"{function}: parameter '{parameter}' out of domain",
            code="DOMAIN_ERROR",
            context={"function": function, "parameter": parameter, "value": value},
        )


class InsufficientHistoryError(ComputationError):
    """Not enough previous weeks to fill the reference window"""

    def __init__(self, week: int, required: int, detector: Optional[str] = None):
        super().__init__(
            message=f"Week {week} has insufficient history (needs t >= {required})",
            code="INSUFFICIENT_HISTORY",
            context={"week": week, "required": required, "detector": detector},
        )


# ============================================================================
# Evaluation Errors
# ============================================================================


class EvaluationError(SurveillanceError):
    """Evaluation errors"""

    pass


class InvalidCurveInputError(EvaluationError):
    """Scored weeks cannot produce a curve (single class, no spans, bad e)"""

    def __init__(self, reason: str, **kwargs):
        super().__init__(
            message=f"Cannot build curve: {reason}",
            code="INVALID_CURVE_INPUT",
            context=kwargs,
        )


class MissingResultError(EvaluationError):
    """A (test case, method) cell is missing from a rank table"""

    def __init__(self, missing: List[Any]):
        super().__init__(
            message=f"Missing results for {len(missing)} cell(s)",
            code="MISSING_RESULT",
            context={"missing": missing[:10]},
        )


# ============================================================================
# Model Errors
# ============================================================================


class ModelError(SurveillanceError):
    """Fusion model errors"""

    pass


class ModelSchemaError(ModelError):
    """Prediction input does not match the training schema"""

    def __init__(self, expected: List[str], got: List[str]):
        super().__init__(
            message="Feature schema does not match the trained model",
            code="MODEL_SCHEMA_MISMATCH",
            context={"expected": expected, "got": got},
        )


# ============================================================================
# Helper Functions
# ============================================================================


def handle_error(
    error: Exception,
    component: str,
    context: Optional[Dict[str, Any]] = None,
    raise_after_log: bool = True,
) -> None:
    """
    Centralized error handling with logging

    Args:
        error: Exception that occurred
        component: Component where error occurred
        context: Additional context
        raise_after_log: Whether to re-raise after logging

    Example:
        try:
            bundle = load_bundle(path)
        except Exception as e:
            handle_error(e, "persistence", {"path": str(path)})
    """
    from utils.logger import log_error

    # Configuration problems stop the whole run
    is_fatal = isinstance(error, ConfigurationError)

    log_error(
        component=component,
        error=error,
        context=context,
        fatal=is_fatal,
    )

    if raise_after_log:
        raise error


# ============================================================================
# Context Manager for Error Handling
# ============================================================================


class error_context:
    """
    Context manager for consistent error handling

    Usage:
        with error_context("detect", test_case=3):
            run_detectors(series, names)

        # Log and continue
        with error_context("curve_dump", suppress=True):
            write_curves(...)
    """

    def __init__(
        self,
        component: str,
        suppress: bool = False,
        **context_kwargs,
    ):
        self.component = component
        self.suppress = suppress
        self.context = context_kwargs

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_val:
            handle_error(
                exc_val,
                self.component,
                self.context,
                raise_after_log=not self.suppress,
            )
            return self.suppress
        return False
