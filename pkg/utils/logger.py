"""
Logger System for Outbreak Stacking

Logging built on Loguru with:
- Colored console output
- File rotation and compression
- Optional structured JSON logging
- Context-aware loggers (per component, test case, method)
- Stage and result levels for the experiment pipeline

Usage:
    from utils.logger import get_logger

    logger = get_logger(__name__)
    logger.info("Detectors finished", test_case=3, series=100)
"""

import sys
import time
from pathlib import Path
from typing import Any, Dict, Optional

from loguru import logger

from utils.config import get_config


# ============================================================================
# Custom Log Levels
# ============================================================================

logger.level("STAGE", no=25, color="<cyan><bold>")
logger.level("RESULT", no=26, color="<green>")


# ============================================================================
# Logger Configuration
# ============================================================================


class LoggerManager:
    """
    Centralized logger management

    Features:
    - Console logging with colors
    - File logging with rotation
    - Structured JSON logging
    - Context injection (component, test case, method)
    """

    def __init__(self):
        self._initialized = False
        self._config = None
        self._loggers: Dict[str, Any] = {}

    def init(self, config=None, force: bool = False):
        """
        Initialize logging system

        Args:
            config: Configuration object (optional)
            force: Re-create sinks even if already initialized
        """
        if self._initialized and not force:
            return

        if config is None:
            config = get_config()
        self._config = config.logging

        logger.remove()

        if self._config.console.enabled:
            logger.add(
                sys.stderr,
                format=self._config.console.format,
                level=self._config.level,
                colorize=self._config.console.colorize,
                backtrace=True,
                diagnose=False,
            )

        if self._config.file.enabled:
            log_path = config.resolve_path(self._config.file.path)
            log_path.parent.mkdir(parents=True, exist_ok=True)

            logger.add(
                log_path,
                format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message} | {extra}",
                level=self._config.level,
                rotation=self._config.file.rotation,
                retention=self._config.file.retention,
                compression=self._config.file.compression,
                enqueue=True,
                backtrace=True,
                diagnose=False,
            )

        if self._config.structured.enabled:
            struct_path = config.resolve_path(self._config.structured.path)
            struct_path.parent.mkdir(parents=True, exist_ok=True)

            logger.add(
                struct_path,
                format="{message}",
                level=self._config.level,
                serialize=True,
                enqueue=True,
            )

        self._loggers.clear()
        self._initialized = True
        logger.debug("Logger system initialized", level=self._config.level)

    def get_logger(self, name: str, context: Optional[Dict[str, Any]] = None):
        """
        Get a context-aware logger

        Args:
            name: Logger name (usually __name__)
            context: Additional context (test_case, method, ...)

        Returns:
            Configured logger with context
        """
        if not self._initialized:
            self.init()

        context_key = name
        if context:
            context_key += "_" + "_".join(f"{k}={v}" for k, v in sorted(context.items()))

        if context_key in self._loggers:
            return self._loggers[context_key]

        if context:
            ctx_logger = logger.bind(name=name, **context)
        else:
            ctx_logger = logger.bind(name=name)

        self._loggers[context_key] = ctx_logger
        return ctx_logger


# ============================================================================
# Global Logger Manager Instance
# ============================================================================

_manager = LoggerManager()


def init_logger(config=None, force: bool = False):
    """
    Initialize global logger

    Args:
        config: Optional configuration object
        force: Re-create sinks (used after --config reloads)
    """
    _manager.init(config, force=force)


def get_logger(name: str, **context) -> logger:
    """
    Get a logger with context

    Args:
        name: Logger name (usually __name__)
        **context: Additional context kwargs

    Returns:
        Configured logger

    Example:
        logger = get_logger(__name__, test_case=4)
        logger.info("Bundle generated")
    """
    return _manager.get_logger(name, context if context else None)


# ============================================================================
# Specialized Logging Functions
# ============================================================================


def log_stage(stage: str, event: str, **extra):
    """
    Log a pipeline stage boundary

    Args:
        stage: Stage name (generate, detect, dataset, train, evaluate, rank)
        event: started | finished | skipped
        **extra: Additional context (units, elapsed, out_dir)
    """
    stage_logger = get_logger("pipeline.stages", stage=stage)
    stage_logger.log("STAGE", f"Stage {stage} {event}", **extra)


def log_result(
    method: str,
    test_case: int,
    dauc: float,
    pauc: float,
    e: float,
    **extra,
):
    """
    Log one evaluated (test case, method) cell

    Args:
        method: Method descriptor (C1, P(mu,O3,1), ...)
        test_case: Test case id
        dauc: Partial area under the detection-rate curve
        pauc: Partial area under the ROC curve
        e: Maximum false alarm rate
        **extra: Additional context
    """
    result_logger = get_logger("evaluation.results", method=method)
    result_logger.log(
        "RESULT",
        "Method evaluated",
        test_case=test_case,
        dauc=f"{dauc:.4f}",
        pauc=f"{pauc:.4f}",
        e=e,
        **extra,
    )


def log_error(
    component: str,
    error: Exception,
    context: Optional[Dict[str, Any]] = None,
    fatal: bool = False,
):
    """
    Log an error with context

    Args:
        component: Component where error occurred
        error: Exception object
        context: Additional context
        fatal: Whether this is a fatal error
    """
    error_logger = get_logger(f"errors.{component}")

    level = "CRITICAL" if fatal else "ERROR"

    # bind() rather than kwargs: error text may contain braces
    error_logger.bind(
        error_type=type(error).__name__,
        error_message=str(error),
        context=context or {},
    ).log(level, f"{'FATAL ' if fatal else ''}Error in {component}: {error}")


# ============================================================================
# Context Managers
# ============================================================================


class log_execution_time:
    """
    Context manager to log execution time

    Usage:
        with log_execution_time("forest_fit", test_case=3) as timer:
            model = fit(X, y, params)
        timings["train"] = timer.elapsed_ms
    """

    def __init__(self, operation: str, **context):
        self.operation = operation
        self.context = context
        self.elapsed_ms = 0.0
        self.logger = get_logger(f"performance.{operation}", **context)

    def __enter__(self):
        self.start_time = time.perf_counter()
        self.logger.debug(f"Starting: {self.operation}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.elapsed_ms = (time.perf_counter() - self.start_time) * 1000

        if exc_type:
            self.logger.error(
                f"Failed: {self.operation}",
                elapsed_ms=f"{self.elapsed_ms:.2f}",
                error=str(exc_val),
            )
        else:
            self.logger.debug(
                f"Completed: {self.operation}",
                elapsed_ms=f"{self.elapsed_ms:.2f}",
            )


# ============================================================================
# Initialization
# ============================================================================

# Auto-initialize on import (re-initialized by the CLI after --config)
try:
    init_logger()
except Exception as e:
    logger.add(sys.stderr, level="INFO")
    logger.warning(f"Logger initialized with defaults (config not available): {e}")
