"""
Configuration Manager for Outbreak Stacking

This module provides configuration management using Pydantic models for
validation and type safety. It loads configuration from:
1. config/config.yaml - Base configuration
2. .env file / OUTBREAK_* environment variables - Runtime overrides

Usage:
    from utils.config import get_config

    config = get_config()
    m = config.detectors.window
    alpha = config.fusion.alpha
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import (
    BaseModel,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from utils.errors import InvalidConfigError


PROJECT_ROOT = Path(__file__).parent.parent


# ============================================================================
# Detector Configuration
# ============================================================================


class DetectorsConfig(BaseModel):
    """Sliding-window surveillance algorithms"""

    window: int = Field(default=7, ge=1, description="Reference window length m")
    variance_divisor: Literal["m", "m-1"] = Field(
        default="m",
        description="Population variance (m) as displayed, or sample variance (m-1)",
    )
    rki_gaussian_threshold: float = Field(
        default=20.0, gt=0.0, description="RKI switches to Gaussian above this mean"
    )
    names: List[str] = Field(default=["C1", "C2", "C3", "Bayes", "RKI"], min_length=1)

    @field_validator("names")
    @classmethod
    def validate_names(cls, v: List[str]) -> List[str]:
        known = {"C1", "C2", "C3", "Bayes", "RKI"}
        unknown = [n for n in v if n not in known]
        if unknown:
            raise ValueError(f"Unknown detectors: {unknown}")
        if len(set(v)) != len(v):
            raise ValueError("Duplicate detector names")
        return v


# ============================================================================
# Synthetic Data Configuration
# ============================================================================


class SynthgenConfig(BaseModel):
    """Synthetic benchmark generator"""

    grid_path: str = Field(default="config/test_cases.json")
    n_series: int = Field(default=100, gt=0)
    baseline_len: int = Field(default=575, gt=0)
    eval_len: int = Field(default=49, gt=0)
    baseline_outbreaks: int = Field(default=4, ge=0)
    baseline_start_range: Tuple[int, int] = (56, 570)
    eval_start_range: Tuple[int, int] = (575, 620)
    delay_sigma: float = Field(default=0.5, gt=0.0)
    max_attempts: int = Field(default=1000, gt=0)
    k_mode: Literal["uniform", "fixed"] = "uniform"
    k_fixed: Optional[int] = Field(default=None, gt=0)
    k_range: Tuple[int, int] = (1, 10)

    @model_validator(mode="after")
    def validate_ranges(self):
        """Start windows must sit inside their partitions"""
        total = self.baseline_len + self.eval_len
        lo, hi = self.baseline_start_range
        if not (0 <= lo <= hi < self.baseline_len):
            raise ValueError("baseline_start_range must lie inside the baseline window")
        lo, hi = self.eval_start_range
        if not (self.baseline_len <= lo <= hi < total):
            raise ValueError("eval_start_range must lie inside the evaluation window")
        if self.k_range[0] < 1 or self.k_range[0] > self.k_range[1]:
            raise ValueError("k_range must be an increasing pair of positive integers")
        if self.k_mode == "fixed" and self.k_fixed is None:
            raise ValueError("k_mode 'fixed' requires k_fixed")
        return self

    @property
    def total_weeks(self) -> int:
        return self.baseline_len + self.eval_len


# ============================================================================
# Fusion / Forest / Evaluation Configuration
# ============================================================================


class FusionSettings(BaseModel):
    """Stacking dataset defaults"""

    alpha: float = Field(default=0.005, gt=0.0, lt=1.0)
    mean_window: int = Field(default=7, ge=1)


class ForestConfig(BaseModel):
    """Random-forest stacking learner"""

    n_trees: int = Field(default=100, ge=1)
    min_samples_leaf: int = Field(default=5, ge=1)
    max_features: Union[Literal["sqrt", "all"], int] = "sqrt"
    bootstrap: bool = True
    class_weight: Optional[Literal["balanced"]] = None
    n_jobs: int = Field(default=1, ge=1)


class EvaluationConfig(BaseModel):
    """Partial-area evaluation"""

    e: float = Field(default=0.01, gt=0.0, le=1.0)


class MethodGridConfig(BaseModel):
    """Cartesian fusion grid M(a,o,w)"""

    modes: List[Literal["P", "S"]] = ["P", "S"]
    means: List[bool] = [False, True]
    labelings: List[Literal["O0", "O1", "O2", "O3"]] = ["O0", "O1", "O2", "O3"]
    windows: List[int] = [0, 1]


class ExperimentConfig(BaseModel):
    """Experiment plan defaults"""

    seed: int = Field(default=7, ge=0)
    methods: List[str] = Field(
        default=["C1", "C2", "C3", "Bayes", "RKI", "S(mu,O3,1)", "P(mu,O3,1)"]
    )
    method_grid: Optional[MethodGridConfig] = None
    out_dir: str = "data/experiments/default"
    jobs: int = Field(default=1, ge=1)
    k_sweep: List[int] = Field(default_factory=list)


# ============================================================================
# Logging Configuration
# ============================================================================


class ConsoleLoggingConfig(BaseModel):
    """Console logging configuration"""

    enabled: bool = True
    colorize: bool = True
    format: str = "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"


class FileLoggingConfig(BaseModel):
    """File logging configuration"""

    enabled: bool = True
    path: str = "data/logs/outbreak.log"
    rotation: str = "50 MB"
    retention: str = "14 days"
    compression: str = "zip"


class StructuredLoggingConfig(BaseModel):
    """Structured logging configuration"""

    enabled: bool = False
    path: str = "data/logs/structured.jsonl"


class LoggingConfig(BaseModel):
    """Logging system configuration"""

    level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "INFO"
    console: ConsoleLoggingConfig = Field(default_factory=ConsoleLoggingConfig)
    file: FileLoggingConfig = Field(default_factory=FileLoggingConfig)
    structured: StructuredLoggingConfig = Field(default_factory=StructuredLoggingConfig)


# ============================================================================
# Main Configuration
# ============================================================================


class MetaConfig(BaseModel):
    """Metadata about the configuration"""

    version: str = "0.1.0"
    last_updated: str = ""


class AppConfig(BaseModel):
    """Complete application configuration"""

    meta: MetaConfig = Field(default_factory=MetaConfig)
    detectors: DetectorsConfig = Field(default_factory=DetectorsConfig)
    synthgen: SynthgenConfig = Field(default_factory=SynthgenConfig)
    fusion: FusionSettings = Field(default_factory=FusionSettings)
    forest: ForestConfig = Field(default_factory=ForestConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


# ============================================================================
# Environment Settings
# ============================================================================


class Settings(BaseSettings):
    """Environment overrides (OUTBREAK_* variables or .env)"""

    model_config = SettingsConfigDict(
        env_prefix="OUTBREAK_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: Optional[str] = None
    out_dir: Optional[str] = None
    jobs: Optional[int] = None


# ============================================================================
# Config Manager
# ============================================================================


class ConfigManager:
    """
    Centralized configuration manager

    Usage:
        from utils.config import get_config

        config = get_config()
        n_trees = config.forest.n_trees
    """

    def __init__(self, config_path: Optional[Path] = None):
        """
        Initialize configuration manager

        Args:
            config_path: Path to config.yaml file
        """
        if config_path is None:
            config_path = PROJECT_ROOT / "config" / "config.yaml"

        self.config_path = Path(config_path)
        self.settings = Settings()
        self.config = self._load_config()

    def _load_config(self) -> AppConfig:
        """Load and validate configuration from YAML file"""
        if not self.config_path.exists():
            raise InvalidConfigError("config_path", self.config_path, "file not found")

        try:
            with open(self.config_path, "r") as f:
                config_dict = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise InvalidConfigError("config_path", self.config_path, f"unparsable YAML: {e}")

        self._apply_env_overrides(config_dict)

        try:
            return AppConfig(**config_dict)
        except ValidationError as e:
            first = e.errors()[0]
            field = ".".join(str(p) for p in first["loc"])
            raise InvalidConfigError(field, first.get("input"), first["msg"])

    def _apply_env_overrides(self, config_dict: Dict[str, Any]) -> None:
        """Environment beats YAML for the handful of runtime knobs"""
        if self.settings.log_level:
            config_dict.setdefault("logging", {})["level"] = self.settings.log_level.upper()
        if self.settings.out_dir:
            config_dict.setdefault("experiment", {})["out_dir"] = self.settings.out_dir
        if self.settings.jobs:
            config_dict.setdefault("experiment", {})["jobs"] = self.settings.jobs

    def resolve_path(self, path: Union[str, Path]) -> Path:
        """Resolve a config-relative path against the project root"""
        p = Path(path)
        return p if p.is_absolute() else PROJECT_ROOT / p

    def __getattr__(self, name):
        """Allow direct access to config attributes"""
        return getattr(self.config, name)


# ============================================================================
# Global Config Instance
# ============================================================================

config: Optional[ConfigManager] = None


def init_config(config_path: Optional[Path] = None) -> ConfigManager:
    """
    Initialize global configuration

    Args:
        config_path: Optional path to config.yaml

    Returns:
        ConfigManager instance
    """
    global config
    config = ConfigManager(config_path)
    return config


def get_config() -> ConfigManager:
    """
    Get global configuration instance

    Returns:
        ConfigManager instance
    """
    if config is None:
        return init_config()
    return config
