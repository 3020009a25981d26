"""
Test Case Grid

TestCaseSpec describes the baseline model of one synthetic test case:
log-linear trend (T), annual harmonic (S1), semi-annual harmonic (S2) and
dispersion phi. The default grid lives in config/test_cases.json: 6 structural
combinations x 7 parameter variants = 42 test cases.

Grid file schema:
    {
      "version": "1",
      "test_cases": [
        {"id": 0, "trend": false, "seasonal": false, "biannual": false,
         "theta": 0.693, "beta": 0.0, "gamma": [0, 0, 0, 0], "phi": 1.0,
         "k_mode": "uniform", "k_fixed": null},
        ...
      ]
    }
"""

import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from utils.errors import InvalidConfigError, MissingInputError
from utils.logger import get_logger

logger = get_logger(__name__)


# The six (T, S1, S2) combinations of the benchmark, in grid order
STRUCTURES: Tuple[Tuple[bool, bool, bool], ...] = (
    (False, False, False),
    (False, True, False),
    (False, True, True),
    (True, False, False),
    (True, True, False),
    (True, True, True),
)


def structure_label(trend: bool, seasonal: bool, biannual: bool) -> str:
    """Subset label such as "~T,S1,~S2" used in rank tables"""
    parts = [
        ("T" if trend else "~T"),
        ("S1" if seasonal else "~S1"),
        ("S2" if biannual else "~S2"),
    ]
    return ",".join(parts)


STRUCTURE_LABELS: Tuple[str, ...] = tuple(structure_label(*s) for s in STRUCTURES)


class TestCaseSpec(BaseModel):
    """Parameters of one synthetic test case"""

    # keep pytest from collecting this class
    __test__ = False

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    trend: bool = False
    seasonal: bool = False
    biannual: bool = False
    theta: float
    beta: float = 0.0
    gamma: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    phi: float = Field(default=1.0, ge=1.0)
    k_mode: Literal["uniform", "fixed"] = "uniform"
    k_fixed: Optional[int] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def validate_flags(self):
        """Coefficients of disabled components must be zero"""
        if not self.trend and self.beta != 0.0:
            raise ValueError(f"test case {self.id}: beta must be 0 without trend")
        if not self.seasonal and any(self.gamma[:2]):
            raise ValueError(f"test case {self.id}: annual amplitudes must be 0 without S1")
        if not self.biannual and any(self.gamma[2:]):
            raise ValueError(f"test case {self.id}: biannual amplitudes must be 0 without S2")
        if self.k_mode == "fixed" and self.k_fixed is None:
            raise ValueError(f"test case {self.id}: k_mode 'fixed' requires k_fixed")
        return self

    @property
    def structure(self) -> str:
        return structure_label(self.trend, self.seasonal, self.biannual)

    @property
    def is_poisson(self) -> bool:
        return self.phi == 1.0

    def with_k(self, k: Optional[int]) -> "TestCaseSpec":
        """Copy with fixed outbreak size constant k, or uniform k when None"""
        if k is None:
            return self.model_copy(update={"k_mode": "uniform", "k_fixed": None})
        return self.model_copy(update={"k_mode": "fixed", "k_fixed": int(k)})


class TestCaseGrid(BaseModel):
    """A loaded grid file"""

    __test__ = False

    version: str = "1"
    test_cases: List[TestCaseSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def validate_ids(self):
        ids = [spec.id for spec in self.test_cases]
        if len(set(ids)) != len(ids):
            raise ValueError("test case ids must be unique")
        return self

    def get(self, test_case_id: int) -> TestCaseSpec:
        for spec in self.test_cases:
            if spec.id == test_case_id:
                return spec
        raise KeyError(f"No test case {test_case_id} in grid")

    @property
    def ids(self) -> List[int]:
        return [spec.id for spec in self.test_cases]

    def with_k(self, k: Optional[int]) -> "TestCaseGrid":
        return TestCaseGrid(version=self.version, test_cases=[s.with_k(k) for s in self.test_cases])


def load_grid(path: Union[str, Path]) -> TestCaseGrid:
    """
    Load and validate a test case grid file

    Raises:
        MissingInputError: if the file does not exist
        InvalidConfigError: if the file is not valid JSON or violates the schema
    """
    path = Path(path)
    if not path.exists():
        raise MissingInputError(str(path), stage="generate")

    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        grid = TestCaseGrid.model_validate(raw)
    except json.JSONDecodeError as e:
        raise InvalidConfigError("grid", str(path), f"invalid JSON: {e.msg}") from e
    except ValidationError as e:
        raise InvalidConfigError("grid", str(path), str(e.errors()[0]["msg"])) from e

    logger.debug("Test case grid loaded", path=str(path), test_cases=len(grid.test_cases))
    return grid
