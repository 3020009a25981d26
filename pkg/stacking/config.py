"""
Fusion Configurations and Method Descriptors

A fusion configuration is written M(a,o,w):
    M  P (raw p-values) or S (binary alarms at alpha)
    a  mu (include the mean feature) or ~mu (without it)
    o  labeling O0..O3 used for training targets
    w  number of previous weeks of detector output

Both ASCII ("P(mu,O3,1)", "S(~mu,O0,0)") and typographic
("P(μ,O₃,1)", "S(¬μ,O₀,0)") forms parse; rendering is ASCII.

A method descriptor is either a detector name (C1, ..., RKI), "Vote", or a
fusion configuration.
"""

import itertools
import re
from typing import Iterable, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from utils.errors import InvalidConfigError

DETECTORS = ("C1", "C2", "C3", "Bayes", "RKI")
VOTE = "Vote"

_TYPOGRAPHIC = str.maketrans({"μ": "mu", "¬": "~", "₀": "0", "₁": "1", "₂": "2", "₃": "3"})
_SUBSCRIPT = str.maketrans({"0": "₀", "1": "₁", "2": "₂", "3": "₃"})
_NOTATION = re.compile(r"^([PS])\((~?)mu,O([0-3]),(\d+)\)$")


def _normalize(text: str) -> str:
    return re.sub(r"\s+", "", text.translate(_TYPOGRAPHIC))


class FusionConfig(BaseModel):
    """Stacking configuration M(a,o,w) plus its numeric settings"""

    model_config = ConfigDict(frozen=True)

    mode: Literal["P", "S"] = "P"
    alpha: float = Field(default=0.005, gt=0.0, lt=1.0)
    include_mean: bool = True
    window: int = Field(default=1, ge=0)
    labeling: Literal["O0", "O1", "O2", "O3"] = "O3"
    mean_window: int = Field(default=7, ge=1)

    @classmethod
    def parse(cls, text: str, alpha: float = 0.005, mean_window: int = 7) -> "FusionConfig":
        """
        Parse M(a,o,w) notation

        Raises:
            InvalidConfigError: if the text is not valid notation
        """
        match = _NOTATION.match(_normalize(text))
        if not match:
            raise InvalidConfigError("method", text, "expected M(a,o,w), e.g. P(mu,O3,1)")
        mode, negated, labeling, window = match.groups()
        return cls(
            mode=mode,
            alpha=alpha,
            include_mean=not negated,
            window=int(window),
            labeling=f"O{labeling}",
            mean_window=mean_window,
        )

    @property
    def notation(self) -> str:
        mean = "mu" if self.include_mean else "~mu"
        return f"{self.mode}({mean},{self.labeling},{self.window})"

    @property
    def pretty(self) -> str:
        mean = "μ" if self.include_mean else "¬μ"
        return f"{self.mode}({mean}, {self.labeling.translate(_SUBSCRIPT)}, {self.window})"

    @property
    def slug(self) -> str:
        """Filesystem-safe name, e.g. P_mu_O3_w1"""
        mean = "mu" if self.include_mean else "nomu"
        return f"{self.mode}_{mean}_{self.labeling}_w{self.window}"

    def __str__(self) -> str:
        return self.notation


class Method(BaseModel):
    """One entry of an experiment's method list"""

    model_config = ConfigDict(frozen=True)

    kind: Literal["detector", "vote", "fusion"]
    name: str
    fusion: Optional[FusionConfig] = None

    @property
    def slug(self) -> str:
        return self.fusion.slug if self.fusion is not None else self.name

    @property
    def trainable(self) -> bool:
        return self.kind == "fusion"

    def __str__(self) -> str:
        return self.name


def parse_method(text: str, alpha: float = 0.005, mean_window: int = 7) -> Method:
    """
    Parse a method descriptor

    Raises:
        InvalidConfigError: for unknown detectors or malformed notation
    """
    cleaned = text.strip()
    if cleaned in DETECTORS:
        return Method(kind="detector", name=cleaned)
    if cleaned.lower() == VOTE.lower():
        return Method(kind="vote", name=VOTE)
    if "(" not in cleaned:
        raise InvalidConfigError("method", text, f"unknown detector; known: {', '.join(DETECTORS)}")
    fusion = FusionConfig.parse(cleaned, alpha=alpha, mean_window=mean_window)
    return Method(kind="fusion", name=fusion.notation, fusion=fusion)


def parse_methods(
    texts: Iterable[str], alpha: float = 0.005, mean_window: int = 7
) -> List[Method]:
    """Parse a method list, dropping duplicates while keeping order"""
    methods: List[Method] = []
    seen = set()
    for text in texts:
        method = parse_method(text, alpha=alpha, mean_window=mean_window)
        if method.name not in seen:
            seen.add(method.name)
            methods.append(method)
    return methods


def split_method_list(text: str) -> List[str]:
    """Split "C1,C2,P(mu,O3,1)" on commas outside parentheses"""
    items, depth, current = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    if current:
        items.append("".join(current).strip())
    return [item for item in items if item]


def fusion_grid(
    modes: Iterable[str] = ("P", "S"),
    means: Iterable[bool] = (False, True),
    labelings: Iterable[str] = ("O0", "O1", "O2", "O3"),
    windows: Iterable[int] = (0, 1),
    alpha: float = 0.005,
    mean_window: int = 7,
) -> List[FusionConfig]:
    """Every M(a,o,w) combination of the given axes"""
    return [
        FusionConfig(
            mode=mode,
            alpha=alpha,
            include_mean=mean,
            window=window,
            labeling=labeling,
            mean_window=mean_window,
        )
        for mode, mean, labeling, window in itertools.product(modes, means, labelings, windows)
    ]
