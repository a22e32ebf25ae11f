from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.free_actions import __version__
from src.free_actions.config import (
    ACL_ROUNDS,
    CERTIFY_MAX,
    DEFAULT_CERT_DEPTH,
    DEFAULT_LEVEL,
    DEFAULT_MAX_LEVEL,
    DEFAULT_RMAX,
    DEFAULT_ROUNDS,
    DEFAULT_SAMPLES,
    DEFAULT_TOL,
    EXTENSION_CAP,
    MAX_WINDOW_SIZE,
    RANDOM_BLOCK,
    REPORT_SCHEMA,
    SEARCH_LEVELS,
)
from src.free_actions.core.errors import ConfigError
from src.free_actions.core.structures import OracleKind


class RunConfig(BaseModel):
    """Everything a command needs; unknown keys are rejected."""

    model_config = ConfigDict(
        extra="forbid",
        validate_assignment=True,
        json_schema_extra={
            "example": {"oracle": "RandomGraph", "seed": 0, "rounds": 25, "cert_depth": 8, "rmax": 6}
        },
    )

    oracle: OracleKind = OracleKind.RANDOM_GRAPH
    seed: int = Field(0, ge=0)
    level: int = Field(DEFAULT_LEVEL, gt=0)
    max_level: int = Field(DEFAULT_MAX_LEVEL, gt=0)
    max_window: int = Field(MAX_WINDOW_SIZE, gt=0)
    extension_cap: int = Field(EXTENSION_CAP, gt=0)
    random_block: int = Field(RANDOM_BLOCK, gt=0)
    tower_depth: Optional[int] = Field(None, gt=0)
    rounds: int = Field(DEFAULT_ROUNDS, ge=0)
    cert_depth: int = Field(DEFAULT_CERT_DEPTH, gt=0)
    schreier_radius: int = Field(6, gt=0)
    rmax: int = Field(DEFAULT_RMAX, ge=2)
    tol: float = Field(DEFAULT_TOL, gt=0)
    samples: int = Field(DEFAULT_SAMPLES, gt=0)
    displacement_radius: int = Field(4, ge=2)
    workers: int = Field(1, gt=0)
    search_levels: int = Field(SEARCH_LEVELS, gt=0)
    acl_rounds: int = Field(ACL_ROUNDS, gt=0)
    acl_samples: int = Field(50, gt=0)
    certify_max: int = Field(CERTIFY_MAX, gt=0)
    orbit_arity: int = Field(4, gt=0)
    orbit_limit: int = Field(32, gt=0)
    budget: int = Field(10_000, gt=0)
    out: Optional[Path] = None
    pair: Optional[Path] = None
    window_file: Optional[Path] = None

    @field_validator("oracle", mode="before")
    @classmethod
    def _parse_oracle(cls, value):
        if isinstance(value, str):
            return OracleKind.parse(value)
        return value

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "RunConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    def oracle_params(self) -> Dict[str, Any]:
        params: Dict[str, Any] = {"max_window": self.max_window, "max_level": self.max_level}
        if self.oracle is OracleKind.RANDOM_GRAPH:
            params.update(extension_cap=self.extension_cap, random_block=self.random_block)
        elif self.oracle is OracleKind.EQUIV_TOWER:
            params["depth"] = self.tower_depth
        return params


Number = Union[int, float]


class CheckResult(BaseModel):
    """One pass/fail claim; numeric claims carry the tolerance they were checked at."""

    name: str
    passed: bool
    value: Optional[Union[Number, str, bool]] = None
    expected: Optional[Union[Number, str, bool]] = None
    tolerance: Optional[float] = None
    detail: Optional[str] = None


class Report(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_id: str = Field(REPORT_SCHEMA, alias="schema")
    command: str
    version: str = __version__
    config: Dict[str, Any] = Field(default_factory=dict)
    checks: List[CheckResult] = Field(default_factory=list)
    data: Dict[str, Any] = Field(default_factory=dict)
    timing: Dict[str, float] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, name: str, passed: bool, **fields) -> CheckResult:
        check = CheckResult(name=name, passed=bool(passed), **fields)
        self.checks.append(check)
        return check

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)


@dataclass
class PairHeader:
    """Header of a persisted pair file."""

    oracle: OracleKind
    seed: int
    params: Dict[str, Any]
    level: int
    cert_depth: int
    extra: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.cert_depth < 1:
            raise ValueError("cert_depth must be positive")
