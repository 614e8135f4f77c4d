"""Pydantic records for values, configs and reports."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from geokit import DEFAULT_RESOLUTION, P_BAND, REPORT_SCHEMA


ValueKind = Literal[
    "closed-form",
    "quadrature",
    "optimizer-upper-bound",
    "optimizer-lower-bound",
]

Regime = Literal["positive", "zero", "neg-high", "neg-low"]

BodyKind = Literal["ball", "ellipsoid", "fourier_support", "sampled"]

Family = Literal["ellipsoid", "fourier-support", "radial-grid"]

Verdict = Literal["verified", "inconclusive", "violated"]

Verifiability = Literal["two-sided", "one-sided", "structural", "report-only"]

Relation = Literal["<=", ">=", "="]

OutputFormat = Literal["json", "csv"]


def default_p_values(n: int) -> list[float]:
    return [1.0, 2.0, 5.0, 0.5, -0.5, -1.0, float(-n - 1), float(-2 * n)]


def default_i_values(n: int) -> list[float]:
    return [-1.0, 0.0, 0.5 * n, float(n), float(n + 1)]


def _split_floats(v: Any) -> Any:
    if isinstance(v, str):
        return [float(x) for x in v.split(",") if x.strip()]
    if isinstance(v, (int, float)):
        return [float(v)]
    return v


class FunctionalValue(BaseModel):
    """A computed scalar with its estimation kind and absolute error."""

    value: float
    kind: ValueKind
    err: float = Field(default=0.0, ge=0.0)
    meta: dict[str, Any] = Field(default_factory=dict)

    def scaled(self, factor: float) -> FunctionalValue:
        """Multiply by a positive constant."""
        return self.model_copy(update={
            "value": self.value * factor,
            "err": self.err * abs(factor),
        })


class PExponent(BaseModel):
    """The exponent p together with the ambient dimension n."""

    model_config = ConfigDict(frozen=True)

    p: float
    n: int = Field(ge=2)

    @model_validator(mode="after")
    def _away_from_minus_n(self) -> PExponent:
        if abs(self.p + self.n) < P_BAND:
            raise ValueError(f"p={self.p} lies in the excluded band around -n={-self.n}")
        return self

    @property
    def regime(self) -> Regime:
        if self.p > 0:
            return "positive"
        if self.p == 0:
            return "zero"
        if self.p > -self.n:
            return "neg-high"
        return "neg-low"

    @property
    def is_infimum(self) -> bool:
        """Geominimal areas are infima for p ≥ 0 and suprema otherwise."""
        return self.p >= 0


class BodySpec(BaseModel):
    """Serialized body: {kind, dim, params}."""

    kind: BodyKind
    dim: int = Field(ge=2)
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_params(self) -> BodySpec:
        p = self.params
        if self.kind == "ball":
            if "r" not in p or float(p["r"]) <= 0:
                raise ValueError("ball needs params.r > 0")
        elif self.kind == "ellipsoid":
            if len(p.get("A", [])) != self.dim * self.dim:
                raise ValueError(f"ellipsoid needs params.A with {self.dim * self.dim} entries")
        elif self.kind == "fourier_support":
            if self.dim != 2:
                raise ValueError("fourier_support bodies are planar")
            if len(p.get("a", [])) != len(p.get("b", [])):
                raise ValueError("fourier_support needs equally long a and b lists")
        elif self.kind == "sampled":
            if not p.get("h"):
                raise ValueError("sampled body needs params.h")
            if p.get("f") is not None and len(p["f"]) != len(p["h"]):
                raise ValueError("sampled body needs h and f of equal length")
        return self


class SearchConfig(BaseModel):
    """Competitor family and budget for the variational estimators."""

    family: Family | None = None
    k_max: int = Field(default=6, ge=1)
    starts: int = Field(default=8, ge=1)
    max_iters: int = Field(default=1500, ge=1)
    restarts: int = Field(default=2, ge=0)
    tol: float = Field(default=1e-8, gt=0.0)
    seed: int = 0
    share_pool: bool = True
    perturbation: float = Field(default=0.05, gt=0.0)


class VerdictReport(BaseModel):
    """Outcome of one inequality check."""

    rule_id: str
    part: str = ""
    case_index: int = 0
    inputs: dict[str, Any] = Field(default_factory=dict)
    relation: Relation = "<="
    lhs: FunctionalValue | None = None
    rhs: FunctionalValue | None = None
    verdict: Verdict | None = None
    verifiability: Verifiability = "two-sided"
    slack: float | None = None
    tolerance: float = 0.0
    details: dict[str, float] = Field(default_factory=dict)
    error: str | None = None


class RuleTally(BaseModel):
    verified: int = 0
    inconclusive: int = 0
    violated: int = 0
    reported: int = 0
    skipped: int = 0
    errors: int = 0

    @property
    def inconclusive_rate(self) -> float:
        decided = self.verified + self.inconclusive + self.violated
        return self.inconclusive / decided if decided else 0.0


class SuiteReport(BaseModel):
    """Aggregated suite output; serialized with by_alias so the version key is `schema`."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=REPORT_SCHEMA, alias="schema")
    suite: str
    seed: int
    resolution: int
    dims: list[int] = Field(default_factory=lambda: [2])
    cases: list[VerdictReport] = Field(default_factory=list)
    tallies: dict[str, RuleTally] = Field(default_factory=dict)
    min_slack: dict[str, list[int]] = Field(default_factory=dict)

    @property
    def violated(self) -> int:
        return sum(t.violated for t in self.tallies.values())


class RunConfig(BaseModel):
    """Settings shared by the CLI commands, loadable from YAML."""

    resolution: int = DEFAULT_RESOLUTION
    seed: int = 0
    dims: list[int] = Field(default_factory=lambda: [2])
    p_values: list[float] | None = None
    i_values: list[float] | None = None
    count: int = Field(default=20, ge=1)
    search: SearchConfig = Field(default_factory=SearchConfig)
    out: str | None = None
    format: OutputFormat = "json"
    report_only: bool = False
    db: str | None = None

    @field_validator("p_values", "i_values", mode="before")
    @classmethod
    def _coerce_lists(cls, v: Any) -> Any:
        return _split_floats(v)

    @field_validator("dims", mode="before")
    @classmethod
    def _coerce_dims(cls, v: Any) -> Any:
        if isinstance(v, str):
            return [int(x) for x in v.split(",") if x.strip()]
        if isinstance(v, int):
            return [v]
        return v

    @model_validator(mode="after")
    def _check(self) -> RunConfig:
        if 2 in self.dims:
            r = self.resolution
            if r < 64 or r & (r - 1):
                raise ValueError(f"planar resolution must be a power of two ≥ 64, got {r}")
        for n in self.dims:
            for p in self.p_values or []:
                if abs(p + n) < P_BAND:
                    raise ValueError(f"p={p} equals -n for n={n}")
        return self

    def p_for(self, n: int) -> list[float]:
        return list(self.p_values) if self.p_values else default_p_values(n)

    def i_for(self, n: int) -> list[float]:
        return list(self.i_values) if self.i_values else default_i_values(n)
