import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fse_forecast.models.states import StateMap
from fse_forecast.models.stats import RegressionFit, TestResult


class StateDesign(BaseModel):
    """Indicator matrix S (n x m): S[t][j-1] = 1 when state j is active in week t."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    weeks: list[str]
    state_labels: list[int]
    matrix: list[list[int]]

    @model_validator(mode="after")
    def _check(self) -> "StateDesign":
        if len(self.matrix) != len(self.weeks):
            raise ValueError("one design row per week is required")
        m = len(self.state_labels)
        for week, row in zip(self.weeks, self.matrix):
            if len(row) != m:
                raise ValueError(f"week {week}: row must have {m} entries")
            if any(v not in (0, 1) for v in row) or sum(row) > 1:
                raise ValueError(f"week {week}: at most one active 0/1 state indicator")
        return self

    @classmethod
    def empty(cls, weeks: list[str]) -> "StateDesign":
        return cls(weeks=list(weeks), state_labels=[], matrix=[[] for _ in weeks])

    @property
    def m(self) -> int:
        return len(self.state_labels)

    def __len__(self) -> int:
        return len(self.weeks)

    def array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float).reshape(len(self.weeks), self.m)

    def window(self, start: int, stop: int) -> "StateDesign":
        return self.model_copy(
            update={"weeks": self.weeks[start:stop], "matrix": self.matrix[start:stop]}
        )


class OrderSelection(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    p: int = Field(ge=0)
    aicc_table: dict[int, float]
    n_effective: int


class FseDiagnostics(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    kpss: TestResult | None = None
    normality: TestResult | None = None
    ljung_box: TestResult | None = None


class FseFit(BaseModel):
    """Estimated X_t = a0 + sum a_i X_{t-i} + sum b_j S_jt + e_t."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    p: int = Field(ge=0)
    m: int = Field(ge=0)
    alpha0: float
    alphas: list[float]
    betas: list[float]
    residual_sigma: float = Field(ge=0.0)
    regression: RegressionFit
    aicc: float
    diagnostics: FseDiagnostics
    differencing_applied: int = Field(default=0, ge=0)
    state_labels: list[int] = Field(default_factory=list)
    ar_root_moduli: list[float] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self) -> "FseFit":
        if len(self.alphas) != self.p or len(self.betas) != self.m:
            raise ValueError("alphas must have p entries and betas m entries")
        if self.regression.n_params != 1 + self.p + self.m:
            raise ValueError("regression must estimate 1 + p + m parameters")
        return self


class FittedModel(BaseModel):
    """What the fit command persists: the fit, its states and the series tail."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    fit: FseFit
    state_map: StateMap | None = None
    tail_observations: list[float]
    last_week: str


class SesFit(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    alpha: float = Field(gt=0.0, le=1.0)
    level: float
    sse: float = Field(ge=0.0)
    initial_level: float
