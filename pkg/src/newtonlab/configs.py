"""Pydantic models describing experiment requests.

The same models serve as CLI argument containers and as HTTP request bodies;
a potential arrives either as a file path (CLI) or as an inline definition
(service).  All models reject unknown fields so typos fail loudly.
"""

from __future__ import annotations

from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModeConfig(StrictModel):
    k: list[int]
    m: int
    amplitude: float
    phase: float = 0.0


class PotentialConfig(StrictModel):
    n: int = Field(ge=1)
    offset: float = 0.0
    modes: list[ModeConfig] = Field(default_factory=list)


class PotentialSource(StrictModel):
    """Exactly one of ``path`` or ``definition``."""

    path: str | None = None
    definition: PotentialConfig | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.path is None) == (self.definition is None):
            raise ValueError("provide exactly one of 'path' or 'definition'")
        return self


class ConjugateScanConfig(StrictModel):
    kind: Literal["conjugate-scan"] = "conjugate-scan"
    potential: PotentialSource
    q0: list[float]
    p0: list[float]
    t0: float = 0.0
    horizon: float = Field(gt=0)
    h_step: float | None = Field(default=None, gt=0)
    eps: float = Field(default=1.0, gt=0)
    riccati_window: tuple[float, float] | None = None


class EstimateMConfig(StrictModel):
    kind: Literal["estimate-m"] = "estimate-m"
    potential: PotentialSource
    r1: float = Field(gt=0)
    r2: float = Field(gt=0)
    horizon: float = Field(default=20.0, gt=0)
    samples: int = Field(ge=1)
    seed: int = 0
    h_step: float | None = Field(default=None, gt=0)
    budget_orbits: int | None = Field(default=None, ge=1)
    mode: Literal["fraction", "witness"] = "fraction"


class BumpConfig(StrictModel):
    a: float = Field(gt=0)
    b: float = Field(gt=0)


class DalphaSweepConfig(StrictModel):
    kind: Literal["dalpha-sweep"] = "dalpha-sweep"
    potential: PotentialSource
    n: int | None = Field(default=None, ge=2)
    shell_r: float | None = Field(default=None, gt=0)
    bump: BumpConfig | None = None
    alphas: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _support_source(self):
        if (self.shell_r is None) and (self.bump is None):
            raise ValueError("provide 'shell_r' (default support) or an explicit 'bump'")
        return self


class CrosscheckDConfig(StrictModel):
    kind: Literal["crosscheck-d"] = "crosscheck-d"
    potential: PotentialSource
    n: int | None = Field(default=None, ge=2)
    shell_r: float | None = Field(default=None, gt=0)
    bump: BumpConfig | None = None
    alpha: float = Field(gt=0, lt=1)
    samples: int = Field(default=1_000_000, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _support_source(self):
        if (self.shell_r is None) and (self.bump is None):
            raise ValueError("provide 'shell_r' (default support) or an explicit 'bump'")
        return self


class VerifyCorrespondenceConfig(StrictModel):
    kind: Literal["verify-correspondence"] = "verify-correspondence"
    potential: PotentialSource
    eps: float = Field(gt=0, lt=1)
    q0: list[float]
    p0: list[float]
    t0: float = 0.0
    duration: float = Field(default=1.0, gt=0)
    h_step: float = Field(default=1e-4, gt=0)
    tolerance: float = Field(default=1e-6, gt=0)


ExperimentConfig = Union[
    ConjugateScanConfig,
    EstimateMConfig,
    DalphaSweepConfig,
    CrosscheckDConfig,
    VerifyCorrespondenceConfig,
]
