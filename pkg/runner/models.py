"""Pydantic models for scenario configs and run reports."""

from __future__ import annotations

import math
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# A matrix is a list of rows of numbers or [re, im] pairs; parsed by
# framework.input_validator.parse_matrix when the scenario is built.
RawMatrix = List[List[Union[float, List[float]]]]


class _Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    tol: Optional[float] = Field(default=None, gt=0.0, lt=1.0)


class TorusCrossedScenario(_Scenario):
    """C(T) x_theta Z with gauge data; the irrational torus when theta is irrational."""

    kind: Literal["torus_crossed"] = "torus_crossed"
    theta: float = GOLDEN
    K: int = Field(default=8, ge=1, le=32)
    base_radius: int = Field(default=24, ge=1, le=32)
    margin: int = Field(default=12, ge=0)
    triple_base_radius: int = Field(default=4, ge=1, le=32)
    tau_shifts: List[float] = [0.5, 1.0, 2.0]
    gauge_shifts: List[int] = [1, 2]
    equivariance_samples: int = Field(default=20, ge=0)
    growth_samples: int = Field(default=10, ge=0)
    weak_eps: List[Annotated[float, Field(gt=0.0)]] = Field(default_factory=lambda: [0.5, 1.0], min_length=1)


class WarpedU1Scenario(_Scenario):
    """Principal U(1)-bundle over a circle with fibre length ell(x)."""

    kind: Literal["warped_u1"] = "warped_u1"
    K: int = Field(default=8, ge=1, le=32)
    L: int = Field(default=20, ge=1, le=32)
    ell: List[float] = Field(default_factory=lambda: [1.0, 0.2], min_length=1)
    interior_radius: int = Field(default=6, ge=0)
    spectator_radius: int = Field(default=0, ge=0, le=32)
    weak_eps: List[Annotated[float, Field(gt=0.0)]] = Field(default_factory=lambda: [0.5, 1.0], min_length=1)
    deform_theta: float = GOLDEN


class SU2GroupScenario(_Scenario):
    """SU(2) acting on its truncated L^2 with the cubic Dirac operator."""

    kind: Literal["su2_group"] = "su2_group"
    J: float = Field(default=2.0, ge=0.0, le=4.0)
    rho: Optional[RawMatrix] = None

    @field_validator("J")
    @classmethod
    def _half_integer(cls, v: float) -> float:
        if float(2 * v) != int(2 * v):
            raise ValueError(f"spin cutoff must be a half-integer, got {v}")
        return v


class DeformT2Scenario(_Scenario):
    """Theta-deformed flat torus against the gauged crossed product."""

    kind: Literal["deform_t2"] = "deform_t2"
    theta: float = GOLDEN
    s: float = 0.5
    K: int = Field(default=4, ge=1, le=32)
    base_radius: int = Field(default=4, ge=1, le=32)
    samples: int = Field(default=50, ge=0)


class CustomScenario(_Scenario):
    """User-supplied D, generators and T^n weights."""

    kind: Literal["custom"] = "custom"
    D: RawMatrix
    parity: List[int]
    generators: Dict[str, RawMatrix] = {}
    weights: Optional[List[List[int]]] = None
    fourier: Dict[str, List[int]] = {}
    theta: Optional[List[List[float]]] = None


Scenario = Annotated[
    Union[TorusCrossedScenario, WarpedU1Scenario, SU2GroupScenario, DeformT2Scenario, CustomScenario],
    Field(discriminator="kind"),
]


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1]
    seed: int = Field(default=0, ge=0)
    tol: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    scenarios: List[Scenario] = []


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

class CheckRecord(BaseModel):
    name: str
    passed: bool
    residual: Optional[float] = None  # None when not finite
    tolerance: float


class SpectrumRow(BaseModel):
    eigenvalue: float
    multiplicity: int
    block_label: str


class ScenarioResult(BaseModel):
    name: str
    kind: str
    passed: bool
    checks: List[CheckRecord] = []
    spectra: List[SpectrumRow] = []
    sizes: Dict[str, int] = {}
    invariants: Dict[str, Any] = {}
    wall_time_s: float = 0.0
    error: Optional[str] = None


class Provenance(BaseModel):
    config_path: str
    config_sha256: str
    seed: int
    started_utc: str
    wall_time_s: float
    python: str
    platform: str
    packages: Dict[str, str] = {}


class Report(BaseModel):
    version: Literal[1] = 1
    run_id: str
    passed: bool
    scenarios: List[ScenarioResult] = []
    provenance: Provenance
