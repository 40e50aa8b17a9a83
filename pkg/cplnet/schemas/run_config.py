"""
Versioned JSON run configuration

One document drives one CLI invocation: the network instance, shared analysis
options and one block per command. Unknown fields are rejected at every level.
"""

from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cplnet.core.config import settings
from cplnet.schemas.control import GlobalFeedback
from cplnet.schemas.design import DesignVariant
from cplnet.schemas.network import (
    CouplingConvention,
    InputGain,
    NetworkSpec,
    OperatingPointMode,
)
from cplnet.schemas.simulation import SimConfig

SCHEMA_VERSION = 1


class _Block(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ResistanceGrid(_Block):
    """Declared finite set of line resistances"""

    r_min: float = Field(default_factory=lambda: settings.DEFAULT_R_SET_MIN, gt=0.0)
    r_max: float = Field(default_factory=lambda: settings.DEFAULT_R_SET_MAX, gt=0.0)
    points: int = Field(default_factory=lambda: settings.DEFAULT_R_SET_POINTS, ge=1)
    spacing: Literal["log", "linear"] = "log"

    @model_validator(mode="after")
    def check_range(self) -> "ResistanceGrid":
        if self.r_min > self.r_max or (self.points > 1 and self.r_min == self.r_max):
            raise ValueError(f"empty resistance range [{self.r_min}, {self.r_max}]")
        return self

    def values(self) -> List[float]:
        if self.points == 1:
            return [self.r_min]
        if self.spacing == "log":
            grid = np.logspace(np.log10(self.r_min), np.log10(self.r_max), self.points)
        else:
            grid = np.linspace(self.r_min, self.r_max, self.points)
        return [float(r) for r in grid]


class AnalyzeBlock(_Block):
    closed_loop: bool = False
    design: Optional[DesignVariant] = None
    margin: float = Field(0.0, ge=0.0)
    export_matrices: bool = False


class SweepRBlock(_Block):
    r_max: float = Field(..., gt=0.0)
    tol: float = Field(1e-6, gt=0.0)
    grid: Optional[ResistanceGrid] = Field(
        None, description="extra points reported in sweep_grid.csv"
    )


class SweepNBlock(_Block):
    n_min: int = Field(1, ge=1)
    n_max: int = Field(..., ge=1)
    r_max: float = Field(..., gt=0.0)
    tol: float = Field(1e-6, gt=0.0)
    critical_r: Optional[float] = Field(None, gt=0.0)
    critical_n_max: int = Field(50, ge=1)

    @model_validator(mode="after")
    def check_range(self) -> "SweepNBlock":
        if self.n_min > self.n_max:
            raise ValueError(f"empty converter-count range [{self.n_min}, {self.n_max}]")
        return self


class OutputShuntStudy(_Block):
    kind: Literal["output_shunt_r"] = "output_shunt_r"
    r_s_values: List[float] = Field(..., min_length=1)
    r_set: ResistanceGrid = Field(default_factory=ResistanceGrid)

    @field_validator("r_s_values")
    @classmethod
    def validate_positive(cls, v: List[float]) -> List[float]:
        if any(r <= 0.0 for r in v):
            raise ValueError("shunt resistances must be positive")
        return v


class InputRCStudy(_Block):
    kind: Literal["input_ground_rc"] = "input_ground_rc"
    r_f_values: List[float] = Field(..., min_length=1)
    c_f_values: List[float] = Field(..., min_length=1)
    r_max: float = Field(..., gt=0.0)
    tol: float = Field(1e-6, gt=0.0)

    @field_validator("r_f_values", "c_f_values")
    @classmethod
    def validate_positive(cls, v: List[float]) -> List[float]:
        if any(x <= 0.0 for x in v):
            raise ValueError("filter component values must be positive")
        return v


class InputShuntStudy(_Block):
    kind: Literal["input_shunt_c"] = "input_shunt_c"
    r_set: ResistanceGrid = Field(default_factory=ResistanceGrid)
    cs_bracket: Tuple[float, float] = (1e-8, 1.0)
    gap_resistance: Optional[float] = Field(None, gt=0.0)

    @field_validator("cs_bracket")
    @classmethod
    def validate_bracket(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if not 0.0 < v[0] < v[1]:
            raise ValueError("cs_bracket must satisfy 0 < lower < upper")
        return v


DesignStudy = Annotated[
    Union[OutputShuntStudy, InputRCStudy, InputShuntStudy], Field(discriminator="kind")
]


class GainsBlock(_Block):
    """Poles as [re, im] pairs; omitted means -w0 (1 +/- j) per converter"""

    poles: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None

    def complex_poles(self) -> Optional[Tuple[complex, complex]]:
        if self.poles is None:
            return None
        return tuple(complex(re, im) for re, im in self.poles)


class RunConfig(_Block):
    """Top-level document"""

    schema_version: Literal[1]
    network: NetworkSpec
    coupling: CouplingConvention = CouplingConvention.DIRECT_CURRENT
    input_gain: InputGain = InputGain.NODE_VOLTAGE
    operating_point_mode: OperatingPointMode = OperatingPointMode.FROZEN
    gains: Optional[GlobalFeedback] = None
    gains_file: Optional[str] = None
    seed: int = Field(0, ge=0, description="drives simulate.initial_state.jitter")
    out_dir: Optional[str] = None

    analyze: Optional[AnalyzeBlock] = None
    sweep_r: Optional[SweepRBlock] = None
    sweep_n: Optional[SweepNBlock] = None
    simulate: Optional[SimConfig] = None
    design: Optional[DesignStudy] = None
    gains_design: Optional[GainsBlock] = None

    @model_validator(mode="after")
    def check_gains_source(self) -> "RunConfig":
        if self.gains is not None and self.gains_file is not None:
            raise ValueError("give either gains or gains_file, not both")
        if self.gains is not None and self.gains.n not in (1, self.network.n):
            raise ValueError(
                f"{self.gains.n} gains given for {self.network.n} converters"
            )
        return self

    def resolve_gains_path(self, config_path: Path) -> Optional[Path]:
        """gains_file relative to the config file; must exist"""
        if self.gains_file is None:
            return None
        path = Path(self.gains_file)
        if not path.is_absolute():
            path = config_path.parent / path
        if not path.exists():
            raise FileNotFoundError(f"gains file not found: {path}")
        return path
