"""
Result schemas shared by the analysis service and the CSV writers
"""

import math
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from cplnet.schemas.design import DesignVariant


class StabilityPoint(BaseModel):
    """One evaluated line resistance"""

    model_config = ConfigDict(frozen=True)

    resistance: float
    max_real_part: float
    stable: bool


class CrossingResult(BaseModel):
    """Outcome of a stability-boundary search in R"""

    model_config = ConfigDict(frozen=True)

    r_star: float = Field(..., description="+inf when stable over the whole bracket")
    bracket: Tuple[float, float]
    tol: float
    evaluations: int
    multiple_crossings: bool = False

    @property
    def found(self) -> bool:
        return math.isfinite(self.r_star)


class BoundaryPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    r_star: float
    multiple_crossings: bool = False


class StabilityBoundary(BaseModel):
    """R_star as a function of converter count, sorted by n"""

    model_config = ConfigDict(frozen=True)

    points: List[BoundaryPoint]
    bracket: Tuple[float, float]
    tol: float
    evaluations: int


class CriticalNResult(BaseModel):
    """Smallest unstable network size at a fixed R, or not found up to n_max"""

    model_config = ConfigDict(frozen=True)

    resistance: float
    n0: Optional[int] = None
    n_min: int = 1
    n_max: int
    max_real_parts: List[float] = Field(default_factory=list, description="one per n tried")
    # sorted spectrum of the largest network tried when nothing was found
    last_spectrum: List[complex] = Field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.n0 is not None


class DesignReport(BaseModel):
    """Evaluation of one passive design"""

    model_config = ConfigDict(frozen=True)

    variant: DesignVariant
    stable: bool
    points: List[StabilityPoint] = Field(default_factory=list)
    loss_watts: Optional[float] = None
    efficiency: Optional[float] = None
    certified: Optional[bool] = None
    r_star: Optional[float] = None
    c_s_star: Optional[float] = None
