"""
Simulation configuration schemas
"""

from enum import Enum
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from cplnet.schemas.control import GlobalFeedback
from cplnet.schemas.design import DesignVariant


class SimModel(str, Enum):
    SWITCHED = "switched"
    AVERAGED = "averaged"


class Measurement(str, Enum):
    """What a switched-model controller sees at each period boundary"""

    PERIOD_AVERAGE = "period_average"
    SAMPLE = "sample"


class OpenLoop(BaseModel):
    """Fixed duty; None holds each converter at its operating-point duty"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["open_loop"] = "open_loop"
    duty: Optional[float] = Field(None, ge=0.0, le=1.0)


class Proportional(BaseModel):
    """
    d = D0 + k_p (Ibar + k_v (v_ref - V) - I)

    k_v turns the voltage error into a current correction (A/V), k_p maps the
    current error to duty (per A). v_ref defaults to each load's nominal voltage.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["proportional"] = "proportional"
    k_p: float = Field(..., ge=0.0, description="duty per ampere")
    k_v: float = Field(..., ge=0.0, description="ampere per volt")
    v_ref: Optional[float] = Field(None, gt=0.0)


class StateFeedback(BaseModel):
    """d = D + F (x - xbar); gains designed by pole placement when omitted"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["state_feedback"] = "state_feedback"
    gains: Optional[GlobalFeedback] = None


Controller = Annotated[Union[OpenLoop, Proportional, StateFeedback], Field(discriminator="kind")]


class InitialState(BaseModel):
    """Per-converter initial values; any list left out starts at the operating point"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    i0: Optional[List[float]] = None
    v0: Optional[List[float]] = None
    vc0: Optional[List[float]] = None
    vf0: Optional[List[float]] = None
    jitter: float = Field(
        0.0, ge=0.0, description="uniform +/- volts added to every V0, drawn from the run seed"
    )


class SimConfig(BaseModel):
    """One simulation run"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: SimModel = SimModel.SWITCHED
    dt: Optional[float] = Field(
        None, gt=0.0, description="step (s); defaults to T/100 switched, 1 us averaged"
    )
    t_end: float = Field(..., gt=0.0)
    controller: Controller = Field(default_factory=OpenLoop)
    initial_state: InitialState = Field(default_factory=InitialState)
    design: Optional[DesignVariant] = None
    decimation: int = Field(1, ge=1)
    measurement: Measurement = Measurement.PERIOD_AVERAGE

    @model_validator(mode="after")
    def check_horizon(self) -> "SimConfig":
        if self.dt is not None and self.t_end <= self.dt:
            raise ValueError("t_end must exceed dt")
        return self
