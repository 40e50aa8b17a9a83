"""
Passive design variants applied uniformly to every converter
"""

from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class OutputShuntR(BaseModel):
    """Resistor across each converter output"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["output_shunt_r"] = "output_shunt_r"
    r_s: float = Field(..., gt=0.0, description="shunt resistance (ohm)")


class InputGroundRC(BaseModel):
    """Series R_f-C_f damping leg from each converter input node to ground"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["input_ground_rc"] = "input_ground_rc"
    r_f: float = Field(..., gt=0.0, description="filter resistance (ohm)")
    c_f: float = Field(..., gt=0.0, description="filter capacitance (farad)")


class InputShuntC(BaseModel):
    """Capacitor from each converter input node to ground"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["input_shunt_c"] = "input_shunt_c"
    c_s: float = Field(..., gt=0.0, description="shunt capacitance (farad)")


DesignVariant = Annotated[
    Union[OutputShuntR, InputGroundRC, InputShuntC], Field(discriminator="kind")
]

# None means the unmodified converters
OptionalDesign = Optional[DesignVariant]


def describe(design: OptionalDesign) -> str:
    """Short label used in reports and logs"""
    if design is None:
        return "none"
    if isinstance(design, OutputShuntR):
        return f"output_shunt_r(r_s={design.r_s:g})"
    if isinstance(design, InputGroundRC):
        return f"input_ground_rc(r_f={design.r_f:g}, c_f={design.c_f:g})"
    return f"input_shunt_c(c_s={design.c_s:g})"
