"""
Circuit parameter schemas: converters, source, loads, feeder, operating point
All quantities in SI units
"""

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cplnet.core.config import settings


class CouplingConvention(str, Enum):
    """How line drops weight the converter currents"""

    # segment j carries the sum of downstream inductor currents
    DIRECT_CURRENT = "direct_current"
    # segment j carries the sum of downstream D_i * I_i (averaged input current)
    DUTY_WEIGHTED = "duty_weighted"


class InputGain(str, Enum):
    """Voltage multiplying the duty perturbation in the inductor equation"""

    NODE_VOLTAGE = "node_voltage"
    OUTPUT_VOLTAGE = "output_voltage"


class OperatingPointMode(str, Enum):
    """Linearization point used while R is swept"""

    # solved once for the network as given, only the line coupling follows R
    FROZEN = "frozen"
    # re-solved at every R; no equilibrium counts as unstable
    RESOLVED = "resolved"


class ConverterParams(BaseModel):
    """Ideal buck converter"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    inductance: float = Field(..., gt=0.0, description="L (henry)")
    capacitance: float = Field(..., gt=0.0, description="C (farad)")
    f_sw: float = Field(..., gt=0.0, description="switching frequency (hertz)")

    @property
    def period(self) -> float:
        """Switching period T = 1/f_sw"""
        return 1.0 / self.f_sw

    @property
    def natural_frequency(self) -> float:
        """1/sqrt(LC) in rad/s"""
        return 1.0 / float(np.sqrt(self.inductance * self.capacitance))


class SourceParams(BaseModel):
    """Stiff DC source at the head of the feeder"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    v_g: float = Field(..., gt=0.0, description="source voltage (volt)")


class CPLoad(BaseModel):
    """Constant power load with a shutoff range"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    power: float = Field(..., ge=0.0, description="P (watt)")
    v_nominal: float = Field(default_factory=lambda: settings.DEFAULT_V_NOMINAL, gt=0.0)
    v_min: float = Field(default_factory=lambda: settings.DEFAULT_V_MIN, gt=0.0)
    v_max: float = Field(default_factory=lambda: settings.DEFAULT_V_MAX, gt=0.0)

    @model_validator(mode="after")
    def check_range(self) -> "CPLoad":
        if not self.v_min <= self.v_nominal <= self.v_max:
            raise ValueError("require 0 < v_min <= v_nominal <= v_max")
        return self

    def in_range(self, v: float) -> bool:
        return self.v_min <= v <= self.v_max

    def current(self, v: float) -> float:
        """P/v inside [v_min, v_max], zero outside (load shut off)"""
        if v <= 0.0 or not self.in_range(v):
            return 0.0
        return self.power / v

    def incremental_conductance(self, v: float) -> float:
        """-dI/dv at v; positive for an active load (negative resistance)"""
        if v <= 0.0 or not self.in_range(v):
            return 0.0
        return self.power / (v * v)


class LineNetwork(BaseModel):
    """Radial feeder: source, then n equal segments, converter k after segment k"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(..., ge=1)
    resistance: float = Field(..., ge=0.0, description="per-segment R (ohm)")


class NetworkSpec(BaseModel):
    """Full problem instance"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    source: SourceParams
    line: LineNetwork
    converters: List[ConverterParams]
    loads: List[CPLoad]

    @model_validator(mode="after")
    def check_lengths(self) -> "NetworkSpec":
        if len(self.converters) != self.line.n or len(self.loads) != self.line.n:
            raise ValueError(
                f"expected {self.line.n} converters and loads, "
                f"got {len(self.converters)} and {len(self.loads)}"
            )
        return self

    @property
    def n(self) -> int:
        return self.line.n

    def with_resistance(self, resistance: float) -> "NetworkSpec":
        """Same instance with a different segment resistance"""
        return NetworkSpec(
            source=self.source,
            line=LineNetwork(n=self.line.n, resistance=resistance),
            converters=self.converters,
            loads=self.loads,
        )

    def replicate(self, n: int, resistance: Optional[float] = None) -> "NetworkSpec":
        """n copies of the first converter and load on the same feeder"""
        return NetworkSpec(
            source=self.source,
            line=LineNetwork(
                n=n, resistance=self.line.resistance if resistance is None else resistance
            ),
            converters=[self.converters[0]] * n,
            loads=[self.loads[0]] * n,
        )

    def standalone(self, k: int) -> "NetworkSpec":
        """Converter k alone between the stiff source and its load (0-based k)"""
        return NetworkSpec(
            source=self.source,
            line=LineNetwork(n=1, resistance=0.0),
            converters=[self.converters[k]],
            loads=[self.loads[k]],
        )


class OperatingPoint(BaseModel):
    """Steady state of the averaged equations, one entry per converter"""

    model_config = ConfigDict(frozen=True)

    duty: Tuple[float, ...]
    v_out: Tuple[float, ...]
    i_l: Tuple[float, ...]
    v_node: Tuple[float, ...]
    coupling: CouplingConvention
    residual: float = 0.0
    iterations: int = 0

    @property
    def n(self) -> int:
        return len(self.duty)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(duty, v_out, i_l, v_node) as float arrays"""
        return (
            np.asarray(self.duty, dtype=float),
            np.asarray(self.v_out, dtype=float),
            np.asarray(self.i_l, dtype=float),
            np.asarray(self.v_node, dtype=float),
        )
