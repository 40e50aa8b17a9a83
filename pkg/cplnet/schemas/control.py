"""
State-feedback gain schemas (JSON import/export for pinned controllers)
"""

import math
from pathlib import Path
from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator


class ConverterGain(BaseModel):
    """Row F_k acting on (i_k, v_k)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    f_i: float = Field(..., description="gain on inductor-current perturbation (per ampere)")
    f_v: float = Field(..., description="gain on output-voltage perturbation (per volt)")

    @field_validator("f_i", "f_v")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("gain entries must be finite")
        return v


class GlobalFeedback(BaseModel):
    """Block-diagonal feedback: converter k sees only its own states"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gains: List[ConverterGain] = Field(..., min_length=1)

    @property
    def n(self) -> int:
        return len(self.gains)

    def replicate(self, n: int) -> "GlobalFeedback":
        """Same gain for n identical converters (uses the first row)"""
        return GlobalFeedback(gains=[self.gains[0]] * n)

    def write_json(self, path: Path) -> None:
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read_json(cls, path: Path) -> "GlobalFeedback":
        return cls.model_validate_json(path.read_text(encoding="utf-8"))
