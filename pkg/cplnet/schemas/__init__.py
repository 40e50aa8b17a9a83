"""
Pydantic schemas for circuit instances, designs, gains, simulation and run configs
"""

from .control import ConverterGain, GlobalFeedback
from .design import DesignVariant, InputGroundRC, InputShuntC, OptionalDesign, OutputShuntR
from .network import (
    ConverterParams,
    CouplingConvention,
    CPLoad,
    InputGain,
    LineNetwork,
    NetworkSpec,
    OperatingPoint,
    OperatingPointMode,
    SourceParams,
)
from .report import (
    BoundaryPoint,
    CriticalNResult,
    CrossingResult,
    DesignReport,
    StabilityBoundary,
    StabilityPoint,
)
from .run_config import (
    SCHEMA_VERSION,
    AnalyzeBlock,
    GainsBlock,
    InputRCStudy,
    InputShuntStudy,
    OutputShuntStudy,
    ResistanceGrid,
    RunConfig,
    SweepNBlock,
    SweepRBlock,
)
from .simulation import (
    InitialState,
    Measurement,
    OpenLoop,
    Proportional,
    SimConfig,
    SimModel,
    StateFeedback,
)

__all__ = [
    # Control
    "ConverterGain",
    "GlobalFeedback",
    # Design
    "DesignVariant",
    "InputGroundRC",
    "InputShuntC",
    "OptionalDesign",
    "OutputShuntR",
    # Network
    "ConverterParams",
    "CouplingConvention",
    "CPLoad",
    "InputGain",
    "LineNetwork",
    "NetworkSpec",
    "OperatingPoint",
    "OperatingPointMode",
    "SourceParams",
    # Reports
    "BoundaryPoint",
    "CriticalNResult",
    "CrossingResult",
    "DesignReport",
    "StabilityBoundary",
    "StabilityPoint",
    # Run config
    "SCHEMA_VERSION",
    "AnalyzeBlock",
    "GainsBlock",
    "InputRCStudy",
    "InputShuntStudy",
    "OutputShuntStudy",
    "ResistanceGrid",
    "RunConfig",
    "SweepNBlock",
    "SweepRBlock",
    # Simulation
    "InitialState",
    "Measurement",
    "OpenLoop",
    "Proportional",
    "SimConfig",
    "SimModel",
    "StateFeedback",
]
