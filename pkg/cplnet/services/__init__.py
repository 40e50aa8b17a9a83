"""
Analysis, simulation and export services
"""

from .analysis_service import AnalysisService, StabilityProblem
from .export_service import ExportService
from .simulation_service import SimulationService, Trace, TraceMetrics

__all__ = [
    "AnalysisService",
    "StabilityProblem",
    "ExportService",
    "SimulationService",
    "Trace",
    "TraceMetrics",
]
