"""
Numerical core: operating point, small-signal models, decentralized control
"""

from .control import (
    assemble_global,
    check_controllability,
    closed_loop,
    default_poles,
    design_individual,
    design_individual_gains,
)
from .operating_point import cpl_current, solve_operating_point
from .smallsignal import (
    Spectrum,
    StateSpace,
    apply_design,
    build_network,
    build_single,
    eigenvalues,
    is_stable,
    schur_determinant_check,
    sign_structure,
)

__all__ = [
    "assemble_global",
    "check_controllability",
    "closed_loop",
    "default_poles",
    "design_individual",
    "design_individual_gains",
    "cpl_current",
    "solve_operating_point",
    "Spectrum",
    "StateSpace",
    "apply_design",
    "build_network",
    "build_single",
    "eigenvalues",
    "is_stable",
    "schur_determinant_check",
    "sign_structure",
]
