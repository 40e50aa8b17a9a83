"""
Steady-state operating point of a radial feeder of buck converters feeding CPLs
"""

import logging
import math
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from cplnet.core.config import settings
from cplnet.core.exceptions import (
    ConvergenceError,
    DomainError,
    InfeasibleOperatingPointError,
)
from cplnet.schemas.design import OptionalDesign, OutputShuntR
from cplnet.schemas.network import CouplingConvention, CPLoad, NetworkSpec, OperatingPoint

logger = logging.getLogger(__name__)


def cpl_current(load: CPLoad, v: float) -> float:
    """
    Current drawn by a constant power load

    Args:
        load: Load parameters
        v: Terminal voltage (volt), must be positive

    Returns:
        P/v inside [v_min, v_max], 0 outside (load shut off)

    Raises:
        DomainError: If v is not a positive finite number
    """
    if not math.isfinite(v) or v <= 0.0:
        raise DomainError(f"CPL voltage must be positive, got {v!r}")
    return load.current(v)


def feeder_matrix(n: int) -> np.ndarray:
    """M[k, m] = min(k, m) (1-based): segments shared by the paths to nodes k and m"""
    idx = np.arange(1, n + 1)
    return np.minimum.outer(idx, idx).astype(float)


def segment_currents(branch_currents: np.ndarray) -> np.ndarray:
    """Segment j carries every branch current at or downstream of node j"""
    return np.cumsum(branch_currents[::-1])[::-1]


def _inductor_currents(spec: NetworkSpec, v_out: np.ndarray, design: OptionalDesign) -> np.ndarray:
    i_l = np.array([load.power / v for load, v in zip(spec.loads, v_out)])
    if isinstance(design, OutputShuntR):
        i_l = i_l + v_out / design.r_s
    return i_l


def _check_feasible(v_out: np.ndarray, v_node: np.ndarray) -> None:
    for k, (vo, vn) in enumerate(zip(v_out, v_node)):
        if vn <= 0.0:
            raise InfeasibleOperatingPointError(
                f"node voltage {vn:.6g} V is not positive", converter=k + 1
            )
        if vo / vn >= 1.0:
            raise InfeasibleOperatingPointError(
                f"duty cycle {vo / vn:.6g} outside (0, 1): node voltage {vn:.6g} V "
                f"cannot supply {vo:.6g} V",
                converter=k + 1,
            )


def _bisect_single(v_g: float, resistance: float, load_product: float, v_out: float) -> float:
    """Upper root of v = v_g - R * (v_out * i_l) / v for one converter"""

    def residual(v: float) -> float:
        return v - v_g + resistance * load_product / v

    v_low = math.sqrt(resistance * load_product)
    if residual(v_low) > 0.0:
        raise InfeasibleOperatingPointError(
            f"line resistance {resistance:g} ohm exceeds the power-transfer limit", converter=1
        )
    root = bisect(residual, max(v_low, 1e-300), v_g, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    logger.debug(f"Bisection fallback: node voltage {root:.12g} V")
    return float(root)


def solve_operating_point(
    spec: NetworkSpec,
    coupling: CouplingConvention = CouplingConvention.DUTY_WEIGHTED,
    design: OptionalDesign = None,
    max_iter: Optional[int] = None,
    rtol: Optional[float] = None,
) -> OperatingPoint:
    """
    Fixed point of the averaged equations with d/dt = 0

    Output voltages sit at their nominal values, inductor currents supply the
    loads (and the output shunt resistor, if present), node voltages follow the
    feeder drop recursion and D_k = V_k / V_node_k.

    Args:
        spec: Problem instance
        coupling: Line-drop convention (duty weighted is the physical average)
        design: Passive design; only OutputShuntR changes the steady state
        max_iter: Iteration cap (defaults to settings.SOLVER_MAX_ITER)
        rtol: Relative residual tolerance (defaults to settings.SOLVER_RTOL)

    Returns:
        OperatingPoint

    Raises:
        InfeasibleOperatingPointError: If some D_k leaves (0, 1) or a node voltage is not positive
        ConvergenceError: If the iteration cap is reached
        DomainError: If max_iter < 1 or rtol < 0
    """
    if max_iter is None:
        max_iter = settings.SOLVER_MAX_ITER
    if rtol is None:
        rtol = settings.SOLVER_RTOL
    if max_iter < 1 or rtol < 0.0:
        raise DomainError(f"need max_iter >= 1 and rtol >= 0, got {max_iter} and {rtol!r}")
    relaxation = settings.SOLVER_RELAXATION

    n = spec.n
    v_g = spec.source.v_g
    resistance = spec.line.resistance
    v_out = np.array([load.v_nominal for load in spec.loads], dtype=float)
    i_l = _inductor_currents(spec, v_out, design)
    feeder = feeder_matrix(n)

    def drop_map(v_node: np.ndarray) -> np.ndarray:
        if coupling == CouplingConvention.DUTY_WEIGHTED:
            branch = v_out / v_node * i_l
        else:
            branch = i_l
        return v_g - resistance * feeder @ branch

    iterations = 0
    if resistance == 0.0:
        v_node = np.full(n, v_g)
    elif coupling == CouplingConvention.DIRECT_CURRENT:
        # branch currents do not depend on the node voltages: one pass
        v_node = drop_map(np.full(n, v_g))
        _check_feasible(v_out, v_node)
    else:
        v_node = np.full(n, v_g)
        converged = False
        residual = math.inf
        for iterations in range(1, max_iter + 1):
            target = drop_map(v_node)
            residual = float(np.max(np.abs(target - v_node))) / v_g
            if residual <= rtol:
                converged = True
                break
            v_node = (1.0 - relaxation) * v_node + relaxation * target
            # the map is monotone, iterates only decrease from v_g
            if np.any(v_node <= v_out):
                if n == 1:
                    break
                _check_feasible(v_out, v_node)
        if not converged:
            if n != 1:
                raise ConvergenceError(
                    f"operating point did not converge in {max_iter} iterations", residual
                )
            logger.debug("Fixed-point iteration failed for n=1, falling back to bisection")
            v_node = np.array([_bisect_single(v_g, resistance, v_out[0] * i_l[0], v_out[0])])
        logger.debug(f"Operating point converged in {iterations} iterations")

    _check_feasible(v_out, v_node)
    residual = float(np.max(np.abs(drop_map(v_node) - v_node))) / v_g
    duty = v_out / v_node

    return OperatingPoint(
        duty=tuple(float(d) for d in duty),
        v_out=tuple(float(v) for v in v_out),
        i_l=tuple(float(i) for i in i_l),
        v_node=tuple(float(v) for v in v_node),
        coupling=coupling,
        residual=residual,
        iterations=iterations,
    )


def branch_currents(
    op: OperatingPoint, coupling: Optional[CouplingConvention] = None
) -> np.ndarray:
    """Averaged current drawn from each feeder node by its converter"""
    duty, _, i_l, _ = op.arrays()
    if (coupling or op.coupling) == CouplingConvention.DUTY_WEIGHTED:
        return duty * i_l
    return i_l


def power_balance_residual(spec: NetworkSpec, op: OperatingPoint) -> float:
    """
    Relative mismatch between source power and load power plus line losses

    Only meaningful for the duty-weighted convention, where the averaged
    converter input power equals its output power.
    """
    _, v_out, i_l, _ = op.arrays()
    segments = segment_currents(branch_currents(op, CouplingConvention.DUTY_WEIGHTED))
    source_power = spec.source.v_g * segments[0]
    delivered = float(np.sum(v_out * i_l))
    losses = spec.line.resistance * float(np.sum(segments**2))
    return abs(source_power - delivered - losses) / max(source_power, 1e-300)
