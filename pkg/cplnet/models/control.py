"""
Decentralized state feedback: per-converter pole placement and block-diagonal assembly
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from cplnet.core.exceptions import (
    DimensionMismatchError,
    PolePlacementError,
    UncontrollableError,
)
from cplnet.models.operating_point import solve_operating_point
from cplnet.models.smallsignal import StateSpace, build_single
from cplnet.schemas.control import ConverterGain, GlobalFeedback
from cplnet.schemas.network import ConverterParams, CouplingConvention, NetworkSpec

logger = logging.getLogger(__name__)

# relative singular-value cutoff for the controllability rank
CONTROLLABILITY_RTOL = 1e-10


def _require_single(ss: StateSpace) -> None:
    if ss.dim != 2 or ss.n_inputs != 1:
        raise DimensionMismatchError(
            f"expected a 2-state single-input system, got {ss.dim} states and {ss.n_inputs} inputs"
        )


def _converter_columns(labels: Sequence[str], k: int) -> Tuple[int, int]:
    """Column indices of (i_k, v_k) for 1-based converter k"""
    try:
        return labels.index(f"i{k}"), labels.index(f"v{k}")
    except ValueError:
        raise DimensionMismatchError(f"state labels carry no (i{k}, v{k}) pair")


def check_controllability(ss: StateSpace) -> bool:
    """rank [B, AB] == 2, rank taken from singular values"""
    _require_single(ss)
    ctrb = np.hstack([ss.b, ss.a @ ss.b])
    sigma = np.linalg.svd(ctrb, compute_uv=False)
    if sigma[0] == 0.0:
        return False
    rank = int(np.sum(sigma > CONTROLLABILITY_RTOL * sigma[0]))
    return rank == 2


def default_poles(conv: ConverterParams) -> Tuple[complex, complex]:
    """-w0 (1 +/- j) with w0 = 0.5 / sqrt(LC)"""
    w0 = 0.5 * conv.natural_frequency
    return complex(-w0, w0), complex(-w0, -w0)


def _validate_poles(poles: Sequence[complex]) -> Tuple[float, float]:
    """Characteristic coefficients (a1, a0) of s^2 + a1 s + a0"""
    if len(poles) != 2:
        raise PolePlacementError(f"need exactly two poles, got {len(poles)}")
    p1, p2 = complex(poles[0]), complex(poles[1])
    if p1.real >= 0.0 or p2.real >= 0.0:
        raise PolePlacementError(f"poles must lie in the open left half plane: {p1}, {p2}")
    is_real_pair = p1.imag == 0.0 and p2.imag == 0.0
    is_conjugate = abs(p1 - p2.conjugate()) <= 1e-12 * max(abs(p1), 1.0)
    if not (is_real_pair or is_conjugate):
        raise PolePlacementError("poles must be real or a complex-conjugate pair")
    return float(-(p1 + p2).real), float((p1 * p2).real)


def design_individual(ss: StateSpace, desired_poles: Sequence[complex]) -> ConverterGain:
    """
    Place the two closed-loop poles of a single converter

    Coefficient matching on the 2x2 characteristic polynomial. With
    adj(A) = tr(A) I - A, tr(A + BF) = tr(A) + F B and
    det(A + BF) = det(A) + F adj(A) B, so F solves a 2x2 linear system.

    Args:
        ss: Two-state model from build_single (labels v1, i1)
        desired_poles: Conjugate pair or two reals, all Re < 0

    Returns:
        ConverterGain acting on (i, v)

    Raises:
        UncontrollableError: If rank [B, AB] < 2
        PolePlacementError: If the poles are rejected
    """
    _require_single(ss)
    a1, a0 = _validate_poles(desired_poles)
    if not check_controllability(ss):
        raise UncontrollableError("single-converter model is not controllable")

    a, b = ss.a, ss.b[:, 0]
    trace = float(np.trace(a))
    det = float(np.linalg.det(a))
    adj_b = trace * b - a @ b
    lhs = np.vstack([b, adj_b])
    rhs = np.array([-a1 - trace, a0 - det])
    f = np.linalg.solve(lhs, rhs)

    i_col, v_col = _converter_columns(list(ss.state_labels), 1)
    gain = ConverterGain(f_i=float(f[i_col]), f_v=float(f[v_col]))
    logger.debug(f"Placed poles {desired_poles}: f_i={gain.f_i:.6g}, f_v={gain.f_v:.6g}")
    return gain


def design_individual_gains(
    spec: NetworkSpec, poles: Optional[Sequence[complex]] = None
) -> GlobalFeedback:
    """
    Stabilize every converter standalone (stiff source, R = 0)

    Uses default_poles per converter unless poles is given.
    """
    gains = []
    for k in range(spec.n):
        standalone = spec.standalone(k)
        op = solve_operating_point(standalone, coupling=CouplingConvention.DIRECT_CURRENT)
        ss = build_single(standalone.converters[0], standalone.loads[0], standalone.source, op)
        target = poles if poles is not None else default_poles(standalone.converters[0])
        gains.append(design_individual(ss, target))
    logger.info(f"Designed individual gains for {spec.n} converter(s)")
    return GlobalFeedback(gains=gains)


def assemble_global(
    gains: GlobalFeedback, n: int, state_labels: Optional[Sequence[str]] = None
) -> np.ndarray:
    """
    Block-diagonal F (n x dim)

    Row k carries (f_i, f_v) in the columns of i_k and v_k and zeros elsewhere.
    Without state_labels the layout is [i1 v1 ... in vn]; with them, passive
    design states get zero columns.
    """
    if gains.n != n:
        raise DimensionMismatchError(f"{gains.n} gains given for {n} converters")
    labels = list(state_labels) if state_labels is not None else [
        label for k in range(1, n + 1) for label in (f"i{k}", f"v{k}")
    ]
    f = np.zeros((n, len(labels)))
    for k, gain in enumerate(gains.gains, start=1):
        i_col, v_col = _converter_columns(labels, k)
        f[k - 1, i_col] = gain.f_i
        f[k - 1, v_col] = gain.f_v
    return f


def closed_loop(ss: StateSpace, f: np.ndarray) -> StateSpace:
    """A replaced by A + B F, labels kept"""
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        f = f.reshape(1, -1)
    if f.shape != (ss.n_inputs, ss.dim):
        raise DimensionMismatchError(
            f"F must be {ss.n_inputs}x{ss.dim}, got {f.shape[0]}x{f.shape[1]}"
        )
    return StateSpace(a=ss.a + ss.b @ f, b=ss.b.copy(), state_labels=ss.state_labels)
