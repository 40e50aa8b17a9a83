"""
Small-signal state-space models

Single converter (state order [v, i]), n-converter feeder (order
[i1 v1 ... in vn]) and the three passive-design augmentations, plus spectra,
stability verdicts and the block-determinant check.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
import scipy.linalg

from cplnet.core.config import settings
from cplnet.core.exceptions import (
    DimensionMismatchError,
    DomainError,
    SingularBlockError,
)
from cplnet.models.operating_point import feeder_matrix
from cplnet.schemas.design import (
    InputGroundRC,
    InputShuntC,
    OptionalDesign,
    OutputShuntR,
)
from cplnet.schemas.network import (
    ConverterParams,
    CouplingConvention,
    CPLoad,
    InputGain,
    NetworkSpec,
    OperatingPoint,
    SourceParams,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StateSpace:
    """Labeled dense (A, B) pair; one input column per converter duty"""

    a: np.ndarray
    b: np.ndarray
    state_labels: Tuple[str, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"A must be square, got shape {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise DimensionMismatchError(f"B has {b.shape[0]} rows, A has {a.shape[0]}")
        if len(self.state_labels) != a.shape[0]:
            raise DimensionMismatchError("one label per state required")
        if len(set(self.state_labels)) != len(self.state_labels):
            raise DimensionMismatchError("state labels must be unique")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "state_labels", tuple(self.state_labels))
        object.__setattr__(
            self, "_index", {label: k for k, label in enumerate(self.state_labels)}
        )

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise DimensionMismatchError(f"no state labelled {label!r}")

    def has(self, label: str) -> bool:
        return label in self._index


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by descending real part, then descending imaginary part"""

    eigenvalues: np.ndarray

    @property
    def max_real_part(self) -> float:
        if self.eigenvalues.size == 0:
            return -math.inf
        return float(np.max(self.eigenvalues.real))


@dataclass(frozen=True)
class SchurCheck:
    det_schur: float
    det_direct: float
    agree: bool


# ============================================================================
# BUILDERS
# ============================================================================


def build_single(
    conv: ConverterParams, load: CPLoad, src: SourceParams, op: OperatingPoint
) -> StateSpace:
    """
    Standalone converter between a stiff source and its CPL

    A = [[P/(C V^2), 1/C], [-1/L, 0]], B = [0, V_g/L]^T in state order [v, i].
    """
    if op.n != 1:
        raise DimensionMismatchError(f"single-converter model needs n=1, got n={op.n}")
    L, C = conv.inductance, conv.capacitance
    v_bar = op.v_out[0]
    a = np.array(
        [
            [load.incremental_conductance(v_bar) / C, 1.0 / C],
            [-1.0 / L, 0.0],
        ]
    )
    b = np.array([[0.0], [src.v_g / L]])
    return StateSpace(a=a, b=b, state_labels=("v1", "i1"))


def _check_dims(spec: NetworkSpec, op: OperatingPoint) -> None:
    if op.n != spec.n:
        raise DimensionMismatchError(
            f"operating point has {op.n} converters, spec has {spec.n}"
        )


def _line_coupling(
    spec: NetworkSpec, op: OperatingPoint, coupling: CouplingConvention
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Feeder terms of the inductor rows

    Returns (K_i, K_d): the n x n blocks added to A[i_k, i_m] and B[i_k, m].
    """
    n = spec.n
    duty, _, i_l, _ = op.arrays()
    inductance = np.array([c.inductance for c in spec.converters])
    drop = spec.line.resistance * feeder_matrix(n)
    row_scale = (duty / inductance)[:, None]
    if coupling == CouplingConvention.DUTY_WEIGHTED:
        k_i = -row_scale * drop * duty[None, :]
        k_d = -row_scale * drop * i_l[None, :]
    else:
        k_i = -row_scale * drop
        k_d = np.zeros((n, n))
    return k_i, k_d


def _converter_blocks(
    spec: NetworkSpec, op: OperatingPoint, input_gain: InputGain
) -> Tuple[np.ndarray, np.ndarray]:
    """Block-diagonal internal dynamics in [i1 v1 ... in vn] order, no line"""
    n = spec.n
    _, v_out, _, v_node = op.arrays()
    gain_voltage = v_node if input_gain == InputGain.NODE_VOLTAGE else v_out
    a = np.zeros((2 * n, 2 * n))
    b = np.zeros((2 * n, n))
    for k, (conv, load) in enumerate(zip(spec.converters, spec.loads)):
        ik, vk = 2 * k, 2 * k + 1
        L, C = conv.inductance, conv.capacitance
        a[ik, vk] = -1.0 / L
        a[vk, ik] = 1.0 / C
        a[vk, vk] = load.incremental_conductance(v_out[k]) / C
        b[ik, k] = gain_voltage[k] / L
    return a, b


def _network_labels(n: int) -> Tuple[str, ...]:
    labels = []
    for k in range(1, n + 1):
        labels.extend([f"i{k}", f"v{k}"])
    return tuple(labels)


def build_network(
    spec: NetworkSpec,
    op: OperatingPoint,
    coupling: CouplingConvention = CouplingConvention.DIRECT_CURRENT,
    input_gain: InputGain = InputGain.NODE_VOLTAGE,
) -> StateSpace:
    """
    Linearized n-converter feeder

    Under the direct-current convention A[i_k, i_m] = -(D_k R / L_k) min(k, m);
    the duty-weighted convention multiplies by D_m and adds the
    -(D_k R / L_k) min(k, m) Ibar_m duty terms to B.

    Args:
        spec: Problem instance
        op: Operating point solved for spec
        coupling: Line-drop convention
        input_gain: Node voltage (default) or output voltage in B

    Returns:
        StateSpace with 2n states and n inputs

    Raises:
        DimensionMismatchError: If op and spec disagree
    """
    _check_dims(spec, op)
    n = spec.n
    a, b = _converter_blocks(spec, op, input_gain)
    k_i, k_d = _line_coupling(spec, op, coupling)
    rows = np.arange(0, 2 * n, 2)
    a[np.ix_(rows, rows)] += k_i
    b[rows, :] += k_d
    return StateSpace(a=a, b=b, state_labels=_network_labels(n))


def _internal(
    ss: StateSpace, spec: NetworkSpec, op: OperatingPoint, coupling: CouplingConvention
) -> Tuple[np.ndarray, np.ndarray]:
    """Strip the resistive feeder terms that build_network added"""
    n = spec.n
    if ss.dim != 2 * n or ss.n_inputs != n:
        raise DimensionMismatchError(
            f"expected a {2 * n}-state network model, got {ss.dim} states"
        )
    a, b = ss.a.copy(), ss.b.copy()
    k_i, k_d = _line_coupling(spec, op, coupling)
    rows = np.arange(0, 2 * n, 2)
    a[np.ix_(rows, rows)] -= k_i
    b[rows, :] -= k_d
    return a, b


def _apply_output_shunt(ss: StateSpace, spec: NetworkSpec, design: OutputShuntR) -> StateSpace:
    a = ss.a.copy()
    for k, conv in enumerate(spec.converters, start=1):
        vk = ss.index(f"v{k}")
        a[vk, vk] -= 1.0 / (conv.capacitance * design.r_s)
    return StateSpace(a=a, b=ss.b.copy(), state_labels=ss.state_labels)


def node_laplacian(n: int, resistance: float) -> np.ndarray:
    """Nodal conductance of the feeder with the source node grounded"""
    g = np.zeros((n, n))
    for k in range(n):
        g[k, k] += 1.0 / resistance  # upstream segment
        if k + 1 < n:
            g[k, k] += 1.0 / resistance
            g[k, k + 1] -= 1.0 / resistance
            g[k + 1, k] -= 1.0 / resistance
    return g


def _apply_input_shunt(
    ss: StateSpace,
    spec: NetworkSpec,
    op: OperatingPoint,
    design: InputShuntC,
    coupling: CouplingConvention,
) -> StateSpace:
    n = spec.n
    resistance = spec.line.resistance
    a_int, b_int = _internal(ss, spec, op, coupling)
    duty, _, i_l, _ = op.arrays()
    c_s = design.c_s

    a = np.zeros((3 * n, 3 * n))
    b = np.zeros((3 * n, n))
    old = np.array([[2 * k, 2 * k + 1] for k in range(n)]).ravel()
    new = np.array([[3 * k + 1, 3 * k + 2] for k in range(n)]).ravel()
    a[np.ix_(new, new)] = a_int[np.ix_(old, old)]
    b[new, :] = b_int[old, :]
    labels = [label for k in range(1, n + 1) for label in (f"vc{k}", f"i{k}", f"v{k}")]

    node_rows = np.arange(0, 3 * n, 3)
    if resistance == 0.0:
        # nodes pinned to the stiff source: vc rows carry no signal and decay on their own
        logger.debug("Input shunt capacitor with R=0: vc states decoupled")
        a[node_rows, node_rows] = -1.0 / (c_s * settings.PINNED_NODE_RESISTANCE)
        return StateSpace(a=a, b=b, state_labels=tuple(labels))

    a[np.ix_(node_rows, node_rows)] = -node_laplacian(n, resistance) / c_s
    draw = duty if coupling == CouplingConvention.DUTY_WEIGHTED else np.ones(n)
    for k, conv in enumerate(spec.converters):
        vc, ik = 3 * k, 3 * k + 1
        a[vc, ik] = -draw[k] / c_s
        a[ik, vc] = duty[k] / conv.inductance
        if coupling == CouplingConvention.DUTY_WEIGHTED:
            b[vc, k] = -i_l[k] / c_s
    return StateSpace(a=a, b=b, state_labels=tuple(labels))


def _apply_input_rc(
    ss: StateSpace,
    spec: NetworkSpec,
    op: OperatingPoint,
    design: InputGroundRC,
    coupling: CouplingConvention,
) -> StateSpace:
    n = spec.n
    resistance = spec.line.resistance
    a_int, b_int = _internal(ss, spec, op, coupling)
    duty, _, i_l, _ = op.arrays()
    tau = design.r_f * design.c_f

    # node voltages are algebraic: (I + R/R_f M) dv = -R M (w i + Ibar d) + R/R_f M v_f
    feeder = resistance * feeder_matrix(n)
    q = np.eye(n) + feeder / design.r_f
    weight = duty if coupling == CouplingConvention.DUTY_WEIGHTED else np.ones(n)
    g_i = -np.linalg.solve(q, feeder * weight[None, :])
    g_f = np.linalg.solve(q, feeder / design.r_f)
    if coupling == CouplingConvention.DUTY_WEIGHTED:
        g_d = -np.linalg.solve(q, feeder * i_l[None, :])
    else:
        g_d = np.zeros((n, n))

    a = np.zeros((3 * n, 3 * n))
    b = np.zeros((3 * n, n))
    old = np.array([[2 * k, 2 * k + 1] for k in range(n)]).ravel()
    new = np.array([[3 * k, 3 * k + 1] for k in range(n)]).ravel()
    a[np.ix_(new, new)] = a_int[np.ix_(old, old)]
    b[new, :] = b_int[old, :]

    i_rows = np.arange(0, 3 * n, 3)
    f_rows = np.arange(2, 3 * n, 3)
    inductance = np.array([c.inductance for c in spec.converters])
    scale = (duty / inductance)[:, None]
    a[np.ix_(i_rows, i_rows)] += scale * g_i
    a[np.ix_(i_rows, f_rows)] += scale * g_f
    b[i_rows, :] += scale * g_d
    a[np.ix_(f_rows, i_rows)] += g_i / tau
    a[np.ix_(f_rows, f_rows)] += g_f / tau - np.eye(n) / tau
    b[f_rows, :] += g_d / tau

    labels = []
    for k in range(1, n + 1):
        labels.extend([f"i{k}", f"v{k}", f"vf{k}"])
    return StateSpace(a=a, b=b, state_labels=tuple(labels))


def apply_design(
    ss: StateSpace,
    spec: NetworkSpec,
    op: OperatingPoint,
    design: OptionalDesign,
    coupling: CouplingConvention = CouplingConvention.DIRECT_CURRENT,
) -> StateSpace:
    """
    Augment a feeder model with a passive design

    OutputShuntR lowers each v-diagonal by 1/(C_k R_s). InputShuntC adds one
    node-capacitor state per converter (order [vc1 i1 v1 ...]) and moves the
    line coupling into the node equations. InputGroundRC adds one filter
    state per converter (order [i1 v1 vf1 ...]) with the node voltages solved
    algebraically. ss must be the unmodified output of build_network with the
    same coupling convention.
    """
    if design is None:
        return ss
    _check_dims(spec, op)
    if isinstance(design, OutputShuntR):
        return _apply_output_shunt(ss, spec, design)
    if isinstance(design, InputShuntC):
        return _apply_input_shunt(ss, spec, op, design, coupling)
    if isinstance(design, InputGroundRC):
        return _apply_input_rc(ss, spec, op, design, coupling)
    raise DomainError(f"unknown design variant {design!r}")


# ============================================================================
# SPECTRA
# ============================================================================


def _as_finite_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    return a


def sort_eigenvalues(values: np.ndarray) -> np.ndarray:
    order = np.lexsort((-values.imag, -values.real))
    return values[order]


def eigenvalues(a) -> Spectrum:
    """
    All eigenvalues of a dense nonsymmetric matrix (LAPACK geev)

    Raises:
        DomainError: If A has non-finite entries
    """
    a = _as_finite_square(a)
    values = scipy.linalg.eigvals(a, check_finite=False)
    return Spectrum(eigenvalues=sort_eigenvalues(np.asarray(values, dtype=complex)))


def is_stable(spectrum: Spectrum, margin: float = 0.0) -> bool:
    """Hurwitz test with margin: every real part below -margin"""
    if margin < 0.0:
        raise DomainError("stability margin must be non-negative")
    return spectrum.max_real_part < -margin


def schur_determinant_check(a_closed, block_dim: int) -> SchurCheck:
    """
    det(A) two ways: det(A1) det(A2 - A21 A1^-1 A12) and direct LU

    Raises:
        SingularBlockError: If the leading block A1 is singular
    """
    a = _as_finite_square(a_closed)
    if not 0 < block_dim < a.shape[0]:
        raise DimensionMismatchError(f"block_dim must lie in (0, {a.shape[0]})")
    a1 = a[:block_dim, :block_dim]
    a12 = a[:block_dim, block_dim:]
    a21 = a[block_dim:, :block_dim]
    a2 = a[block_dim:, block_dim:]
    if np.linalg.cond(a1) > 1.0 / np.finfo(float).eps:
        raise SingularBlockError("A1")
    det_a1 = float(scipy.linalg.det(a1))
    schur = a2 - a21 @ scipy.linalg.solve(a1, a12)
    det_schur = det_a1 * float(scipy.linalg.det(schur))
    det_direct = float(scipy.linalg.det(a))
    agree = abs(det_schur - det_direct) <= 1e-8 * max(1.0, abs(det_direct))
    return SchurCheck(det_schur=det_schur, det_direct=det_direct, agree=agree)


def sign_structure(a_closed, n: int, tol: float = 0.0) -> np.ndarray:
    """
    Entrywise sign pattern (-1, 0, +1)

    Entries with magnitude at most tol * max|A| count as zero.
    """
    a = _as_finite_square(a_closed)
    if a.shape[0] != 2 * n:
        raise DimensionMismatchError(f"expected a {2 * n}-state matrix, got {a.shape[0]}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    pattern = np.sign(a).astype(np.int8)
    pattern[np.abs(a) <= tol * scale] = 0
    return pattern


def format_sign_pattern(pattern: np.ndarray) -> list:
    symbols = {-1: "-", 0: "0", 1: "+"}
    return [[symbols[int(x)] for x in row] for row in pattern]
