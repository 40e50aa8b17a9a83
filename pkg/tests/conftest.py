"""
Shared fixtures: the 110 V -> 48 V reference converter (20 uH, 29 uF, 1 kW, 200 kHz)
"""

import math

import pytest

from cplnet.models.control import design_individual_gains
from cplnet.schemas import (
    ConverterParams,
    CPLoad,
    CouplingConvention,
    GlobalFeedback,
    LineNetwork,
    NetworkSpec,
    SourceParams,
)
from cplnet.services import StabilityProblem

V_G = 110.0
L = 20e-6
C = 29e-6
P = 1000.0
V_BAR = 48.0
F_SW = 200e3
D_BAR = V_BAR / V_G


def make_spec(n: int = 1, resistance: float = 0.0, power: float = P) -> NetworkSpec:
    return NetworkSpec(
        source=SourceParams(v_g=V_G),
        line=LineNetwork(n=n, resistance=resistance),
        converters=[ConverterParams(inductance=L, capacitance=C, f_sw=F_SW)] * n,
        loads=[CPLoad(power=power, v_nominal=V_BAR, v_min=20.0, v_max=120.0)] * n,
    )


def largest_min_matrix_eigenvalue(n: int) -> float:
    """Largest eigenvalue of M[k, m] = min(k, m)"""
    return 1.0 / (4.0 * math.sin(math.pi / (4 * n + 2)) ** 2)


@pytest.fixture
def single_spec() -> NetworkSpec:
    return make_spec(1)


@pytest.fixture
def pair_spec() -> NetworkSpec:
    return make_spec(2)


@pytest.fixture(scope="session")
def designed_gains() -> GlobalFeedback:
    """Pole placement at -w0 (1 +/- j), w0 = 0.5 / sqrt(LC)"""
    return design_individual_gains(make_spec(1))


@pytest.fixture
def problem(designed_gains):
    """StabilityProblem factory on the reference converter, frozen at R = 0"""

    def factory(n: int = 2, **kwargs) -> StabilityProblem:
        kwargs.setdefault("coupling", CouplingConvention.DIRECT_CURRENT)
        return StabilityProblem(spec=make_spec(n), gains=designed_gains, **kwargs)

    return factory


@pytest.fixture(scope="session")
def analytic_r_star(designed_gains):
    """
    Exact boundary for n equal converters under direct-current coupling

    Each eigenvalue mu of the min-matrix gives a 2x2 mode
    [[p - r mu, q], [1/C, a]] with r = D R / L; the mode loses stability when
    r mu exceeds s = p - q / (C a).
    """
    gain = designed_gains.gains[0]
    p = V_G / L * gain.f_i
    q = -1.0 / L + V_G / L * gain.f_v
    a = P / (C * V_BAR**2)
    s = p - q / (C * a)

    def r_star(n: int) -> float:
        return s * L / (D_BAR * largest_min_matrix_eigenvalue(n))

    return r_star
