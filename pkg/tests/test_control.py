"""
Pole placement, gain assembly and the gains.json round trip
"""

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from cplnet.core.exceptions import (
    DimensionMismatchError,
    PolePlacementError,
    UncontrollableError,
)
from cplnet.models.control import (
    assemble_global,
    check_controllability,
    closed_loop,
    default_poles,
    design_individual,
    design_individual_gains,
)
from cplnet.models.operating_point import solve_operating_point
from cplnet.models.smallsignal import StateSpace, build_single, eigenvalues
from cplnet.schemas import (
    ConverterGain,
    ConverterParams,
    CPLoad,
    GlobalFeedback,
    LineNetwork,
    NetworkSpec,
    SourceParams,
)

from conftest import C, L, make_spec


@pytest.fixture
def plant(single_spec):
    op = solve_operating_point(single_spec)
    return build_single(single_spec.converters[0], single_spec.loads[0], single_spec.source, op)


def _closed_poles(ss: StateSpace, gain: ConverterGain) -> np.ndarray:
    f = np.zeros((1, 2))
    f[0, ss.index("i1")] = gain.f_i
    f[0, ss.index("v1")] = gain.f_v
    return eigenvalues(closed_loop(ss, f).a).eigenvalues


class TestPolePlacement:
    def test_default_poles(self, single_spec):
        w0 = 0.5 / np.sqrt(L * C)
        p1, p2 = default_poles(single_spec.converters[0])
        assert p1 == pytest.approx(complex(-w0, w0))
        assert p2 == pytest.approx(complex(-w0, -w0))

    def test_places_conjugate_pair(self, plant, single_spec):
        poles = default_poles(single_spec.converters[0])
        gain = design_individual(plant, poles)
        placed = _closed_poles(plant, gain)
        np.testing.assert_allclose(placed, sorted(poles, key=lambda z: -z.imag), rtol=1e-8)

    def test_places_real_pair(self, plant):
        gain = design_individual(plant, [-1e4, -3e4])
        placed = _closed_poles(plant, gain)
        np.testing.assert_allclose(placed.real, [-1e4, -3e4], rtol=1e-8)
        np.testing.assert_allclose(placed.imag, [0.0, 0.0], atol=1e-6)

    def test_reference_gains(self, plant, single_spec):
        gain = design_individual(plant, default_poles(single_spec.converters[0]))
        assert gain.f_i == pytest.approx(-0.010271, rel=1e-3)
        assert gain.f_v == pytest.approx(8.766e-5, rel=1e-2)

    @pytest.mark.parametrize(
        "poles",
        [
            [complex(1.0, 0.0), complex(-1.0, 0.0)],
            [complex(-1.0, 2.0), complex(-1.0, 3.0)],
            [complex(-1.0, 0.0)],
        ],
    )
    def test_rejected_poles(self, plant, poles):
        with pytest.raises(PolePlacementError):
            design_individual(plant, poles)

    def test_uncontrollable(self):
        ss = StateSpace(
            a=np.array([[-1.0, 0.0], [0.0, -2.0]]),
            b=np.array([[0.0], [1.0]]),
            state_labels=("v1", "i1"),
        )
        assert not check_controllability(ss)
        with pytest.raises(UncontrollableError):
            design_individual(ss, [-1.0, -2.0])

    @hyp_settings(max_examples=100, derandomize=True, deadline=None)
    @given(
        inductance=st.floats(1e-6, 1e-3),
        capacitance=st.floats(1e-6, 1e-3),
        power=st.floats(1.0, 5000.0),
        v_bar=st.floats(5.0, 100.0),
        damping=st.floats(0.2, 2.0),
        spread=st.floats(0.2, 2.0),
    )
    def test_places_pair_on_any_converter(
        self, inductance, capacitance, power, v_bar, damping, spread
    ):
        spec = NetworkSpec(
            source=SourceParams(v_g=2.0 * v_bar),
            line=LineNetwork(n=1, resistance=0.0),
            converters=[ConverterParams(inductance=inductance, capacitance=capacitance, f_sw=1e5)],
            loads=[CPLoad(power=power, v_nominal=v_bar, v_min=0.5 * v_bar, v_max=1.5 * v_bar)],
        )
        op = solve_operating_point(spec)
        ss = build_single(spec.converters[0], spec.loads[0], spec.source, op)
        assert check_controllability(ss)

        w0 = 1.0 / np.sqrt(inductance * capacitance)
        poles = [w0 * complex(-damping, spread), w0 * complex(-damping, -spread)]
        gain = design_individual(ss, poles)

        f = np.zeros((1, 2))
        f[0, ss.index("i1")] = gain.f_i
        f[0, ss.index("v1")] = gain.f_v
        closed = closed_loop(ss, f).a
        assert np.trace(closed) == pytest.approx(-2.0 * damping * w0, rel=1e-7)
        assert np.linalg.det(closed) == pytest.approx(w0**2 * (damping**2 + spread**2), rel=1e-7)
        np.testing.assert_allclose(_closed_poles(ss, gain), poles, rtol=1e-6)

    def test_requires_single_converter(self):
        ss = StateSpace(a=np.eye(3), b=np.ones((3, 1)), state_labels=("a", "b", "c"))
        with pytest.raises(DimensionMismatchError):
            design_individual(ss, [-1.0, -2.0])

    def test_individual_gains_per_converter(self):
        gains = design_individual_gains(make_spec(3))
        assert gains.n == 3
        assert gains.gains[0] == gains.gains[2]


class TestAssembly:
    def test_block_diagonal_layout(self):
        gains = GlobalFeedback(
            gains=[ConverterGain(f_i=1.0, f_v=2.0), ConverterGain(f_i=3.0, f_v=4.0)]
        )
        np.testing.assert_array_equal(
            assemble_global(gains, 2), [[1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 3.0, 4.0]]
        )

    def test_design_states_get_zero_columns(self):
        gains = GlobalFeedback(gains=[ConverterGain(f_i=1.0, f_v=2.0)])
        f = assemble_global(gains, 1, ("vc1", "i1", "v1"))
        np.testing.assert_array_equal(f, [[0.0, 1.0, 2.0]])

    def test_count_mismatch(self):
        gains = GlobalFeedback(gains=[ConverterGain(f_i=1.0, f_v=2.0)])
        with pytest.raises(DimensionMismatchError):
            assemble_global(gains, 2)

    def test_closed_loop_shape_check(self, plant):
        with pytest.raises(DimensionMismatchError):
            closed_loop(plant, np.zeros((2, 2)))

    def test_non_finite_gain_rejected(self):
        with pytest.raises(ValueError):
            ConverterGain(f_i=float("nan"), f_v=0.0)


class TestGainsFile:
    def test_round_trip(self, tmp_path, designed_gains):
        path = tmp_path / "gains.json"
        designed_gains.write_json(path)
        assert GlobalFeedback.read_json(path) == designed_gains
