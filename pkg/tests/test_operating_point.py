"""
Operating point solver and CPL current law
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from cplnet.core.exceptions import ConvergenceError, DomainError, InfeasibleOperatingPointError
from cplnet.models.operating_point import (
    cpl_current,
    feeder_matrix,
    power_balance_residual,
    segment_currents,
    solve_operating_point,
)
from cplnet.schemas import CouplingConvention, CPLoad, OutputShuntR

from conftest import D_BAR, P, V_BAR, V_G, make_spec


class TestCplCurrent:
    def test_inside_range(self):
        load = CPLoad(power=1000.0, v_nominal=48.0, v_min=20.0, v_max=120.0)
        assert cpl_current(load, 50.0) == pytest.approx(20.0)

    def test_shut_off_outside_range(self):
        load = CPLoad(power=1000.0, v_nominal=48.0, v_min=20.0, v_max=120.0)
        assert cpl_current(load, 10.0) == 0.0
        assert cpl_current(load, 150.0) == 0.0

    @pytest.mark.parametrize("v", [0.0, -1.0, math.nan, math.inf])
    def test_rejects_non_positive_voltage(self, v):
        load = CPLoad(power=1000.0)
        with pytest.raises(DomainError):
            cpl_current(load, v)

    def test_range_must_contain_nominal(self):
        with pytest.raises(ValueError):
            CPLoad(power=1000.0, v_nominal=10.0, v_min=20.0, v_max=120.0)


class TestFeeder:
    def test_min_matrix(self):
        np.testing.assert_array_equal(
            feeder_matrix(3), [[1.0, 1.0, 1.0], [1.0, 2.0, 2.0], [1.0, 2.0, 3.0]]
        )

    def test_segment_currents_accumulate_downstream(self):
        np.testing.assert_allclose(segment_currents(np.array([1.0, 2.0, 3.0])), [6.0, 5.0, 3.0])


class TestSolveOperatingPoint:
    def test_stiff_source(self):
        op = solve_operating_point(make_spec(1))
        assert op.duty[0] == pytest.approx(D_BAR, rel=1e-12)
        assert op.i_l[0] == pytest.approx(P / V_BAR, rel=1e-12)
        assert op.v_node[0] == V_G

    def test_direct_current_drops(self):
        op = solve_operating_point(make_spec(2, 0.1), coupling=CouplingConvention.DIRECT_CURRENT)
        i = P / V_BAR
        # segment 1 carries both currents, segment 2 only the far one
        assert op.v_node[0] == pytest.approx(V_G - 0.1 * 2 * i)
        assert op.v_node[1] == pytest.approx(V_G - 0.1 * 3 * i)
        assert op.duty[1] > op.duty[0]

    def test_duty_weighted_fixed_point(self):
        spec = make_spec(3, 0.2)
        op = solve_operating_point(spec)
        _, v_out, i_l, v_node = op.arrays()
        branch = v_out / v_node * i_l
        expected = V_G - 0.2 * feeder_matrix(3) @ branch
        np.testing.assert_allclose(v_node, expected, rtol=1e-8)
        assert op.residual <= 1e-9

    def test_power_balance(self):
        spec = make_spec(3, 0.2)
        op = solve_operating_point(spec)
        assert power_balance_residual(spec, op) <= 1e-7

    def test_single_converter_closed_form(self):
        # v_node^2 - V_g v_node + R P = 0, upper root
        r = 1.0
        op = solve_operating_point(make_spec(1, r))
        expected = 0.5 * (V_G + math.sqrt(V_G**2 - 4.0 * r * P))
        assert op.v_node[0] == pytest.approx(expected, rel=1e-8)

    def test_power_transfer_limit_is_infeasible(self):
        # V_g^2 / (4 P) = 3.025 ohm is the largest resistance with a solution
        with pytest.raises(InfeasibleOperatingPointError) as excinfo:
            solve_operating_point(make_spec(1, 3.2))
        assert excinfo.value.converter == 1

    def test_infeasible_names_converter(self):
        with pytest.raises(InfeasibleOperatingPointError) as excinfo:
            solve_operating_point(make_spec(2, 1.0), coupling=CouplingConvention.DIRECT_CURRENT)
        assert excinfo.value.converter in (1, 2)

    def test_output_shunt_adds_current(self):
        op = solve_operating_point(make_spec(1), design=OutputShuntR(r_s=2.0))
        assert op.i_l[0] == pytest.approx(P / V_BAR + V_BAR / 2.0)
        assert op.duty[0] == pytest.approx(D_BAR)

    def test_zero_power_load(self):
        op = solve_operating_point(make_spec(2, 0.5, power=0.0))
        assert op.i_l == (0.0, 0.0)
        np.testing.assert_allclose(op.v_node, [V_G, V_G])

    def test_explicit_solver_limits_are_respected(self):
        spec = make_spec(2, 0.3)
        with pytest.raises(DomainError):
            solve_operating_point(spec, max_iter=0)
        with pytest.raises(DomainError):
            solve_operating_point(spec, rtol=-1.0)
        with pytest.raises(ConvergenceError):
            solve_operating_point(spec, max_iter=1)

    @hyp_settings(max_examples=100, derandomize=True, deadline=None)
    @given(r=st.floats(0.0, 0.6), step=st.floats(1e-3, 0.2))
    def test_node_voltages_fall_with_resistance(self, r, step):
        near = solve_operating_point(make_spec(3, r, power=500.0))
        far = solve_operating_point(make_spec(3, r + step, power=500.0))
        assert np.all(np.asarray(far.v_node) < np.asarray(near.v_node))
        assert np.all(np.diff(far.v_node) < 0.0)
