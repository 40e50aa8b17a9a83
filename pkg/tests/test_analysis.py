"""
Stability boundaries, critical network size and the three passive designs
"""

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings as hyp_settings, strategies as st

from cplnet.core.exceptions import (
    DimensionMismatchError,
    DomainError,
    NotStabilizableError,
    PreconditionError,
)
from cplnet.schemas import (
    ConverterGain,
    CouplingConvention,
    GlobalFeedback,
    OperatingPointMode,
    InputShuntC,
    StabilityPoint,
)
from cplnet.services import AnalysisService, StabilityProblem

from conftest import C, P, V_BAR, make_spec

GRID = 200


class TestStabilityProblem:
    def test_single_gain_is_replicated(self, problem):
        assert problem(3).gains.n == 3

    def test_gain_count_mismatch(self, designed_gains):
        gains = designed_gains.replicate(2)
        with pytest.raises(DimensionMismatchError):
            StabilityProblem(spec=make_spec(3), gains=gains)

    def test_stable_at_zero_resistance(self, problem):
        assert problem(4).max_real_part_at(0.0) < 0.0

    def test_isolated_spectrum_is_n_copies(self, problem):
        spectrum = problem(3).isolated_spectrum(0.5).eigenvalues
        assert spectrum.size == 6
        np.testing.assert_allclose(spectrum.real, spectrum.real[0], rtol=1e-8)

    def test_resolved_mode_infeasible_counts_as_unstable(self, problem):
        resolved = problem(2, mode=OperatingPointMode.RESOLVED)
        assert resolved.max_real_part_at(50.0) == math.inf

    def test_frozen_mode_keeps_operating_point(self, problem):
        frozen = problem(2)
        assert frozen.operating_point(0.7) is frozen.operating_point(0.1)


class TestMaxStableR:
    def test_matches_analytic_boundary(self, problem, analytic_r_star):
        result = AnalysisService.max_stable_R(problem(2), 10.0, 1e-6, grid_points=GRID, jobs=1)
        assert result.found
        assert result.r_star == pytest.approx(analytic_r_star(2), rel=1e-4)
        assert not result.multiple_crossings

    def test_single_converter(self, problem, analytic_r_star):
        result = AnalysisService.max_stable_R(problem(1), 5.0, 1e-6, grid_points=GRID, jobs=1)
        assert result.r_star == pytest.approx(analytic_r_star(1), rel=1e-4)

    def test_determinant_witness_beyond_boundary(self, problem):
        two = problem(2)
        r_star = AnalysisService.max_stable_R(two, 10.0, 1e-6, grid_points=GRID, jobs=1).r_star
        closed = two.closed_loop_at(2.0 * r_star)
        assert two.max_real_part_at(2.0 * r_star) > 0.0
        assert scipy.linalg.det(closed.a) < 0.0

    def test_stable_on_whole_bracket(self, problem, analytic_r_star):
        bracket = 0.5 * analytic_r_star(2)
        result = AnalysisService.max_stable_R(problem(2), bracket, 1e-6, grid_points=GRID, jobs=1)
        assert not result.found
        assert result.r_star == math.inf

    def test_unstable_at_zero(self):
        # open loop: zero gains leave the CPL mode unstable
        zero = GlobalFeedback(gains=[ConverterGain(f_i=0.0, f_v=0.0)])
        with pytest.raises(PreconditionError):
            AnalysisService.max_stable_R(
                StabilityProblem(spec=make_spec(2), gains=zero), 1.0, 1e-6, grid_points=GRID, jobs=1
            )

    def test_bad_arguments(self, problem):
        with pytest.raises(DomainError):
            AnalysisService.max_stable_R(problem(2), 1.0, 0.0, grid_points=GRID, jobs=1)
        with pytest.raises(DomainError):
            AnalysisService.max_stable_R(problem(2), 1.0, 1e-6, grid_points=0, jobs=1)

    def test_duty_weighted_boundary_is_finite(self, problem):
        weighted = problem(2, coupling=CouplingConvention.DUTY_WEIGHTED)
        result = AnalysisService.max_stable_R(weighted, 10.0, 1e-6, grid_points=GRID, jobs=1)
        assert result.found

    def test_parallel_scan_matches_serial(self, problem):
        grid = np.linspace(0.1, 3.0, 12)
        serial = AnalysisService.scan(problem(2), grid, jobs=1)
        parallel = AnalysisService.scan(problem(2), grid, jobs=2)
        assert serial == parallel


class TestSweepN:
    def test_boundary_decreases_with_n(self, problem, analytic_r_star):
        boundary = AnalysisService.sweep_n(
            problem(2), range(2, 9), 5.0, 1e-6, grid_points=GRID, jobs=1
        )
        r_star = [p.r_star for p in boundary.points]
        assert [p.n for p in boundary.points] == list(range(2, 9))
        assert all(a > b for a, b in zip(r_star, r_star[1:]))
        assert r_star[-1] == pytest.approx(analytic_r_star(8), rel=1e-3)

    def test_loaded_template_is_resized_unloaded(self, designed_gains, analytic_r_star):
        loaded = StabilityProblem(spec=make_spec(2, resistance=0.5), gains=designed_gains)
        assert loaded.resized(8).spec.line.resistance == 0.0

        boundary = AnalysisService.sweep_n(
            loaded, range(1, 9), 10.0, 1e-6, grid_points=GRID, jobs=1
        )
        r_star = [p.r_star for p in boundary.points]
        assert all(math.isfinite(r) for r in r_star)
        assert all(a > b for a, b in zip(r_star, r_star[1:]))
        assert r_star[1] == pytest.approx(analytic_r_star(2), rel=1e-3)

    def test_empty_sweep(self, problem):
        with pytest.raises(DomainError):
            AnalysisService.sweep_n(problem(2), [], 5.0, 1e-6)


class TestCriticalN:
    def test_half_boundary(self, problem, analytic_r_star):
        result = AnalysisService.critical_n(problem(2), 0.5 * analytic_r_star(2), 50)
        assert result.found
        assert result.n0 == 4
        assert len(result.max_real_parts) == 4

    def test_starts_at_n_min(self, problem, analytic_r_star):
        result = AnalysisService.critical_n(problem(2), 0.5 * analytic_r_star(2), 50, n_min=3)
        assert (result.n_min, result.n0) == (3, 4)
        assert len(result.max_real_parts) == 2

    def test_beyond_boundary(self, problem, analytic_r_star):
        result = AnalysisService.critical_n(problem(2), 2.0 * analytic_r_star(2), 50)
        assert result.n0 == 2

    def test_loaded_template(self, designed_gains, analytic_r_star):
        loaded = StabilityProblem(spec=make_spec(2, resistance=0.5), gains=designed_gains)
        result = AnalysisService.critical_n(loaded, 0.5 * analytic_r_star(2), 50)
        assert result.n0 == 4

    def test_not_found(self, problem):
        result = AnalysisService.critical_n(problem(2), 1e-6, 50)
        assert not result.found
        assert len(result.last_spectrum) == 100
        assert max(z.real for z in result.last_spectrum) < 0.0

    def test_requires_positive_resistance(self, problem):
        with pytest.raises(DomainError):
            AnalysisService.critical_n(problem(2), 0.0, 10)


class TestOutputShunt:
    R_SET = [0.01, 0.1, 1.0, 5.0, 10.0]

    def test_analytic_boundary_is_certified(self, problem):
        r_s = V_BAR**2 / P
        report = AnalysisService.evaluate_output_shunt(problem(2), r_s, self.R_SET, jobs=1)
        assert report.certified
        assert report.stable
        assert report.efficiency <= 0.5 + 1e-6

    def test_large_shunt_not_certified(self, problem):
        report = AnalysisService.evaluate_output_shunt(problem(2), 3.0, self.R_SET, jobs=1)
        assert not report.certified
        assert report.efficiency > 0.5

    def test_loss_accounting(self, problem):
        report = AnalysisService.evaluate_output_shunt(problem(2), 2.0, self.R_SET, jobs=1)
        assert report.loss_watts == pytest.approx(2 * V_BAR**2 / 2.0)
        assert report.efficiency == pytest.approx(2 * P / (2 * P + report.loss_watts))

    def test_search_picks_largest_certified(self, problem):
        best, reports = AnalysisService.search_output_shunt(
            problem(2), [3.0, 1.0, 2.0, 2.3], self.R_SET, jobs=1
        )
        assert best.variant.r_s == 2.3
        assert [r.variant.r_s for r in reports] == [1.0, 2.0, 2.3, 3.0]
        assert best.efficiency <= 0.5 + 1e-6

    def test_search_fails_without_certificate(self, problem):
        with pytest.raises(NotStabilizableError) as excinfo:
            AnalysisService.search_output_shunt(problem(2), [5.0, 10.0], self.R_SET, jobs=1)
        assert excinfo.value.worst_R in self.R_SET


class TestInputRC:
    @pytest.mark.parametrize("r_f", [0.1, 1.0, 10.0])
    @pytest.mark.parametrize("c_f", [1e-6, 1e-5, 1e-4])
    def test_instability_persists(self, problem, analytic_r_star, r_f, c_f):
        report = AnalysisService.evaluate_input_rc(
            problem(2), r_f, c_f, 3.0, 1e-5, grid_points=GRID, jobs=1
        )
        assert not report.stable
        assert 0.0 < report.r_star <= analytic_r_star(2) * (1.0 + 1e-3)


class TestInputShunt:
    def test_stabilizes_below_boundary(self, problem, analytic_r_star):
        r_set = [f * analytic_r_star(2) for f in (0.1, 0.4, 0.8)]
        report = AnalysisService.min_stabilizing_Cs(
            problem(2), r_set, (1e-6, 1.0), grid_points=7, jobs=1
        )
        assert report.stable
        assert 1e-6 <= report.c_s_star <= 1.0
        assert all(p.stable for p in report.points)

    @hyp_settings(max_examples=50, derandomize=True, deadline=None)
    @given(exponent=st.floats(-5.9, -0.1))
    def test_search_returns_smallest_passing_value(self, designed_gains, exponent):
        threshold = 10.0**exponent
        rel_tol = 1e-3

        def threshold_scan(problem, resistances, jobs=None):
            stable = problem.design.c_s >= threshold
            return [
                StabilityPoint(resistance=r, max_real_part=-1.0 if stable else 1.0, stable=stable)
                for r in resistances
            ]

        problem = StabilityProblem(spec=make_spec(2), gains=designed_gains)
        with pytest.MonkeyPatch.context() as patch:
            patch.setattr(AnalysisService, "scan", staticmethod(threshold_scan))
            report = AnalysisService.min_stabilizing_Cs(
                problem, [0.5, 1.0], (1e-6, 1.0), grid_points=7, rel_tol=rel_tol
            )
            below = threshold_scan(
                problem.with_design(InputShuntC(c_s=report.c_s_star / (1.0 + 2.0 * rel_tol))),
                [0.5, 1.0],
            )
        assert threshold <= report.c_s_star <= threshold * (1.0 + rel_tol)
        assert not any(p.stable for p in below)

    def test_cannot_rescue_negative_determinant(self, problem, analytic_r_star):
        with pytest.raises(NotStabilizableError) as excinfo:
            AnalysisService.min_stabilizing_Cs(
                problem(2), [2.0 * analytic_r_star(2)], (1e-3, 1.0), grid_points=4, jobs=1
            )
        assert excinfo.value.worst_R == pytest.approx(2.0 * analytic_r_star(2))
        assert excinfo.value.spectrum.max_real_part > 0.0

    def test_rejects_bad_bracket(self, problem):
        with pytest.raises(DomainError):
            AnalysisService.min_stabilizing_Cs(problem(2), [0.5], (1.0, 1e-3))
        with pytest.raises(DomainError):
            AnalysisService.min_stabilizing_Cs(problem(2), [], (1e-3, 1.0))
        with pytest.raises(DomainError):
            AnalysisService.min_stabilizing_Cs(problem(2), [0.5], (1e-3, 1.0), rel_tol=0.0)

    def test_decoupling_gap_shrinks(self, problem):
        two = problem(2)
        gaps = [AnalysisService.decoupling_gap(two, c_s, 0.5) for c_s in (1e-2, 1e-1, 1.0)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-2 * 0.5 / math.sqrt(20e-6 * C)

    def test_decoupling_gap_zero_resistance(self, problem):
        assert AnalysisService.decoupling_gap(problem(2), 1e-3, 0.0) == 0.0
