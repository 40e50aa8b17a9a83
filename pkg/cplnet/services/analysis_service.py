"""
Stability analysis service - boundaries in R, critical network size, passive designs
"""

import dataclasses
import logging
import math
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import bisect
from scipy.spatial.distance import directed_hausdorff

from cplnet.core.config import settings
from cplnet.core.exceptions import (
    DimensionMismatchError,
    DomainError,
    InfeasibleOperatingPointError,
    NotStabilizableError,
    PreconditionError,
)
from cplnet.models.control import assemble_global, closed_loop
from cplnet.models.operating_point import solve_operating_point
from cplnet.models.smallsignal import (
    Spectrum,
    StateSpace,
    apply_design,
    build_network,
    eigenvalues,
    sort_eigenvalues,
)
from cplnet.schemas.control import GlobalFeedback
from cplnet.schemas.design import (
    InputGroundRC,
    InputShuntC,
    OptionalDesign,
    OutputShuntR,
)
from cplnet.schemas.network import (
    CouplingConvention,
    InputGain,
    NetworkSpec,
    OperatingPoint,
    OperatingPointMode,
)
from cplnet.schemas.report import (
    BoundaryPoint,
    CriticalNResult,
    CrossingResult,
    DesignReport,
    StabilityBoundary,
    StabilityPoint,
)
from cplnet.services.worker_pool import parallel_map

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class StabilityProblem:
    """
    Closed-loop network whose line resistance is the free parameter

    The operating point is always solved with duty-weighted line drops; the
    coupling field only selects how the small-signal matrices are written.
    """

    spec: NetworkSpec
    gains: GlobalFeedback
    design: OptionalDesign = None
    coupling: CouplingConvention = CouplingConvention.DIRECT_CURRENT
    input_gain: InputGain = InputGain.NODE_VOLTAGE
    mode: OperatingPointMode = OperatingPointMode.FROZEN

    def __post_init__(self):
        if self.gains.n == 1 and self.spec.n > 1:
            object.__setattr__(self, "gains", self.gains.replicate(self.spec.n))
        if self.gains.n != self.spec.n:
            raise DimensionMismatchError(
                f"{self.gains.n} gains given for {self.spec.n} converters"
            )

    @property
    def n(self) -> int:
        return self.spec.n

    def with_design(self, design: OptionalDesign) -> "StabilityProblem":
        return dataclasses.replace(self, design=design)

    def resized(self, n: int) -> "StabilityProblem":
        """
        n copies of converter 1 with its gain, on an unloaded (R = 0) feeder

        The template's own line resistance is dropped so the frozen operating
        point of every resized network exists; R is then the swept variable.
        """
        return dataclasses.replace(
            self,
            spec=self.spec.replicate(n).with_resistance(0.0),
            gains=self.gains.replicate(n),
        )

    @cached_property
    def frozen_op(self) -> OperatingPoint:
        return solve_operating_point(
            self.spec, coupling=CouplingConvention.DUTY_WEIGHTED, design=self.design
        )

    def operating_point(self, resistance: float) -> OperatingPoint:
        if self.mode == OperatingPointMode.FROZEN:
            return self.frozen_op
        return solve_operating_point(
            self.spec.with_resistance(resistance),
            coupling=CouplingConvention.DUTY_WEIGHTED,
            design=self.design,
        )

    def closed_loop_at(self, resistance: float) -> StateSpace:
        op = self.operating_point(resistance)
        spec = self.spec.with_resistance(resistance)
        ss = build_network(spec, op, self.coupling, self.input_gain)
        ss = apply_design(ss, spec, op, self.design, self.coupling)
        f = assemble_global(self.gains, self.n, ss.state_labels)
        return closed_loop(ss, f)

    def isolated_spectrum(self, resistance: float) -> Spectrum:
        """Union of the standalone closed-loop converter spectra at the same operating point"""
        op = self.operating_point(resistance)
        spec = self.spec.with_resistance(0.0)
        ss = build_network(spec, op, self.coupling, self.input_gain)
        return eigenvalues(closed_loop(ss, assemble_global(self.gains, self.n)).a)

    def spectrum_at(self, resistance: float) -> Spectrum:
        return eigenvalues(self.closed_loop_at(resistance).a)

    def max_real_part_at(self, resistance: float) -> float:
        """+inf when no equilibrium exists (resolved mode only)"""
        try:
            return self.spectrum_at(resistance).max_real_part
        except InfeasibleOperatingPointError as exc:
            if self.mode == OperatingPointMode.FROZEN:
                raise
            logger.debug(f"R={resistance:.6g}: {exc.detail}")
            return math.inf


def _evaluate_point(task: Tuple[StabilityProblem, float]) -> StabilityPoint:
    problem, resistance = task
    max_re = problem.max_real_part_at(resistance)
    return StabilityPoint(resistance=resistance, max_real_part=max_re, stable=max_re < 0.0)


def _boundary_task(task: Tuple[StabilityProblem, float, float, int]) -> BoundaryPoint:
    problem, r_max, tol, grid_points = task
    result = AnalysisService.max_stable_R(problem, r_max, tol, grid_points=grid_points, jobs=1)
    return BoundaryPoint(
        n=problem.n, r_star=result.r_star, multiple_crossings=result.multiple_crossings
    )


def _count_crossings(stable: Sequence[bool]) -> int:
    return sum(1 for before, after in zip(stable, stable[1:]) if before and not after)


class AnalysisService:
    """Boundary searches and passive-design studies on a StabilityProblem"""

    @staticmethod
    def scan(
        problem: StabilityProblem, resistances: Sequence[float], jobs: Optional[int] = None
    ) -> List[StabilityPoint]:
        """max Re(lambda) and verdict at every R, in input order"""
        return parallel_map(_evaluate_point, [(problem, float(r)) for r in resistances], jobs)

    @staticmethod
    def max_stable_R(
        problem: StabilityProblem,
        r_max_search: float,
        tol: float,
        grid_points: Optional[int] = None,
        jobs: Optional[int] = None,
    ) -> CrossingResult:
        """
        Smallest R in (0, r_max_search] where the closed loop loses stability

        A uniform grid pre-scan locates the first unstable cell; bisection on
        the stability verdict then narrows it to tol. More than one
        stable-to-unstable transition on the grid sets multiple_crossings.

        Args:
            problem: Closed-loop network
            r_max_search: Upper end of the bracket (ohm)
            tol: Absolute bisection tolerance (ohm)
            grid_points: Pre-scan size (defaults to settings.BOUNDARY_GRID_POINTS)
            jobs: Worker processes for the pre-scan

        Returns:
            CrossingResult, r_star = +inf if stable on the whole bracket

        Raises:
            PreconditionError: If the network is unstable at R = 0
            DomainError: If tol, r_max_search or grid_points is out of range
        """
        if tol <= 0.0 or r_max_search <= 0.0:
            raise DomainError("tol and r_max_search must be positive")
        if grid_points is None:
            grid_points = settings.BOUNDARY_GRID_POINTS
        if grid_points < 1:
            raise DomainError(f"grid_points must be at least 1, got {grid_points}")

        at_zero = problem.max_real_part_at(0.0)
        if not at_zero < 0.0:
            raise PreconditionError(
                f"closed loop is unstable at R=0 (max Re = {at_zero:.6g}); "
                "converters are not individually stable"
            )

        grid = np.linspace(0.0, r_max_search, grid_points + 1)[1:]
        points = AnalysisService.scan(problem, grid, jobs)
        stable = [True] + [p.stable for p in points]
        evaluations = 1 + len(points)
        multiple = _count_crossings(stable) > 1
        if multiple:
            logger.warning(
                f"n={problem.n}: several stability crossings in [0, {r_max_search:g}], "
                "reporting the smallest"
            )

        first = next((k for k, p in enumerate(points) if not p.stable), None)
        if first is None:
            logger.info(f"n={problem.n}: stable on the whole bracket [0, {r_max_search:g}]")
            return CrossingResult(
                r_star=math.inf,
                bracket=(0.0, r_max_search),
                tol=tol,
                evaluations=evaluations,
                multiple_crossings=False,
            )

        low = float(grid[first - 1]) if first > 0 else 0.0
        high = float(grid[first])

        def verdict(resistance: float) -> float:
            return -1.0 if problem.max_real_part_at(resistance) < 0.0 else 1.0

        r_star, info = bisect(verdict, low, high, xtol=tol, full_output=True)
        evaluations += info.function_calls
        logger.info(f"n={problem.n}: stability boundary R_star = {r_star:.9g} ohm")
        return CrossingResult(
            r_star=float(r_star),
            bracket=(0.0, r_max_search),
            tol=tol,
            evaluations=evaluations,
            multiple_crossings=multiple,
        )

    @staticmethod
    def sweep_n(
        problem: StabilityProblem,
        n_values: Sequence[int],
        r_max_search: float,
        tol: float,
        grid_points: Optional[int] = None,
        jobs: Optional[int] = None,
    ) -> StabilityBoundary:
        """R_star(n) for networks of identical copies of converter 1"""
        n_values = sorted(set(int(n) for n in n_values))
        if not n_values:
            raise DomainError("no converter counts to sweep")
        if grid_points is None:
            grid_points = settings.BOUNDARY_GRID_POINTS
        tasks = [(problem.resized(n), r_max_search, tol, grid_points) for n in n_values]
        points = parallel_map(_boundary_task, tasks, jobs)
        return StabilityBoundary(
            points=points,
            bracket=(0.0, r_max_search),
            tol=tol,
            evaluations=len(points) * (grid_points + 1),
        )

    @staticmethod
    def critical_n(
        problem: StabilityProblem, resistance: float, n_max: int, n_min: int = 1
    ) -> CriticalNResult:
        """
        Grow the feeder one converter at a time until max Re(lambda) > 0

        Returns a result with n0 = None and the spectrum of the largest network
        when nothing up to n_max is unstable.
        """
        if resistance <= 0.0:
            raise DomainError("critical_n needs R > 0")
        if n_min > n_max:
            raise DomainError(f"empty range n in [{n_min}, {n_max}]")
        single = problem.resized(1)
        if not single.max_real_part_at(0.0) < 0.0:
            raise PreconditionError("converter 1 is not individually stable")

        max_real_parts = []
        spectrum = None
        for n in range(n_min, n_max + 1):
            spectrum = problem.resized(n).spectrum_at(resistance)
            max_real_parts.append(spectrum.max_real_part)
            if spectrum.max_real_part > 0.0:
                logger.info(f"R={resistance:g}: network unstable from n0={n}")
                return CriticalNResult(
                    resistance=resistance,
                    n0=n,
                    n_min=n_min,
                    n_max=n_max,
                    max_real_parts=max_real_parts,
                )

        logger.warning(f"R={resistance:g}: no unstable network up to n={n_max}")
        return CriticalNResult(
            resistance=resistance,
            n0=None,
            n_min=n_min,
            n_max=n_max,
            max_real_parts=max_real_parts,
            last_spectrum=[complex(z) for z in spectrum.eigenvalues],
        )

    @staticmethod
    def default_r_set() -> List[float]:
        return [
            float(r)
            for r in np.logspace(
                np.log10(settings.DEFAULT_R_SET_MIN),
                np.log10(settings.DEFAULT_R_SET_MAX),
                settings.DEFAULT_R_SET_POINTS,
            )
        ]

    @staticmethod
    def evaluate_output_shunt(
        problem: StabilityProblem,
        r_s: float,
        r_set: Optional[Sequence[float]] = None,
        jobs: Optional[int] = None,
    ) -> DesignReport:
        """
        Output shunt resistor: stability on r_set, dissipation and certificate

        loss = sum(Vbar_k^2 / R_s), efficiency = sum(P) / (sum(P) + loss).
        certified means every v-diagonal P/(C Vbar^2) - 1/(C R_s) is <= 0.
        """
        design = OutputShuntR(r_s=r_s)
        shunted = problem.with_design(design)
        resistances = list(r_set) if r_set is not None else AnalysisService.default_r_set()
        points = AnalysisService.scan(shunted, resistances, jobs)

        op = shunted.operating_point(resistances[0])
        v_out = np.asarray(op.v_out)
        loss = float(np.sum(v_out**2) / r_s)
        delivered = float(sum(load.power for load in problem.spec.loads))
        efficiency = delivered / (delivered + loss)

        ss = shunted.closed_loop_at(resistances[0])
        v_rows = [ss.index(f"v{k}") for k in range(1, problem.n + 1)]
        shunt_terms = np.array([1.0 / (c.capacitance * r_s) for c in problem.spec.converters])
        # roundoff allowance at the analytic boundary R_s = Vbar^2 / P
        certified = bool(np.all(np.diag(ss.a)[v_rows] <= 1e-12 * shunt_terms))

        return DesignReport(
            variant=design,
            stable=all(p.stable for p in points),
            points=points,
            loss_watts=loss,
            efficiency=efficiency,
            certified=certified,
        )

    @staticmethod
    def search_output_shunt(
        problem: StabilityProblem,
        r_s_values: Sequence[float],
        r_set: Optional[Sequence[float]] = None,
        jobs: Optional[int] = None,
    ) -> Tuple[DesignReport, List[DesignReport]]:
        """
        Largest certified shunt resistance (least dissipation)

        Returns:
            (best report, every report in ascending R_s order)

        Raises:
            NotStabilizableError: If no value is both stable and certified
        """
        reports = [
            AnalysisService.evaluate_output_shunt(problem, r_s, r_set, jobs)
            for r_s in sorted(r_s_values)
        ]
        accepted = [r for r in reports if r.stable and r.certified]
        if not accepted:
            worst = max(reports[-1].points, key=lambda p: p.max_real_part)
            spectrum = problem.with_design(reports[-1].variant).spectrum_at(worst.resistance)
            raise NotStabilizableError(
                "no output shunt value is stable and certified", worst.resistance, spectrum
            )
        best = accepted[-1]
        logger.info(
            f"Largest certified output shunt R_s = {best.variant.r_s:g} ohm "
            f"(efficiency {best.efficiency:.4f})"
        )
        return best, reports

    @staticmethod
    def evaluate_input_rc(
        problem: StabilityProblem,
        r_f: float,
        c_f: float,
        r_max_search: float,
        tol: float,
        grid_points: Optional[int] = None,
        jobs: Optional[int] = None,
    ) -> DesignReport:
        """Boundary R_star of the network with a series R_f-C_f leg at every input node"""
        design = InputGroundRC(r_f=r_f, c_f=c_f)
        result = AnalysisService.max_stable_R(
            problem.with_design(design), r_max_search, tol, grid_points, jobs
        )
        return DesignReport(variant=design, stable=not result.found, r_star=result.r_star)

    @staticmethod
    def min_stabilizing_Cs(
        problem: StabilityProblem,
        r_set: Sequence[float],
        cs_bracket: Tuple[float, float] = (1e-8, 1.0),
        grid_points: Optional[int] = None,
        rel_tol: Optional[float] = None,
        jobs: Optional[int] = None,
    ) -> DesignReport:
        """
        Smallest input shunt capacitor that stabilizes every R in r_set

        Log-spaced scan of the bracket, then geometric bisection between the
        last failing and first passing grid values until their ratio is
        within 1 + rel_tol. Returns the bracket's lower edge when it already
        passes.

        Raises:
            NotStabilizableError: If no grid value passes; carries the R with
                the largest max Re(lambda) at the upper edge and its spectrum
        """
        resistances = [float(r) for r in r_set]
        if not resistances or any(r <= 0.0 for r in resistances):
            raise DomainError("R_set must be non-empty with every R > 0")
        low, high = cs_bracket
        if not 0.0 < low < high:
            raise DomainError("C_s bracket must satisfy 0 < lower < upper")
        if grid_points is None:
            grid_points = settings.CS_GRID_POINTS
        if rel_tol is None:
            rel_tol = settings.CS_REL_TOL
        if grid_points < 2 or rel_tol <= 0.0:
            raise DomainError("C_s search needs grid_points >= 2 and rel_tol > 0")

        def evaluate(c_s: float) -> List[StabilityPoint]:
            return AnalysisService.scan(
                problem.with_design(InputShuntC(c_s=c_s)), resistances, jobs
            )

        grid = np.logspace(np.log10(low), np.log10(high), grid_points)
        first_ok = None
        points = []
        for k, c_s in enumerate(grid):
            points = evaluate(float(c_s))
            if all(p.stable for p in points):
                first_ok = k
                break
            logger.debug(f"C_s={c_s:.4g} F leaves {sum(not p.stable for p in points)} R unstable")

        if first_ok is None:
            worst = max(points, key=lambda p: p.max_real_part)
            spectrum = problem.with_design(InputShuntC(c_s=high)).spectrum_at(worst.resistance)
            raise NotStabilizableError(
                f"no C_s in [{low:g}, {high:g}] F stabilizes every R in the set "
                f"(worst R = {worst.resistance:g} ohm, max Re = {worst.max_real_part:.6g})",
                worst.resistance,
                spectrum,
            )

        c_star = float(grid[first_ok])
        if first_ok > 0:
            failing = float(grid[first_ok - 1])
            while c_star / failing > 1.0 + rel_tol:
                mid = math.sqrt(c_star * failing)
                trial = evaluate(mid)
                if all(p.stable for p in trial):
                    c_star, points = mid, trial
                else:
                    failing = mid

        logger.info(f"Minimum stabilizing input capacitor C_s* = {c_star:.6g} F")
        return DesignReport(
            variant=InputShuntC(c_s=c_star), stable=True, points=points, c_s_star=c_star
        )

    @staticmethod
    def decoupling_gap(problem: StabilityProblem, c_s: float, resistance: float) -> float:
        """
        Hausdorff distance between converter-dominant modes and isolated spectra

        A mode is a node-capacitor mode when its eigenvector's largest-magnitude
        component sits on a v_c state. The n modes ranked highest by
        max|v_c component| / max|component| are left out of the comparison, so
        exactly n are dropped even when that test picks more or fewer.
        """
        if c_s <= 0.0 or resistance < 0.0:
            raise DomainError("decoupling_gap needs C_s > 0 and R >= 0")
        if resistance == 0.0:
            return 0.0

        ss = problem.with_design(InputShuntC(c_s=c_s)).closed_loop_at(resistance)
        values, vectors = scipy.linalg.eig(ss.a)
        vc_rows = [ss.index(f"vc{k}") for k in range(1, problem.n + 1)]
        magnitude = np.abs(vectors)
        dominance = magnitude[vc_rows, :].max(axis=0) / magnitude.max(axis=0)
        node_modes = np.argsort(-dominance, kind="stable")[: problem.n]
        keep = np.setdiff1d(np.arange(values.size), node_modes)
        coupled = sort_eigenvalues(values[keep])
        isolated = problem.isolated_spectrum(resistance).eigenvalues

        u = np.column_stack([coupled.real, coupled.imag])
        v = np.column_stack([isolated.real, isolated.imag])
        return float(max(directed_hausdorff(u, v)[0], directed_hausdorff(v, u)[0]))

