"""
Command handlers

Each handler receives a RunContext, calls the services and writes its files
into the output directory. Errors propagate as CplNetError subclasses; the
entry point turns them into exit codes.
"""

import dataclasses
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from cplnet.core.exceptions import EXIT_OK, ConfigError, DivergenceError
from cplnet.core.config import settings
from cplnet.models.control import design_individual_gains
from cplnet.models.smallsignal import apply_design, build_network, eigenvalues, is_stable
from cplnet.models.operating_point import solve_operating_point
from cplnet.schemas import (
    AnalyzeBlock,
    BoundaryPoint,
    CouplingConvention,
    GainsBlock,
    GlobalFeedback,
    InputRCStudy,
    InputShuntStudy,
    OutputShuntStudy,
    RunConfig,
    StabilityBoundary,
    StateFeedback,
)
from cplnet.services import AnalysisService, ExportService, SimulationService, StabilityProblem

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class RunContext:
    """Validated config plus where it came from and where outputs go"""

    config: RunConfig
    config_path: Path
    out_dir: Path
    jobs: Optional[int] = None

    def output(self, name: str) -> Path:
        return self.out_dir / name


# ============================================================================
# SHARED HELPERS
# ============================================================================


def resolve_gains(ctx: RunContext) -> GlobalFeedback:
    """Inline gains, then gains_file, then pole placement per converter"""
    config = ctx.config
    if config.gains is not None:
        return config.gains
    try:
        path = config.resolve_gains_path(ctx.config_path)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    if path is not None:
        try:
            gains = GlobalFeedback.read_json(path)
        except ValueError as exc:
            raise ConfigError(f"invalid gains file {path}: {exc}") from exc
        logger.info(f"Loaded {gains.n} gain(s) from {path}")
        return gains
    block = config.gains_design or GainsBlock()
    return design_individual_gains(config.network, block.complex_poles())


def build_problem(ctx: RunContext, design=None) -> StabilityProblem:
    config = ctx.config
    return StabilityProblem(
        spec=config.network,
        gains=resolve_gains(ctx),
        design=design,
        coupling=config.coupling,
        input_gain=config.input_gain,
        mode=config.operating_point_mode,
    )


def _scan_grid(r_max: float) -> np.ndarray:
    points = settings.DEFAULT_R_SET_POINTS
    return np.linspace(r_max / points, r_max, points)


# ============================================================================
# COMMANDS
# ============================================================================


def cmd_analyze(ctx: RunContext) -> int:
    """Spectrum of the network at the configured line resistance"""
    config = ctx.config
    block = config.analyze or AnalyzeBlock()
    spec = config.network

    if block.closed_loop:
        problem = build_problem(ctx, block.design)
        ss = problem.closed_loop_at(spec.line.resistance)
    else:
        op = solve_operating_point(spec, CouplingConvention.DUTY_WEIGHTED, block.design)
        ss = build_network(spec, op, config.coupling, config.input_gain)
        ss = apply_design(ss, spec, op, block.design, config.coupling)

    spectrum = eigenvalues(ss.a)
    ExportService.write_csv(ExportService.spectrum_frame(spectrum), ctx.output("eigenvalues.csv"))
    if block.export_matrices:
        ExportService.write_csv(ExportService.matrix_frame(ss, "A"), ctx.output("A.csv"), index=True)
        ExportService.write_csv(ExportService.matrix_frame(ss, "B"), ctx.output("B.csv"), index=True)

    verdict = "STABLE" if is_stable(spectrum, block.margin) else "UNSTABLE"
    print(f"{verdict} max_re={spectrum.max_real_part:.6g}")
    return EXIT_OK


def cmd_sweep_r(ctx: RunContext) -> int:
    """Stability boundary R_star of the configured network"""
    block = ctx.config.sweep_r
    problem = build_problem(ctx)

    result = AnalysisService.max_stable_R(problem, block.r_max, block.tol, jobs=ctx.jobs)
    boundary = StabilityBoundary(
        points=[
            BoundaryPoint(
                n=problem.n, r_star=result.r_star, multiple_crossings=result.multiple_crossings
            )
        ],
        bracket=result.bracket,
        tol=result.tol,
        evaluations=result.evaluations,
    )
    ExportService.write_csv(ExportService.boundary_frame(boundary), ctx.output("boundary.csv"))
    ExportService.boundary_chart(boundary, ctx.output("boundary.svg"))

    grid = block.grid.values() if block.grid is not None else _scan_grid(block.r_max)
    points = AnalysisService.scan(problem, grid, ctx.jobs)
    ExportService.write_csv(
        ExportService.points_frame(points, n=problem.n), ctx.output("sweep_grid.csv")
    )
    print(f"R_star={result.r_star:.9g}")
    return EXIT_OK


def cmd_sweep_n(ctx: RunContext) -> int:
    """R_star(n) over a range of converter counts, optionally N0 at a fixed R"""
    block = ctx.config.sweep_n
    problem = build_problem(ctx)
    n_values = list(range(block.n_min, block.n_max + 1))

    boundary = AnalysisService.sweep_n(problem, n_values, block.r_max, block.tol, jobs=ctx.jobs)
    ExportService.write_csv(ExportService.boundary_frame(boundary), ctx.output("boundary.csv"))
    ExportService.boundary_chart(boundary, ctx.output("boundary.svg"))

    grid = _scan_grid(block.r_max)
    frames = [
        ExportService.points_frame(AnalysisService.scan(problem.resized(n), grid, ctx.jobs), n=n)
        for n in n_values
    ]
    ExportService.write_csv(pd.concat(frames, ignore_index=True), ctx.output("sweep_grid.csv"))

    if block.critical_r is not None:
        result = AnalysisService.critical_n(problem, block.critical_r, block.critical_n_max)
        ExportService.write_csv(
            ExportService.critical_n_frame(result), ctx.output("critical_n.csv")
        )
        print(f"N0={result.n0 if result.found else 'none'} at R={block.critical_r:g}")
    return EXIT_OK


def cmd_simulate(ctx: RunContext) -> int:
    """Time-domain run; a diverged run still writes its truncated trace"""
    config = ctx.config
    cfg = config.simulate
    if isinstance(cfg.controller, StateFeedback) and cfg.controller.gains is None:
        cfg = cfg.model_copy(update={"controller": StateFeedback(gains=resolve_gains(ctx))})

    try:
        trace = SimulationService.simulate(config.network, cfg, seed=config.seed)
    except DivergenceError as exc:
        if exc.trace is not None and len(exc.trace):
            ExportService.write_csv(exc.trace.frame, ctx.output("trace.csv"))
        raise

    ExportService.write_csv(trace.frame, ctx.output("trace.csv"))
    metrics = SimulationService.trace_metrics(trace, SimulationService.steady_window(trace))
    ExportService.write_csv(ExportService.metrics_frame(metrics), ctx.output("metrics.csv"))
    ExportService.trace_chart(trace, ctx.output("trace.svg"))
    return EXIT_OK


def cmd_design(ctx: RunContext) -> int:
    """Evaluate one of the passive stabilizing circuits"""
    study = ctx.config.design
    problem = build_problem(ctx)

    if isinstance(study, OutputShuntStudy):
        best, reports = AnalysisService.search_output_shunt(
            problem, study.r_s_values, study.r_set.values(), ctx.jobs
        )
        print(f"R_s={best.variant.r_s:.9g} efficiency={best.efficiency:.6g}")

    elif isinstance(study, InputRCStudy):
        reports = [
            AnalysisService.evaluate_input_rc(
                problem, r_f, c_f, study.r_max, study.tol, jobs=ctx.jobs
            )
            for r_f in study.r_f_values
            for c_f in study.c_f_values
        ]

    elif isinstance(study, InputShuntStudy):
        report = AnalysisService.min_stabilizing_Cs(
            problem, study.r_set.values(), study.cs_bracket, jobs=ctx.jobs
        )
        reports = [report]
        print(f"C_s_star={report.c_s_star:.9g}")
        if study.gap_resistance is not None:
            values = [report.c_s_star * factor for factor in (1.0, 10.0, 100.0)]
            gaps = pd.DataFrame(
                {
                    "C_s": values,
                    "R": study.gap_resistance,
                    "gap": [
                        AnalysisService.decoupling_gap(problem, c_s, study.gap_resistance)
                        for c_s in values
                    ],
                }
            )
            ExportService.write_csv(gaps, ctx.output("decoupling_gap.csv"))

    else:
        raise ConfigError(f"unknown design study {study!r}")

    ExportService.write_csv(ExportService.design_frame(reports), ctx.output("design_report.csv"))
    return EXIT_OK


def cmd_gains(ctx: RunContext) -> int:
    """Pole-placement gains for every converter, written for later pinning"""
    block = ctx.config.gains_design or GainsBlock()
    gains = design_individual_gains(ctx.config.network, block.complex_poles())
    path = ctx.output("gains.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    gains.write_json(path)
    logger.info(f"Wrote {path}")
    return EXIT_OK
