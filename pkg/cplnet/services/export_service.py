"""
Export service - CSV tables and self-contained SVG line charts
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import jinja2
import numpy as np
import pandas as pd

from cplnet.core.config import settings
from cplnet.models.smallsignal import Spectrum, StateSpace
from cplnet.schemas.design import describe
from cplnet.schemas.report import (
    CriticalNResult,
    DesignReport,
    StabilityBoundary,
    StabilityPoint,
)
from cplnet.services.simulation_service import Trace, TraceMetrics

logger = logging.getLogger(__name__)

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"]

_templates = jinja2.Environment(
    loader=jinja2.PackageLoader("cplnet", "templates"),
    autoescape=jinja2.select_autoescape(["svg", "j2"]),
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def _nice_ticks(low: float, high: float, count: int = 6) -> List[float]:
    if high <= low:
        return [low]
    return [float(v) for v in np.linspace(low, high, count)]


def _bounds(values: np.ndarray) -> Tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    low, high = float(np.min(finite)), float(np.max(finite))
    if low == high:
        pad = abs(low) * 0.05 or 1.0
        return low - pad, high + pad
    return low, high


class ExportService:
    """Writers for every command output"""

    @staticmethod
    def write_csv(frame: pd.DataFrame, path: Path, index: bool = False) -> Path:
        """Full-precision, LF-terminated CSV with a header row"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(
            path,
            index=index,
            float_format=settings.CSV_FLOAT_FORMAT,
            lineterminator="\n",
        )
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def spectrum_frame(spectrum: Spectrum) -> pd.DataFrame:
        values = spectrum.eigenvalues
        return pd.DataFrame(
            {
                "index": np.arange(1, values.size + 1),
                "real": values.real,
                "imag": values.imag,
            }
        )

    @staticmethod
    def matrix_frame(ss: StateSpace, which: str = "A") -> pd.DataFrame:
        if which == "A":
            return pd.DataFrame(ss.a, index=list(ss.state_labels), columns=list(ss.state_labels))
        columns = [f"d{k}" for k in range(1, ss.n_inputs + 1)]
        return pd.DataFrame(ss.b, index=list(ss.state_labels), columns=columns)

    @staticmethod
    def points_frame(points: Sequence[StabilityPoint], **fixed) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "R": [p.resistance for p in points],
                "max_re": [p.max_real_part for p in points],
                "stable": [int(p.stable) for p in points],
            }
        )
        for position, (name, value) in enumerate(fixed.items()):
            frame.insert(position, name, value)
        return frame

    @staticmethod
    def boundary_frame(boundary: StabilityBoundary) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "n": [p.n for p in boundary.points],
                "R_star": [p.r_star for p in boundary.points],
                "multiple_crossings": [int(p.multiple_crossings) for p in boundary.points],
            }
        )

    @staticmethod
    def critical_n_frame(result: CriticalNResult) -> pd.DataFrame:
        """One row per network size tried, starting at result.n_min"""
        return pd.DataFrame(
            {
                "R": result.resistance,
                "n": np.arange(result.n_min, result.n_min + len(result.max_real_parts)),
                "max_re": result.max_real_parts,
                "stable": [int(m < 0.0) for m in result.max_real_parts],
            }
        )

    @staticmethod
    def design_frame(reports: Sequence[DesignReport]) -> pd.DataFrame:
        """One row per (design, R) verdict, or one summary row when no R grid was scanned"""
        rows = []
        for report in reports:
            summary = {
                "variant": describe(report.variant),
                "design_stable": int(report.stable),
                "loss_watts": report.loss_watts,
                "efficiency": report.efficiency,
                "certified": None if report.certified is None else int(report.certified),
                "R_star": report.r_star,
                "C_s_star": report.c_s_star,
            }
            if not report.points:
                rows.append({**summary, "R": None, "max_re": None, "stable": None})
            for p in report.points:
                rows.append(
                    {**summary, "R": p.resistance, "max_re": p.max_real_part, "stable": int(p.stable)}
                )
        return pd.DataFrame(rows)

    @staticmethod
    def metrics_frame(metrics: TraceMetrics) -> pd.DataFrame:
        frame = metrics.table.reset_index()
        frame.insert(0, "t_start", metrics.window[0])
        frame.insert(1, "t_end", metrics.window[1])
        frame["shutoff_events"] = metrics.shutoff_events
        return frame

    @staticmethod
    def render_line_chart(
        series: Sequence[Tuple[str, Sequence[float], Sequence[float]]],
        title: str,
        x_label: str,
        y_label: str,
        path: Optional[Path] = None,
    ) -> str:
        """
        One polyline per (label, xs, ys); non-finite points are skipped

        Returns the SVG text and writes it to path when given.
        """
        width, height = settings.SVG_WIDTH, settings.SVG_HEIGHT
        left, right, top, bottom = 80.0, width - 30.0, 40.0, height - 50.0
        plot = {
            "left": left,
            "right": right,
            "top": top,
            "bottom": bottom,
            "width": right - left,
            "height": bottom - top,
        }

        all_x = np.concatenate([np.asarray(xs, dtype=float) for _, xs, _ in series] or [np.zeros(0)])
        all_y = np.concatenate([np.asarray(ys, dtype=float) for _, _, ys in series] or [np.zeros(0)])
        x_low, x_high = _bounds(all_x)
        y_low, y_high = _bounds(all_y)

        def sx(x: float) -> float:
            return left + (x - x_low) / (x_high - x_low) * plot["width"]

        def sy(y: float) -> float:
            return bottom - (y - y_low) / (y_high - y_low) * plot["height"]

        lines = []
        for k, (label, xs, ys) in enumerate(series):
            coords = [
                f"{sx(x):.3f},{sy(y):.3f}"
                for x, y in zip(xs, ys)
                if math.isfinite(x) and math.isfinite(y)
            ]
            lines.append(
                {"label": label, "color": PALETTE[k % len(PALETTE)], "points": " ".join(coords)}
            )

        svg = _templates.get_template("line_chart.svg.j2").render(
            width=width,
            height=height,
            title=title,
            x_label=x_label,
            y_label=y_label,
            plot=plot,
            x_ticks=[{"pos": f"{sx(v):.3f}", "label": f"{v:.4g}"} for v in _nice_ticks(x_low, x_high)],
            y_ticks=[{"pos": f"{sy(v):.3f}", "label": f"{v:.4g}"} for v in _nice_ticks(y_low, y_high)],
            series=lines,
        )
        if path is not None:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(svg, encoding="utf-8")
            logger.info(f"Wrote {path}")
        return svg

    @staticmethod
    def boundary_chart(boundary: StabilityBoundary, path: Path) -> str:
        finite = [p for p in boundary.points if math.isfinite(p.r_star)]
        return ExportService.render_line_chart(
            [("R_star(n)", [p.n for p in finite], [p.r_star for p in finite])],
            title="Stability boundary versus converter count",
            x_label="number of converters n",
            y_label="R_star (ohm)",
            path=path,
        )

    @staticmethod
    def trace_chart(trace: Trace, path: Path, signals: Optional[Sequence[str]] = None) -> str:
        signals = list(signals) if signals else [f"V_{k}" for k in range(1, trace.n + 1)]
        t = trace.t
        return ExportService.render_line_chart(
            [(name, t, trace.column(name)) for name in signals],
            title=f"{trace.model.value} simulation",
            x_label="t (s)",
            y_label="signal",
            path=path,
        )
