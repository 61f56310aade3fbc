"""
Barcode and report export: CSV, JSON and an SVG barcode plot.
"""
import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Dict, Optional, Union

import matplotlib

if matplotlib.get_backend().lower() != "agg":
    matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from services.tda_service import Barcode, RegularityReport  # noqa: E402

logger = logging.getLogger(__name__)

BARCODE_COLUMNS = ["dim", "birth", "death"]
DIMENSION_COLORS = ["tab:blue", "tab:orange", "tab:green"]


def format_number(value: float) -> str:
    """'inf' for infinity, integers without a decimal point, otherwise repr."""
    if math.isinf(value):
        return "inf"
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def barcode_to_csv(barcode: Barcode, include_zero: bool = False) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(BARCODE_COLUMNS)
    intervals = barcode.intervals if include_zero else barcode.reported()
    for interval in intervals:
        writer.writerow([interval.dimension, format_number(interval.birth),
                         format_number(interval.death)])
    return buffer.getvalue()


def barcode_to_json(barcode: Barcode) -> str:
    return json.dumps(barcode.to_dict(), indent=2, sort_keys=True) + "\n"


def report_to_json(report: RegularityReport, extra: Optional[Dict] = None) -> str:
    data = report.to_dict()
    if extra:
        data.update(extra)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def plot_barcode_svg(barcode: Barcode, path: Union[str, Path], title: Optional[str] = None) -> Path:
    """
    Horizontal bars grouped by dimension on a linear scale.

    Infinite bars run to the right margin and end in an arrowhead.
    """
    path = Path(path)
    intervals = barcode.reported()
    finite_ends = [i.death for i in intervals if not i.is_infinite] + [i.birth for i in intervals]
    right = max(finite_ends, default=1.0)
    if not math.isinf(barcode.max_radius):
        right = max(right, barcode.max_radius)
    right = right * 1.1 if right > 0 else 1.0

    with matplotlib.rc_context({"svg.hashsalt": "topo-meta", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, max(2.5, 0.25 * len(intervals) + 1)))
        row = 0
        for dim in range(barcode.max_dim):
            group = [i for i in intervals if i.dimension == dim]
            color = DIMENSION_COLORS[dim % len(DIMENSION_COLORS)]
            for k, interval in enumerate(group):
                end = right if interval.is_infinite else interval.death
                ax.hlines(y=row, xmin=interval.birth, xmax=end, linewidth=2, color=color,
                          label=f"H{dim}" if k == 0 else None)
                if interval.is_infinite:
                    ax.plot([end], [row], marker=">", color=color, markersize=6)
                row += 1
            if group:
                row += 1
        ax.set_xlim(0, right * 1.02)
        ax.set_ylim(-1, max(row, 1))
        ax.set_yticks([])
        ax.set_xlabel("Filtration scale")
        if intervals:
            ax.legend(loc="lower right")
        ax.set_title(title or f"Barcode ({barcode.n_points} points)")
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
        plt.close(fig)
    return path


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def write_barcode(barcode: Barcode, out_dir: Union[str, Path], stem: str,
                  svg: bool = True, title: Optional[str] = None,
                  include_zero: bool = False) -> Dict[str, Path]:
    """Write <stem>.barcode.csv, .barcode.json and optionally .barcode.svg."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": _write_text(out_dir / f"{stem}.barcode.csv", barcode_to_csv(barcode, include_zero)),
        "json": _write_text(out_dir / f"{stem}.barcode.json", barcode_to_json(barcode))
    }
    if svg:
        paths["svg"] = plot_barcode_svg(barcode, out_dir / f"{stem}.barcode.svg", title)
    logger.info(f"Barcode written: {', '.join(str(p) for p in paths.values())}")
    return paths


def write_report(report: RegularityReport, path: Union[str, Path], extra: Optional[Dict] = None) -> Path:
    path = _write_text(Path(path), report_to_json(report, extra))
    logger.info(f"Regularity report written: {path}")
    return path
