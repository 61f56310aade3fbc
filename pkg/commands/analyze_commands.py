"""
`analyze`: persistence barcodes and regularity reports for an archive.
"""
import json
import logging
import math
from pathlib import Path
from typing import Optional

import click

from commands import report_errors
from services.archive_service import load_archive, select_entries
from services.export_service import format_number, write_barcode, write_report
from services.tda_service import betti_curve, build_rips, compute_persistence, persistence_vs_k, regularity_report
from utils.errors import ArchiveFormatError, ConfigurationError
from utils.validators import validate_fraction, validate_k_sweep, validate_noise_ratio

logger = logging.getLogger(__name__)


def archive_stem(path: Path) -> str:
    name = path.name
    for suffix in (".archive.jsonl", ".jsonl"):
        if name.endswith(suffix):
            return name[:-len(suffix)]
    return path.stem


@click.command("analyze")
@click.option("--archive", "archive_path", type=click.Path(dir_okay=False), required=True,
              help="Archive JSON-lines file")
@click.option("--max-dim", type=click.IntRange(1, 3), default=2, show_default=True,
              help="Largest simplex dimension; homology is reported below it")
@click.option("--max-radius", type=float, help="Rips truncation radius (default: unbounded)")
@click.option("--k-sweep", help="Scale sweep lo:hi:step, one barcode per scale")
@click.option("--noise-ratio", type=float, default=0.5, show_default=True,
              help="Long-lived threshold as a fraction of the longest finite interval in the same dimension")
@click.option("--elite-fraction", type=float, help="Keep only the best fraction of entries")
@click.option("--max-points", type=click.IntRange(min=1), help="Keep only the most recent N entries")
@click.option("--maximize", is_flag=True, help="Archive fitness is maximized (for --elite-fraction)")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory")
@click.option("--svg/--no-svg", default=True, help="Also write an SVG barcode plot")
@click.option("--include-zero", is_flag=True, help="Keep zero-length intervals in the barcode CSV")
@click.pass_context
@report_errors
def analyze_command(ctx, archive_path: str, max_dim: int, max_radius: Optional[float],
                    k_sweep: Optional[str], noise_ratio: float, elite_fraction: Optional[float],
                    max_points: Optional[int], maximize: bool, out: Optional[str], svg: bool,
                    include_zero: bool):
    """Build the Rips filtration of an archive and write its barcode(s) and report."""
    if max_radius is not None and k_sweep is not None:
        raise ConfigurationError("--max-radius and --k-sweep are mutually exclusive")
    if max_radius is not None and not max_radius > 0:
        raise ConfigurationError("--max-radius must be positive")
    for check in (validate_noise_ratio(noise_ratio), validate_fraction(elite_fraction, "elite_fraction")):
        if not check["valid"]:
            raise ConfigurationError(check["error"])

    path = Path(archive_path)
    entries = select_entries(load_archive(path), elite_fraction, max_points, maximize)
    if not entries:
        raise ArchiveFormatError(f"{path} holds no entries to analyze")
    cloud = [e.solution for e in entries]
    out_dir = Path(out or ctx.obj["run_config"]["out_dir"])
    stem = archive_stem(path)
    logger.info(f"Analyzing {len(cloud)} points from {path}")

    if k_sweep is None:
        radius = max_radius if max_radius is not None else math.inf
        barcode = compute_persistence(build_rips(cloud, max_dim, radius))
        paths = write_barcode(barcode, out_dir, stem, svg=svg, include_zero=include_zero)
        report = regularity_report(barcode, noise_ratio)
        write_report(report, out_dir / f"{stem}.report.json",
                     {"archive": path.name, "points": len(cloud), "max_radius": format_number(radius)})
        counts = report.counts()
        click.echo(f"{len(barcode.reported())} intervals; "
                   + ", ".join(f"H{d}: {c['long_lived']} long-lived, {c['noise']} noise, {c['infinite']} infinite"
                               for d, c in counts.items()))
        click.echo(f"barcode: {paths['csv']}")
        return

    sweep = validate_k_sweep(k_sweep)
    if not sweep["valid"]:
        raise ConfigurationError(sweep["error"])
    summary = []
    for k, barcode in persistence_vs_k(cloud, sweep["ks"], max_dim):
        k_stem = f"{stem}_k{format_number(k)}"
        write_barcode(barcode, out_dir, k_stem, svg=svg, title=f"Barcode at k={format_number(k)}",
                      include_zero=include_zero)
        report = regularity_report(barcode, noise_ratio)
        write_report(report, out_dir / f"{k_stem}.report.json",
                     {"archive": path.name, "points": len(cloud), "k": k})
        summary.append({
            "k": k,
            "betti": list(betti_curve(barcode, k)),
            "counts": {str(d): c for d, c in report.counts().items()}
        })
        click.echo(f"k={format_number(k)}: betti at k {list(betti_curve(barcode, k))}")

    sweep_path = out_dir / f"{stem}.sweep.json"
    sweep_path.write_text(json.dumps({"archive": path.name, "scales": summary}, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    click.echo(f"sweep: {sweep_path}")
