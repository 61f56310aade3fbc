"""
`compare`: every (algorithm x seed) cell of an experiment file.
"""
import logging
from typing import Optional

import click

from commands import EXIT_FAILED_CELLS, report_errors
from commands.solve_commands import with_candidate_budget
from services.experiment_service import make_experiment_config, read_config_file, run_experiment
from services.record_store import RecordStore
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


@click.command("compare")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), required=True,
              help="Experiment file (JSON, schema 1)")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory (overrides the file)")
@click.option("--workers", type=click.IntRange(min=1), help="Worker processes (overrides the file)")
@click.option("--seeds", "seed_list", help="Comma-separated seeds (overrides the file)")
@click.option("--replications", type=click.IntRange(min=1), help="Replication count (overrides the file)")
@click.option("--resume", is_flag=True, help="Skip cells whose record already exists with the same key")
@click.option("--timing", is_flag=True, help="Store wall time in records and summaries")
@click.option("--progress/--no-progress", default=False, help="Show a progress bar")
@click.pass_context
@report_errors
def compare_command(ctx, config_path: str, out: Optional[str], workers: Optional[int],
                    seed_list: Optional[str], replications: Optional[int], resume: bool,
                    timing: bool, progress: bool):
    """Run all cells, write one summary CSV and a best-fitness table."""
    run_config = ctx.obj["run_config"]
    data = read_config_file(config_path)

    if seed_list is not None:
        try:
            data["seeds"] = [int(s) for s in seed_list.split(",") if s.strip()]
        except ValueError:
            raise ConfigurationError(f"--seeds must be comma-separated integers, got {seed_list!r}") from None
    if replications is not None:
        data["replications"] = replications
    if workers is not None:
        data["workers"] = workers
    elif "workers" not in data:
        data["workers"] = run_config["workers"]
    if isinstance(data.get("algorithms"), list):
        data["algorithms"] = [
            {**block, "config": with_candidate_budget(block.get("algorithm"), dict(block.get("config", {})),
                                                      run_config["candidate_budget"])}
            if isinstance(block, dict) else block
            for block in data["algorithms"]
        ]

    experiment = make_experiment_config(data)
    if len(experiment.algorithms) < 2:
        logger.warning("Experiment has a single algorithm block; running it as a plain batch")

    store = RecordStore(out or experiment.out or run_config["out_dir"], include_timing=timing)
    result = run_experiment(experiment, store, workers=experiment.workers, resume=resume,
                            progress=progress)

    click.echo(f"{len(result.rows)} cells, {result.failed} failed")
    click.echo(f"summary: {result.summary_path}")
    click.echo(f"best fitness: {result.table_path}")
    if result.failed:
        ctx.exit(EXIT_FAILED_CELLS)
