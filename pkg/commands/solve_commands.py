"""
`solve`: one seeded run of one algorithm on one problem.
"""
import logging
from typing import Any, Dict, Optional

import click

from commands import EXIT_FAILED_CELLS, parse_overrides, report_errors
from services.domain import PROBLEM_NAMES
from services.experiment_service import (ALGORITHMS, make_experiment_config, read_config_file,
                                         run_experiment)
from services.record_store import RecordStore
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


def with_candidate_budget(algorithm: str, solver: Dict[str, Any], budget: int) -> Dict[str, Any]:
    """Fill the environment's candidate budget into VNS/TVNS blocks that do not set one."""
    if algorithm in ("vns", "tvns") and "candidate_budget" not in solver:
        return {**solver, "candidate_budget": budget}
    return solver


def _solver_block(data: Dict[str, Any], algorithm: str) -> Dict[str, Any]:
    for block in data.get("algorithms", []):
        if isinstance(block, dict) and block.get("algorithm") == algorithm:
            return dict(block.get("config", {}))
    return {}


@click.command("solve")
@click.option("--algorithm", type=click.Choice(ALGORITHMS), required=True, help="Solver to run")
@click.option("--problem", "problem_name", type=click.Choice(PROBLEM_NAMES), help="Benchmark problem")
@click.option("--dim", "dimension", type=click.IntRange(min=1), help="Problem dimension")
@click.option("--instance", type=click.Path(dir_okay=False), help="OR-Library set cover instance")
@click.option("--seed", type=click.IntRange(min=0), help="Generator seed")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="Experiment file or flat solver config (JSON)")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Solver option override, value parsed as JSON")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory")
@click.option("--timing", is_flag=True, help="Store wall time in records and summaries")
@click.pass_context
@report_errors
def solve_command(ctx, algorithm: str, problem_name: Optional[str], dimension: Optional[int],
                  instance: Optional[str], seed: Optional[int], config_path: Optional[str],
                  overrides, out: Optional[str], timing: bool):
    """Run one algorithm once and write its record, archive and summary row."""
    run_config = ctx.obj["run_config"]

    problem: Dict[str, Any] = {}
    solver: Dict[str, Any] = {}
    seeds = None
    if config_path:
        data = read_config_file(config_path)
        if "algorithms" in data:
            problem = dict(data.get("problem", {}))
            solver = _solver_block(data, algorithm)
            seeds = make_experiment_config(data).resolved_seeds()
        else:
            solver = data

    if problem_name:
        problem = {"name": problem_name}
    if dimension is not None:
        problem["dimension"] = dimension
    if instance is not None:
        problem["instance"] = instance
    if not problem.get("name"):
        raise ConfigurationError("No problem given; pass --problem or a config file with a problem block")

    solver.update(parse_overrides(overrides))
    solver = with_candidate_budget(algorithm, solver, run_config["candidate_budget"])
    if seed is None:
        seed = seeds[0] if seeds else 0

    experiment = make_experiment_config({
        "schema": 1,
        "problem": problem,
        "algorithms": [{"algorithm": algorithm, "config": solver}],
        "seeds": [seed]
    })
    store = RecordStore(out or run_config["out_dir"], include_timing=timing)
    result = run_experiment(experiment, store, workers=1)

    row = result.rows[0]
    if row.status != "ok":
        click.echo(f"Error: run failed: {row.error}", err=True)
        ctx.exit(EXIT_FAILED_CELLS)
    click.echo(f"{row.algorithm} on {row.problem} (seed {row.seed}): best fitness {row.best_fitness}, "
               f"{row.iterations} iterations, {row.evaluations} evaluations")
    for path in result.record_paths:
        click.echo(f"record: {path}")
