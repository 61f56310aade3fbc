"""
Experiment orchestration: (algorithm x seed) cells, run serially or in worker
processes, merged into records, archives, a summary CSV and a best-fitness
table by the parent process.
"""
import json
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from tqdm import tqdm

from services.domain import Encoding, Problem, build_problem
from services.record_store import RecordStore, RunRecord, SummaryRow, generate_record_key
from services.tem_service import TemConfig, make_tem_config, run_em, run_tem
from services.tvns_service import TvnsConfig, make_tvns_config, run_tvns, run_vns
from utils.errors import ConfigurationError, IncompatibleEncodingError, TopoMetaError
from utils.validators import validate_seed_list

logger = logging.getLogger(__name__)

ALGORITHMS = ("vns", "tvns", "em", "tem")
CONFIG_SCHEMA = 1

RUNNERS: Dict[str, Callable[[Problem, Any], RunRecord]] = {
    "vns": run_vns,
    "tvns": run_tvns,
    "em": run_em,
    "tem": run_tem
}


class ProblemSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Literal["onemax", "setcover", "sphere", "rastrigin"]
    dimension: Optional[int] = Field(None, ge=1)
    instance: Optional[str] = None
    bounds: Optional[Tuple[float, float]] = None

    def build(self) -> Problem:
        return build_problem(self.name, self.dimension, self.instance, self.bounds)


class AlgorithmBlock(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    algorithm: Literal["vns", "tvns", "em", "tem"]
    label: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.label or self.algorithm


class ExperimentConfig(BaseModel):
    """Experiment file contents (JSON, schema 1)."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    schema_version: Literal[1] = Field(CONFIG_SCHEMA, alias="schema")
    problem: ProblemSpec
    algorithms: List[AlgorithmBlock] = Field(min_length=1)
    replications: Optional[int] = Field(None, ge=1)
    seeds: Optional[List[int]] = None
    base_seed: int = Field(0, ge=0)
    out: Optional[str] = None
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_cells(self):
        result = validate_seed_list(self.seeds, self.replications)
        if not result["valid"]:
            raise ValueError(result["error"])
        names = [block.name for block in self.algorithms]
        if len(set(names)) != len(names):
            raise ValueError(f"Algorithm labels must be unique, got {names}")
        return self

    def resolved_seeds(self) -> List[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.base_seed + r for r in range(self.replications or 1)]


def make_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid experiment configuration: {e}") from e


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Raw JSON object of an experiment file; validation happens after flag overrides."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Config {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config {path} must contain a JSON object")
    return data


def solver_config(algorithm: str, values: Dict[str, Any], seed: int) -> Union[TvnsConfig, TemConfig]:
    """Effective solver config for one cell; classical algorithms drop the simplex order."""
    values = {**values, "seed": seed}
    if algorithm in ("vns", "tvns"):
        cfg = make_tvns_config(**values)
        return cfg.classical() if algorithm == "vns" else cfg
    if algorithm in ("em", "tem"):
        cfg = make_tem_config(**values)
        return cfg.classical() if algorithm == "em" else cfg
    raise ConfigurationError(f"Unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")


@dataclass(frozen=True)
class CellSpec:
    """One (algorithm, seed) run; picklable so it can cross process boundaries."""

    algorithm: str
    label: str
    problem: ProblemSpec
    config: Dict[str, Any]
    seed: int

    @property
    def stem(self) -> str:
        return RecordStore.stem(self.label, self.problem.name, self.seed)

    def key(self, problem: Problem) -> str:
        cfg = solver_config(self.algorithm, self.config, self.seed)
        return generate_record_key(self.algorithm, problem.to_dict(), cfg.model_dump(mode="json"), self.seed)


def run_cell(cell: CellSpec) -> RunRecord:
    """Run one cell. The problem is rebuilt here so workers only receive the cell."""
    problem = cell.problem.build()
    cfg = solver_config(cell.algorithm, cell.config, cell.seed)
    return RUNNERS[cell.algorithm](problem, cfg)


@dataclass
class ExperimentResult:
    rows: List[SummaryRow]
    summary_path: Path
    table_path: Path
    record_paths: List[Path] = field(default_factory=list)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.rows if r.status != "ok")


def prepare_problem(spec: ProblemSpec) -> Problem:
    """Build the problem once in the parent; bad specs become ConfigurationError."""
    try:
        return spec.build()
    except TopoMetaError:
        raise
    except ValueError as e:
        raise ConfigurationError(str(e)) from e


def check_cell(cell: CellSpec, problem: Problem) -> None:
    """Reject solver configs that cannot run on the problem."""
    cfg = solver_config(cell.algorithm, cell.config, cell.seed)
    wanted = Encoding.BINARY if cell.algorithm in ("vns", "tvns") else Encoding.REAL
    if problem.encoding is not wanted:
        raise IncompatibleEncodingError(
            f"{cell.algorithm} needs a {wanted.value} problem; {problem.name} is {problem.encoding.value}"
        )
    if isinstance(cfg, TvnsConfig) and cfg.k_max > problem.dimension:
        raise ConfigurationError(f"k_max ({cfg.k_max}) exceeds the problem dimension ({problem.dimension})")


def build_cells(cfg: ExperimentConfig) -> List[CellSpec]:
    return [CellSpec(block.algorithm, block.name, cfg.problem, dict(block.config), seed)
            for block in cfg.algorithms for seed in cfg.resolved_seeds()]


def run_experiment(cfg: ExperimentConfig, store: RecordStore, workers: Optional[int] = None,
                   resume: bool = False, progress: bool = False) -> ExperimentResult:
    """
    Run every cell and write its outputs.

    Problem and solver configs are validated up front, so instance and
    configuration errors surface before any cell runs. Errors inside a cell
    are recorded as failed summary rows.
    """
    problem = prepare_problem(cfg.problem)
    cells = build_cells(cfg)
    for cell in cells:
        check_cell(cell, problem)

    rows: List[Optional[SummaryRow]] = [None] * len(cells)
    pending = []
    for idx, cell in enumerate(cells):
        if resume:
            stored = store.get(cell.stem, cell.key(problem))
            if stored is not None:
                logger.info(f"Reusing finished cell {cell.stem}")
                rows[idx] = SummaryRow.from_dict(stored, cell.label)
                continue
        pending.append(idx)

    workers = workers or cfg.workers
    outcomes: Dict[int, Union[RunRecord, Exception]] = {}
    if workers <= 1 or len(pending) <= 1:
        for idx in tqdm(pending, desc="cells", disable=not progress):
            try:
                outcomes[idx] = run_cell(cells[idx])
            except Exception as e:
                outcomes[idx] = e
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_cell, cells[idx]): idx for idx in pending}
            for future in tqdm(as_completed(futures), total=len(futures), desc="cells",
                               disable=not progress):
                idx = futures[future]
                try:
                    outcomes[idx] = future.result()
                except Exception as e:
                    outcomes[idx] = e

    record_paths = []
    for idx in pending:
        cell, outcome = cells[idx], outcomes[idx]
        if isinstance(outcome, Exception):
            logger.error(f"Cell {cell.stem} failed: {outcome}")
            rows[idx] = SummaryRow.failed(cell.label, cell.problem.name, cell.seed, str(outcome))
            continue
        record_paths.append(store.save(outcome, cell.stem))
        rows[idx] = SummaryRow.from_record(outcome, cell.label, store.include_timing)

    finished = [row for row in rows if row is not None]
    # reused cells are already in the summary from the earlier run
    summary_path = store.append_summary([rows[idx] for idx in pending])
    table_path = store.write_best_fitness_table(finished)
    result = ExperimentResult(finished, summary_path, table_path, record_paths)
    logger.info(f"Experiment finished: {len(finished)} cells, {result.failed} failed")
    logger.info(f"Record store stats: {store.get_stats()}")
    return result
