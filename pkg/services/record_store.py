"""
Run records and their file-based store.

A RunRecord is the reproducible trace of one solver run. The store writes
records as JSON keyed by a SHA-256 of (algorithm, problem, config, seed) so a
finished cell can be recognized and skipped when an experiment is resumed.
"""
import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from services.archive_service import ArchiveEntry, write_jsonl

logger = logging.getLogger(__name__)

SUMMARY_SCHEMA = 1


def generate_record_key(algorithm: str, problem: Dict[str, Any], config: Dict[str, Any],
                        seed: int) -> str:
    """SHA-256 over a canonical JSON rendering of the run inputs."""
    content = {
        'algorithm': algorithm,
        'problem': problem,
        'config': config,
        'seed': seed
    }
    content_string = json.dumps(content, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(content_string.encode('utf-8')).hexdigest()


@dataclass
class RunRecord:
    """Seeded, replayable trace of one optimization run."""

    algorithm: str
    problem: Dict[str, Any]
    config: Dict[str, Any]
    seed: int
    trace: List[Dict[str, Any]]
    best_solution: Any
    best_fitness: float
    iterations: int
    evaluations: int
    final_state: Dict[str, Any]
    archive: Tuple[ArchiveEntry, ...] = field(default=(), repr=False)
    archive_path: Optional[str] = None
    wall_time: float = 0.0

    @property
    def key(self) -> str:
        return generate_record_key(self.algorithm, self.problem, self.config, self.seed)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data = {
            'key': self.key,
            'algorithm': self.algorithm,
            'problem': self.problem,
            'config': self.config,
            'seed': self.seed,
            'best_solution': self.best_solution,
            'best_fitness': self.best_fitness,
            'iterations': self.iterations,
            'evaluations': self.evaluations,
            'final_state': self.final_state,
            'archive': self.archive_path,
            'archive_size': len(self.archive),
            'trace': self.trace
        }
        if include_timing:
            data['wall_time'] = round(self.wall_time, 6)
        return data

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"


@dataclass
class SummaryRow:
    """One line of a summary CSV; one per finished (or failed) run."""

    algorithm: str
    problem: str
    seed: int
    best_fitness: Optional[float]
    iterations: int
    evaluations: int
    wall_time: Optional[float]
    final_state: str
    status: str = "ok"
    error: str = ""

    @classmethod
    def from_record(cls, record: RunRecord, label: Optional[str] = None,
                    include_timing: bool = False) -> "SummaryRow":
        return cls.from_dict(record.to_dict(include_timing), label)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], label: Optional[str] = None) -> "SummaryRow":
        """Row for a serialized record; wall_time stays empty unless the record carries it."""
        return cls(
            algorithm=label or data['algorithm'],
            problem=data['problem']['name'],
            seed=data['seed'],
            best_fitness=data['best_fitness'],
            iterations=data['iterations'],
            evaluations=data['evaluations'],
            wall_time=data.get('wall_time'),
            final_state=format_final_state(data['final_state'])
        )

    @classmethod
    def failed(cls, algorithm: str, problem: str, seed: int, error: str) -> "SummaryRow":
        return cls(algorithm, problem, seed, None, 0, 0, None, "", status="failed", error=error)


SUMMARY_COLUMNS = [f for f in SummaryRow.__dataclass_fields__]


def format_final_state(state: Dict[str, Any]) -> str:
    if 'k' in state:
        return f"k={state['k']};m={state['m']}"
    if 'mean_m' in state:
        return f"mean_m={state['mean_m']:.3f};min_m={state['min_m']}"
    return ""


class RecordStore:
    """
    File-based store for run records, archives and summary CSVs.

    Layout under the output directory:
        <stem>.record.json, <stem>.archive.jsonl, summary.csv
    """

    def __init__(self, out_dir: Union[str, Path], include_timing: bool = False):
        self.out_dir = Path(out_dir)
        self.include_timing = include_timing
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.stats = {
            'records_written': 0,
            'archives_written': 0,
            'rows_appended': 0,
            'reused': 0
        }

    @staticmethod
    def stem(label: str, problem: str, seed: int) -> str:
        return f"{label}_{problem}_seed{seed}"

    def record_path(self, stem: str) -> Path:
        return self.out_dir / f"{stem}.record.json"

    def archive_path(self, stem: str) -> Path:
        return self.out_dir / f"{stem}.archive.jsonl"

    def save(self, record: RunRecord, stem: str) -> Path:
        """Write the archive and the record (archive first so the record can reference it)."""
        archive_file = write_jsonl(record.archive, self.archive_path(stem))
        self.stats['archives_written'] += 1
        record.archive_path = archive_file.name
        return self._write_json(self.record_path(stem), record.to_json(self.include_timing))

    def _write_json(self, path: Path, text: str) -> Path:
        # atomic move
        temp_path = path.with_suffix('.tmp')
        with open(temp_path, 'w', encoding='utf-8') as f:
            f.write(text)
        temp_path.replace(path)
        self.stats['records_written'] += 1
        logger.info(f"Record written: {path}")
        return path

    def get(self, stem: str, key: str) -> Optional[Dict[str, Any]]:
        """Stored record for `stem` if its key matches, else None."""
        path = self.record_path(stem)
        if not path.exists():
            return None
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (json.JSONDecodeError, OSError) as e:
            logger.warning(f"Unreadable record ignored: {path} - {e}")
            return None
        if data.get('key') != key:
            return None
        self.stats['reused'] += 1
        return data

    def append_summary(self, rows: Sequence[SummaryRow], name: str = "summary.csv") -> Path:
        """Append rows, writing the schema comment and header for a new file."""
        path = self.out_dir / name
        is_new = not path.exists() or path.stat().st_size == 0
        with open(path, 'a', encoding='utf-8', newline='') as f:
            if is_new:
                f.write(f"# schema={SUMMARY_SCHEMA}\n")
            writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS, lineterminator='\n')
            if is_new:
                writer.writeheader()
            for row in rows:
                writer.writerow(_row_values(row))
        self.stats['rows_appended'] += len(rows)
        return path

    def write_best_fitness_table(self, rows: Sequence[SummaryRow],
                                 name: str = "best_fitness.csv") -> Path:
        """Seeds as rows, algorithm labels as columns; failed cells read 'failed'."""
        labels = list(dict.fromkeys(r.algorithm for r in rows))
        seeds = list(dict.fromkeys(r.seed for r in rows))
        cells = {(r.algorithm, r.seed): r for r in rows}
        path = self.out_dir / name
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(f"# schema={SUMMARY_SCHEMA}\n")
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['seed', *labels])
            for seed in seeds:
                values = []
                for label in labels:
                    row = cells.get((label, seed))
                    if row is None:
                        values.append("")
                    elif row.status != "ok":
                        values.append("failed")
                    else:
                        values.append(row.best_fitness)
                writer.writerow([seed, *values])
        logger.info(f"Best-fitness table written: {path}")
        return path

    def get_stats(self) -> Dict[str, Any]:
        return {'stats': self.stats.copy(), 'out_dir': str(self.out_dir)}


def _row_values(row: SummaryRow) -> Dict[str, Any]:
    values = asdict(row)
    for column in ('best_fitness', 'wall_time'):
        if values[column] is None:
            values[column] = ""
    return values


def read_summary(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))
