"""
Solution archive: the point cloud of visited solutions.

Entries keep their fitness so a solution is never evaluated twice while it is
still remembered. The memory policy decides what is forgotten:

- unbounded: keep everything
- ring: fixed capacity, oldest entry evicted first
- elite: fixed capacity, worst entry evicted first (near-best memory)
- reservoir: fixed capacity, uniform sample of everything offered
"""
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np

from services.domain import BinarySolution, RealSolution, Solution
from utils.errors import ArchiveFormatError

logger = logging.getLogger(__name__)


class ArchivePolicy(str, Enum):
    UNBOUNDED = "unbounded"
    RING = "ring"
    ELITE = "elite"
    RESERVOIR = "reservoir"


@dataclass(frozen=True)
class ArchiveEntry:
    solution: Solution
    fitness: float
    index: int

    def to_record(self) -> Dict:
        record = {"t": self.index}
        if isinstance(self.solution, BinarySolution):
            record["bits"] = str(self.solution)
        else:
            record["coords"] = list(self.solution.coords)
        record["fitness"] = self.fitness
        return record


class Archive:
    """Ordered memory of (solution, fitness, insertion index) entries. Single writer."""

    def __init__(self, policy: Union[ArchivePolicy, str] = ArchivePolicy.UNBOUNDED,
                 capacity: Optional[int] = None, dedup: bool = True,
                 maximize: bool = False, seed: Optional[int] = None):
        """
        Args:
            policy: memory policy
            capacity: entry limit, required for every policy except unbounded
            dedup: skip solutions that are already stored
            maximize: fitness orientation, used by the elite policy
            seed: generator seed for the reservoir policy
        """
        self.policy = ArchivePolicy(policy)
        if self.policy is not ArchivePolicy.UNBOUNDED and (capacity is None or capacity < 1):
            raise ValueError(f"Archive policy {self.policy.value} needs a capacity >= 1")
        self.capacity = capacity if self.policy is not ArchivePolicy.UNBOUNDED else None
        self.dedup = dedup
        self.maximize = maximize

        self._entries: List[ArchiveEntry] = []
        self._by_solution: Dict[Solution, ArchiveEntry] = {}
        self._next_index = 0
        self._offered = 0
        self._rng = np.random.default_rng(seed) if self.policy is ArchivePolicy.RESERVOIR else None

        self.stats = {
            'inserts': 0,
            'duplicates': 0,
            'evictions': 0,
            'rejections': 0
        }

    def add(self, solution: Solution, fitness: float) -> Optional[ArchiveEntry]:
        """
        Offer a solution to the archive.

        Returns:
            The stored entry (the existing one for duplicates), or None if the
            policy rejected the solution.
        """
        if self.dedup and solution in self._by_solution:
            self.stats['duplicates'] += 1
            return self._by_solution[solution]

        self._offered += 1
        if self.capacity is not None and len(self._entries) >= self.capacity:
            victim = self._choose_victim(fitness)
            if victim is None:
                self.stats['rejections'] += 1
                return None
            self._evict(victim)

        entry = ArchiveEntry(solution, float(fitness), self._next_index)
        self._next_index += 1
        self._entries.append(entry)
        self._by_solution[solution] = entry
        self.stats['inserts'] += 1
        return entry

    def _choose_victim(self, fitness: float) -> Optional[int]:
        """Position of the entry to evict, or None to reject the newcomer."""
        if self.policy is ArchivePolicy.RING:
            return 0
        if self.policy is ArchivePolicy.RESERVOIR:
            slot = int(self._rng.integers(self._offered))
            return slot if slot < self.capacity else None

        # elite: the worst entry goes, the newest among equally bad ones
        sign = -1.0 if self.maximize else 1.0
        worst = max(range(len(self._entries)),
                    key=lambda i: (sign * self._entries[i].fitness, i))
        if sign * fitness < sign * self._entries[worst].fitness:
            return worst
        return None

    def _evict(self, position: int) -> None:
        entry = self._entries.pop(position)
        if self._by_solution.get(entry.solution) is entry:
            del self._by_solution[entry.solution]
        self.stats['evictions'] += 1

    def fitness_of(self, solution: Solution) -> Optional[float]:
        entry = self._by_solution.get(solution)
        return entry.fitness if entry is not None else None

    def solutions(self, window: Optional[int] = None) -> List[Solution]:
        """Stored solutions in insertion order, optionally only the last `window`."""
        entries = self._entries if window is None else self._entries[-window:]
        return [e.solution for e in entries]

    def snapshot(self) -> Tuple[ArchiveEntry, ...]:
        return tuple(self._entries)

    def __contains__(self, solution: Solution) -> bool:
        return solution in self._by_solution

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ArchiveEntry]:
        return iter(tuple(self._entries))

    def get_stats(self) -> Dict:
        return {
            'stats': self.stats.copy(),
            'policy': self.policy.value,
            'capacity': self.capacity,
            'size': len(self._entries),
            'offered': self._offered
        }

    def dump_jsonl(self, path: Union[str, Path]) -> Path:
        return write_jsonl(self._entries, path)


def entries_to_jsonl(entries: Iterable[ArchiveEntry]) -> str:
    return "".join(json.dumps(e.to_record(), separators=(',', ':')) + "\n" for e in entries)


def write_jsonl(entries: Iterable[ArchiveEntry], path: Union[str, Path]) -> Path:
    """Write entries as JSON-lines, atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix('.tmp')
    with open(temp_path, 'w', encoding='utf-8') as f:
        f.write(entries_to_jsonl(entries))
    temp_path.replace(path)
    logger.info(f"Archive written: {path}")
    return path


def parse_archive_lines(lines: Iterable[Union[str, bytes]]) -> List[ArchiveEntry]:
    """Parse archive JSON-lines (text or UTF-8 bytes); blank lines are skipped."""
    entries = []
    encoding = None
    for number, line in enumerate(lines, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ArchiveFormatError(f"not valid UTF-8 ({e.reason})", number) from None
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ArchiveFormatError(f"invalid JSON ({e.msg})", number) from None
        if not isinstance(record, dict):
            raise ArchiveFormatError("record is not an object", number)
        try:
            if "bits" in record:
                bits = record["bits"]
                solution = (BinarySolution.from_string(bits) if isinstance(bits, str)
                            else BinarySolution(tuple(bits)))
            elif "coords" in record:
                solution = RealSolution(tuple(record["coords"]))
            else:
                raise ArchiveFormatError("record has neither 'bits' nor 'coords'", number)
            entry = ArchiveEntry(solution, float(record["fitness"]), int(record["t"]))
        except ArchiveFormatError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ArchiveFormatError(f"bad field ({e})", number) from None

        kind = (type(solution), len(solution))
        if encoding is None:
            encoding = kind
        elif kind != encoding:
            raise ArchiveFormatError("record encoding or length differs from earlier records", number)
        entries.append(entry)
    return entries


def select_entries(entries: List[ArchiveEntry], elite_fraction: Optional[float] = None,
                   max_points: Optional[int] = None, maximize: bool = False) -> List[ArchiveEntry]:
    """
    Subset of an archive for analysis, in insertion order.

    Args:
        entries: archive entries
        elite_fraction: keep the best ceil(fraction * len) entries by fitness
        max_points: then keep only the most recent max_points entries
        maximize: fitness orientation for the elite cut
    """
    selected = list(entries)
    if elite_fraction is not None and selected:
        keep = max(1, int(np.ceil(elite_fraction * len(selected))))
        ranked = sorted(selected, key=lambda e: (-e.fitness if maximize else e.fitness, e.index))
        chosen = {id(e) for e in ranked[:keep]}
        selected = [e for e in selected if id(e) in chosen]
    if max_points is not None:
        selected = selected[-max_points:] if max_points > 0 else []
    return selected


def load_archive(path: Union[str, Path]) -> List[ArchiveEntry]:
    try:
        with open(path, "rb") as f:
            entries = parse_archive_lines(f)
    except OSError as e:
        raise ArchiveFormatError(f"cannot read {path}: {e}") from e
    logger.info(f"Loaded {len(entries)} archive entries from {path}")
    return entries
