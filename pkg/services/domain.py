"""
Solution encodings, distance functions and benchmark problems.

Binary solutions are the 0-simplices searched by VNS/TVNS, real solutions the
points moved by EM/TEM. Everything here is immutable and pure.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import IncompatibleEncodingError, InstanceFormatError

logger = logging.getLogger(__name__)


class Encoding(str, Enum):
    BINARY = "binary"
    REAL = "real"


class Direction(str, Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


@dataclass(frozen=True)
class BinarySolution:
    """Fixed-length 0/1 vector."""

    bits: Tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"Binary solution contains values other than 0/1: {self.bits}")
        object.__setattr__(self, "bits", bits)
        # packed form for popcount distances
        object.__setattr__(self, "_packed", int("".join(map(str, bits)) or "0", 2))

    @classmethod
    def from_string(cls, text: str) -> "BinarySolution":
        return cls(tuple(int(ch) for ch in text.strip()))

    def flipped(self, positions: Iterable[int]) -> "BinarySolution":
        bits = list(self.bits)
        for pos in positions:
            bits[pos] ^= 1
        return BinarySolution(tuple(bits))

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int8)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class RealSolution:
    """Vector of finite real coordinates."""

    coords: Tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"Real solution contains non-finite coordinates: {coords}")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "RealSolution":
        return cls(tuple(values.tolist()))

    def to_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def __len__(self) -> int:
        return len(self.coords)


Solution = Union[BinarySolution, RealSolution]


def hamming(a: BinarySolution, b: BinarySolution) -> int:
    """Number of positions in which two binary solutions differ."""
    if not isinstance(a, BinarySolution) or not isinstance(b, BinarySolution):
        raise IncompatibleEncodingError("Hamming distance requires two binary solutions")
    if len(a) != len(b):
        raise IncompatibleEncodingError(f"Binary lengths differ: {len(a)} != {len(b)}")
    return (a._packed ^ b._packed).bit_count()


def euclidean(a: RealSolution, b: RealSolution) -> float:
    """L2 distance between two real solutions."""
    if not isinstance(a, RealSolution) or not isinstance(b, RealSolution):
        raise IncompatibleEncodingError("Euclidean distance requires two real solutions")
    if len(a) != len(b):
        raise IncompatibleEncodingError(f"Real dimensions differ: {len(a)} != {len(b)}")
    return math.dist(a.coords, b.coords)


def distance(a: Solution, b: Solution) -> float:
    """Hamming distance for binary pairs, Euclidean for real pairs."""
    if isinstance(a, BinarySolution) and isinstance(b, BinarySolution):
        return hamming(a, b)
    if isinstance(a, RealSolution) and isinstance(b, RealSolution):
        return euclidean(a, b)
    raise IncompatibleEncodingError(
        f"Cannot measure distance between {type(a).__name__} and {type(b).__name__}"
    )


def encoding_of(solution: Solution) -> Encoding:
    if isinstance(solution, BinarySolution):
        return Encoding.BINARY
    if isinstance(solution, RealSolution):
        return Encoding.REAL
    raise IncompatibleEncodingError(f"Unknown solution type: {type(solution).__name__}")


# Benchmarks

def evaluate_onemax(s: BinarySolution) -> float:
    return float(sum(s.bits))


def evaluate_sphere(s: RealSolution) -> float:
    x = s.to_array()
    return float(np.dot(x, x))


def evaluate_rastrigin(s: RealSolution) -> float:
    x = s.to_array()
    return float(10.0 * len(x) + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


@dataclass(frozen=True)
class SetCoverInstance:
    """
    Weighted set cover instance.

    incidence[e] lists the zero-based indices of the sets covering element e.
    """

    n_elements: int
    n_sets: int
    costs: Tuple[float, ...]
    incidence: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if self.n_elements < 1 or self.n_sets < 1:
            raise InstanceFormatError("Set cover instance needs at least one element and one set")
        if len(self.costs) != self.n_sets:
            raise InstanceFormatError(f"Expected {self.n_sets} costs, got {len(self.costs)}")
        if any(c <= 0 for c in self.costs):
            raise InstanceFormatError("Set costs must be positive")
        if len(self.incidence) != self.n_elements:
            raise InstanceFormatError(
                f"Expected incidence rows for {self.n_elements} elements, got {len(self.incidence)}"
            )
        for element, sets in enumerate(self.incidence):
            if not sets:
                raise InstanceFormatError(f"Element {element + 1} is not covered by any set")
            if any(not 0 <= j < self.n_sets for j in sets):
                raise InstanceFormatError(f"Element {element + 1} references an unknown set")

    @property
    def total_cost(self) -> float:
        return float(sum(self.costs))

    @property
    def penalty(self) -> float:
        """Per-element penalty; any feasible cover is cheaper than any infeasible one."""
        return 1.0 + self.total_cost

    def uncovered(self, s: BinarySolution) -> int:
        return sum(1 for sets in self.incidence if not any(s.bits[j] for j in sets))


def evaluate_setcover(inst: SetCoverInstance, s: BinarySolution) -> float:
    if len(s) != inst.n_sets:
        raise IncompatibleEncodingError(
            f"Set cover solution has {len(s)} bits, instance has {inst.n_sets} sets"
        )
    cost = sum(c for c, bit in zip(inst.costs, s.bits) if bit)
    return float(cost + inst.penalty * inst.uncovered(s))


def parse_orlib(text: str) -> SetCoverInstance:
    """Parse an OR-Library style set cover instance (whitespace separated)."""
    tokens = text.split()
    pos = 0

    def take(kind: Callable[[str], float], what: str):
        nonlocal pos
        if pos >= len(tokens):
            raise InstanceFormatError(f"Unexpected end of instance while reading {what}")
        token = tokens[pos]
        pos += 1
        try:
            return kind(token)
        except ValueError:
            raise InstanceFormatError(f"Invalid {what}: {token!r}") from None

    n_elements = take(int, "element count")
    n_sets = take(int, "set count")
    costs = tuple(float(take(float, "set cost")) for _ in range(n_sets))
    incidence = []
    for element in range(n_elements):
        count = take(int, f"cover count of element {element + 1}")
        incidence.append(tuple(take(int, "set index") - 1 for _ in range(count)))
    if pos != len(tokens):
        raise InstanceFormatError(f"{len(tokens) - pos} trailing tokens after instance data")
    return SetCoverInstance(n_elements, n_sets, costs, tuple(incidence))


def load_setcover(path: Union[str, Path]) -> SetCoverInstance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InstanceFormatError(f"Cannot read instance {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise InstanceFormatError(f"Instance {path} is not valid UTF-8 (byte {e.start}: {e.reason})") from None
    instance = parse_orlib(text)
    logger.info(f"Loaded set cover instance {path}: {instance.n_elements} elements, {instance.n_sets} sets")
    return instance


def format_orlib(inst: SetCoverInstance) -> str:
    lines = [f"{inst.n_elements} {inst.n_sets}", " ".join(f"{c:g}" for c in inst.costs)]
    for sets in inst.incidence:
        lines.append(" ".join(str(v) for v in (len(sets), *(j + 1 for j in sets))))
    return "\n".join(lines) + "\n"


def generate_setcover(n_elements: int, n_sets: int, density: float,
                      rng: np.random.Generator) -> SetCoverInstance:
    """Random unicost instance; every element is covered by at least one set."""
    if not 0 < density <= 1:
        raise ValueError("density must be in (0, 1]")
    incidence = []
    for _ in range(n_elements):
        members = np.flatnonzero(rng.random(n_sets) < density)
        if members.size == 0:
            members = np.array([rng.integers(n_sets)])
        incidence.append(tuple(int(j) for j in members))
    return SetCoverInstance(n_elements, n_sets, (1.0,) * n_sets, tuple(incidence))


# Problems

@dataclass(frozen=True)
class Problem:
    """A named objective over one encoding."""

    name: str
    dimension: int
    encoding: Encoding
    direction: Direction
    objective: Callable[[Solution], float] = field(compare=False, repr=False)
    bounds: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("Problem dimension must be at least 1")
        if self.encoding is Encoding.REAL:
            if self.bounds is None or len(self.bounds) != self.dimension:
                raise ValueError("Real problems need one (lo, hi) bound per dimension")
            if any(not lo < hi for lo, hi in self.bounds):
                raise ValueError("Every bound must satisfy lo < hi")

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds], dtype=float)

    def evaluate(self, s: Solution) -> float:
        if encoding_of(s) is not self.encoding:
            raise IncompatibleEncodingError(f"{self.name} expects {self.encoding.value} solutions")
        if len(s) != self.dimension:
            raise IncompatibleEncodingError(
                f"{self.name} expects dimension {self.dimension}, got {len(s)}"
            )
        return self.objective(s)

    def is_better(self, candidate: float, incumbent: float) -> bool:
        """Strict comparison; ties keep the incumbent."""
        if self.direction is Direction.MINIMIZE:
            return candidate < incumbent
        return candidate > incumbent

    def cost(self, fitness: float) -> float:
        """Fitness re-oriented for minimization."""
        return fitness if self.direction is Direction.MINIMIZE else -fitness

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "dimension": self.dimension,
            "encoding": self.encoding.value,
            "direction": self.direction.value,
        }
        if self.bounds is not None:
            data["bounds"] = [list(b) for b in self.bounds]
        return data


PROBLEM_NAMES = ("onemax", "setcover", "sphere", "rastrigin")

_DEFAULT_BOUNDS = {"sphere": (-5.0, 5.0), "rastrigin": (-5.12, 5.12)}


def setcover_problem(instance: SetCoverInstance, name: str = "setcover") -> Problem:
    return Problem(
        name=name,
        dimension=instance.n_sets,
        encoding=Encoding.BINARY,
        direction=Direction.MINIMIZE,
        objective=lambda s: evaluate_setcover(instance, s),
    )


def build_problem(name: str, dimension: Optional[int] = None,
                  instance_path: Optional[Union[str, Path]] = None,
                  bounds: Optional[Sequence[float]] = None) -> Problem:
    """
    Build one of the bundled benchmark problems.

    Set cover reads its instance from instance_path; without one a unicost
    instance with `dimension` sets and elements is generated from seed 0.
    """
    if name not in PROBLEM_NAMES:
        raise ValueError(f"Unknown problem {name!r}; expected one of {', '.join(PROBLEM_NAMES)}")

    if name == "setcover":
        if instance_path is not None:
            instance = load_setcover(instance_path)
        else:
            n = dimension or 20
            instance = generate_setcover(n, n, 0.3, np.random.default_rng(0))
        if dimension is not None and dimension != instance.n_sets:
            raise IncompatibleEncodingError(
                f"Instance has {instance.n_sets} sets but dimension {dimension} was requested"
            )
        return setcover_problem(instance)

    if dimension is None:
        raise ValueError(f"Problem {name} needs a dimension")

    if name == "onemax":
        return Problem(name, dimension, Encoding.BINARY, Direction.MAXIMIZE, evaluate_onemax)

    lo, hi = bounds if bounds is not None else _DEFAULT_BOUNDS[name]
    objective = evaluate_sphere if name == "sphere" else evaluate_rastrigin
    return Problem(name, dimension, Encoding.REAL, Direction.MINIMIZE, objective,
                   bounds=tuple((float(lo), float(hi)) for _ in range(dimension)))
