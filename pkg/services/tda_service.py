"""
Persistent homology of solution clouds over Z/2.

build_rips turns a point cloud into a Vietoris-Rips filtration (every clique
of the distance graph, born at its diameter). compute_persistence reduces the
boundary matrix column by column, pairing each negative simplex with the
youngest creator in its boundary. betti_numbers and is_boundary answer the
same questions for a fixed complex by plain rank computations.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from services.domain import BinarySolution, RealSolution, Solution
from utils.errors import ComplexError, IncompatibleEncodingError

logger = logging.getLogger(__name__)

MAX_DIM_LIMIT = 3

Vertices = Tuple[int, ...]


def faces(simplex: Vertices) -> List[Vertices]:
    """Codimension-one faces, in lexicographic order."""
    if len(simplex) < 2:
        return []
    return [simplex[:i] + simplex[i + 1:] for i in range(len(simplex) - 1, -1, -1)]


@dataclass(frozen=True)
class SimplicialComplex:
    """Face-closed set of simplices over integer vertex labels."""

    simplices: Tuple[Vertices, ...]

    def __post_init__(self):
        normalized = [tuple(sorted(s)) for s in self.simplices]
        if any(len(set(s)) != len(s) or not s for s in normalized):
            raise ComplexError("Simplices need distinct vertices")
        if len(set(normalized)) != len(normalized):
            raise ComplexError("Complex contains duplicate simplices")
        present = set(normalized)
        for s in normalized:
            missing = [f for f in faces(s) if f not in present]
            if missing:
                raise ComplexError(f"Complex is not closed under faces: {s} lacks {missing[0]}")
        object.__setattr__(self, "simplices", tuple(sorted(normalized, key=lambda s: (len(s), s))))

    @classmethod
    def from_facets(cls, facets: Iterable[Iterable[int]]) -> "SimplicialComplex":
        """Smallest complex containing the given facets."""
        closure = set()
        for facet in facets:
            facet = tuple(sorted(facet))
            for size in range(1, len(facet) + 1):
                closure.update(combinations(facet, size))
        return cls(tuple(closure))

    @property
    def dimension(self) -> int:
        return max((len(s) - 1 for s in self.simplices), default=-1)

    @property
    def vertices(self) -> Tuple[int, ...]:
        return tuple(s[0] for s in self.simplices if len(s) == 1)

    def of_dimension(self, d: int) -> List[Vertices]:
        return [s for s in self.simplices if len(s) == d + 1]

    def counts(self) -> Tuple[int, ...]:
        return tuple(len(self.of_dimension(d)) for d in range(self.dimension + 1))

    def euler_characteristic(self) -> int:
        return sum((-1) ** d * n for d, n in enumerate(self.counts()))

    def to_dict(self) -> Dict:
        return {
            "vertices": list(self.vertices),
            "simplices": [list(s) for s in self.simplices],
            "counts": list(self.counts())
        }


@dataclass(frozen=True)
class FilteredSimplex:
    vertices: Vertices
    birth: float

    @property
    def dimension(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True)
class Filtration:
    """Simplices sorted by (birth, dimension, vertices); vertices are point indices."""

    simplices: Tuple[FilteredSimplex, ...]
    n_points: int
    max_dim: int
    max_radius: float

    def births(self) -> List[float]:
        return sorted({s.birth for s in self.simplices})

    def complex_at(self, r: float) -> SimplicialComplex:
        """The complex of all simplices born at or before r."""
        return SimplicialComplex(tuple(s.vertices for s in self.simplices if s.birth <= r))

    def __len__(self) -> int:
        return len(self.simplices)


@dataclass(frozen=True)
class PersistenceInterval:
    dimension: int
    birth: float
    death: float = math.inf

    def __post_init__(self):
        if self.birth > self.death:
            raise ValueError(f"Interval dies before it is born: [{self.birth}, {self.death})")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.death)

    @property
    def length(self) -> float:
        return self.death - self.birth

    def alive_at(self, r: float) -> bool:
        return self.birth <= r < self.death

    def to_dict(self) -> Dict:
        return {
            "dimension": self.dimension,
            "birth": self.birth,
            "death": "inf" if self.is_infinite else self.death
        }


def _interval_order(interval: PersistenceInterval):
    return (interval.dimension, interval.birth, -interval.death)


@dataclass(frozen=True)
class Barcode:
    """
    Persistence intervals with their filtration metadata.

    `intervals` is the raw output, zero-length intervals included;
    `reported()` drops them.
    """

    intervals: Tuple[PersistenceInterval, ...]
    n_points: int
    max_dim: int
    max_radius: float
    metadata: Dict = field(default_factory=dict, compare=False)

    def reported(self) -> List[PersistenceInterval]:
        return [i for i in self.intervals if i.length > 0]

    def in_dimension(self, d: int, include_zero: bool = False) -> List[PersistenceInterval]:
        pool = self.intervals if include_zero else self.reported()
        return [i for i in pool if i.dimension == d]

    def infinite(self, d: Optional[int] = None) -> List[PersistenceInterval]:
        return [i for i in self.intervals if i.is_infinite and (d is None or i.dimension == d)]

    def to_dict(self) -> Dict:
        return {
            "n_points": self.n_points,
            "max_dim": self.max_dim,
            "max_radius": "inf" if math.isinf(self.max_radius) else self.max_radius,
            "metadata": self.metadata,
            "intervals": [i.to_dict() for i in self.intervals]
        }


def distance_matrix(cloud: Sequence[Solution]) -> np.ndarray:
    """Pairwise Hamming (binary) or Euclidean (real) distances."""
    if not cloud:
        raise ValueError("Cannot build a complex over an empty cloud")
    kinds = {(type(s), len(s)) for s in cloud}
    if len(kinds) > 1:
        raise IncompatibleEncodingError("Cloud mixes encodings or dimensions")
    if len(cloud) == 1:
        return np.zeros((1, 1))
    if isinstance(cloud[0], BinarySolution):
        data = np.array([s.bits for s in cloud], dtype=float)
        return squareform(pdist(data, metric="cityblock"))
    if isinstance(cloud[0], RealSolution):
        return squareform(pdist(np.array([s.coords for s in cloud], dtype=float)))
    raise IncompatibleEncodingError(f"Unsupported solution type {type(cloud[0]).__name__}")


def rips_from_distances(distances: np.ndarray, max_dim: int, max_radius: float) -> Filtration:
    """Rips filtration of a precomputed distance matrix."""
    if not 1 <= max_dim <= MAX_DIM_LIMIT:
        raise ValueError(f"max_dim must be in 1..{MAX_DIM_LIMIT}, got {max_dim}")
    if not max_radius > 0:
        raise ValueError("max_radius must be positive")
    n = distances.shape[0]
    if n == 0:
        raise ValueError("Cannot build a complex over an empty cloud")

    # lower neighbours: j < i joined to i
    lower = [[j for j in range(i) if distances[i, j] <= max_radius] for i in range(n)]
    found: List[FilteredSimplex] = [FilteredSimplex((i,), 0.0) for i in range(n)]

    def expand(simplex: Vertices, birth: float, candidates: List[int]) -> None:
        found.append(FilteredSimplex(simplex, birth))
        if len(simplex) > max_dim:
            return
        for v in candidates:
            grown = tuple(sorted(simplex + (v,)))
            new_birth = max(birth, max(float(distances[v, u]) for u in simplex))
            expand(grown, new_birth, [w for w in candidates if w < v and w in lower_sets[v]])

    lower_sets = [set(nbrs) for nbrs in lower]
    for i in range(n):
        for j in lower[i]:
            expand((j, i), float(distances[i, j]), [w for w in lower[i] if w < j and w in lower_sets[j]])

    ordered = sorted(found, key=lambda s: (s.birth, s.dimension, s.vertices))
    return Filtration(tuple(ordered), n, max_dim, float(max_radius))


def build_rips(cloud: Sequence[Solution], max_dim: int = 2, max_radius: float = math.inf) -> Filtration:
    return rips_from_distances(distance_matrix(list(cloud)), max_dim, max_radius)


def compute_persistence(f: Filtration) -> Barcode:
    """Standard Z/2 reduction in filtration order; columns are sets of row indices."""
    index = {s.vertices: j for j, s in enumerate(f.simplices)}
    pivot_of: Dict[int, int] = {}
    reduced: List[frozenset] = []
    intervals: List[PersistenceInterval] = []
    killed = set()

    for j, s in enumerate(f.simplices):
        column = {index[face] for face in faces(s.vertices)}
        while column:
            low = max(column)
            if low not in pivot_of:
                break
            column ^= reduced[pivot_of[low]]
        reduced.append(frozenset(column))
        if column:
            low = max(column)
            pivot_of[low] = j
            killed.add(low)
            creator = f.simplices[low]
            intervals.append(PersistenceInterval(creator.dimension, creator.birth, s.birth))

    for j, s in enumerate(f.simplices):
        if not reduced[j] and j not in killed and s.dimension < f.max_dim:
            intervals.append(PersistenceInterval(s.dimension, s.birth))

    intervals = [i for i in intervals if i.dimension < f.max_dim]
    intervals.sort(key=_interval_order)
    logger.debug(f"Reduced {len(f)} simplices into {len(intervals)} intervals")
    return Barcode(tuple(intervals), f.n_points, f.max_dim, f.max_radius,
                   metadata={"simplices": len(f)})


def gf2_rank(matrix: np.ndarray) -> int:
    """Rank over Z/2 by Gaussian elimination."""
    a = (np.asarray(matrix, dtype=np.int64) % 2).astype(np.uint8)
    if a.size == 0:
        return 0
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        candidates = np.nonzero(a[rank:, c])[0]
        if candidates.size == 0:
            continue
        pivot = rank + int(candidates[0])
        if pivot != rank:
            a[[rank, pivot]] = a[[pivot, rank]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != rank]
        a[others] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def boundary_matrix(c: SimplicialComplex, d: int) -> np.ndarray:
    """Z/2 matrix of the boundary map from d-chains to (d-1)-chains."""
    rows = c.of_dimension(d - 1)
    cols = c.of_dimension(d)
    row_index = {s: i for i, s in enumerate(rows)}
    matrix = np.zeros((len(rows), len(cols)), dtype=np.uint8)
    if d == 0:
        return matrix
    for j, s in enumerate(cols):
        for face in faces(s):
            matrix[row_index[face], j] = 1
    return matrix


def betti_numbers(c: SimplicialComplex, top: Optional[int] = None) -> Tuple[int, ...]:
    """b_0..b_top over Z/2 (top defaults to the complex dimension)."""
    top = c.dimension if top is None else top
    ranks = {d: gf2_rank(boundary_matrix(c, d)) for d in range(1, top + 2)}
    betti = []
    for d in range(top + 1):
        cycles = len(c.of_dimension(d)) - ranks.get(d, 0)
        betti.append(cycles - ranks.get(d + 1, 0))
    return tuple(betti)


def path_to_cycle(path: Sequence[int]) -> List[Vertices]:
    """Edges of the closed path v0-v1-...-v0; a trailing repeat of v0 is allowed."""
    path = list(path)
    if len(path) > 1 and path[0] == path[-1]:
        path = path[:-1]
    return [tuple(sorted((a, b))) for a, b in zip(path, path[1:] + path[:1])]


def is_boundary(cycle: Iterable[Sequence[int]], c: SimplicialComplex) -> bool:
    """True iff the Z/2 1-cycle (a set of edges) bounds a 2-chain of c."""
    edges = c.of_dimension(1)
    edge_index = {e: i for i, e in enumerate(edges)}
    chain = np.zeros(len(edges), dtype=np.uint8)
    for edge in cycle:
        key = tuple(sorted(edge))
        if key not in edge_index:
            raise ComplexError(f"Edge {key} is not in the complex")
        chain[edge_index[key]] ^= 1

    d1 = boundary_matrix(c, 1)
    if np.any((d1.astype(np.int64) @ chain) % 2):
        raise ComplexError("Input chain is not a cycle")
    d2 = boundary_matrix(c, 2)
    augmented = np.column_stack([d2, chain]) if d2.size else chain.reshape(-1, 1)
    return gf2_rank(d2) == gf2_rank(augmented)


def betti_curve(barcode: Barcode, r: float) -> Tuple[int, ...]:
    """Betti numbers b_0..b_{max_dim-1} of the filtration at scale r."""
    counts = Counter(i.dimension for i in barcode.intervals if i.alive_at(r))
    return tuple(counts.get(d, 0) for d in range(barcode.max_dim))


@dataclass
class RegularityReport:
    """Finite intervals split per dimension against noise_ratio x that dimension's longest interval."""

    noise_ratio: float
    thresholds: Dict[int, float]
    max_persistence: Dict[int, float]
    total_persistence: float
    long_lived: List[PersistenceInterval]
    noise: List[PersistenceInterval]
    infinite: List[PersistenceInterval]

    def counts(self) -> Dict[int, Dict[str, int]]:
        result: Dict[int, Dict[str, int]] = {}
        for key, group in (("long_lived", self.long_lived), ("noise", self.noise),
                           ("infinite", self.infinite)):
            for interval in group:
                result.setdefault(interval.dimension, {"long_lived": 0, "noise": 0, "infinite": 0})
                result[interval.dimension][key] += 1
        return dict(sorted(result.items()))

    @property
    def is_empty(self) -> bool:
        return not (self.long_lived or self.noise or self.infinite)

    def to_dict(self) -> Dict:
        return {
            "noise_ratio": self.noise_ratio,
            "thresholds": {str(d): t for d, t in sorted(self.thresholds.items())},
            "max_persistence": {str(d): p for d, p in sorted(self.max_persistence.items())},
            "total_persistence": self.total_persistence,
            "counts": {str(d): c for d, c in self.counts().items()},
            "long_lived": [i.to_dict() for i in self.long_lived],
            "noise": [i.to_dict() for i in self.noise],
            "infinite": [i.to_dict() for i in self.infinite]
        }


def regularity_report(b: Barcode, noise_ratio: float) -> RegularityReport:
    """Split finite, non-zero intervals into long-lived and noise by relative length."""
    if not 0 < noise_ratio < 1:
        raise ValueError("noise_ratio must be in (0, 1)")
    reported = b.reported()
    finite = [i for i in reported if not i.is_infinite]
    max_length: Dict[int, float] = {}
    for interval in finite:
        max_length[interval.dimension] = max(max_length.get(interval.dimension, 0.0), interval.length)
    thresholds = {d: noise_ratio * length for d, length in max_length.items()}
    return RegularityReport(
        noise_ratio=noise_ratio,
        thresholds=thresholds,
        max_persistence=max_length,
        total_persistence=float(sum(i.length for i in finite)),
        long_lived=[i for i in finite if i.length >= thresholds[i.dimension]],
        noise=[i for i in finite if i.length < thresholds[i.dimension]],
        infinite=[i for i in reported if i.is_infinite]
    )


def persistence_vs_k(archives: Union[Sequence[Solution], Sequence[Sequence[Solution]]],
                     ks: Sequence[float], max_dim: int = 2) -> List[Tuple[float, Barcode]]:
    """
    Barcode of the Rips filtration truncated at each scale k.

    `archives` is one cloud used for every k, or one cloud per k.
    """
    ks = list(ks)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("Scales must be strictly ascending")
    if archives and isinstance(archives[0], (BinarySolution, RealSolution)):
        clouds = [list(archives)] * len(ks)
    else:
        clouds = [list(a) for a in archives]
        if len(clouds) == 1:
            clouds = clouds * len(ks)
    if len(clouds) != len(ks):
        raise ValueError(f"Got {len(clouds)} snapshots for {len(ks)} scales")

    results = []
    cache: Dict[int, np.ndarray] = {}
    for k, cloud in zip(ks, clouds):
        key = id(cloud)
        if key not in cache:
            cache[key] = distance_matrix(cloud)
        results.append((k, compute_persistence(rips_from_distances(cache[key], max_dim, k))))
        logger.info(f"Persistence at k={k}: {len(results[-1][1].reported())} intervals")
    return results


def connected_components(distances: np.ndarray, radius: float) -> int:
    """Union-find count of components of the graph with edges d <= radius."""
    n = distances.shape[0]
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in combinations(range(n), 2):
        if distances[i, j] <= radius:
            parent[find(i)] = find(j)
    return len({find(i) for i in range(n)})
