"""
Simplicial neighborhoods over a solution archive.

An m-simplex is a set of m+1 distinct solutions whose pairwise distances all
satisfy the (k, mode) constraint: exactly k in strict mode, in (0, k] in
at-most mode. Shaking and local search grow an m-simplex containing the
incumbent into an (m+1)-simplex by adding one new solution.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from itertools import combinations
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from services.archive_service import Archive
from services.domain import BinarySolution, RealSolution, Solution, distance
from utils.errors import IncompatibleEncodingError

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATE_BUDGET = 10_000


class Mode(str, Enum):
    STRICT = "strict"
    AT_MOST = "at_most"


@dataclass(frozen=True)
class NeighborhoodParams:
    """Simplex order m, distance scale k and constraint mode."""

    m: int
    k: float
    mode: Mode = Mode.AT_MOST

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("Simplex order m must be >= 0")
        if not self.k > 0:
            raise ValueError("Distance scale k must be positive")
        object.__setattr__(self, "mode", Mode(self.mode))

    def accepts(self, d: float) -> bool:
        if self.mode is Mode.STRICT:
            return d == self.k
        return 0 < d <= self.k

    def accepts_array(self, d: np.ndarray) -> np.ndarray:
        if self.mode is Mode.STRICT:
            return d == self.k
        return (d > 0) & (d <= self.k)

    def with_order(self, m: int) -> "NeighborhoodParams":
        return replace(self, m=m)


@dataclass(frozen=True)
class Simplex:
    """Vertices in deterministic order: the anchor first, then by insertion index."""

    vertices: Tuple[Solution, ...]

    @property
    def order(self) -> int:
        return len(self.vertices) - 1

    def as_set(self) -> frozenset:
        return frozenset(self.vertices)

    def __contains__(self, solution: Solution) -> bool:
        return solution in self.vertices

    def __iter__(self) -> Iterator[Solution]:
        return iter(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)


def _check_encodings(points: Sequence[Solution]) -> None:
    kinds = {(type(p), len(p)) for p in points}
    if len(kinds) > 1:
        raise IncompatibleEncodingError("Simplex vertices mix encodings or dimensions")


def pairwise_distances(points: Sequence[Solution]) -> List[float]:
    return [distance(a, b) for a, b in combinations(points, 2)]


def is_simplex(points: Iterable[Solution], p: NeighborhoodParams) -> bool:
    """True iff the m+1 points satisfy the pairwise (k, mode) constraint."""
    points = list(points)
    if len(points) != p.m + 1:
        raise ValueError(f"An order-{p.m} simplex needs {p.m + 1} points, got {len(points)}")
    _check_encodings(points)
    return all(p.accepts(d) for d in pairwise_distances(points))


def _pool(archive: Union[Archive, Sequence[Solution]]) -> List[Solution]:
    if isinstance(archive, Archive):
        return archive.solutions()
    return list(archive)


def _coordinates(points: Sequence[Solution]) -> Tuple[np.ndarray, str]:
    """Row matrix of the points and the cdist metric matching `distance`."""
    if isinstance(points[0], BinarySolution):
        return np.array([s.bits for s in points], dtype=float), "cityblock"
    return np.array([s.coords for s in points], dtype=float), "euclidean"


def _set_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class SimplexIndex:
    """
    Order-m simplices of archive + {x} that contain x, counted and addressed
    by position without listing them.

    Partners (distinct archive members accepted by x) keep archive insertion
    order; simplices are ordered lexicographically by partner position, the
    same order `enumerate_simplices_containing` returns.
    """

    def __init__(self, archive: Union[Archive, Sequence[Solution]], x: Solution, p: NeighborhoodParams):
        self.x = x
        self.p = p
        self.partners = self._find_partners(_pool(archive)) if p.m > 0 else []
        q = len(self.partners)
        # bit i of _later[j] set iff partner i > j is accepted by partner j
        self._later = [0] * q
        if q > 1 and p.m > 1:
            coords, metric = _coordinates(self.partners)
            linked = p.accepts_array(cdist(coords, coords, metric=metric))
            for j in range(q - 1):
                self._later[j] = sum(1 << int(i) for i in np.flatnonzero(linked[j, j + 1:]) + j + 1)
        self._all = (1 << q) - 1
        self._counts: Dict[Tuple[int, int], int] = {}

    def _find_partners(self, pool: List[Solution]) -> List[Solution]:
        pool = [s for s in dict.fromkeys(pool) if s != self.x]
        if not pool:
            return []
        _check_encodings([self.x, *pool])
        coords, metric = _coordinates([self.x, *pool])
        d = cdist(coords[:1], coords[1:], metric=metric)[0]
        return [pool[int(i)] for i in np.flatnonzero(self.p.accepts_array(d))]

    def _count(self, mask: int, need: int) -> int:
        if need == 0:
            return 1
        if need == 1:
            return mask.bit_count()
        key = (mask, need)
        if key not in self._counts:
            self._counts[key] = sum(self._count(mask & self._later[j], need - 1) for j in _set_bits(mask))
        return self._counts[key]

    def __len__(self) -> int:
        return self._count(self._all, self.p.m)

    def simplex_at(self, index: int) -> Simplex:
        """The index-th simplex of the lexicographic enumeration."""
        if not 0 <= index < len(self):
            raise IndexError(f"Simplex index {index} out of range for {len(self)} simplices")
        chosen: List[int] = []
        mask, need = self._all, self.p.m
        while need > 0:
            for j in _set_bits(mask):
                below = self._count(mask & self._later[j], need - 1)
                if index < below:
                    chosen.append(j)
                    mask &= self._later[j]
                    need -= 1
                    break
                index -= below
        return self._simplex(chosen)

    def _simplex(self, chosen: Sequence[int]) -> Simplex:
        return Simplex((self.x, *(self.partners[i] for i in chosen)))

    def __iter__(self) -> Iterator[Simplex]:
        return self._grow(self._all, self.p.m, [])

    def _grow(self, mask: int, need: int, chosen: List[int]) -> Iterator[Simplex]:
        if need == 0:
            yield self._simplex(chosen)
            return
        for j in _set_bits(mask):
            chosen.append(j)
            yield from self._grow(mask & self._later[j], need - 1, chosen)
            chosen.pop()


def enumerate_simplices_containing(archive: Union[Archive, Sequence[Solution]], x: Solution,
                                   p: NeighborhoodParams) -> List[Simplex]:
    """
    All order-m simplices in archive + {x} that contain x.

    Partners keep archive insertion order and subsets come out in
    lexicographic order of partner positions.
    """
    return list(SimplexIndex(archive, x, p))


def _binary_radii(n: int, p: NeighborhoodParams) -> List[int]:
    if p.mode is Mode.STRICT:
        k = int(p.k)
        return [k] if k == p.k and k <= n else []
    return list(range(1, min(int(math.floor(p.k)), n) + 1))


@dataclass(frozen=True)
class _BitFlipBall:
    """Candidate space around a binary anchor: every flip of a radius in `radii`."""

    anchor: np.ndarray
    radii: Tuple[int, ...]
    sizes: Tuple[int, ...]

    @classmethod
    def around(cls, anchor: BinarySolution, p: NeighborhoodParams) -> "_BitFlipBall":
        radii = tuple(_binary_radii(len(anchor), p))
        return cls(anchor.to_array(), radii, tuple(math.comb(len(anchor), r) for r in radii))

    @property
    def space(self) -> int:
        return sum(self.sizes)

    def all_points(self) -> np.ndarray:
        """Every point of the ball, by radius then flip positions."""
        n = self.anchor.size
        blocks = []
        for r in self.radii:
            combos = np.array(list(combinations(range(n), r)), dtype=np.intp).reshape(-1, r)
            masks = np.zeros((len(combos), n), dtype=np.int8)
            np.put_along_axis(masks, combos, 1, axis=1)
            blocks.append(masks)
        return self.anchor ^ np.vstack(blocks)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """`size` uniform draws from the ball (with repetition)."""
        n = self.anchor.size
        weights = np.array(self.sizes, dtype=float) / self.space
        r = np.array(self.radii)[rng.choice(len(self.radii), size=size, p=weights)]
        # rank of each position in a random permutation; the r lowest ranks flip
        ranks = np.argsort(rng.random((size, n)), axis=1).argsort(axis=1)
        return self.anchor ^ (ranks < r[:, None]).astype(np.int8)


def _accepted_rows(rows: np.ndarray, vertices: Sequence[Solution], p: NeighborhoodParams) -> np.ndarray:
    """Mask of rows within the (k, mode) constraint of every vertex."""
    coords, metric = _coordinates(vertices)
    return np.all(p.accepts_array(cdist(rows.astype(float), coords, metric=metric)), axis=1)


def _to_solutions(rows: np.ndarray) -> List[Solution]:
    return [BinarySolution(tuple(int(b) for b in row)) for row in rows]


def extension_candidates(s: Simplex, p: NeighborhoodParams, budget: int,
                         rng: np.random.Generator,
                         bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> List[Solution]:
    """
    Solutions y not in s such that s + {y} is an order-(m+1) simplex.

    p.m is the order of s. Binary candidates are enumerated exactly when the
    bit-flip ball around the first vertex holds at most `budget` points;
    otherwise up to `budget` draws are rejection-sampled. Real candidates are
    always sampled (uniformly in the k-ball around the first vertex, clipped
    to `bounds`).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    vertices = s.vertices
    anchor = vertices[0]
    if isinstance(anchor, BinarySolution):
        return _to_solutions(_binary_candidate_rows(_BitFlipBall.around(anchor, p), vertices, p, budget, rng))

    members = set(vertices)

    def valid(y: Solution) -> bool:
        return y not in members and all(p.accepts(distance(y, v)) for v in vertices)

    return _real_candidates(anchor, p, budget, rng, valid, bounds)


def _binary_candidate_rows(ball: _BitFlipBall, vertices: Sequence[Solution], p: NeighborhoodParams,
                           budget: int, rng: np.random.Generator) -> np.ndarray:
    if not ball.radii:
        return np.zeros((0, ball.anchor.size), dtype=np.int8)
    if ball.space <= budget:
        rows = ball.all_points()
    else:
        logger.debug(f"Candidate space {ball.space} exceeds budget {budget}; sampling")
        rows = ball.sample(budget, rng)
    # vertices sit at distance 0 from themselves, which no constraint accepts
    rows = rows[_accepted_rows(rows, vertices, p)]
    if not len(rows):
        return rows
    _, first = np.unique(rows, axis=0, return_index=True)
    return rows[np.sort(first)]


def draw_extension(s: Simplex, p: NeighborhoodParams, budget: int, rng: np.random.Generator,
                   bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                   batch: int = 256) -> Optional[Solution]:
    """
    One extension candidate of s, uniform over the valid ones, or None.

    A binary ball larger than `budget` is sampled in batches until the first
    valid point, spending at most `budget` draws.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    anchor = s.vertices[0]
    ball = _BitFlipBall.around(anchor, p) if isinstance(anchor, BinarySolution) else None
    if ball is None:
        candidates = extension_candidates(s, p, budget, rng, bounds)
        return candidates[int(rng.integers(len(candidates)))] if candidates else None
    if ball.space <= budget:
        rows = _binary_candidate_rows(ball, s.vertices, p, budget, rng)
        return _to_solutions(rows[[int(rng.integers(len(rows)))]])[0] if len(rows) else None

    drawn = 0
    while drawn < budget:
        size = min(batch, budget - drawn)
        rows = ball.sample(size, rng)
        hits = np.flatnonzero(_accepted_rows(rows, s.vertices, p))
        if hits.size:
            return _to_solutions(rows[hits[:1]])[0]
        drawn += size
    return None


def _real_candidates(anchor: RealSolution, p: NeighborhoodParams, budget: int,
                     rng: np.random.Generator, valid,
                     bounds: Optional[Tuple[np.ndarray, np.ndarray]]) -> List[Solution]:
    if p.mode is Mode.STRICT:
        # exact real distances have measure zero
        logger.debug("Strict mode has no real-valued extension candidates")
        return []
    center = anchor.to_array()
    n = center.size
    if not math.isfinite(p.k) and bounds is None:
        raise ValueError("An infinite distance scale needs bounds to sample from")

    found: Dict[Solution, None] = {}
    for _ in range(budget):
        if math.isfinite(p.k):
            direction = rng.standard_normal(n)
            norm = np.linalg.norm(direction)
            if norm < 1e-12:
                continue
            y = center + direction / norm * p.k * rng.random() ** (1.0 / n)
            if bounds is not None:
                y = np.clip(y, bounds[0], bounds[1])
        else:
            y = rng.uniform(bounds[0], bounds[1])
        candidate = RealSolution.from_array(y)
        if candidate not in found and valid(candidate):
            found[candidate] = None
    return list(found)


def distance_variance(points: Sequence[Solution]) -> float:
    return float(np.var(pairwise_distances(points)))


def balanced_extension(s: Simplex, p: NeighborhoodParams, budget: int,
                       rng: np.random.Generator,
                       bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Optional[Solution]:
    """Extension candidate with the most even pairwise distances; ties drawn uniformly."""
    candidates = extension_candidates(s, p, budget, rng, bounds)
    if not candidates:
        return None
    scores = [distance_variance((*s.vertices, y)) for y in candidates]
    best = min(scores)
    ties = [y for y, score in zip(candidates, scores) if score == best]
    return ties[int(rng.integers(len(ties)))]


def k_inversion(x: BinarySolution, k: int, rng: np.random.Generator) -> BinarySolution:
    """Flip exactly k distinct, uniformly chosen bits."""
    if not 1 <= k <= len(x):
        raise ValueError(f"Cannot flip {k} bits of a {len(x)}-bit solution")
    return x.flipped(int(i) for i in rng.choice(len(x), size=k, replace=False))


def hamming_ball(x: BinarySolution, radius: int) -> Iterator[BinarySolution]:
    """Every solution at Hamming distance 1..radius, by distance then flip positions."""
    for r in range(1, min(radius, len(x)) + 1):
        for flips in combinations(range(len(x)), r):
            yield x.flipped(flips)


