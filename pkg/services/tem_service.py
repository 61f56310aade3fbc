"""
Electromagnetism-like optimization over real vectors.

Each iteration runs a coordinate local search on every member, assigns
charges from fitness, sums Coulomb-style pairwise forces and moves every
non-best member along its force by a random fraction of the feasible range.

TEM restricts the random step: a moved point must form an m-simplex with m
other population members, all pairwise distances within the threshold. If
no trial step achieves that, the point retries with m-1; at m=0 the move is
the classical one.
"""
import logging
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.spatial.distance import cdist, pdist, squareform

from services.archive_service import Archive, ArchivePolicy
from services.domain import Direction, Encoding, Problem, RealSolution
from services.record_store import RunRecord
from utils.errors import ConfigurationError, IncompatibleEncodingError

logger = logging.getLogger(__name__)

EPS = 1e-12


class DistanceObjective(str, Enum):
    AVG = "avg"
    MAX = "max"


class TemConfig(BaseModel):
    """Run parameters for EM and TEM. threshold=None is an infinite threshold."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    population_size: int = Field(20, ge=2)
    max_iterations: int = Field(200, ge=1)
    stall_limit: Optional[int] = Field(None, ge=1)
    m_max: int = Field(2, ge=0)
    include_self: bool = False
    distance_objective: DistanceObjective = DistanceObjective.AVG
    threshold: Optional[float] = Field(None, gt=0)
    move_trials: int = Field(50, ge=1)
    ls_steps: int = Field(5, ge=0)
    ls_delta: float = Field(0.05, gt=0, le=1)
    sticky_fallback: bool = False
    snapshot_every: Optional[int] = Field(10, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)

    @field_validator("threshold", mode="before")
    @classmethod
    def _infinite_threshold(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("inf", "infinite", "infinity"):
            return None
        if isinstance(value, (int, float)) and math.isinf(value) and value > 0:
            return None
        return value

    @model_validator(mode="after")
    def _check_population(self):
        needed = self.m_max + 1 if self.include_self else self.m_max + 2
        if self.population_size < needed:
            raise ValueError(
                f"population_size {self.population_size} is too small for m_max={self.m_max} "
                f"(needs {needed})"
            )
        return self

    @property
    def threshold_value(self) -> float:
        return math.inf if self.threshold is None else self.threshold

    def classical(self) -> "TemConfig":
        return self.model_copy(update={"m_max": 0, "threshold": None})


def make_tem_config(**values: Any) -> TemConfig:
    try:
        return TemConfig(**values)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid TEM configuration: {e}") from e


@dataclass
class Population:
    """P members as rows of `positions` with cached fitness (minimization)."""

    positions: np.ndarray
    fitness: np.ndarray

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.fitness))

    @property
    def best_fitness(self) -> float:
        return float(self.fitness[self.best_index])

    def member(self, i: int) -> RealSolution:
        return RealSolution.from_array(self.positions[i])


class ChargesAndForces(NamedTuple):
    q: np.ndarray
    forces: np.ndarray


def compute_charges(pop: Population) -> np.ndarray:
    f = pop.fitness
    offsets = f - f.min()
    denominator = float(offsets.sum())
    if denominator < EPS:
        return np.ones(pop.size)
    return np.exp(-pop.dimension * offsets / denominator)


def compute_forces(pop: Population, q: np.ndarray) -> np.ndarray:
    """F_i = sum_j +/- (x_j - x_i) q_i q_j / |x_j - x_i|^2; attraction toward better members."""
    x = pop.positions
    diff = x[np.newaxis, :, :] - x[:, np.newaxis, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    near = d2 < EPS * EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(near, 0.0, np.outer(q, q) / np.where(near, 1.0, d2))
    sign = np.where(pop.fitness[np.newaxis, :] < pop.fitness[:, np.newaxis], 1.0, -1.0)
    return np.einsum("ij,ijk->ik", coef * sign, diff)


def charges_and_forces(pop: Population) -> ChargesAndForces:
    q = compute_charges(pop)
    return ChargesAndForces(q, compute_forces(pop, q))


def _step(x: np.ndarray, force: np.ndarray, lam, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    direction = force / np.linalg.norm(force)
    return np.clip(x + np.multiply.outer(lam, direction * (upper - lower)), lower, upper)


def moves(pop: Population, forces: np.ndarray) -> List[int]:
    """Indices of members that move this iteration, ascending."""
    best = pop.best_index
    return [i for i in range(pop.size)
            if i != best and np.linalg.norm(forces[i]) >= EPS]


def move_classical(pop: Population, forces: np.ndarray, rng: np.random.Generator,
                   lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """New positions: one U(0,1) step per moving member, best and zero-force members stay."""
    positions = pop.positions.copy()
    for i in moves(pop, forces):
        positions[i] = _step(pop.positions[i], forces[i], rng.random(), lower, upper)
    return positions


class SimplexChoice(NamedTuple):
    candidate: int
    partners: Tuple[int, ...]
    score: float


def partner_simplices(partners: Sequence[int], distances: np.ndarray, m: int,
                      threshold: float) -> List[Tuple[int, ...]]:
    """m-subsets of partners whose pairwise distances lie in (0, threshold]."""
    def linked(a: int, b: int) -> bool:
        return 0 < distances[a, b] <= threshold

    return [combo for combo in combinations(partners, m)
            if all(linked(a, b) for a, b in combinations(combo, 2))]


def select_simplex_candidate(candidates: np.ndarray, positions: np.ndarray,
                             combos: Sequence[Tuple[int, ...]], distances: np.ndarray,
                             threshold: float,
                             objective: DistanceObjective) -> Optional[SimplexChoice]:
    """
    Best (candidate, partner set) pair under the distance objective.

    A pair is valid when every candidate-partner distance lies in
    (0, threshold]. Ties go to the earliest candidate, then the earliest
    partner set.

    Returns:
        The winning choice, or None if no candidate is valid.
    """
    if not combos:
        return None
    members = np.asarray(combos, dtype=int)
    m = members.shape[1]
    pairs = (m + 1) * m / 2
    to_members = cdist(candidates, positions)[:, members]
    valid = np.all((to_members > 0) & (to_members <= threshold), axis=2)
    inner = np.stack([distances[members[:, a], members[:, b]] for a, b in combinations(range(m), 2)],
                     axis=1) if m > 1 else np.zeros((len(members), 0))
    if objective is DistanceObjective.AVG:
        value = (to_members.sum(axis=2) + inner.sum(axis=1)) / pairs
    else:
        value = np.maximum(to_members.max(axis=2), inner.max(axis=1, initial=0.0))
    scores = np.where(valid, value, np.inf)
    flat = int(np.argmin(scores))
    t, c = divmod(flat, len(combos))
    if not np.isfinite(scores[t, c]):
        return None
    return SimplexChoice(t, tuple(combos[c]), float(scores[t, c]))


def move_tem(i: int, pop: Population, forces: np.ndarray, m: int, cfg: TemConfig,
             rng: np.random.Generator, lower: np.ndarray, upper: np.ndarray,
             distances: Optional[np.ndarray] = None,
             partner_cache: Optional[Dict[int, List[Tuple[int, ...]]]] = None) -> Tuple[np.ndarray, int]:
    """
    Move member i, preferring positions that close an m-simplex with other members.

    Partners are taken from the positions in `pop` (the population before
    this iteration's moves). Member i's own old position is a partner only
    with include_self.

    partner_cache maps an order to the partner sets over the whole population
    and is filled on demand; it must only be shared between moves of one
    iteration.

    Returns:
        The new position and the order at which the move succeeded.
    """
    if m > cfg.m_max:
        raise ValueError(f"m={m} exceeds m_max={cfg.m_max}")
    x, force = pop.positions[i], forces[i]
    if distances is None:
        distances = squareform(pdist(pop.positions))
    partners = [j for j in range(pop.size) if cfg.include_self or j != i]
    threshold = cfg.threshold_value

    while m > 0:
        candidates = _step(x, force, rng.random(cfg.move_trials), lower, upper)
        if partner_cache is None:
            combos = partner_simplices(partners, distances, m, threshold)
        else:
            if m not in partner_cache:
                partner_cache[m] = partner_simplices(range(pop.size), distances, m, threshold)
            combos = [c for c in partner_cache[m] if cfg.include_self or i not in c]
        choice = select_simplex_candidate(candidates, pop.positions, combos, distances,
                                          threshold, cfg.distance_objective)
        if choice is not None:
            return candidates[choice.candidate], m
        logger.debug(f"Member {i}: no valid order-{m} move in {cfg.move_trials} trials")
        m -= 1
    return _step(x, force, rng.random(), lower, upper), 0


class LocalSearchResult(NamedTuple):
    position: np.ndarray
    fitness: float
    evaluations: int


def em_local_search(problem: Problem, x: np.ndarray, fitness: float, ls_steps: int,
                    ls_delta: float, rng: np.random.Generator) -> LocalSearchResult:
    """
    Coordinate-wise random line search.

    Each coordinate gets up to ls_steps perturbations of at most ls_delta
    times that coordinate's range, in a random direction; the first strict
    improvement is kept and the search moves on to the next coordinate.
    """
    lower, upper = problem.lower, problem.upper
    length = ls_delta * (upper - lower)
    current = x.copy()
    evaluations = 0
    for d in range(current.size):
        for _ in range(ls_steps):
            sign = 1.0 if rng.random() > 0.5 else -1.0
            trial = current.copy()
            trial[d] = np.clip(trial[d] + sign * rng.random() * length[d], lower[d], upper[d])
            trial_fitness = problem.evaluate(RealSolution.from_array(trial))
            evaluations += 1
            if trial_fitness < fitness:
                current, fitness = trial, trial_fitness
                break
    return LocalSearchResult(current, fitness, evaluations)


class _PopulationSearch(ABC):
    """Shared state and loop skeleton for EM and TEM; subclasses supply the move."""

    algorithm = "em"

    def __init__(self, problem: Problem, cfg: TemConfig):
        if problem.encoding is not Encoding.REAL:
            raise IncompatibleEncodingError(f"{self.algorithm} needs a real-valued problem, got {problem.name}")
        if problem.direction is not Direction.MINIMIZE:
            raise ConfigurationError(f"{self.algorithm} minimizes; {problem.name} is a maximization problem")
        self.problem = problem
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.lower, self.upper = problem.lower, problem.upper
        self.snapshots = Archive(ArchivePolicy.UNBOUNDED, dedup=False)
        self.evaluations = 0

    def initial_population(self) -> Population:
        positions = self.rng.uniform(self.lower, self.upper,
                                     size=(self.cfg.population_size, self.problem.dimension))
        fitness = np.array([self._evaluate(row) for row in positions])
        return Population(positions, fitness)

    def _evaluate(self, position: np.ndarray) -> float:
        self.evaluations += 1
        return self.problem.evaluate(RealSolution.from_array(position))

    def local_search(self, pop: Population) -> None:
        for i in range(pop.size):
            result = em_local_search(self.problem, pop.positions[i], float(pop.fitness[i]),
                                     self.cfg.ls_steps, self.cfg.ls_delta, self.rng)
            self.evaluations += result.evaluations
            pop.positions[i] = result.position
            pop.fitness[i] = result.fitness

    def _snapshot(self, pop: Population) -> None:
        for i in range(pop.size):
            self.snapshots.add(pop.member(i), float(pop.fitness[i]))

    @abstractmethod
    def move(self, pop: Population, forces: np.ndarray,
             orders: List[Optional[int]]) -> Tuple[np.ndarray, List[Optional[int]]]:
        """New positions and the order each member moved with (None for members that stay)."""

    def run(self) -> RunRecord:
        cfg = self.cfg
        started = time.perf_counter()
        logger.info(f"Starting {self.algorithm} on {self.problem.name} "
                    f"(n={self.problem.dimension}, P={cfg.population_size}, seed={cfg.seed})")

        pop = self.initial_population()
        if cfg.snapshot_every is not None:
            self._snapshot(pop)
        orders: List[Optional[int]] = [cfg.m_max] * pop.size
        trace: List[Dict[str, Any]] = []
        best_fitness = pop.best_fitness
        stall = 0

        for iteration in range(1, cfg.max_iterations + 1):
            if cfg.stall_limit is not None and stall >= cfg.stall_limit:
                logger.info(f"Stopping after {stall} non-improving iterations")
                break
            self.local_search(pop)
            q, forces = charges_and_forces(pop)
            positions, effective = self.move(pop, forces, orders)
            moved = [i for i, m in enumerate(effective) if m is not None]
            for i in moved:
                pop.positions[i] = positions[i]
                pop.fitness[i] = self._evaluate(positions[i])
            if cfg.sticky_fallback:
                orders = [m if m is not None else old for m, old in zip(effective, orders)]

            improved = pop.best_fitness < best_fitness
            best_fitness = min(best_fitness, pop.best_fitness)
            stall = 0 if improved else stall + 1
            trace.append({
                "iteration": iteration,
                "best_fitness": pop.best_fitness,
                "best_index": pop.best_index,
                "effective_m": effective
            })
            if cfg.snapshot_every is not None and iteration % cfg.snapshot_every == 0:
                self._snapshot(pop)

        elapsed = time.perf_counter() - started
        best = pop.best_index
        logger.info(f"{self.algorithm} finished: best={pop.best_fitness} after {len(trace)} iterations, "
                    f"{self.evaluations} evaluations")
        logger.info(f"Snapshot archive stats: {self.snapshots.get_stats()}")
        return RunRecord(
            algorithm=self.algorithm,
            problem=self.problem.to_dict(),
            config=cfg.model_dump(mode="json"),
            seed=cfg.seed,
            trace=trace,
            best_solution=pop.positions[best].tolist(),
            best_fitness=float(pop.fitness[best]),
            iterations=len(trace),
            evaluations=self.evaluations,
            final_state=_order_summary(trace[-1]["effective_m"] if trace else []),
            archive=self.snapshots.snapshot(),
            wall_time=elapsed
        )


def _order_summary(effective: Sequence[Optional[int]]) -> Dict[str, Any]:
    used = [m for m in effective if m is not None]
    return {
        "mean_m": float(np.mean(used)) if used else 0.0,
        "min_m": min(used) if used else 0,
        "moved": len(used)
    }


class EmService(_PopulationSearch):
    """Classical EM; the simplex fields of the config are ignored."""

    algorithm = "em"

    def __init__(self, problem: Problem, cfg: TemConfig):
        super().__init__(problem, cfg.classical())

    def move(self, pop, forces, orders):
        positions = move_classical(pop, forces, self.rng, self.lower, self.upper)
        moving = set(moves(pop, forces))
        return positions, [0 if i in moving else None for i in range(pop.size)]


class TemService(_PopulationSearch):
    """Topological EM: simplex-constrained moves with per-member order fallback."""

    algorithm = "tem"

    def move(self, pop, forces, orders):
        cfg = self.cfg
        positions = pop.positions.copy()
        effective: List[Optional[int]] = [None] * pop.size
        distances = squareform(pdist(pop.positions))
        cache: Dict[int, List[Tuple[int, ...]]] = {}
        for i in moves(pop, forces):
            start = orders[i] if cfg.sticky_fallback else cfg.m_max
            positions[i], effective[i] = move_tem(i, pop, forces, start, cfg, self.rng,
                                                  self.lower, self.upper, distances, cache)
        return positions, effective


def run_em(problem: Problem, cfg: TemConfig) -> RunRecord:
    return EmService(problem, cfg).run()


def run_tem(problem: Problem, cfg: TemConfig) -> RunRecord:
    return TemService(problem, cfg).run()
