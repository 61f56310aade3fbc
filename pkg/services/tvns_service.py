"""
Variable neighborhood search over binary solutions.

VnsService is the classical loop: shake by a random k-inversion, descend by
best-improvement over the Hamming ball of radius ls_k, widen k on failure.
TvnsService adds the simplex order m to the schedule: shaking extends a
random m-simplex of archived solutions that contains the incumbent, and falls
back to smaller m when no such simplex or extension exists. Both share the
same primitives, so TVNS with m_max=0 walks exactly the classical trace.
"""
import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from services.archive_service import Archive, ArchivePolicy
from services.domain import BinarySolution, Direction, Encoding, Problem
from services.record_store import RunRecord
from services.simplex_service import (DEFAULT_CANDIDATE_BUDGET, Mode, NeighborhoodParams, Simplex,
                                      SimplexIndex, balanced_extension, draw_extension,
                                      extension_candidates, hamming_ball, k_inversion)
from utils.errors import ConfigurationError, IncompatibleEncodingError

logger = logging.getLogger(__name__)


class ShakeSelection(str, Enum):
    RANDOM = "random"
    BALANCED_BEST = "balanced_best"


class TvnsConfig(BaseModel):
    """Run parameters for VNS and TVNS."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k_min: int = Field(1, ge=1)
    k_max: int = Field(3, ge=1)
    m_max: int = Field(2, ge=0)
    mode: Mode = Mode.AT_MOST
    archive_policy: ArchivePolicy = ArchivePolicy.RING
    archive_capacity: Optional[int] = Field(1000, ge=1)
    archive_dedup: bool = True
    ls_m: int = Field(0, ge=0)
    ls_k: int = Field(1, ge=1, le=3)
    ls_window: Optional[int] = Field(None, ge=1)
    max_iterations: int = Field(200, ge=1)
    stall_limit: Optional[int] = Field(None, ge=1)
    max_evaluations: Optional[int] = Field(None, ge=1)
    target_fitness: Optional[float] = None
    candidate_budget: int = Field(DEFAULT_CANDIDATE_BUDGET, ge=1)
    shake_selection: ShakeSelection = ShakeSelection.RANDOM
    seed: int = Field(0, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _check_schedule(self):
        if self.k_min > self.k_max:
            raise ValueError(f"k_min ({self.k_min}) must not exceed k_max ({self.k_max})")
        if self.ls_m > self.m_max:
            raise ValueError(f"ls_m ({self.ls_m}) must not exceed m_max ({self.m_max})")
        if self.archive_policy is not ArchivePolicy.UNBOUNDED and self.archive_capacity is None:
            raise ValueError(f"Archive policy {self.archive_policy.value} needs archive_capacity")
        return self

    def classical(self) -> "TvnsConfig":
        return self.model_copy(update={"m_max": 0, "ls_m": 0})


def make_tvns_config(**values: Any) -> TvnsConfig:
    """Build a TvnsConfig, reporting invalid values as ConfigurationError."""
    try:
        return TvnsConfig(**values)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid TVNS configuration: {e}") from e


@dataclass(frozen=True)
class ScheduleState:
    k: int
    m: int

    def to_dict(self) -> Dict[str, int]:
        return {"k": self.k, "m": self.m}


def next_neighborhood(state: ScheduleState, improved: bool, cfg: TvnsConfig) -> ScheduleState:
    """Reset on improvement, otherwise relax m first, then widen k, wrapping after k_max."""
    if improved:
        return ScheduleState(cfg.k_min, cfg.m_max)
    if state.m > 0:
        return ScheduleState(state.k, state.m - 1)
    if state.k < cfg.k_max:
        return ScheduleState(state.k + 1, cfg.m_max)
    return ScheduleState(cfg.k_min, cfg.m_max)


class ShakeOutcome(NamedTuple):
    solution: BinarySolution
    m: int
    simplex: Simplex


class _BinarySearch:
    """Evaluation bookkeeping and the primitives shared by VNS and TVNS."""

    algorithm = "vns"

    def __init__(self, problem: Problem, cfg: TvnsConfig):
        if problem.encoding is not Encoding.BINARY:
            raise IncompatibleEncodingError(f"{self.algorithm} needs a binary problem, got {problem.name}")
        if cfg.k_max > problem.dimension:
            raise ConfigurationError(
                f"k_max ({cfg.k_max}) exceeds the problem dimension ({problem.dimension})"
            )
        self.problem = problem
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.archive = Archive(
            policy=cfg.archive_policy,
            capacity=cfg.archive_capacity,
            dedup=cfg.archive_dedup,
            maximize=problem.direction is Direction.MAXIMIZE,
            seed=cfg.seed
        )
        self.evaluations = 0

    def evaluate(self, s: BinarySolution) -> float:
        """Fitness of s; archived solutions are not re-evaluated."""
        known = self.archive.fitness_of(s)
        if known is not None:
            return known
        fitness = self.problem.evaluate(s)
        self.evaluations += 1
        self.archive.add(s, fitness)
        return fitness

    def initial_solution(self) -> BinarySolution:
        return BinarySolution(tuple(int(b) for b in self.rng.integers(0, 2, self.problem.dimension)))

    def hamming_local_search(self, start: BinarySolution, fitness: float,
                             radius: int) -> Tuple[BinarySolution, float]:
        """Best-improvement descent over the Hamming ball of the given radius."""
        current, current_fitness = start, fitness
        while True:
            best, best_fitness = None, current_fitness
            for y in hamming_ball(current, radius):
                fy = self.evaluate(y)
                if self.problem.is_better(fy, best_fitness):
                    best, best_fitness = y, fy
            if best is None:
                return current, current_fitness
            current, current_fitness = best, best_fitness

    def _should_stop(self, fitness: float, stall: int) -> bool:
        cfg = self.cfg
        if cfg.stall_limit is not None and stall >= cfg.stall_limit:
            logger.info(f"Stopping after {stall} non-improving iterations")
            return True
        if cfg.max_evaluations is not None and self.evaluations >= cfg.max_evaluations:
            logger.info(f"Evaluation budget of {cfg.max_evaluations} spent")
            return True
        if cfg.target_fitness is not None and not self.problem.is_better(cfg.target_fitness, fitness):
            logger.info(f"Target fitness {cfg.target_fitness} reached")
            return True
        return False

    def _iterate(self, shake, local_search, cfg: TvnsConfig) -> RunRecord:
        started = time.perf_counter()
        logger.info(f"Starting {self.algorithm} on {self.problem.name} "
                    f"(n={self.problem.dimension}, seed={cfg.seed})")

        current = self.initial_solution()
        fitness = self.evaluate(current)
        state = ScheduleState(cfg.k_min, cfg.m_max)
        trace: List[Dict[str, Any]] = []
        stall = 0

        for iteration in range(1, cfg.max_iterations + 1):
            if self._should_stop(fitness, stall):
                break
            incumbent = current
            outcome = shake(current, state)
            shaken_fitness = self.evaluate(outcome.solution)
            local, local_fitness = local_search(outcome.solution, shaken_fitness)
            improved = self.problem.is_better(local_fitness, fitness)
            if improved:
                current, fitness = local, local_fitness
                stall = 0
            else:
                stall += 1
            trace.append({
                "iteration": iteration,
                "k": state.k,
                "m": state.m,
                "shake_m": outcome.m,
                "incumbent": str(incumbent),
                "shaken": str(outcome.solution),
                "shaken_fitness": shaken_fitness,
                "local_optimum": str(local),
                "local_fitness": local_fitness,
                "incumbent_fitness": fitness,
                "improved": improved
            })
            state = next_neighborhood(state, improved, cfg)

        elapsed = time.perf_counter() - started
        logger.info(f"{self.algorithm} finished: best={fitness} after {len(trace)} iterations, "
                    f"{self.evaluations} evaluations")
        logger.info(f"Archive stats: {self.archive.get_stats()}")
        return RunRecord(
            algorithm=self.algorithm,
            problem=self.problem.to_dict(),
            config=cfg.model_dump(mode="json"),
            seed=cfg.seed,
            trace=trace,
            best_solution=str(current),
            best_fitness=fitness,
            iterations=len(trace),
            evaluations=self.evaluations,
            final_state=state.to_dict(),
            archive=self.archive.snapshot(),
            wall_time=elapsed
        )


class VnsService(_BinarySearch):
    """Classical VNS; the simplex fields of the config are ignored."""

    algorithm = "vns"

    def __init__(self, problem: Problem, cfg: TvnsConfig):
        super().__init__(problem, cfg.classical())

    def shake(self, current: BinarySolution, state: ScheduleState) -> ShakeOutcome:
        return ShakeOutcome(k_inversion(current, state.k, self.rng), 0, Simplex((current,)))

    def local_search(self, start: BinarySolution, fitness: float) -> Tuple[BinarySolution, float]:
        return self.hamming_local_search(start, fitness, self.cfg.ls_k)

    def run(self) -> RunRecord:
        return self._iterate(self.shake, self.local_search, self.cfg)


class TvnsService(_BinarySearch):
    """Topological VNS with simplex-structured shaking and optional simplex local search."""

    algorithm = "tvns"

    def shake(self, current: BinarySolution, state: ScheduleState) -> ShakeOutcome:
        """
        New solution from the (state.k, state.m) neighborhood of current.

        Returns:
            The shaken solution, the order it was produced at (after
            fallbacks) and the simplex it extends.
        """
        cfg = self.cfg
        m = state.m
        while m > 0:
            params = NeighborhoodParams(m, state.k, cfg.mode)
            simplices = SimplexIndex(self.archive, current, params)
            count = len(simplices)
            if count:
                simplex = simplices.simplex_at(int(self.rng.integers(count)))
                if cfg.shake_selection is ShakeSelection.BALANCED_BEST:
                    chosen = balanced_extension(simplex, params, cfg.candidate_budget, self.rng)
                else:
                    chosen = draw_extension(simplex, params, cfg.candidate_budget, self.rng)
                if chosen is not None:
                    return ShakeOutcome(chosen, m, simplex)
                logger.debug(f"No extension of the chosen order-{m} simplex at k={state.k}")
            else:
                logger.debug(f"No order-{m} simplex contains the incumbent at k={state.k}")
            m -= 1
        return ShakeOutcome(k_inversion(current, state.k, self.rng), 0, Simplex((current,)))

    def local_search(self, start: BinarySolution, fitness: float) -> Tuple[BinarySolution, float]:
        """
        Best-improvement descent.

        With ls_m > 0 the neighbors of a point are the extension candidates of
        every ls_m-simplex (drawn from the archive, or its last ls_window
        entries) that contains it. An empty candidate set is a local optimum.
        """
        cfg = self.cfg
        if cfg.ls_m == 0:
            return self.hamming_local_search(start, fitness, cfg.ls_k)

        params = NeighborhoodParams(cfg.ls_m, cfg.ls_k, cfg.mode)
        current, current_fitness = start, fitness
        while True:
            pool = self.archive.solutions(cfg.ls_window)
            simplices = SimplexIndex(pool, current, params)
            best, best_fitness = None, current_fitness
            seen = set()
            for simplex in simplices:
                for y in extension_candidates(simplex, params, cfg.candidate_budget, self.rng):
                    if y in seen:
                        continue
                    seen.add(y)
                    fy = self.evaluate(y)
                    if self.problem.is_better(fy, best_fitness):
                        best, best_fitness = y, fy
            if best is None:
                return current, current_fitness
            current, current_fitness = best, best_fitness

    def run(self) -> RunRecord:
        return self._iterate(self.shake, self.local_search, self.cfg)


def run_vns(problem: Problem, cfg: TvnsConfig) -> RunRecord:
    return VnsService(problem, cfg).run()


def run_tvns(problem: Problem, cfg: TvnsConfig) -> RunRecord:
    return TvnsService(problem, cfg).run()


def schedule_orbit(cfg: TvnsConfig) -> List[ScheduleState]:
    """States visited from (k_min, m_max) without improvement, up to the first repeat."""
    state = ScheduleState(cfg.k_min, cfg.m_max)
    visited: List[ScheduleState] = []
    while state not in visited:
        visited.append(state)
        state = next_neighborhood(state, False, cfg)
    return visited
