import logging
import math

import numpy as np
import pytest

from services import tem_service
from services.domain import Direction, Encoding, Problem, RealSolution, build_problem, evaluate_sphere
from services.tem_service import (DistanceObjective, EmService, Population, TemConfig, TemService,
                                  compute_charges, compute_forces, em_local_search, make_tem_config,
                                  move_classical, move_tem, moves, run_em, run_tem,
                                  select_simplex_candidate)
from utils.errors import ConfigurationError, IncompatibleEncodingError


class FixedRandom:
    """Stand-in generator whose every draw is the same value."""

    def __init__(self, value):
        self.value = value

    def random(self, size=None):
        return self.value if size is None else np.full(size, self.value)


def population(points, fitness):
    return Population(np.array(points, dtype=float), np.array(fitness, dtype=float))


class TestChargesAndForces:
    """Test cases for charge assignment and force summation."""

    def test_two_member_charges(self):
        """Test charges exp(-n (f_i - f_best) / sum) for P=2, n=1."""
        q = compute_charges(population([[0.0], [1.0]], [0.0, 1.0]))
        assert q == pytest.approx([1.0, math.exp(-1.0)])

    def test_equal_fitness_gives_unit_charges(self):
        q = compute_charges(population([[0.0], [1.0], [2.0]], [3.0, 3.0, 3.0]))
        assert q.tolist() == [1.0, 1.0, 1.0]

    def test_charges_order_with_fitness(self):
        """Test that better members never carry less charge."""
        rng = np.random.default_rng(0)
        fitness = rng.random(12)
        q = compute_charges(Population(rng.random((12, 3)), fitness))
        order = np.argsort(fitness)
        assert np.all(np.diff(q[order]) <= 1e-15)
        assert q.max() == pytest.approx(1.0)

    def test_attraction_toward_better_member(self):
        """Test the force on the worse of two members."""
        pop = population([[0.0], [1.0]], [1.0, 0.0])
        forces = compute_forces(pop, compute_charges(pop))
        assert forces[0, 0] == pytest.approx(math.exp(-1.0))
        assert forces[1, 0] == pytest.approx(math.exp(-1.0))

    def test_symmetric_repulsion_cancels(self):
        pop = population([[-1.0], [0.0], [1.0]], [2.0, 2.0, 2.0])
        forces = compute_forces(pop, compute_charges(pop))
        assert forces[1, 0] == pytest.approx(0.0)
        assert forces[0, 0] < 0 < forces[2, 0]

    def test_coincident_members_are_finite(self):
        pop = population([[0.5, 0.5], [0.5, 0.5]], [1.0, 0.0])
        forces = compute_forces(pop, compute_charges(pop))
        assert np.all(np.isfinite(forces))
        assert np.allclose(forces, 0.0)


class TestMoves:
    """Test cases for classical and simplex-constrained moves."""

    def setup_method(self):
        self.lower = np.array([0.0])
        self.upper = np.array([10.0])

    def test_classical_move_example(self):
        """Test x=0, unit force, range 10 and step 0.5 lands at 5."""
        pop = population([[0.0], [10.0]], [1.0, 0.0])
        forces = np.array([[1.0], [0.0]])
        positions = move_classical(pop, forces, FixedRandom(0.5), self.lower, self.upper)
        assert positions[:, 0].tolist() == [5.0, 10.0]

    def test_best_and_zero_force_members_stay(self):
        pop = population([[1.0], [2.0], [3.0]], [0.0, 1.0, 2.0])
        forces = np.array([[1.0], [0.0], [-1.0]])
        assert moves(pop, forces) == [2]
        positions = move_classical(pop, forces, FixedRandom(0.9), self.lower, self.upper)
        assert positions[:2, 0].tolist() == [1.0, 2.0]
        assert positions[2, 0] == 0.0

    def test_order_zero_matches_classical(self):
        """Test that an order-0 TEM move draws exactly the classical step."""
        pop = population([[2.0], [7.0]], [5.0, 1.0])
        forces = np.array([[1.0], [0.0]])
        cfg = TemConfig(population_size=2, m_max=0)
        classical = move_classical(pop, forces, np.random.default_rng(4), self.lower, self.upper)
        moved, m = move_tem(0, pop, forces, 0, cfg, np.random.default_rng(4), self.lower, self.upper)
        assert m == 0
        assert moved.tolist() == classical[0].tolist()

    def test_select_prefers_tighter_simplex(self):
        """Test that 9.5 beats 12.9 for a member at 0 with partners {10, 11}, threshold 2."""
        positions = np.array([[0.0], [10.0], [11.0]])
        distances = np.abs(positions - positions.T)
        candidates = np.array([[9.5], [12.9]])
        choice = select_simplex_candidate(candidates, positions, [(1,), (2,)], distances, 2.0,
                                          DistanceObjective.AVG)
        assert choice.candidate == 0
        assert choice.partners == (1,)
        assert choice.score == pytest.approx(0.5)

        alone = select_simplex_candidate(candidates[1:], positions, [(1,), (2,)], distances, 2.0,
                                         DistanceObjective.AVG)
        assert alone.partners == (2,)
        assert alone.score == pytest.approx(1.9)

    def test_select_none_when_nothing_valid(self):
        positions = np.array([[0.0], [10.0]])
        distances = np.abs(positions - positions.T)
        assert select_simplex_candidate(np.array([[5.0]]), positions, [(1,)], distances, 2.0,
                                        DistanceObjective.MAX) is None
        assert select_simplex_candidate(np.array([[5.0]]), positions, [], distances, 2.0,
                                        DistanceObjective.MAX) is None

    def test_select_max_objective_with_pairs(self):
        """Test the max objective over a two-partner simplex."""
        positions = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        distances = np.sqrt(((positions[:, None, :] - positions[None, :, :]) ** 2).sum(axis=2))
        choice = select_simplex_candidate(np.array([[1.0, 1.0]]), positions, [(1, 2)], distances,
                                          2.0, DistanceObjective.MAX)
        assert choice.score == pytest.approx(math.sqrt(2.0))

    def test_simplex_move_lands_near_partner(self):
        """Test an order-1 move toward partners at 10 and 11 with threshold 2."""
        pop = population([[0.0], [10.0], [11.0]], [5.0, 0.0, 1.0])
        forces = np.array([[1.0], [0.0], [0.0]])
        upper = np.array([13.0])
        cfg = TemConfig(population_size=3, m_max=1, threshold=2.0)
        moved, m = move_tem(0, pop, forces, 1, cfg, np.random.default_rng(0), self.lower, upper)
        assert m == 1
        assert any(0 < abs(moved[0] - p) <= 2.0 for p in (10.0, 11.0))

    def test_simplex_move_falls_back(self):
        """Test that an unreachable threshold degrades to a classical move."""
        pop = population([[0.0], [10.0], [11.0]], [5.0, 0.0, 1.0])
        forces = np.array([[1.0], [0.0], [0.0]])
        cfg = TemConfig(population_size=3, m_max=1, threshold=1e-6)
        moved, m = move_tem(0, pop, forces, 1, cfg, np.random.default_rng(0), self.lower, self.upper)
        assert m == 0
        assert 0.0 <= moved[0] <= 10.0

    def test_order_above_max(self):
        pop = population([[0.0], [1.0]], [1.0, 0.0])
        cfg = TemConfig(population_size=2, m_max=0)
        with pytest.raises(ValueError, match="exceeds m_max"):
            move_tem(0, pop, np.array([[1.0], [0.0]]), 1, cfg, np.random.default_rng(0),
                     self.lower, self.upper)


class TestLocalSearch:
    """Test cases for the coordinate line search."""

    def setup_method(self):
        self.problem = build_problem("sphere", 1)

    def test_zero_steps_is_identity(self):
        result = em_local_search(self.problem, np.array([1.0]), 1.0, 0, 0.05, np.random.default_rng(0))
        assert result.position.tolist() == [1.0]
        assert result.evaluations == 0

    def test_improves_sphere(self):
        """Test that twenty trials nearly always find a better point."""
        for seed in range(10):
            result = em_local_search(self.problem, np.array([1.0]), 1.0, 20, 0.1,
                                     np.random.default_rng(seed))
            assert result.fitness < 1.0
            assert result.fitness == pytest.approx(float(result.position[0] ** 2))

    def test_optimum_is_kept(self):
        result = em_local_search(self.problem, np.array([0.0]), 0.0, 5, 0.05, np.random.default_rng(1))
        assert result.fitness == 0.0
        assert result.position.tolist() == [0.0]

    def test_step_scales_with_each_coordinate_range(self):
        """Test that a narrow coordinate is perturbed by at most ls_delta times its own range."""
        trials = []

        def sphere(s):
            trials.append(s.to_array())
            return evaluate_sphere(s)

        problem = Problem("sphere", 2, Encoding.REAL, Direction.MINIMIZE, sphere,
                          bounds=((-100.0, 100.0), (-0.01, 0.01)))
        start = np.array([50.0, 0.005])
        for seed in range(10):
            em_local_search(problem, start, evaluate_sphere(RealSolution.from_array(start)), 20, 0.1,
                            np.random.default_rng(seed))
        narrow = [abs(t[1] - start[1]) for t in trials]
        wide = [abs(t[0] - start[0]) for t in trials]
        assert max(narrow) <= 0.1 * 0.02 + 1e-12
        assert max(narrow) > 0.0
        assert max(wide) > 1.0


class TestTemConfig:
    """Test cases for configuration validation."""

    def test_population_must_hold_simplex(self):
        """Test the population lower bound with and without the mover as a partner."""
        with pytest.raises(ConfigurationError, match="too small"):
            make_tem_config(population_size=3, m_max=2)
        assert make_tem_config(population_size=3, m_max=2, include_self=True).m_max == 2

    def test_infinite_threshold(self):
        assert TemConfig(threshold="inf").threshold is None
        assert TemConfig(threshold=math.inf).threshold_value == math.inf
        assert TemConfig(threshold=0.5).threshold_value == 0.5

    def test_threshold_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            make_tem_config(threshold=-1.0)

    def test_classical(self):
        cfg = TemConfig(m_max=2, threshold=1.0).classical()
        assert cfg.m_max == 0 and cfg.threshold is None


class TestRuns:
    """Test cases for complete EM and TEM runs."""

    def setup_method(self):
        self.problem = build_problem("sphere", 2)

    def test_classical_fallback_identity(self):
        """Test that TEM with m_max=0 and no threshold reproduces the EM trace for 20 seeds."""
        for seed in range(20):
            cfg = TemConfig(population_size=5, m_max=0, max_iterations=5, ls_steps=2, seed=seed)
            tem = run_tem(self.problem, cfg)
            em = run_em(self.problem, cfg)
            assert tem.trace == em.trace
            assert tem.best_solution == em.best_solution
            assert tem.evaluations == em.evaluations

    def test_run_invariants(self):
        """Test monotone best fitness, bounded orders and in-bounds snapshots."""
        cfg = TemConfig(population_size=8, m_max=2, threshold=3.0, max_iterations=20,
                        snapshot_every=5, seed=3)
        record = run_tem(self.problem, cfg)
        best = [t["best_fitness"] for t in record.trace]
        assert all(b <= a + 1e-12 for a, b in zip(best, best[1:]))
        for t in record.trace:
            assert all(m is None or 0 <= m <= 2 for m in t["effective_m"])
        assert len(record.archive) == 8 * 5
        for entry in record.archive:
            assert all(-5.0 <= c <= 5.0 for c in entry.solution.coords)
        assert record.final_state.keys() == {"mean_m", "min_m", "moved"}

    def test_deterministic(self):
        cfg = TemConfig(population_size=6, max_iterations=8, seed=17)
        assert run_tem(self.problem, cfg).to_json() == run_tem(self.problem, cfg).to_json()

    def test_sticky_fallback_never_raises_order(self):
        """Test that with sticky fallback each member's order only decreases."""
        cfg = TemConfig(population_size=6, m_max=2, threshold=1.0, sticky_fallback=True,
                        max_iterations=15, seed=5)
        record = run_tem(self.problem, cfg)
        for member in range(6):
            used = [t["effective_m"][member] for t in record.trace if t["effective_m"][member] is not None]
            assert used == sorted(used, reverse=True)

    def test_stall_limit(self):
        cfg = TemConfig(population_size=4, m_max=1, max_iterations=500, stall_limit=3, seed=1)
        record = run_tem(self.problem, cfg)
        assert record.iterations < 500

    def test_requires_real_problem(self):
        with pytest.raises(IncompatibleEncodingError):
            run_tem(build_problem("onemax", 4), TemConfig())

    def test_move_is_abstract(self):
        """Test that a search without a move strategy cannot be built."""
        class NoMove(tem_service._PopulationSearch):
            algorithm = "none"

        with pytest.raises(TypeError, match="abstract"):
            NoMove(self.problem, TemConfig())
        assert isinstance(EmService(self.problem, TemConfig()), tem_service._PopulationSearch)
        assert isinstance(TemService(self.problem, TemConfig()), tem_service._PopulationSearch)

    def test_snapshot_stats_logged(self, caplog):
        """Test that the snapshot counters are logged when a run finishes."""
        cfg = TemConfig(population_size=4, max_iterations=4, snapshot_every=2, seed=0)
        with caplog.at_level(logging.INFO, logger="services.tem_service"):
            run_tem(self.problem, cfg)
        assert "Snapshot archive stats:" in caplog.text
        assert "'inserts': 12" in caplog.text

    @pytest.mark.slow
    def test_sphere_converges(self):
        """Test that both solvers reach sphere fitness below 0.1 in 5 dimensions."""
        problem = build_problem("sphere", 5)
        for runner in (run_em, run_tem):
            solved = sum(runner(problem, TemConfig(population_size=20, max_iterations=300,
                                                   seed=seed)).best_fitness < 0.1
                         for seed in range(10))
            assert solved >= 9
