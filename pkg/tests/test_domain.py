import numpy as np
import pytest

from services.domain import (BinarySolution, Direction, Encoding, RealSolution, SetCoverInstance,
                             build_problem, distance, euclidean, evaluate_onemax,
                             evaluate_rastrigin, evaluate_setcover, evaluate_sphere, format_orlib,
                             generate_setcover, hamming, load_setcover, parse_orlib,
                             setcover_problem)
from utils.errors import IncompatibleEncodingError, InstanceFormatError

SMALL_INSTANCE = """3 2
1 2
2 1 2
1 1
1 2
"""


class TestSolutions:
    """Test cases for solution encodings and distances."""

    def test_hamming_worked_example(self):
        """Test the single-bit distance between 1011110 and 1111110."""
        a = BinarySolution.from_string("1011110")
        b = BinarySolution.from_string("1111110")
        assert hamming(a, b) == 1
        assert distance(a, b) == 1

    def test_hamming_is_symmetric_and_zero_on_self(self):
        """Test basic metric properties of the Hamming distance."""
        a = BinarySolution.from_string("0110")
        b = BinarySolution.from_string("1011")
        assert hamming(a, b) == hamming(b, a) == 3
        assert hamming(a, a) == 0

    def test_hamming_length_mismatch(self):
        """Test that solutions of different length cannot be compared."""
        with pytest.raises(IncompatibleEncodingError, match="lengths differ"):
            hamming(BinarySolution.from_string("01"), BinarySolution.from_string("011"))

    def test_distance_rejects_mixed_encodings(self):
        """Test that binary and real solutions have no common distance."""
        with pytest.raises(IncompatibleEncodingError):
            distance(BinarySolution.from_string("01"), RealSolution((0.0, 1.0)))

    def test_euclidean(self):
        """Test the Euclidean distance."""
        assert euclidean(RealSolution((0.0, 0.0)), RealSolution((3.0, 4.0))) == pytest.approx(5.0)

    def test_euclidean_unit_diagonal(self):
        a, b = RealSolution((1.0, 1.0, 1.0)), RealSolution((2.0, 2.0, 2.0))
        assert euclidean(a, b) == pytest.approx(np.sqrt(3.0))

    def test_metric_axioms_on_random_samples(self):
        """Test symmetry, identity of indiscernibles and the triangle inequality."""
        rng = np.random.default_rng(42)
        for _ in range(300):
            n = int(rng.integers(1, 12))
            a, b, c = (BinarySolution(tuple(int(v) for v in rng.integers(0, 2, n))) for _ in range(3))
            assert hamming(a, b) == hamming(b, a)
            assert (hamming(a, b) == 0) == (a == b)
            assert hamming(a, c) <= hamming(a, b) + hamming(b, c)

            # rounded coordinates make exact repeats likely
            u, v, w = (RealSolution(tuple(np.round(rng.uniform(-2, 2, n), 1))) for _ in range(3))
            assert euclidean(u, v) == euclidean(v, u)
            assert (euclidean(u, v) == 0.0) == (u == v)
            assert euclidean(u, w) <= euclidean(u, v) + euclidean(v, w) + 1e-12

    def test_distances_are_repeatable(self):
        """Test that repeated evaluations return identical values."""
        rng = np.random.default_rng(7)
        a, b = (BinarySolution(tuple(int(v) for v in rng.integers(0, 2, 64))) for _ in range(2))
        u, v = (RealSolution(tuple(rng.normal(size=9))) for _ in range(2))
        assert len({hamming(a, b) for _ in range(50)}) == 1
        assert len({euclidean(u, v) for _ in range(50)}) == 1
        assert distance(u, v) == euclidean(u, v)

    def test_binary_solution_rejects_other_values(self):
        """Test that bit vectors only hold zeros and ones."""
        with pytest.raises(ValueError, match="0/1"):
            BinarySolution((0, 2, 1))

    def test_real_solution_rejects_nan(self):
        """Test that real coordinates must be finite."""
        with pytest.raises(ValueError, match="non-finite"):
            RealSolution((0.0, float("nan")))

    def test_flipped_and_string_form(self):
        """Test flipping bits and the bitstring rendering."""
        s = BinarySolution.from_string("0000")
        assert str(s.flipped([0, 3])) == "1001"
        assert str(s) == "0000"

    def test_solutions_are_hashable_values(self):
        """Test that equal solutions collapse in sets."""
        assert len({BinarySolution.from_string("101"), BinarySolution((1, 0, 1))}) == 1
        assert len({RealSolution((1.0, 2.0)), RealSolution((1, 2))}) == 1


class TestBenchmarks:
    """Test cases for benchmark objectives."""

    def test_onemax(self):
        assert evaluate_onemax(BinarySolution.from_string("101101")) == 4.0

    def test_sphere_and_rastrigin_optimum(self):
        """Test that both real benchmarks vanish at the origin."""
        origin = RealSolution((0.0, 0.0, 0.0))
        assert evaluate_sphere(origin) == 0.0
        assert evaluate_rastrigin(origin) == pytest.approx(0.0, abs=1e-12)
        assert evaluate_sphere(RealSolution((1.0, 2.0))) == pytest.approx(5.0)


class TestSetCover:
    """Test cases for set cover parsing and evaluation."""

    def setup_method(self):
        """Set up a two-set, three-element instance."""
        self.instance = parse_orlib(SMALL_INSTANCE)

    def test_parse(self):
        """Test parsing of the OR-Library layout."""
        assert self.instance.n_elements == 3
        assert self.instance.n_sets == 2
        assert self.instance.costs == (1.0, 2.0)
        assert self.instance.incidence == ((0, 1), (0,), (1,))

    def test_feasible_cost(self):
        """Test that a full cover costs the sum of its sets."""
        assert evaluate_setcover(self.instance, BinarySolution.from_string("11")) == 3.0

    def test_penalty_per_uncovered_element(self):
        """Test the linear penalty of 1 + total cost per uncovered element."""
        assert self.instance.penalty == 4.0
        assert evaluate_setcover(self.instance, BinarySolution.from_string("10")) == 1.0 + 4.0
        assert evaluate_setcover(self.instance, BinarySolution.from_string("00")) == 3 * 4.0

    def test_every_feasible_cover_beats_every_infeasible_one(self):
        """Test that the penalty separates feasible from infeasible solutions."""
        feasible = evaluate_setcover(self.instance, BinarySolution.from_string("11"))
        infeasible = min(evaluate_setcover(self.instance, BinarySolution.from_string(b))
                         for b in ("00", "01", "10"))
        assert feasible < infeasible

    def test_wrong_length(self):
        with pytest.raises(IncompatibleEncodingError):
            evaluate_setcover(self.instance, BinarySolution.from_string("111"))

    def test_trailing_tokens(self):
        """Test that extra data after the instance is rejected."""
        with pytest.raises(InstanceFormatError, match="trailing"):
            parse_orlib(SMALL_INSTANCE + "7\n")

    def test_truncated_instance(self):
        with pytest.raises(InstanceFormatError, match="Unexpected end"):
            parse_orlib("3 2\n1 2\n2 1")

    def test_non_numeric_token(self):
        with pytest.raises(InstanceFormatError, match="Invalid"):
            parse_orlib("3 two\n")

    def test_uncovered_element_rejected(self):
        """Test that every element needs at least one covering set."""
        with pytest.raises(InstanceFormatError, match="not covered"):
            SetCoverInstance(2, 1, (1.0,), ((0,), ()))

    def test_format_round_trip(self):
        """Test that formatting and parsing reproduce the instance."""
        assert parse_orlib(format_orlib(self.instance)) == self.instance

    def test_load_missing_file(self, tmp_path):
        """Test that a missing instance file is an instance error."""
        with pytest.raises(InstanceFormatError, match="Cannot read"):
            load_setcover(tmp_path / "missing.txt")

    def test_load_invalid_utf8(self, tmp_path):
        """Test that undecodable bytes are an instance error."""
        path = tmp_path / "scp.txt"
        path.write_bytes(b"3 2\n1 2\n\xff\xfe\n")
        with pytest.raises(InstanceFormatError, match="not valid UTF-8"):
            load_setcover(path)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scp.txt"
        path.write_text(SMALL_INSTANCE)
        assert load_setcover(path) == self.instance

    def test_generate_covers_every_element(self):
        """Test generated instances are valid and reproducible."""
        a = generate_setcover(15, 10, 0.2, np.random.default_rng(5))
        b = generate_setcover(15, 10, 0.2, np.random.default_rng(5))
        assert a == b
        assert a.n_sets == 10
        assert all(sets for sets in a.incidence)
        assert set(a.costs) == {1.0}


class TestProblems:
    """Test cases for problem construction."""

    def test_build_sphere(self):
        """Test default bounds and metadata of a real problem."""
        problem = build_problem("sphere", 3)
        assert problem.encoding is Encoding.REAL
        assert problem.direction is Direction.MINIMIZE
        assert problem.bounds == ((-5.0, 5.0),) * 3
        assert problem.lower.tolist() == [-5.0, -5.0, -5.0]
        assert problem.to_dict()["bounds"] == [[-5.0, 5.0]] * 3

    def test_build_onemax(self):
        problem = build_problem("onemax", 8)
        assert problem.direction is Direction.MAXIMIZE
        assert problem.evaluate(BinarySolution.from_string("11110000")) == 4.0

    def test_custom_bounds(self):
        problem = build_problem("rastrigin", 2, bounds=(-1.0, 1.0))
        assert problem.upper.tolist() == [1.0, 1.0]

    def test_unknown_problem(self):
        with pytest.raises(ValueError, match="Unknown problem"):
            build_problem("knapsack", 5)

    def test_missing_dimension(self):
        with pytest.raises(ValueError, match="needs a dimension"):
            build_problem("onemax")

    def test_evaluate_checks_encoding(self):
        """Test that a problem refuses solutions of the other encoding."""
        problem = build_problem("onemax", 2)
        with pytest.raises(IncompatibleEncodingError):
            problem.evaluate(RealSolution((0.0, 1.0)))
        with pytest.raises(IncompatibleEncodingError):
            problem.evaluate(BinarySolution.from_string("101"))

    def test_is_better_is_strict(self):
        """Test that ties never count as improvement."""
        minimize = build_problem("sphere", 1)
        maximize = build_problem("onemax", 1)
        assert minimize.is_better(1.0, 2.0) and not minimize.is_better(2.0, 2.0)
        assert maximize.is_better(2.0, 1.0) and not maximize.is_better(1.0, 1.0)

    def test_generated_setcover(self):
        """Test that set cover without an instance file is generated deterministically."""
        a = build_problem("setcover", 12)
        b = build_problem("setcover", 12)
        s = BinarySolution((1,) * 12)
        assert a.dimension == 12
        assert a.evaluate(s) == b.evaluate(s) == 12.0

    def test_setcover_dimension_mismatch(self, tmp_path):
        """Test that a requested dimension must match the instance."""
        path = tmp_path / "scp.txt"
        path.write_text(SMALL_INSTANCE)
        with pytest.raises(IncompatibleEncodingError, match="2 sets"):
            build_problem("setcover", 5, instance_path=path)
        assert build_problem("setcover", instance_path=path).dimension == 2

    def test_setcover_problem_minimizes(self):
        problem = setcover_problem(parse_orlib(SMALL_INSTANCE))
        assert problem.direction is Direction.MINIMIZE
        assert problem.evaluate(BinarySolution.from_string("11")) == 3.0
