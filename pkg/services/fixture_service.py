"""
Built-in homology fixtures with their expected invariants.

Complex fixtures are written as JSON (simplex lists); cloud fixtures are
written in archive JSON-lines format so `analyze` reads them directly.
"""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Union

from services.archive_service import ArchiveEntry, write_jsonl
from services.domain import RealSolution, Solution
from services.tda_service import SimplicialComplex, betti_numbers

logger = logging.getLogger(__name__)

# 6-vertex real projective plane; 1-6-4-1 is essential, 1-6-4-2-5-1 bounds.
HEMI_ICOSAHEDRON_FACETS = (
    (1, 2, 3), (1, 3, 6), (1, 2, 4), (1, 4, 5), (1, 5, 6),
    (2, 3, 5), (3, 4, 5), (3, 4, 6), (2, 4, 6), (2, 5, 6),
)


def hemi_icosahedron() -> SimplicialComplex:
    return SimplicialComplex.from_facets(HEMI_ICOSAHEDRON_FACETS)


def hollow_triangle() -> SimplicialComplex:
    return SimplicialComplex.from_facets([(1, 2), (2, 3), (1, 3)])


def filled_triangle() -> SimplicialComplex:
    return SimplicialComplex.from_facets([(1, 2, 3)])


def square_cloud() -> List[Solution]:
    return [RealSolution(p) for p in ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))]


def two_point_cloud(d: float = 3.0) -> List[Solution]:
    return [RealSolution((0.0,)), RealSolution((float(d),))]


@dataclass(frozen=True)
class Fixture:
    name: str
    kind: str
    description: str
    build: Callable[[], Union[SimplicialComplex, List[Solution]]]
    expected: Dict


FIXTURES: Dict[str, Fixture] = {
    f.name: f for f in (
        Fixture("hemi-icosahedron", "complex",
                "Six-vertex triangulation of the real projective plane",
                hemi_icosahedron,
                {"counts": [6, 15, 10], "betti_z2": [1, 1, 1], "euler": 1,
                 "essential_cycle": [1, 6, 4, 1], "bounding_cycle": [1, 6, 4, 2, 5, 1]}),
        Fixture("hollow-triangle", "complex", "Boundary of a triangle",
                hollow_triangle,
                {"counts": [3, 3], "betti_z2": [1, 1], "euler": 0}),
        Fixture("filled-triangle", "complex", "A single 2-simplex with its faces",
                filled_triangle,
                {"counts": [3, 3, 1], "betti_z2": [1, 0, 0], "euler": 1}),
        Fixture("square", "cloud", "Corners of the unit square",
                square_cloud,
                {"points": 4, "max_dim": 2,
                 "barcode_h1": [[1.0, math.sqrt(2.0)]],
                 "rips_counts": [4, 6, 4]}),
        Fixture("two-point", "cloud", "Two points at distance 3",
                two_point_cloud,
                {"points": 2, "barcode_h0": [[0.0, "inf"], [0.0, 3.0]]}),
    )
}


def list_fixtures() -> List[str]:
    return sorted(FIXTURES)


def get_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"Unknown fixture {name!r}; available: {', '.join(list_fixtures())}") from None


def write_fixture(name: str, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write the fixture and its expected invariants; returns the written paths."""
    fixture = get_fixture(name)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    built = fixture.build()

    if fixture.kind == "complex":
        data_path = out_dir / f"{name}.complex.json"
        payload = built.to_dict()
        payload["betti_z2"] = list(betti_numbers(built))
        payload["euler"] = built.euler_characteristic()
        data_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    else:
        data_path = write_jsonl([ArchiveEntry(s, 0.0, t) for t, s in enumerate(built)],
                                out_dir / f"{name}.archive.jsonl")

    expected_path = out_dir / f"{name}.expected.json"
    expected = {"name": name, "kind": fixture.kind, "description": fixture.description,
                **fixture.expected}
    expected_path.write_text(json.dumps(expected, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Fixture {name} written to {data_path}")
    return {"data": data_path, "expected": expected_path}
