import json
import math

import pytest

from services.export_service import (barcode_to_csv, barcode_to_json, format_number,
                                     plot_barcode_svg, write_barcode, write_report)
from services.fixture_service import square_cloud, two_point_cloud
from services.tda_service import build_rips, compute_persistence, regularity_report


class TestExport:
    """Test cases for barcode and report export."""

    def setup_method(self):
        self.two_points = compute_persistence(build_rips(two_point_cloud(3.0), max_radius=5.0))
        self.square = compute_persistence(build_rips(square_cloud()))

    def test_format_number(self):
        assert format_number(math.inf) == "inf"
        assert format_number(3.0) == "3"
        assert format_number(0) == "0"
        assert format_number(1.5) == "1.5"

    def test_two_point_csv(self):
        """Test the exact CSV of two points at distance 3."""
        assert barcode_to_csv(self.two_points) == "dim,birth,death\n0,0,inf\n0,0,3\n"

    def test_zero_length_intervals_hidden_by_default(self):
        default = barcode_to_csv(self.square).splitlines()
        full = barcode_to_csv(self.square, include_zero=True).splitlines()
        assert len(full) > len(default)
        assert sum(1 for line in default if line.startswith("1,")) == 1

    def test_json(self):
        data = json.loads(barcode_to_json(self.two_points))
        assert data["intervals"][0]["death"] == "inf"
        assert data["n_points"] == 2
        assert data["max_radius"] == 5.0

    def test_svg_is_deterministic(self, tmp_path):
        """Test that the same barcode renders to byte-identical SVG."""
        a = plot_barcode_svg(self.square, tmp_path / "a.svg", title="square")
        b = plot_barcode_svg(self.square, tmp_path / "b.svg", title="square")
        assert a.read_bytes() == b.read_bytes()
        assert b"<svg" in a.read_bytes()

    def test_write_barcode(self, tmp_path):
        paths = write_barcode(self.two_points, tmp_path / "out", "pair")
        assert sorted(p.name for p in paths.values()) == ["pair.barcode.csv", "pair.barcode.json",
                                                          "pair.barcode.svg"]
        assert all(p.exists() for p in paths.values())

    def test_write_barcode_without_svg(self, tmp_path):
        paths = write_barcode(self.two_points, tmp_path, "pair", svg=False)
        assert "svg" not in paths

    def test_write_report(self, tmp_path):
        path = write_report(regularity_report(self.square, 0.5), tmp_path / "square.report.json",
                            {"points": 4})
        data = json.loads(path.read_text())
        assert data["points"] == 4
        assert data["counts"]["1"]["long_lived"] == 1
        assert data["max_persistence"]["1"] == pytest.approx(math.sqrt(2.0) - 1.0)
