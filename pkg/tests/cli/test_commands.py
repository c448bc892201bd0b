import json

import pytest

from src.cli.commands import build_parser, main
from src.core.grid import GridGeometry, GridSet

def _read(path):
    return json.loads(path.read_text())

class TestParser:
    def test_global_flags(self):
        args = build_parser().parse_args(["--dim", "3", "--format", "csv", "ball", "make", "--seed", "1"])
        assert args.dim == 3
        assert args.format == "csv"
        assert args.action == "make"

    def test_bad_usage_exits_two(self):
        assert main(["frobnicate"]) == 2
        assert main(["--dim", "4", "ball", "make", "--seed", "1"]) == 2

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

class TestBallCommands:
    def test_make_random(self, tmp_path):
        assert main(["--out", str(tmp_path), "ball", "make", "--seed", "3"]) == 0
        ball = _read(tmp_path / "ball.json")
        assert len(ball["center_x"]) == 2
        assert ball["rho"] > 0

    def test_make_explicit(self, tmp_path):
        argv = ["--out", str(tmp_path), "ball", "make",
                "--center-x", "0", "0", "--center-xstar", "0", "0", "--r", "2", "--r-star", "0.5"]
        assert main(argv) == 0
        assert _read(tmp_path / "ball.json")["rho"] == pytest.approx(1.0)

    def test_csv_format(self, tmp_path):
        assert main(["--out", str(tmp_path), "--format", "csv", "ball", "make", "--seed", "3"]) == 0
        header = (tmp_path / "ball.csv").read_text().splitlines()[0]
        assert "rho" in header.split(",")

    def test_constraint_name_is_printed(self, capsys):
        argv = ["--dim", "3", "ball", "make", "--center-x", "0", "0", "0", "--center-xstar", "0", "0", "0",
                "--r", "1", "1", "--r-star", "1", "2"]
        assert main(argv) == 2
        assert capsys.readouterr().err.startswith("DualityViolated:")

    def test_incomplete_arguments(self, capsys):
        assert main(["ball", "make", "--r", "1"]) == 2
        assert "UsageError" in capsys.readouterr().err

    def test_cover(self, tmp_path):
        assert main(["--out", str(tmp_path), "ball", "make", "--center-x", "0", "0", "--center-xstar", "0", "0",
                     "--r", "1", "--r-star", "1"]) == 0
        assert main(["--out", str(tmp_path), "ball", "cover", "--ball", str(tmp_path / "ball.json"),
                     "--delta", "0.125"]) == 0
        assert _read(tmp_path / "ball_cover.json")["count"] == 224

class TestPairCommands:
    def test_generate_then_eval(self, tmp_path):
        assert main(["--out", str(tmp_path), "generate", "random", "--family", "boxes",
                     "--seed", "7", "--voxels", "16"]) == 0
        generated = _read(tmp_path / "generate.json")
        assert generated["E"].endswith("boxes_7_E.json")
        assert main(["--out", str(tmp_path), "eval", "--E", generated["E"], "--Estar", generated["Estar"],
                     "--t-res", "0.125", "--mc", "2000", "--seed", "1"]) == 0
        result = _read(tmp_path / "eval.json")
        assert result["score"]["measure_first"] == pytest.approx(generated["measure_first"])
        assert result["monte_carlo"]["samples"] == 2000

    def test_missing_file(self, tmp_path, capsys):
        assert main(["eval", "--E", str(tmp_path / "absent.json"), "--Estar", str(tmp_path / "absent.json")]) == 2
        assert "UsageError" in capsys.readouterr().err

    def test_convexify_interval(self, tmp_path):
        path = tmp_path / "interval.json"
        path.write_text(GridSet.full(GridGeometry.from_voxels([-1.0], [1.0], 64)).to_json())
        assert main(["--out", str(tmp_path), "convexify", "--S", str(path)]) == 0
        result = _read(tmp_path / "convexify.json")
        assert result["exclusion_verified"] is True
        assert result["approx"]["measure"] == pytest.approx(2.0)

class TestSuiteCommands:
    def test_unknown_suite(self, capsys):
        assert main(["suite", "run", "nope"]) == 2
        assert capsys.readouterr().err.startswith("UnknownSuite:")

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{")
        assert main(["suite", "run", "convexify", "--config", str(path)]) == 2
        assert capsys.readouterr().err.startswith("ConfigInvalid:")

    def test_convexify_suite(self, tmp_path):
        assert main(["--out", str(tmp_path), "suite", "run", "convexify"]) == 0
        assert (tmp_path / "convexify_d2.json").exists()
