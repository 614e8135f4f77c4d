"""Tests for the command line."""

import json
import math

import pytest
from click.testing import CliRunner

from geokit.cli import cli
from geokit.models import BodySpec


def summary(result):
    """The trailing one-line JSON summary of a command."""
    for line in reversed(result.output.splitlines()):
        try:
            record = json.loads(line)
        except ValueError:
            continue
        if isinstance(record, dict) and "command" in record:
            return record
    raise AssertionError(f"no summary line in {result.output!r}")


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def ball_file(tmp_path):
    path = tmp_path / "ball.json"
    path.write_text(BodySpec(kind="ball", dim=2, params={"r": 1.0}).model_dump_json())
    return str(path)


@pytest.fixture
def ellipse_file(tmp_path):
    path = tmp_path / "ellipse.json"
    spec = BodySpec(kind="ellipsoid", dim=2, params={"A": [1.5, 0.0, 0.2, 0.8]})
    path.write_text(spec.model_dump_json())
    return str(path)


class TestBody:
    def test_make_ball(self, runner, tmp_path):
        out = tmp_path / "b.json"
        result = runner.invoke(cli, ["body", "make", "ball", "--r", "2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        spec = BodySpec.model_validate_json(out.read_text())
        assert spec.kind == "ball"
        assert spec.params["r"] == 2.0
        assert summary(result)["status"] == "ok"

    def test_make_fourier_to_stdout(self, runner):
        result = runner.invoke(cli, ["body", "make", "fourier", "--coeffs", "a2=0.1,b3=-0.02"])
        assert result.exit_code == 0, result.output
        first = next(line for line in result.output.splitlines() if line.startswith("{"))
        spec = BodySpec.model_validate_json(first)
        assert spec.kind == "fourier_support"
        assert spec.params["a"] == [0.0, 0.1, 0.0]

    def test_make_random(self, runner):
        result = runner.invoke(cli, ["body", "make", "random", "--seed", "3"])
        assert result.exit_code == 0, result.output
        assert summary(result)["kind"] == "fourier_support"

    def test_ellipsoid_needs_matrix(self, runner):
        result = runner.invoke(cli, ["body", "make", "ellipsoid"])
        assert result.exit_code == 2
        assert summary(result)["status"] == "error"

    def test_bad_coefficients(self, runner):
        result = runner.invoke(cli, ["body", "make", "fourier", "--coeffs", "c2=1"])
        assert result.exit_code == 2

    def test_nonconvex_fourier(self, runner):
        result = runner.invoke(cli, ["body", "make", "fourier", "--coeffs", "a3=0.5"])
        assert result.exit_code == 2

    def test_show(self, runner, ball_file):
        result = runner.invoke(cli, ["body", "show", ball_file])
        assert result.exit_code == 0, result.output
        info = summary(result)
        assert info["volume"] == pytest.approx(math.pi)
        assert info["centered"] is True
        assert info["vpn"] is True


class TestCompute:
    def test_volume(self, runner, ball_file):
        result = runner.invoke(cli, ["compute", "volume", ball_file])
        assert result.exit_code == 0, result.output
        info = summary(result)
        assert info["value"] == pytest.approx(math.pi)
        assert info["kind"] == "quadrature"

    def test_mixed_p_affine(self, runner, ellipse_file):
        result = runner.invoke(cli, ["compute", "mixed_p_affine", ellipse_file, ellipse_file,
                                     "--p", "2"])
        assert result.exit_code == 0, result.output
        assert summary(result)["value"] == pytest.approx(2 * math.pi)

    def test_csv(self, runner, ball_file):
        result = runner.invoke(cli, ["compute", "p_surface_area", ball_file, "--p", "1",
                                     "--format", "csv"])
        assert result.exit_code == 0, result.output
        assert "functional,value,kind,err,p,i,resolution" in result.output

    def test_missing_p(self, runner, ball_file):
        result = runner.invoke(cli, ["compute", "p_surface_area", ball_file])
        assert result.exit_code == 2

    def test_wrong_arity(self, runner, ball_file):
        result = runner.invoke(cli, ["compute", "mixed_p_affine", ball_file, "--p", "1"])
        assert result.exit_code == 2

    def test_p_equal_to_minus_n(self, runner, ball_file):
        result = runner.invoke(cli, ["compute", "p_surface_area", ball_file, "--p", "-2"])
        assert result.exit_code == 2

    def test_estimate_with_trace(self, runner, ellipse_file, tmp_path):
        out = tmp_path / "g.json"
        result = runner.invoke(cli, [
            "compute", "estimate_G", ellipse_file, ellipse_file, "--p", "1", "--alpha", "2",
            "--starts", "2", "--max-iters", "40", "--resolution", "128", "--trace",
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        record = json.loads(out.read_text())
        assert record["kind"] == "optimizer-upper-bound"
        assert record["trace"]
        assert len(record["witness"]) == 2
        assert "budget_exhausted" in summary(result)


class TestVerify:
    def test_dualh(self, runner):
        result = runner.invoke(cli, ["verify", "DUALH", "--count", "5", "--resolution", "128"])
        assert result.exit_code == 0, result.output
        info = summary(result)
        assert info["verified"] == 5
        assert info["violated"] == 0
        assert info["status"] == "ok"

    def test_csv(self, runner, tmp_path):
        out = tmp_path / "v.csv"
        result = runner.invoke(cli, ["verify", "DUALH", "--count", "3", "--resolution", "128",
                                     "--format", "csv", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0].startswith("case_index,rule_id,part,p,i,alpha,lhs")
        assert len(lines) == 4

    def test_unknown_rule(self, runner):
        result = runner.invoke(cli, ["verify", "NOPE"])
        assert result.exit_code == 2
        assert "UnknownRuleError" in summary(result)["error"]

    def test_invalid_p(self, runner):
        result = runner.invoke(cli, ["verify", "PROP32", "--p", "-2"])
        assert result.exit_code == 2

    def test_archive_and_report(self, runner, tmp_path):
        db = str(tmp_path / "runs.duckdb")
        result = runner.invoke(cli, ["verify", "DUALH", "--count", "3", "--resolution", "128",
                                     "--db", db, "--out", str(tmp_path / "r.json")])
        assert result.exit_code == 0, result.output
        assert summary(result)["run_id"] == 1

        md = tmp_path / "report.md"
        result = runner.invoke(cli, ["report", "--db", db, "--out", str(md)])
        assert result.exit_code == 0, result.output
        assert md.read_text().startswith("# geokit suite report: run 1")

    def test_config_file(self, runner, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text("count: 2\nresolution: 128\n")
        out = tmp_path / "r.json"
        result = runner.invoke(cli, ["verify", "DUALH", "--config", str(config),
                                     "--out", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["schema"] == 1
        assert report["resolution"] == 128
        assert len(report["cases"]) == 2


class TestRules:
    def test_lists_catalogue(self, runner):
        result = runner.invoke(cli, ["rules"])
        assert result.exit_code == 0, result.output
        rules = summary(result)["rules"]
        assert len(rules) == 20
        assert "PROP61" in rules

    def test_report_without_runs(self, runner, tmp_path):
        result = runner.invoke(cli, ["report", "--db", str(tmp_path / "empty.duckdb")])
        assert result.exit_code == 2
