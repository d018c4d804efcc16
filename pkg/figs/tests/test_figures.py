"""Rendering from real simulator outputs, plus schema error reporting."""

import json

import pytest
from matplotlib.lines import Line2D

from fockfigs import FigureRequest, SchemaError, build, render
from fockfigs.cli import main as cli_main
from fockfigs.io import read_aggregates, read_trajectory


class TestTrajectoryFigure:
    def test_renders_file(self, sim_outputs, tmp_path):
        out = tmp_path / "traj.png"
        got = render(FigureRequest("trajectory", (str(sim_outputs["trajectory"]),), str(out)))
        assert out.exists() and out.stat().st_size > 0 and got == str(out)

    def test_four_frames(self, sim_outputs):
        fig = build(FigureRequest("trajectory", (str(sim_outputs["trajectory"]),), "x.png"))
        assert len(fig.axes) == 4
        assert fig.axes[3].images           # p(n) color map
        assert any(isinstance(a, Line2D) for a in fig.axes[3].lines)  # mean overlay

    def test_svg_output(self, sim_outputs, tmp_path):
        out = tmp_path / "traj.svg"
        render(FigureRequest("trajectory", (str(sim_outputs["trajectory"]),), str(out)))
        assert out.read_bytes().startswith(b"<?xml")


class TestFractionsFigure:
    def test_three_curves(self, sim_outputs):
        fig = build(FigureRequest("fractions", (str(sim_outputs["fractions"]),), "x.png"))
        (ax,) = fig.axes
        assert len(ax.lines) == 3
        assert {line.get_label() for line in ax.lines} == {"emitter", "sensor", "absorber"}


class TestHistogramsFigure:
    def test_single_group_with_poisson_panel(self, sim_outputs, tmp_path):
        fig = build(FigureRequest("histograms", (str(sim_outputs["ensemble2"]),), "x.png"))
        assert len(fig.axes) == 3
        for ax in fig.axes:
            assert len(ax.containers) == 1

    def test_grouped_by_target(self, sim_outputs):
        fig = build(FigureRequest(
            "histograms",
            (str(sim_outputs["ensemble2"]), str(sim_outputs["ensemble3"])), "x.png"))
        for ax in fig.axes:
            assert len(ax.containers) == 2


class TestSequenceFigure:
    def test_staircase_and_mean(self, sim_outputs):
        fig = build(FigureRequest("sequence", (str(sim_outputs["sequence"]),), "x.png"))
        (ax,) = fig.axes
        labels = {line.get_label() for line in ax.lines}
        assert {"target", "estimated mean"} <= labels
        assert ax.images


class TestSchemaErrors:
    def test_empty_trajectory_names_rows(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("t_ms,role,revoked,occupancy,true_outcomes,detected,"
                        "n_true,n_mean_est,distance,target,p0,p1\n")
        with pytest.raises(SchemaError, match="rows"):
            read_trajectory(str(path))

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t_ms,role,revoked\n0.0,sensor,0\n")
        with pytest.raises(SchemaError, match="n_mean_est"):
            read_trajectory(str(path))

    def test_missing_p_columns_named(self, tmp_path):
        path = tmp_path / "nop.csv"
        path.write_text("t_ms,role,revoked,occupancy,true_outcomes,detected,"
                        "n_true,n_mean_est,distance,target\n"
                        "0.0,sensor,0,0,,,0,0.0,4.0,2\n")
        with pytest.raises(SchemaError, match="p0"):
            read_trajectory(str(path))

    def test_missing_aggregate_key_named(self, tmp_path):
        path = tmp_path / "agg.json"
        path.write_text(json.dumps({"config": {}, "pbar_fixed_time": []}))
        with pytest.raises(SchemaError, match="poisson_ref"):
            read_aggregates(str(path))

    def test_unknown_kind_rejected(self):
        with pytest.raises(SchemaError, match="kind"):
            FigureRequest("roentgen", ("x.csv",), "x.png")


class TestCli:
    def test_renders_all_kinds(self, sim_outputs, tmp_path):
        jobs = [
            ("trajectory", [str(sim_outputs["trajectory"])]),
            ("fractions", [str(sim_outputs["fractions"])]),
            ("histograms", [str(sim_outputs["ensemble2"]), str(sim_outputs["ensemble3"])]),
            ("sequence", [str(sim_outputs["sequence"])]),
        ]
        for kind, inputs in jobs:
            out = tmp_path / f"{kind}.png"
            assert cli_main([kind, "--in", *inputs, "--out", str(out)]) == 0
            assert out.exists() and out.stat().st_size > 0

    def test_schema_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        out = tmp_path / "o.png"
        assert cli_main(["trajectory", "--in", str(bad), "--out", str(out)]) == 2
        assert not out.exists()

    def test_missing_file_exit_code(self, tmp_path):
        assert cli_main(["fractions", "--in", str(tmp_path / "nope.json"),
                         "--out", str(tmp_path / "o.png")]) == 2

    def test_axis_limits(self, sim_outputs, tmp_path):
        out = tmp_path / "lim.png"
        rc = cli_main(["fractions", "--in", str(sim_outputs["fractions"]),
                       "--out", str(out), "--xlim", "0", "6"])
        assert rc == 0 and out.exists()

    def test_deterministic_output(self, sim_outputs, tmp_path):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        for out in (a, b):
            render(FigureRequest("fractions", (str(sim_outputs["fractions"]),), str(out)))
        assert a.read_bytes() == b.read_bytes()
