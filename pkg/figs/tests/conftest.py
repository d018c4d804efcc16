"""Fixtures produced by driving the simulator through its CLI."""

import subprocess
import sys

import pytest


def _run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "fockloop.cli", *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def sim_outputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    _run_cli("trajectory", "--target", "4", "--duration-ms", "25", "--seed", "11",
             "--out", str(root / "traj"))
    _run_cli("sequence", "--targets", "2,3", "--duration-ms", "80", "--seed", "2",
             "--out", str(root / "seq"))
    _run_cli("ensemble", "--target", "2", "--trajectories", "4", "--duration-ms", "20",
             "--seed", "3", "--out", str(root / "ens2"))
    _run_cli("ensemble", "--target", "3", "--trajectories", "4", "--duration-ms", "20",
             "--seed", "4", "--out", str(root / "ens3"))
    _run_cli("fractions", "--target", "4", "--trajectories", "4", "--duration-ms", "25",
             "--seed", "5", "--out", str(root / "frac"))
    return {
        "trajectory": root / "traj" / "trajectory.csv",
        "sequence": root / "seq" / "trajectory.csv",
        "ensemble2": root / "ens2" / "aggregates.json",
        "ensemble3": root / "ens3" / "aggregates.json",
        "fractions": root / "frac" / "aggregates.json",
    }
