"""Readers for the simulator's documented output files.

Strictly schema-checked: a missing column or key fails with its name, so a
format drift in the producer surfaces immediately rather than as a blank
plot.
"""

from __future__ import annotations

import json

import pandas as pd

TRAJECTORY_COLUMNS = [
    "t_ms", "role", "revoked", "occupancy", "true_outcomes", "detected",
    "n_true", "n_mean_est", "distance", "target",
]

AGGREGATE_KEYS = [
    "config", "pbar_fixed_time", "pbar_threshold", "poisson_ref",
    "convergence_times_ms", "decision_fractions",
]

FRACTION_KEYS = ["bin_centers", "emitter", "sensor", "absorber"]


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


def read_trajectory(path: str) -> pd.DataFrame:
    """Load a per-sample trajectory CSV and its p(n) columns."""
    df = pd.read_csv(path, keep_default_na=False, na_values=[])
    missing = [c for c in TRAJECTORY_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing trajectory columns: {', '.join(missing)}")
    pcols = [c for c in df.columns if c.startswith("p") and c[1:].isdigit()]
    if not pcols:
        raise SchemaError(f"{path}: missing photon distribution columns p0..pN")
    if len(df) == 0:
        raise SchemaError(f"{path}: no data rows (empty trajectory)")
    df.attrs["pcols"] = sorted(pcols, key=lambda c: int(c[1:]))
    return df


def read_aggregates(path: str) -> dict:
    """Load an ensemble aggregates JSON."""
    with open(path) as fh:
        data = json.load(fh)
    missing = [k for k in AGGREGATE_KEYS if k not in data]
    if missing:
        raise SchemaError(f"{path}: missing aggregate keys: {', '.join(missing)}")
    missing = [k for k in FRACTION_KEYS if k not in data["decision_fractions"]]
    if missing:
        raise SchemaError(f"{path}: decision_fractions missing: {', '.join(missing)}")
    return data


def aggregate_target(data: dict, path: str) -> int:
    """Target photon number an aggregates file was produced for."""
    config = data.get("config", {})
    targets = config.get("targets") or [config.get("target")]
    if targets[-1] is None:
        raise SchemaError(f"{path}: config.target missing")
    return int(targets[-1])
