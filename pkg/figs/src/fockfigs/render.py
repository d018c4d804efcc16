"""Figure builders for the four standard views of a feedback run.

Pure consumers of the simulator's files: a stacked single-trajectory panel,
controller choice fractions versus the estimated mean photon number,
photon-number histograms against the Poisson reference, and the programmed
target staircase.  Rendering is deterministic; everything numeric comes from
the input files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, aggregate_target, read_aggregates, read_trajectory

KINDS = ("trajectory", "fractions", "histograms", "sequence")

EMITTER_COLOR = "#c62828"
ABSORBER_COLOR = "#1565c0"
SENSOR_COLOR = "#2e7d32"


@dataclass(frozen=True)
class FigureRequest:
    kind: str
    inputs: tuple[str, ...]
    out: str
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r} (use one of {KINDS})")
        if not self.inputs:
            raise SchemaError("no input files given")


def _outcome_counts(column, letter):
    return np.array([str(s).count(letter) for s in column])


def trajectory_figure(df) -> plt.Figure:
    """Four stacked frames: sensor bits, distance, actuator firings, p(n) map."""
    pcols = df.attrs["pcols"]
    t = df["t_ms"].to_numpy(dtype=float)
    width = (t[1] - t[0]) if len(t) > 1 else 0.08

    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(9, 8), constrained_layout=True,
                             gridspec_kw={"height_ratios": [1, 1, 1, 2]})
    ax_sens, ax_dist, ax_act, ax_pn = axes

    sensors = df[df["role"] == "sensor"]
    ts = sensors["t_ms"].to_numpy(dtype=float)
    ax_sens.bar(ts, _outcome_counts(sensors["detected"], "e"), width=width,
                color="k", label="e")
    ax_sens.bar(ts, -_outcome_counts(sensors["detected"], "g"), width=width,
                color="0.55", label="g")
    ax_sens.axhline(0.0, lw=0.5, color="k")
    ax_sens.set_ylabel("sensor\ndetections")
    ax_sens.legend(loc="upper right", frameon=False, ncol=2, fontsize=8)

    ax_dist.plot(t, df["distance"].to_numpy(dtype=float), lw=0.8, color="k")
    ax_dist.set_ylabel("distance d")

    resonant = df["revoked"] == 0
    for role, color, sign in (("emitter", EMITTER_COLOR, 1), ("absorber", ABSORBER_COLOR, -1)):
        rows = df[(df["role"] == role) & resonant]
        ax_act.bar(rows["t_ms"].to_numpy(dtype=float), sign * np.ones(len(rows)),
                   width=width, color=color, label=role)
    ax_act.axhline(0.0, lw=0.5, color="k")
    ax_act.set_ylim(-1.4, 1.4)
    ax_act.set_ylabel("actuators")
    ax_act.legend(loc="upper right", frameon=False, ncol=2, fontsize=8)

    pn = df[pcols].to_numpy(dtype=float).T
    n_max = len(pcols) - 1
    ax_pn.imshow(pn, aspect="auto", origin="lower", cmap="viridis",
                 extent=(t[0], t[-1] + width, -0.5, n_max + 0.5),
                 interpolation="nearest", vmin=0.0, vmax=1.0)
    ax_pn.plot(t, df["n_mean_est"].to_numpy(dtype=float), color="w", lw=1.2,
               label="mean")
    ax_pn.set_ylabel("photon number")
    ax_pn.set_xlabel("time (ms)")
    return fig


def fractions_figure(data) -> plt.Figure:
    """Controller choice fractions for control samples versus estimated mean n."""
    df = data["decision_fractions"]
    centers = np.array(df["bin_centers"], dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.5), constrained_layout=True)
    styles = {
        "emitter": dict(color=EMITTER_COLOR, ls="--"),
        "sensor": dict(color=SENSOR_COLOR, ls="-"),
        "absorber": dict(color=ABSORBER_COLOR, ls="-."),
    }
    for role, style in styles.items():
        vals = np.array([np.nan if v is None else v for v in df[role]], dtype=float)
        ok = ~np.isnan(vals)
        ax.plot(centers[ok], vals[ok], lw=1.6, label=role, **style)
    ax.set_xlabel("estimated mean photon number")
    ax.set_ylabel("choice fraction")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False)
    return fig


def histograms_figure(datasets) -> plt.Figure:
    """Reference Poisson, end-of-run and threshold-stopped photon histograms.

    One bar group per input file, indexed by that run's target photon number.
    """
    groups = sorted(datasets, key=lambda item: item[0])
    n_groups = len(groups)
    dim = len(groups[0][1]["poisson_ref"])
    n = np.arange(dim)
    panels = [("poisson_ref", "Poisson reference"),
              ("pbar_fixed_time", "true n at fixed interruption time"),
              ("pbar_threshold", "true n at threshold stopping")]
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 8), constrained_layout=True)
    bar_w = 0.8 / n_groups
    cmap = plt.get_cmap("tab10")
    for ax, (key, title) in zip(axes, panels):
        for g, (n_t, data) in enumerate(groups):
            offset = (g - (n_groups - 1) / 2) * bar_w
            ax.bar(n + offset, np.asarray(data[key], dtype=float), width=bar_w,
                   color=cmap(g % 10), label=f"target {n_t}")
        ax.set_ylabel("probability")
        ax.set_title(title, fontsize=10)
    axes[0].legend(frameon=False, fontsize=8, ncol=min(n_groups, 4))
    axes[-1].set_xlabel("photon number")
    axes[-1].set_xticks(n)
    return fig


def sequence_figure(df) -> plt.Figure:
    """Programmed-target staircase with the estimated mean and p(n) map."""
    pcols = df.attrs["pcols"]
    t = df["t_ms"].to_numpy(dtype=float)
    width = (t[1] - t[0]) if len(t) > 1 else 0.08
    n_max = len(pcols) - 1
    fig, ax = plt.subplots(figsize=(9, 4.5), constrained_layout=True)
    ax.imshow(df[pcols].to_numpy(dtype=float).T, aspect="auto", origin="lower",
              cmap="viridis", extent=(t[0], t[-1] + width, -0.5, n_max + 0.5),
              interpolation="nearest", vmin=0.0, vmax=1.0)
    ax.step(t, df["target"].to_numpy(dtype=float), where="post", color="#64b5f6",
            lw=1.0, label="target")
    ax.plot(t, df["n_mean_est"].to_numpy(dtype=float), color="k", lw=1.8,
            label="estimated mean")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("photon number")
    ax.legend(loc="upper right", frameon=False, fontsize=8)
    return fig


def build(request: FigureRequest) -> plt.Figure:
    """Read the inputs and build the figure (without saving)."""
    if request.kind == "trajectory":
        fig = trajectory_figure(read_trajectory(request.inputs[0]))
    elif request.kind == "sequence":
        fig = sequence_figure(read_trajectory(request.inputs[0]))
    elif request.kind == "fractions":
        fig = fractions_figure(read_aggregates(request.inputs[0]))
    else:
        datasets = []
        for path in request.inputs:
            data = read_aggregates(path)
            datasets.append((aggregate_target(data, path), data))
        fig = histograms_figure(datasets)
    for ax in fig.axes:
        if request.xlim:
            ax.set_xlim(*request.xlim)
        if request.ylim:
            ax.set_ylim(*request.ylim)
    return fig


def render(request: FigureRequest) -> str:
    """Build the requested figure and write it to the output path."""
    fig = build(request)
    try:
        fig.savefig(request.out)
    finally:
        plt.close(fig)
    return request.out
