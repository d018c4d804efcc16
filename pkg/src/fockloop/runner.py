"""Experiment orchestration: wiring plant, filter and controller per trajectory.

One sample interval proceeds as: the controller re-decides (modes of
upcoming control slots, keep/cancel of the not-yet-crossed actuator), a new
sample is prepared and enters the flight pipeline, the sample leaving the
pre-crossing stage interacts with the cavity, the oldest sample exits and
is detected, the cavity damps for one interval, and the filter folds in the
detection.  Detections therefore reach the filter delay_depth intervals
after preparation, and the controller works from a pending-averaged
("traced") estimate of the present field.

Outputs: per-sample CSV rows for single trajectories, JSON aggregates for
ensembles and sweeps.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .controller import (
    Decision,
    LoopState,
    PipelineView,
    decide,
    schedule_next,
    target_sequencer,
)
from .estimator import (
    ROLE_ABSORBER,
    ROLE_EMITTER,
    ROLE_OFF,
    ROLE_PREPARED,
    ROLE_SENSOR,
    SampleAnnouncement,
    distance,
    vacuum_state,
)
from .kernels import KernelCache
from .params import ActuatorCalibration, PhysicsParams, TargetSpec
from .plant import (
    PlantState,
    detect,
    evolve_cavity,
    interact_actuator_true,
    interact_sensor_true,
    make_rng,
    new_pipeline,
    pipeline_step,
    sample_occupancy,
)

EXPERIMENT_KINDS = ("trajectory", "ensemble", "choice-fractions", "sequence", "sweep")

_STATE_CHAR = {0: "e", 1: "g"}


class ConfigError(ValueError):
    """Configuration rejected; message lists the offending fields."""


@dataclass
class ExperimentConfig:
    kind: str = "trajectory"
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    target: int = 4
    targets: list[int] | None = None       # programmed sequence; overrides target
    duration_ms: float = 140.0
    threshold: float = 0.8
    trajectories: int = 1
    seed: int = 0
    out_dir: str | None = None
    workers: int = 1
    save_trajectories: bool = False
    stop_on_threshold: bool = False
    stop_when_sequence_done: bool = False
    calibration_file: str | None = None
    t_e: float | None = None               # explicit actuator-time overrides (sweeps)
    t_g: float | None = None
    sweep: dict | None = None
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        errors = []
        if self.kind not in EXPERIMENT_KINDS:
            errors.append(f"kind: must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.duration_ms < 0:
            errors.append("duration_ms: must be nonnegative")
        if self.trajectories < 1:
            errors.append("trajectories: must be at least 1")
        if not 0.0 < self.threshold < 1.0:
            errors.append("threshold: must lie in (0, 1)")
        if self.workers < 1:
            errors.append("workers: must be at least 1")
        if self.physics.n_max < 8:
            errors.append("physics.n_max: loop runs need at least 8 photon-number states")
        lo, hi = 1, self.physics.n_max - 4
        for n_t in self.target_list():
            if not lo <= int(n_t) <= hi:
                errors.append(f"target: n_t={n_t} outside [{lo}, {hi}]")
        if self.t_e is not None and self.t_e <= 0:
            errors.append("t_e: must be positive")
        if self.t_g is not None and self.t_g <= 0:
            errors.append("t_g: must be positive")
        if self.sweep is not None:
            known = {"t_e", "t_g", "n_sensors", "n_controls"}
            for key, values in self.sweep.items():
                if key not in known:
                    errors.append(f"sweep.{key}: unknown axis (use {sorted(known)})")
                elif not isinstance(values, (list, tuple)) or len(values) == 0:
                    errors.append(f"sweep.{key}: must be a non-empty list")
        if self.kind == "sweep" and not self.sweep:
            errors.append("sweep: a sweep run needs a non-empty parameter grid")
        if errors:
            raise ConfigError("; ".join(errors))

    def target_list(self) -> list[int]:
        if self.targets:
            return [int(t) for t in self.targets]
        return [int(self.target)]

    def calibration(self) -> ActuatorCalibration:
        if self.calibration_file:
            return ActuatorCalibration.from_file(self.calibration_file, self.physics.n_max)
        return ActuatorCalibration.default(self.physics.n_max)

    def to_dict(self) -> dict:
        out = asdict(self)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("unknown config keys: " + ", ".join(unknown))
        physics = data.pop("physics", None)
        if physics is not None:
            if not isinstance(physics, dict):
                raise ConfigError("physics: must be an object of parameter overrides")
            valid = {f.name for f in fields(PhysicsParams)}
            bad = sorted(set(physics) - valid)
            if bad:
                raise ConfigError("unknown physics keys: " + ", ".join(bad))
            try:
                data["physics"] = PhysicsParams(**physics)
            except ValueError as exc:
                raise ConfigError(f"physics: {exc}") from exc
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)


@dataclass
class Sample:
    """Full record of one atom sample, filled in as it moves through the line."""

    index: int                 # preparation round
    position: int              # slot in the sensor/control cycle
    role: str
    cross_round: int
    mean_atoms: float
    occupancy: int = 0
    phi_r: float | None = None
    t_int: float | None = None
    resonant: bool = True
    crossed: bool = False
    outcomes: tuple[int, ...] = ()
    detected: tuple[int, ...] | None = None

    def view(self) -> PipelineView:
        return PipelineView(index=self.index, role=self.role, cross_round=self.cross_round,
                            crossed=self.crossed, resonant=self.resonant,
                            phi_r=self.phi_r, t_int=self.t_int)

    def announcement(self) -> SampleAnnouncement:
        role = self.role
        if role in (ROLE_EMITTER, ROLE_ABSORBER) and not self.resonant:
            role = ROLE_OFF
        return SampleAnnouncement(role=role, detected=self.detected or (),
                                  phi_r=self.phi_r, t_int=self.t_int,
                                  resonant=self.resonant)

    @property
    def revoked(self) -> bool:
        return self.role in (ROLE_EMITTER, ROLE_ABSORBER) and not self.resonant


@dataclass
class TrajectoryResult:
    """Slim per-trajectory return value for ensemble aggregation."""

    summary: dict
    decision_nbar: np.ndarray   # estimated mean photon number at each control preparation
    decision_mode: list[str]
    log: "TrajectoryLog | None" = None


@dataclass
class TrajectoryLog:
    """Per-interval rows plus the trajectory summary."""

    params: PhysicsParams
    rows: list
    samples: list[Sample]
    summary: dict

    CSV_STATIC = "t_ms,role,revoked,occupancy,true_outcomes,detected,n_true,n_mean_est,distance,target"

    def header(self) -> str:
        pcols = ",".join(f"p{n}" for n in range(self.params.n_max + 1))
        return f"{self.CSV_STATIC},{pcols}"

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.header() + "\n")
            for t_ms, sample, n_true, n_mean, dist, n_t, p in self.rows:
                outc = "".join(_STATE_CHAR[o] for o in sample.outcomes)
                detc = "".join(_STATE_CHAR[o] for o in (sample.detected or ()))
                cells = [
                    repr(float(t_ms)), sample.role, str(int(sample.revoked)),
                    str(sample.occupancy), outc, detc, str(int(n_true)),
                    repr(float(n_mean)), repr(float(dist)), str(int(n_t)),
                ]
                cells.extend(repr(float(x)) for x in p)
                fh.write(",".join(cells) + "\n")


def _traced_estimate(p_det: np.ndarray, det_round: int, pipeline, now_round: int,
                     kernels: KernelCache) -> np.ndarray:
    """Posterior for the field right now: trace crossed-but-undetected samples."""
    p = p_det
    t = det_round
    for sample in pipeline:
        if sample is None or not sample.crossed:
            continue
        if sample.role in (ROLE_EMITTER, ROLE_ABSORBER) and sample.resonant:
            gap = sample.cross_round - t
            if gap > 0:
                p = kernels.relax_pow(gap) @ p
            p = kernels.actuator(sample.role, sample.t_int).trace @ p
            t = sample.cross_round
    gap = now_round - t
    if gap > 0:
        p = kernels.relax_pow(gap) @ p
    return p / p.sum()


def _cross(sample: Sample, plant: PlantState, params: PhysicsParams,
           calib: ActuatorCalibration, rng: np.random.Generator) -> None:
    """Physical interaction of one sample with the cavity."""
    sample.crossed = True
    if sample.occupancy == 0:
        return
    if sample.role == ROLE_SENSOR:
        sample.outcomes = tuple(
            interact_sensor_true(plant.n_true, sample.phi_r, params, rng)
            for _ in range(sample.occupancy)
        )
        return
    j = ROLE_PREPARED[sample.role]
    if not sample.resonant:
        sample.outcomes = (j,) * sample.occupancy
        return
    outs = []
    for _ in range(sample.occupancy):
        k, n_new = interact_actuator_true(plant.n_true, j, sample.t_int, params, calib, rng)
        if n_new != plant.n_true + (k - j):
            plant.reflections += 1
        plant.n_true = n_new
        outs.append(k)
    sample.outcomes = tuple(outs)


def _interval_count(duration_ms: float, params: PhysicsParams) -> int:
    return int(math.floor(duration_ms * 1e-3 / params.t_sample))


def _simulate(cfg: ExperimentConfig, index: int, collect_rows: bool) -> TrajectoryResult:
    """Run one trajectory; the core loop shared by all experiment kinds."""
    cfg.validate()
    params = cfg.physics
    calib = cfg.calibration()
    targets = cfg.target_list()
    depth = params.delay_depth
    cycle = params.n_sensors + params.n_controls
    n_intervals = _interval_count(cfg.duration_ms, params)
    t_ms_per_round = params.t_sample * 1e3

    rng = make_rng(cfg.seed, index)
    kernels = KernelCache(params, calib)
    state = LoopState(p=vacuum_state(params),
                      target=TargetSpec.for_target(targets[0], params, cfg.t_e, cfg.t_g),
                      position=0, round_index=0)
    plant = PlantState(n_true=0, rng=rng)
    pipeline = new_pipeline(depth)
    p_det = vacuum_state(params)
    det_round = 0
    cross_offset = 1 if depth >= 1 else 0

    samples: list[Sample] = []
    rows = [] if collect_rows else None
    dec_nbar: list[float] = []
    dec_mode: list[str] = []
    switch_times: list[float] = []
    first_cross: tuple[int, int] | None = None   # (round, n_true then)
    steady_sum = 0.0
    steady_n = 0
    half = n_intervals // 2
    nvec = np.arange(params.n_max + 1, dtype=float)

    i = 0
    for i in range(n_intervals):
        state.round_index = i

        # detection due this round reaches the filter before any decision
        if depth >= 1 and len(pipeline) == depth:
            exiting = pipeline.popleft()
            if exiting is not None:
                if not exiting.crossed:
                    # depth 1: the pre-cavity stage is the whole pipeline, so
                    # crossing and detection fall in the same round
                    _cross(exiting, plant, params, calib, rng)
                exiting.detected = detect(exiting.outcomes, params.eta_d, rng)
                gap = exiting.cross_round - det_round
                if gap > 0:
                    p_det = kernels.relax_pow(gap) @ p_det
                    p_det = p_det / p_det.sum()
                p_det = kernels.apply_announcement(p_det, exiting.announcement())
                det_round = exiting.cross_round

        state.pipeline = [s.view() for s in pipeline if s is not None]
        pnow = _traced_estimate(p_det, det_round, pipeline, i, kernels)
        state.p = pnow

        if len(targets) > 1:
            before = state.target
            after = target_sequencer(state, targets, cfg.threshold, params)
            if after is not before:
                switch_times.append(i * t_ms_per_round)
        tgt = state.target

        if first_cross is None and pnow[tgt.n_t] > cfg.threshold:
            first_cross = (i, plant.n_true)
        if cfg.stop_on_threshold and first_cross is not None:
            break
        if cfg.stop_when_sequence_done and len(switch_times) == len(targets) - 1:
            break

        d_now = distance(pnow, tgt.n_t)
        if i >= half:
            steady_sum += d_now
            steady_n += 1

        decision = decide(state, params, calib, kernels)
        if decision.keep_resonant:
            for sample in pipeline:
                if sample is not None and sample.index in decision.keep_resonant:
                    sample.resonant = decision.keep_resonant[sample.index]
        state.planned_modes = decision.modes

        role = schedule_next(state, params)
        is_control = state.position >= params.n_sensors
        mean_atoms = params.m_control if is_control else params.m_sensor
        sample = Sample(index=i, position=state.position, role=role,
                        cross_round=i + cross_offset, mean_atoms=mean_atoms,
                        occupancy=sample_occupancy(mean_atoms, rng))
        if role == ROLE_SENSOR:
            sample.phi_r = tgt.phi_r
        else:
            sample.t_int = tgt.t_e if role == ROLE_EMITTER else tgt.t_g
        samples.append(sample)
        if is_control:
            dec_nbar.append(float(nvec @ pnow))
            dec_mode.append(role)

        if collect_rows:
            rows.append((i * t_ms_per_round, sample, plant.n_true,
                         float(nvec @ pnow), d_now, tgt.n_t, pnow))

        # stream advance: the pre-crossing sample interacts, the new one enters
        if depth >= 1:
            crossing = pipeline[-1] if pipeline else None
            if crossing is not None:
                _cross(crossing, plant, params, calib, rng)
            pipeline.append(sample)
        else:
            _cross(sample, plant, params, calib, rng)
            sample.detected = detect(sample.outcomes, params.eta_d, rng)
            gap = sample.cross_round - det_round
            if gap > 0:
                p_det = kernels.relax_pow(gap) @ p_det
                p_det = p_det / p_det.sum()
            p_det = kernels.apply_announcement(p_det, sample.announcement())
            det_round = sample.cross_round

        plant.n_true = evolve_cavity(plant.n_true, params.t_sample, params, rng)

        state.position = (state.position + 1) % cycle

    rounds_run = len(samples)
    final_round = rounds_run if rounds_run else 0
    p_final = _traced_estimate(p_det, det_round, pipeline, final_round, kernels)
    summary = {
        "trajectory": index,
        "rounds": rounds_run,
        "duration_ms": rounds_run * t_ms_per_round,
        "final_n_true": plant.n_true,
        "final_estimate": [float(x) for x in p_final],
        "converged": first_cross is not None,
        "convergence_time_ms": (first_cross[0] * t_ms_per_round) if first_cross else None,
        "n_true_at_threshold": first_cross[1] if first_cross else plant.n_true,
        "steady_distance": (steady_sum / steady_n) if steady_n else None,
        "switch_times_ms": switch_times,
        "inconsistent_updates": kernels.inconsistent,
        "reflections": plant.reflections,
    }
    log = None
    if collect_rows:
        log = TrajectoryLog(params=params, rows=rows, samples=samples, summary=summary)
    return TrajectoryResult(summary=summary, decision_nbar=np.array(dec_nbar),
                            decision_mode=dec_mode, log=log)


def _simulate_star(args) -> TrajectoryResult:
    return _simulate(*args)


def _map_trajectories(cfg: ExperimentConfig, collect_rows: bool) -> list[TrajectoryResult]:
    jobs = [(cfg, i, collect_rows) for i in range(cfg.trajectories)]
    if cfg.workers <= 1:
        return [_simulate(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_simulate_star, jobs))


def poisson_pmf(mean: float, n_max: int) -> np.ndarray:
    """Reference Poisson distribution on 0..n_max (not renormalized)."""
    n = np.arange(n_max + 1)
    return np.exp(-mean) * mean ** n / np.array([math.factorial(int(k)) for k in n])


def run_trajectory(cfg: ExperimentConfig, index: int = 0) -> TrajectoryLog:
    """Simulate a single trajectory with full per-interval logging."""
    return _simulate(cfg, index, collect_rows=True).log


def run_sequence(cfg: ExperimentConfig, index: int = 0) -> TrajectoryLog:
    """Single trajectory driven through the programmed target sequence."""
    if not cfg.targets:
        raise ConfigError("targets: a sequence run needs a list of targets")
    return _simulate(cfg, index, collect_rows=True).log


def _occupancy_histogram(values, n_max: int) -> np.ndarray:
    hist = np.zeros(n_max + 1)
    for v in values:
        hist[int(v)] += 1.0
    total = hist.sum()
    return hist / total if total else hist


def _decision_fractions(results: list[TrajectoryResult], params: PhysicsParams,
                        bin_width: float = 0.1) -> dict:
    """Mode fractions of control samples, binned by the estimated mean photon number."""
    edges = np.arange(0.0, params.n_max + bin_width, bin_width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    counts = {role: np.zeros(len(centers)) for role in (ROLE_EMITTER, ROLE_SENSOR, ROLE_ABSORBER)}
    for res in results:
        if len(res.decision_nbar) == 0:
            continue
        idx = np.clip(np.digitize(res.decision_nbar, edges) - 1, 0, len(centers) - 1)
        for b, mode in zip(idx, res.decision_mode):
            counts[mode][b] += 1.0
    total = sum(counts.values())
    out = {"bin_centers": [round(float(c), 6) for c in centers], "counts": [int(t) for t in total]}
    for role in (ROLE_EMITTER, ROLE_SENSOR, ROLE_ABSORBER):
        with np.errstate(invalid="ignore"):
            frac = np.where(total > 0, counts[role] / np.where(total > 0, total, 1.0), np.nan)
        out[role] = [None if math.isnan(f) else float(f) for f in frac]
    return out


def run_ensemble(cfg: ExperimentConfig) -> dict:
    """Run many trajectories and aggregate the headline statistics.

    Produces the true-photon-number histograms at fixed interruption time
    and at estimator-threshold stopping, the Poisson reference, the
    convergence-time list and the binned decision fractions.
    """
    cfg.validate()
    results = _map_trajectories(cfg, collect_rows=cfg.save_trajectories)
    params = cfg.physics
    n_t = cfg.target_list()[-1]
    summaries = [r.summary for r in results]
    agg = {
        "config": cfg.to_dict(),
        "pbar_fixed_time": [float(x) for x in _occupancy_histogram(
            [s["final_n_true"] for s in summaries], params.n_max)],
        "pbar_threshold": [float(x) for x in _occupancy_histogram(
            [s["n_true_at_threshold"] for s in summaries], params.n_max)],
        "poisson_ref": [float(x) for x in poisson_pmf(float(n_t), params.n_max)],
        "convergence_times_ms": [s["convergence_time_ms"] for s in summaries],
        "decision_fractions": _decision_fractions(results, params),
        "diagnostics": {
            "n_trajectories": len(results),
            "never_converged": sum(1 for s in summaries if not s["converged"]),
            "inconsistent_updates": sum(s["inconsistent_updates"] for s in summaries),
            "reflections": sum(s["reflections"] for s in summaries),
            "mean_steady_distance": _mean_or_none(
                [s["steady_distance"] for s in summaries if s["steady_distance"] is not None]),
        },
    }
    if cfg.save_trajectories:
        agg["_logs"] = [r.log for r in results]
    return agg


def _mean_or_none(values):
    return float(np.mean(values)) if values else None


def run_sweep(cfg: ExperimentConfig) -> dict:
    """Grid evaluation over actuator times and schedule lengths, ranked by steady distance."""
    cfg.validate()
    if not cfg.sweep:
        raise ConfigError("sweep: parameter grid must be non-empty")
    grid = cfg.sweep
    axes = {
        "t_e": grid.get("t_e", [cfg.t_e]),
        "t_g": grid.get("t_g", [cfg.t_g]),
        "n_sensors": grid.get("n_sensors", [cfg.physics.n_sensors]),
        "n_controls": grid.get("n_controls", [cfg.physics.n_controls]),
    }
    cells = []
    for t_e in axes["t_e"]:
        for t_g in axes["t_g"]:
            for n_s in axes["n_sensors"]:
                for n_c in axes["n_controls"]:
                    sub = replace(cfg, kind="ensemble", sweep=None, save_trajectories=False,
                                  t_e=t_e, t_g=t_g,
                                  physics=replace(cfg.physics, n_sensors=int(n_s),
                                                  n_controls=int(n_c)))
                    results = _map_trajectories(sub, collect_rows=False)
                    steady = [r.summary["steady_distance"] for r in results
                              if r.summary["steady_distance"] is not None]
                    conv = [r.summary["convergence_time_ms"] for r in results
                            if r.summary["convergence_time_ms"] is not None]
                    cells.append({
                        "t_e": t_e, "t_g": t_g,
                        "n_sensors": int(n_s), "n_controls": int(n_c),
                        "mean_steady_distance": _mean_or_none(steady),
                        "mean_convergence_ms": _mean_or_none(conv),
                        "converged_fraction": len(conv) / len(results),
                    })
    cells.sort(key=lambda c: (c["mean_steady_distance"] is None,
                              c["mean_steady_distance"]))
    return {"config": cfg.to_dict(), "cells": cells}


def write_outputs(cfg: ExperimentConfig, result, out_dir: str) -> list[str]:
    """Write the run's files; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if isinstance(result, TrajectoryLog):
        csv_path = os.path.join(out_dir, "trajectory.csv")
        result.to_csv(csv_path)
        written.append(csv_path)
        summary_path = os.path.join(out_dir, "summary.json")
        with open(summary_path, "w") as fh:
            json.dump({"config": cfg.to_dict(), "summary": result.summary}, fh, indent=2)
        written.append(summary_path)
        return written
    if "cells" in result:
        path = os.path.join(out_dir, "sweep.json")
        with open(path, "w") as fh:
            json.dump(result, fh, indent=2)
        return [path]
    logs = result.pop("_logs", None)
    path = os.path.join(out_dir, "aggregates.json")
    with open(path, "w") as fh:
        json.dump(result, fh, indent=2)
    written.append(path)
    if logs:
        traj_dir = os.path.join(out_dir, "trajectories")
        os.makedirs(traj_dir, exist_ok=True)
        for idx, log in enumerate(logs):
            p = os.path.join(traj_dir, f"traj_{idx:04d}.csv")
            log.to_csv(p)
            written.append(p)
    return written
