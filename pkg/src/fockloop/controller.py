"""Decision policy of the loop controller.

Each loop cycles through n_sensors sensor slots followed by n_controls
control slots.  After every detection the controller re-optimizes, jointly,
the modes of all control slots of the current cycle that have not been
prepared yet and the keep/cancel flags of actuators that are committed to a
mode but have not crossed the cavity.  For every joint choice it propagates
its current estimate through the outcome-averaged kernels of the pending
interactions (with relaxation between crossings) and picks the choice with
the smallest expected squared distance to the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimator import ROLE_ABSORBER, ROLE_EMITTER, ROLE_SENSOR, distance
from .kernels import KernelCache
from .params import ActuatorCalibration, PhysicsParams, TargetSpec, sensor_phase

__all__ = [
    "Decision",
    "LoopState",
    "PipelineView",
    "decide",
    "schedule_next",
    "sensor_phase",
    "stop_rule",
    "target_sequencer",
]

#: tie-break order: a sensor is risk-free, an absorber only fires on excess
#: photons, an emitter can overshoot
MODE_RANK = {ROLE_SENSOR: 0, ROLE_ABSORBER: 1, ROLE_EMITTER: 2}
MODE_ORDER = (ROLE_SENSOR, ROLE_ABSORBER, ROLE_EMITTER)


@dataclass
class PipelineView:
    """Controller-side knowledge of one in-flight sample."""

    index: int            # round at which the sample was prepared
    role: str
    cross_round: int      # round at which it crosses (or crossed) the cavity
    crossed: bool
    resonant: bool = True
    phi_r: float | None = None
    t_int: float | None = None


@dataclass
class LoopState:
    """Everything the controller knows at one decision instant."""

    p: np.ndarray                  # current traced estimate of p(n)
    target: TargetSpec
    position: int                  # 0 .. n_sensors+n_controls-1
    round_index: int
    pipeline: list[PipelineView] = field(default_factory=list)  # oldest first
    planned_modes: dict[int, str] = field(default_factory=dict)  # prep round -> mode
    seq_pos: int = 0
    diagnostics: dict[str, int] = field(default_factory=dict)


@dataclass
class Decision:
    """Joint argmin over the revisable samples."""

    modes: dict[int, str]            # preparation round -> mode
    keep_resonant: dict[int, bool]   # sample index -> keep the resonant setting
    expected_distance: float


def upcoming_control_rounds(state: LoopState, params: PhysicsParams) -> list[int]:
    """Preparation rounds of the current cycle's not-yet-prepared control slots."""
    n_s, n_c = params.n_sensors, params.n_controls
    first = max(state.position, n_s)
    return [state.round_index + (q - state.position) for q in range(first, n_s + n_c)]


def _decode_choices(index: int, branch_counts: list[int]) -> list[int]:
    """Recover per-event option indices from a stacked-frontier leaf index.

    Each branching stacks the option blocks in order, so the leaf index is a
    mixed-radix number with the last event as the most significant digit.
    """
    prefix = []
    count = 1
    for b in branch_counts:
        prefix.append(count)
        count *= b
    choices = []
    for width in reversed(prefix):
        choices.append(index // width)
        index %= width
    choices.reverse()
    return choices


def decide(state: LoopState, params: PhysicsParams, calib: ActuatorCalibration,
           kernels: KernelCache | None = None) -> Decision:
    """Jointly choose modes and keep/cancel flags minimizing the expected distance.

    Ties are broken towards sensors over absorbers over emitters (slot by
    slot, earliest slot first), then towards fewer resonant actuators.
    """
    if kernels is None:
        kernels = KernelCache(params, calib)
    tgt = state.target
    cross_offset = 1 if params.delay_depth >= 1 else 0

    # chronologically ordered decision points
    events = []
    for view in state.pipeline:
        if view is not None and not view.crossed and view.role in (ROLE_EMITTER, ROLE_ABSORBER):
            events.append(("revoke", view.cross_round, view))
    for prep_round in upcoming_control_rounds(state, params):
        events.append(("mode", prep_round + cross_offset, prep_round))
    events.sort(key=lambda e: e[1])

    mode_kernels = (
        None,                                              # sensor: QND, identity on average
        kernels.actuator(ROLE_ABSORBER, tgt.t_g).trace,
        kernels.actuator(ROLE_EMITTER, tgt.t_e).trace,
    )

    # Pure kernel products: damping over the few-interval choice window is a
    # sub-percent common shift, and leaving it out keeps plans that apply the
    # same set of actions in a different order exactly tied, so the
    # documented preference order decides between them.
    rows = state.p[np.newaxis, :]
    branch_counts: list[int] = []
    for kind, _cross_round, payload in events:
        if kind == "revoke":
            kept = rows @ kernels.actuator(payload.role, payload.t_int).trace.T
            rows = np.concatenate([rows, kept])   # option 0 = cancel, 1 = keep
            branch_counts.append(2)
        else:
            rows = np.concatenate([rows if k is None else rows @ k.T for k in mode_kernels])
            branch_counts.append(3)

    sq = (np.arange(params.n_max + 1, dtype=float) - tgt.n_t) ** 2
    dists = (rows @ sq) / rows.sum(axis=1)
    d_min = dists.min()
    ties = np.flatnonzero(dists == d_min)
    if len(ties) == 1:
        best = int(ties[0])
    else:
        def tie_key(leaf: int):
            choices = _decode_choices(leaf, branch_counts)
            ranks = tuple(c for (kind, _, _), c in zip(events, choices) if kind == "mode")
            resonant = sum(c for (kind, _, _), c in zip(events, choices) if kind == "revoke")
            # compare the mode ranks from the last slot backwards: among tied
            # plans this defers the no-ops, not the corrections
            return tuple(reversed(ranks)), resonant
        best = int(min(ties, key=tie_key))

    modes: dict[int, str] = {}
    keep: dict[int, bool] = {}
    for (kind, _, payload), choice in zip(events, _decode_choices(best, branch_counts)):
        if kind == "revoke":
            keep[payload.index] = bool(choice)
        else:
            modes[payload] = MODE_ORDER[choice]
    return Decision(modes=modes, keep_resonant=keep, expected_distance=float(dists[best]))


def schedule_next(state: LoopState, params: PhysicsParams) -> str:
    """Role of the sample to prepare this round.

    The first n_sensors positions of every cycle are sensors unconditionally;
    control positions take the mode from the latest decision.
    """
    if state.position < params.n_sensors:
        return ROLE_SENSOR
    return state.planned_modes.get(state.round_index, ROLE_SENSOR)


def stop_rule(state: LoopState, threshold: float) -> bool:
    """True when the estimated target population strictly exceeds the threshold."""
    return float(state.p[state.target.n_t]) > threshold


def target_sequencer(state: LoopState, sequence: list[int], threshold: float,
                     params: PhysicsParams) -> TargetSpec:
    """Advance to the next programmed target once the current one is locked.

    Returns the (possibly new) TargetSpec; an exhausted sequence holds the
    final target.  The caller owns logging of switch events.
    """
    if state.seq_pos + 1 < len(sequence) and float(state.p[state.target.n_t]) > threshold:
        state.seq_pos += 1
        state.target = TargetSpec.for_target(sequence[state.seq_pos], params)
    return state.target
