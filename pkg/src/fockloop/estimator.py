"""Controller-side Bayesian filter over the photon number distribution.

The filter state is a plain probability vector p of length n_max+1.  Every
update here is linear in p followed by one normalization, so chaining the
per-sample updates reproduces the exact joint posterior over all hidden
sample configurations (occupancies, atomic outcomes, detection masks).

Atom samples can hold 0, 1 or 2 atoms; the estimator weights these
hypotheses with the plain Poisson probabilities of the sample's mean atom
number, restricted to counts up to two.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .params import ActuatorCalibration, PhysicsParams
from .physics import actuator_matrix, sensor_weights, relaxation_propagator

ROLE_SENSOR = "sensor"
ROLE_EMITTER = "emitter"
ROLE_ABSORBER = "absorber"
ROLE_OFF = "off"

#: prepared atomic state implied by an actuator role
ROLE_PREPARED = {ROLE_EMITTER: 0, ROLE_ABSORBER: 1}

_ZERO_WEIGHT = 1e-300


class InconsistentOutcomeWarning(UserWarning):
    """Raised (as a warning) when an observed outcome has zero posterior weight."""


@dataclass(frozen=True)
class SampleAnnouncement:
    """What the controller knows about one sample when its detection arrives.

    ``detected`` lists the detected atomic states (at most two) as an
    unordered multiset; the detector cannot tell which atom of a pair came
    first.  ``resonant`` is False for actuators that were steered
    off-resonance, which pass through without touching the field.
    """

    role: str
    detected: tuple[int, ...] = ()
    phi_r: float | None = None      # sensors
    t_int: float | None = None      # actuators
    resonant: bool = True

    def __post_init__(self):
        if self.role not in (ROLE_SENSOR, ROLE_EMITTER, ROLE_ABSORBER, ROLE_OFF):
            raise ValueError(f"unknown sample role {self.role!r}")
        if len(self.detected) > 2:
            raise ValueError("at most two atoms can be detected in one sample")
        if any(d not in (0, 1) for d in self.detected):
            raise ValueError("detected states must be 0 (e) or 1 (g)")

    @property
    def j(self) -> int | None:
        return ROLE_PREPARED.get(self.role)


def vacuum_state(params: PhysicsParams) -> np.ndarray:
    p = np.zeros(params.n_max + 1)
    p[0] = 1.0
    return p


def occupancy_weights(m: float) -> tuple[float, float, float]:
    """Relative prior weights of 0, 1 or 2 atoms in a sample of mean m."""
    q0 = math.exp(-m)
    return q0, m * q0, 0.5 * m * m * q0


def _finish(weights: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Normalize an unnormalized posterior; keep the prior on impossible outcomes."""
    weights = np.clip(weights, 0.0, None)
    total = weights.sum()
    if not total > _ZERO_WEIGHT:
        warnings.warn("observed outcome has zero likelihood under the current state",
                      InconsistentOutcomeWarning, stacklevel=3)
        return fallback.copy()
    return weights / total


def update_sensor(p: np.ndarray, j: int, phi_r: float, params: PhysicsParams) -> np.ndarray:
    """Bayes update for one detected sensor atom: p(n) <- p(n) * pi_s(j | n)."""
    return _finish(p * sensor_weights(phi_r, params)[j], p)


def update_actuator(p: np.ndarray, j: int, k: int, t: float,
                    params: PhysicsParams, calib: ActuatorCalibration) -> np.ndarray:
    """Bayes update for one detected actuator atom prepared in j, detected in k."""
    return _finish(actuator_matrix(j, k, t, params, calib) @ p, p)


def _pair_kernel(j: int, detected: tuple[int, ...], t: float,
                 params: PhysicsParams, calib: ActuatorCalibration) -> np.ndarray:
    """Unnormalized kernel for two sequential same-``j`` atoms of duration t each.

    Sums the ordered outcome pairs consistent with the detected multiset;
    with one detection the two position assignments are both counted, so the
    caller's per-mask detection factor applies once.
    """
    k1 = [actuator_matrix(j, k, t, params, calib) for k in (0, 1)]
    t1 = k1[0] + k1[1]
    if len(detected) == 0:
        return t1 @ t1
    if len(detected) == 1:
        d = detected[0]
        return t1 @ k1[d] + k1[d] @ t1
    a, b = sorted(detected)
    out = k1[b] @ k1[a]
    if a != b:
        out = out + k1[a] @ k1[b]
    return out


def two_atom_update(p: np.ndarray, j: int, detected: tuple[int, ...], t: float,
                    params: PhysicsParams, calib: ActuatorCalibration) -> np.ndarray:
    """Posterior under the two-atom hypothesis, given 0, 1 or 2 detections.

    The pair is modeled as two sequential single-atom crossings of the full
    duration t, which keeps the simultaneous two-photon channel.
    """
    return _finish(_pair_kernel(j, tuple(detected), t, params, calib) @ p, p)


def update_no_detection(p: np.ndarray, ann: SampleAnnouncement,
                        params: PhysicsParams, calib: ActuatorCalibration) -> np.ndarray:
    """Update for a sample from which no atom was detected.

    Sensors carry no information when undetected.  For actuators the
    posterior mixes the empty, one-atom and two-atom hypotheses with weights
    q_a * (1 - eta_d)^a, folding each hypothesis' outcome-averaged kernel
    into one unnormalized sum.
    """
    if ann.role in (ROLE_SENSOR, ROLE_OFF) or not ann.resonant:
        return p.copy()
    j, t = ann.j, ann.t_int
    q0, q1, q2 = occupancy_weights(params.m_control)
    miss = 1.0 - params.eta_d
    k1 = [actuator_matrix(j, k, t, params, calib) for k in (0, 1)]
    t1 = k1[0] + k1[1]
    weights = q0 * p + (q1 * miss) * (t1 @ p) + (q2 * miss * miss) * (t1 @ (t1 @ p))
    return _finish(weights, p)


def update_partial_detection(p: np.ndarray, ann: SampleAnnouncement,
                             params: PhysicsParams, calib: ActuatorCalibration) -> np.ndarray:
    """Update for an actuator sample with one detected atom out of possibly two.

    Mixes the one-atom hypothesis (the detected atom was alone) with the
    two-atom hypothesis (one atom was missed), each with its Bayes weight;
    the missed atom's outcomes are averaged with their own likelihoods.
    """
    if len(ann.detected) != 1:
        raise ValueError("update_partial_detection expects exactly one detected atom")
    if ann.role in (ROLE_SENSOR, ROLE_OFF) or not ann.resonant:
        if ann.role == ROLE_SENSOR:
            return update_sensor(p, ann.detected[0], ann.phi_r, params)
        return p.copy()
    j, t, d = ann.j, ann.t_int, ann.detected[0]
    q0, q1, q2 = occupancy_weights(params.m_control)
    eta = params.eta_d
    single = actuator_matrix(j, d, t, params, calib) @ p
    pair = _pair_kernel(j, (d,), t, params, calib) @ p
    weights = (q1 * eta) * single + (q2 * eta * (1.0 - eta)) * pair
    return _finish(weights, p)


def update_relaxation(p: np.ndarray, dt: float, params: PhysicsParams) -> np.ndarray:
    """Damp the distribution towards thermal equilibrium for a time dt."""
    if dt == 0.0:
        return p.copy()
    return _finish(relaxation_propagator(dt, params) @ p, p)


def trace_kernel(role: str, t: float | None, params: PhysicsParams,
                 calib: ActuatorCalibration) -> np.ndarray:
    """Outcome- and occupancy-averaged kernel of one committed, undetected sample.

    Sensors and off-resonant samples leave the distribution unchanged on
    average; resonant actuators mix the empty/one/two-atom marginal kernels.
    """
    dim = params.n_max + 1
    if role in (ROLE_SENSOR, ROLE_OFF):
        return np.eye(dim)
    j = ROLE_PREPARED[role]
    q0, q1, q2 = occupancy_weights(params.m_control)
    scale = q0 + q1 + q2
    k1 = [actuator_matrix(j, k, t, params, calib) for k in (0, 1)]
    t1 = k1[0] + k1[1]
    return (q0 * np.eye(dim) + q1 * t1 + q2 * (t1 @ t1)) / scale


def trace_pending(p: np.ndarray, pending: list[SampleAnnouncement],
                  params: PhysicsParams, calib: ActuatorCalibration) -> np.ndarray:
    """Average out the unknown outcomes of in-flight samples, oldest first."""
    out = p
    touched = False
    for ann in pending:
        if ann.role in (ROLE_SENSOR, ROLE_OFF) or not ann.resonant:
            continue
        out = trace_kernel(ann.role, ann.t_int, params, calib) @ out
        touched = True
    if not touched:
        return p.copy()
    return _finish(out, p)


def apply_announcement(p: np.ndarray, ann: SampleAnnouncement,
                       params: PhysicsParams, calib: ActuatorCalibration) -> np.ndarray:
    """Dispatch one detection record to the appropriate update rule."""
    if ann.role in (ROLE_SENSOR, ROLE_OFF) or not ann.resonant:
        out = p
        if ann.role == ROLE_SENSOR:
            for d in ann.detected:
                out = update_sensor(out, d, ann.phi_r, params)
        return out.copy() if out is p else out
    n_det = len(ann.detected)
    if n_det == 0:
        return update_no_detection(p, ann, params, calib)
    if n_det == 1:
        return update_partial_detection(p, ann, params, calib)
    return two_atom_update(p, ann.j, ann.detected, ann.t_int, params, calib)


def distance(p: np.ndarray, n_t: int) -> float:
    """Squared spread of p around the target: sum_n (n - n_t)^2 p(n)."""
    n = np.arange(len(p))
    return float(((n - n_t) ** 2 * p).sum())
