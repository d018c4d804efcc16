"""Precomputed update matrices for the per-interval loop.

Every estimator update is linear in p, so each (role, interaction time,
detection pattern) has a fixed matrix.  Building them once per trajectory
keeps the inner loop at a handful of small mat-vecs.  All matrices are
assembled from the same likelihood code the standalone estimator
operations use.
"""

from __future__ import annotations

import numpy as np

from .estimator import (
    ROLE_ABSORBER,
    ROLE_EMITTER,
    ROLE_OFF,
    ROLE_SENSOR,
    SampleAnnouncement,
    _pair_kernel,
    occupancy_weights,
)
from .params import ActuatorCalibration, PhysicsParams
from .physics import actuator_matrix, relaxation_propagator, sensor_weights

_ZERO_WEIGHT = 1e-300


class ActuatorKernels:
    """All update matrices for one actuator role at one interaction time."""

    def __init__(self, j: int, t: float, params: PhysicsParams, calib: ActuatorCalibration):
        dim = params.n_max + 1
        eye = np.eye(dim)
        q0, q1, q2 = occupancy_weights(params.m_control)
        eta = params.eta_d
        miss = 1.0 - eta
        k1 = [actuator_matrix(j, k, t, params, calib) for k in (0, 1)]
        t1 = k1[0] + k1[1]
        t2 = t1 @ t1
        # detection-conditioned kernels, unnormalized
        self.none_detected = q0 * eye + (q1 * miss) * t1 + (q2 * miss * miss) * t2
        self.one_detected = [
            (q1 * eta) * k1[d] + (q2 * eta * miss) * _pair_kernel(j, (d,), t, params, calib)
            for d in (0, 1)
        ]
        self.two_detected = {
            pair: _pair_kernel(j, pair, t, params, calib)
            for pair in ((0, 0), (0, 1), (1, 1))
        }
        # outcome-averaged kernel of a committed, undetected sample
        self.trace = (q0 * eye + q1 * t1 + q2 * t2) / (q0 + q1 + q2)


class KernelCache:
    """Lazy store of update matrices, keyed by role and interaction time."""

    def __init__(self, params: PhysicsParams, calib: ActuatorCalibration):
        self.params = params
        self.calib = calib
        dim = params.n_max + 1
        self._relax_pow = {0: np.eye(dim), 1: relaxation_propagator(params.t_sample, params)}
        self._actuators: dict[tuple[int, float], ActuatorKernels] = {}
        self._sensors: dict[float, np.ndarray] = {}
        self.inconsistent = 0

    def relax_pow(self, k: int) -> np.ndarray:
        """Relaxation propagator over k sample intervals."""
        got = self._relax_pow.get(k)
        if got is None:
            got = self.relax_pow(k - 1) @ self._relax_pow[1]
            self._relax_pow[k] = got
        return got

    def actuator(self, role: str, t: float) -> ActuatorKernels:
        j = 0 if role == ROLE_EMITTER else 1
        key = (j, t)
        got = self._actuators.get(key)
        if got is None:
            got = ActuatorKernels(j, t, self.params, self.calib)
            self._actuators[key] = got
        return got

    def sensor(self, phi_r: float) -> np.ndarray:
        got = self._sensors.get(phi_r)
        if got is None:
            got = sensor_weights(phi_r, self.params)
            self._sensors[phi_r] = got
        return got

    def _finish(self, weights: np.ndarray, fallback: np.ndarray) -> np.ndarray:
        total = weights.sum()
        if not total > _ZERO_WEIGHT:
            self.inconsistent += 1
            return fallback
        return weights / total

    def apply_announcement(self, p: np.ndarray, ann: SampleAnnouncement) -> np.ndarray:
        """Matrix-path equivalent of estimator.apply_announcement."""
        if ann.role in (ROLE_SENSOR, ROLE_OFF) or not ann.resonant:
            if ann.role == ROLE_SENSOR and ann.detected:
                w = p.copy()
                table = self.sensor(ann.phi_r)
                for d in ann.detected:
                    w *= table[d]
                return self._finish(w, p)
            return p
        kern = self.actuator(ann.role, ann.t_int)
        n_det = len(ann.detected)
        if n_det == 0:
            mat = kern.none_detected
        elif n_det == 1:
            mat = kern.one_detected[ann.detected[0]]
        else:
            mat = kern.two_detected[tuple(sorted(ann.detected))]
        return self._finish(mat @ p, p)

    def trace_matrix(self, role: str, t: float | None) -> np.ndarray | None:
        """Trace kernel of one pending sample; None when it is the identity."""
        if role in (ROLE_SENSOR, ROLE_OFF):
            return None
        return self.actuator(role, t).trace
