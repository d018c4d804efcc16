"""Ground-truth stochastic simulation of the cavity and the atom stream.

The plant tracks what the loop cannot observe directly: the true photon
number, the atom count of every sample, the atomic outcomes of each
crossing, the detector's thinning, and the flight pipeline that delays
detections.  Each trajectory carries its own generator seeded from the
master seed and the trajectory index, so runs are reproducible bit for bit
regardless of how trajectories are scheduled.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .params import ActuatorCalibration, PhysicsParams
from .physics import actuator_likelihood, sensor_likelihood


@dataclass
class PlantState:
    """True cavity state plus this trajectory's random stream."""

    n_true: int
    rng: np.random.Generator
    reflections: int = 0   # emissions clipped at the truncation edge


def make_rng(master_seed: int, trajectory_index: int) -> np.random.Generator:
    """Per-trajectory generator; (master, index) fully determines the stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, trajectory_index])))


def sample_occupancy(m: float, rng: np.random.Generator) -> int:
    """Number of atoms in one sample: Poisson(m) with the >=2 tail folded into 2."""
    if m < 0:
        raise ValueError("mean atom number must be nonnegative")
    if m == 0.0:
        return 0
    return min(int(rng.poisson(m)), 2)


def evolve_cavity(n_true: int, dt: float, params: PhysicsParams,
                  rng: np.random.Generator) -> int:
    """Jump-process evolution of the photon number over an interval dt.

    Exact event-time sampling of the birth-death process: downward jumps at
    n*(1+n_th)/T_c, upward at n_th*(n+1)/T_c (none out of n_max).  Several
    jumps per interval are allowed.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    t = 0.0
    n = n_true
    inv_tc = 1.0 / params.t_cavity
    while True:
        down = n * (1.0 + params.n_thermal) * inv_tc
        up = params.n_thermal * (n + 1) * inv_tc if n < params.n_max else 0.0
        total = down + up
        if total <= 0.0:
            return n
        t += rng.exponential(1.0 / total)
        if t >= dt:
            return n
        n = n - 1 if rng.random() < down / total else n + 1


def interact_sensor_true(n_true: int, phi_r: float, params: PhysicsParams,
                         rng: np.random.Generator) -> int:
    """Sample the detected state of one dispersive sensor atom; the field is untouched."""
    p_e = sensor_likelihood(0, n_true, phi_r, params)
    p_g = sensor_likelihood(1, n_true, phi_r, params)
    return 0 if rng.random() < p_e / (p_e + p_g) else 1


def interact_actuator_true(n_true: int, j: int, t: float, params: PhysicsParams,
                           calib: ActuatorCalibration,
                           rng: np.random.Generator) -> tuple[int, int]:
    """Sample one resonant atom's exit state and the resulting photon number.

    A flip e->g deposits a photon, g->e removes one.  An emission that would
    leave the truncated space is reflected onto n_max (callers may count the
    event; it is negligible with target headroom).
    """
    p_same = actuator_likelihood(j, j, n_true, t, params, calib)
    p_flip = actuator_likelihood(j, 1 - j, n_true, t, params, calib)
    k = j if rng.random() < p_same / (p_same + p_flip) else 1 - j
    n_new = min(n_true + (k - j), params.n_max)
    return k, n_new


def detect(outcomes: tuple[int, ...], eta_d: float,
           rng: np.random.Generator) -> tuple[int, ...]:
    """Thin the atomic outcomes by the detection efficiency; reported unordered."""
    return tuple(sorted(o for o in outcomes if rng.random() < eta_d))


def new_pipeline(delay_depth: int) -> deque:
    """FIFO of samples between preparation and detection, prefilled with empties."""
    return deque([None] * delay_depth, maxlen=max(delay_depth, 1) if delay_depth else 0)


def pipeline_step(pipeline: deque, new_sample):
    """Push a freshly prepared sample, pop the one whose detection is due.

    With delay_depth = 0 the sample is returned immediately (degenerate test
    mode); otherwise the pipeline always holds exactly delay_depth samples
    and a sample exits delay_depth rounds after entering.
    """
    if pipeline.maxlen == 0:
        return new_sample
    exiting = pipeline.popleft()
    pipeline.append(new_sample)
    return exiting
