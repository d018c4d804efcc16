"""Conditional probabilities shared by the plant and the estimator.

Conventions: atomic states are encoded as j, k = 0 for |e> and 1 for |g>.
Emitters are prepared in e (j=0), absorbers in g (j=1).  A resonant
crossing couples |e, n> to |g, n+1>, so an atom flipping e->g adds a
photon and g->e removes one: the photon number changes by k - j.
"""

from __future__ import annotations

import math

import numpy as np

from .params import ActuatorCalibration, PhysicsParams


def sensor_likelihood(j: int, n: int, phi_r: float, params: PhysicsParams) -> float:
    """Probability of detecting a dispersive sensor atom in state j with n photons.

    Returns (1 + j*b_s + c_s*cos(phi0*n + phi_r - j*pi)) / 2.  The pair
    (j=0, j=1) sums to 1 + b_s/2: the offset makes the raw values
    unnormalized.  The plant normalizes the pair before sampling; the
    estimator can use the raw values directly as Bayes weights because the
    excess is independent of n.
    """
    if j not in (0, 1):
        raise ValueError(f"atomic state j must be 0 (e) or 1 (g), got {j}")
    if not 0 <= n <= params.n_max:
        raise ValueError(f"photon number n={n} outside [0, {params.n_max}]")
    return 0.5 * (1.0 + j * params.b_s
                  + params.c_s * math.cos(params.phi0 * n + phi_r - j * math.pi))


def sensor_weights(phi_r: float, params: PhysicsParams) -> np.ndarray:
    """Raw sensor likelihoods for both outcomes, shape (2, n_max+1)."""
    n = np.arange(params.n_max + 1)
    out = np.empty((2, params.n_max + 1))
    for j in (0, 1):
        out[j] = 0.5 * (1.0 + j * params.b_s
                        + params.c_s * np.cos(params.phi0 * n + phi_r - j * math.pi))
    return out


def actuator_likelihood(j: int, k: int, m: int, t: float,
                        params: PhysicsParams, calib: ActuatorCalibration) -> float:
    """Probability that a resonant atom prepared in j exits in k, starting from m photons.

    Calibrated Rabi law {1 + c(m)*cos[omega0*t*sqrt(r) + (j-k)*pi + beta(m)]}/2
    with ladder index r = m - j + 1 (emitters oscillate at sqrt(m+1), absorbers
    at sqrt(m)).  An absorber meeting the vacuum has no transition available
    and stays in g with certainty, whatever the calibration says.
    """
    if j not in (0, 1) or k not in (0, 1):
        raise ValueError(f"atomic states must be 0 (e) or 1 (g), got j={j}, k={k}")
    if m < 0:
        raise ValueError(f"photon number m={m} must be nonnegative")
    r = m - j + 1
    if r == 0:
        return 1.0 if k == j else 0.0
    phase = params.omega0 * t * math.sqrt(r) + (j - k) * math.pi + calib.phase[m]
    return 0.5 * (1.0 + calib.contrast[m] * math.cos(phase))


def actuator_flip_probs(j: int, t: float, params: PhysicsParams,
                        calib: ActuatorCalibration) -> np.ndarray:
    """P(k != j | m) for all m, shape (n_max+1,).  Complement gives P(k == j | m)."""
    m = np.arange(params.n_max + 1)
    r = m - j + 1
    phase = params.omega0 * t * np.sqrt(np.maximum(r, 0)) + calib.phase
    flip = 0.5 * (1.0 - calib.contrast * np.cos(phase))
    flip[r == 0] = 0.0
    return flip


def actuator_matrix(j: int, k: int, t: float, params: PhysicsParams,
                    calib: ActuatorCalibration) -> np.ndarray:
    """Unnormalized Bayes kernel for one detected actuator atom.

    Maps a pre-crossing distribution to the post-crossing weights for
    outcome (j, k): entry [n, m] is pi_a(j, k | m) when n = m + k - j and 0
    otherwise.  Transitions leaving [0, n_max] are dropped.
    """
    dim = params.n_max + 1
    flip = actuator_flip_probs(j, t, params, calib)
    out = np.zeros((dim, dim))
    shift = k - j
    for m in range(dim):
        n = m + shift
        if 0 <= n < dim:
            out[n, m] = flip[m] if k != j else 1.0 - flip[m]
    return out


def relaxation_generator(params: PhysicsParams) -> np.ndarray:
    """Birth-death generator of cavity damping on column probability vectors.

    Downward rate n*(1+n_th)/T_c, upward rate n_th*(n+1)/T_c; the upward
    rate out of n_max is zero so probability stays on the truncated space.
    Columns sum to zero and the stationary state is thermal with mean n_th.
    """
    dim = params.n_max + 1
    gen = np.zeros((dim, dim))
    for n in range(dim):
        down = n * (1.0 + params.n_thermal) / params.t_cavity
        up = params.n_thermal * (n + 1) / params.t_cavity if n < params.n_max else 0.0
        if n > 0:
            gen[n - 1, n] = down
        if n < params.n_max:
            gen[n + 1, n] = up
        gen[n, n] = -(down + up)
    return gen


def relaxation_propagator(dt: float, params: PhysicsParams) -> np.ndarray:
    """Propagator exp(L*dt), as a second-order scheme with 4 substeps per t_sample.

    One substep applies I + h*L + (h*L)^2/2 (midpoint rule, exact to second
    order); longer intervals raise the substep count proportionally so the
    local error stays below 1e-9.  Columns sum to one up to roundoff.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    dim = params.n_max + 1
    if dt == 0.0:
        return np.eye(dim)
    n_sub = 4 * max(1, math.ceil(dt / params.t_sample))
    h = dt / n_sub
    gen = relaxation_generator(params)
    step = np.eye(dim) + h * gen + 0.5 * (h * h) * (gen @ gen)
    return np.linalg.matrix_power(step, n_sub)


def thermal_distribution(params: PhysicsParams) -> np.ndarray:
    """Bose-Einstein photon distribution with mean n_thermal on the truncated space."""
    ratio = params.n_thermal / (1.0 + params.n_thermal)
    p = ratio ** np.arange(params.n_max + 1)
    return p / p.sum()
