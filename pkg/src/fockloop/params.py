"""Physical constants, target settings and actuator calibration.

All times are in seconds, frequencies in rad/s, phases in radians.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicsParams:
    """Constants of the cavity, the atom samples and the loop schedule."""

    t_cavity: float = 65e-3        # cavity energy lifetime
    n_thermal: float = 0.05        # mean blackbody photon number
    t_sample: float = 82e-6        # sample repetition interval
    omega0: float = TWO_PI * 47.9e3  # vacuum Rabi frequency
    phi0: float = 0.252 * math.pi  # dispersive phase shift per photon
    eta_d: float = 0.25            # detection efficiency
    m_sensor: float = 1.3          # mean atoms per sensor sample
    m_control: float = 0.5         # mean atoms per control sample
    n_sensors: int = 12            # sensor samples per loop
    n_controls: int = 4            # control samples per loop
    b_s: float = 0.02              # sensor fringe offset
    c_s: float = 0.75              # sensor fringe contrast
    n_max: int = 12                # photon-number truncation
    delay_depth: int = 4           # samples in flight between preparation and detection

    def __post_init__(self):
        errors = []
        for name in ("t_cavity", "t_sample", "omega0", "phi0"):
            if getattr(self, name) <= 0:
                errors.append(f"{name} must be strictly positive")
        if not 0.0 <= self.eta_d <= 1.0:
            errors.append("eta_d must lie in [0, 1]")
        if not 0.0 <= self.c_s <= 1.0:
            errors.append("c_s must lie in [0, 1]")
        if self.m_sensor < 0 or self.m_control < 0:
            errors.append("mean atom numbers must be nonnegative")
        if self.n_max < 1:
            errors.append("n_max must be at least 1")
        if self.n_sensors < 1 or self.n_controls < 1:
            errors.append("n_sensors and n_controls must be at least 1")
        if self.delay_depth < 0:
            errors.append("delay_depth must be nonnegative")
        if errors:
            raise ValueError("; ".join(errors))
        if self.t_sample / self.t_cavity > 0.01:
            warnings.warn(
                "t_sample/t_cavity = %.3g exceeds 0.01; per-interval damping "
                "is no longer small" % (self.t_sample / self.t_cavity),
                stacklevel=2,
            )

    @property
    def dim(self) -> int:
        """Size of the truncated photon-number space."""
        return self.n_max + 1


@dataclass
class ActuatorCalibration:
    """Per-photon-number contrast and phase offset of the resonant Rabi law.

    The loop never measures a perfect Rabi fringe; its visibility drops with
    photon number and the fringe may be slightly offset.  Both effects are
    carried here as tables indexed by the photon number seen by the atom at
    the start of its resonant crossing.
    """

    contrast: np.ndarray  # c(n), entries in [0, 1]
    phase: np.ndarray     # fringe offset beta(n), radians

    def __post_init__(self):
        self.contrast = np.asarray(self.contrast, dtype=float)
        self.phase = np.asarray(self.phase, dtype=float)
        if self.contrast.shape != self.phase.shape or self.contrast.ndim != 1:
            raise ValueError("contrast and phase tables must be 1-d and of equal length")
        if np.any(self.contrast < 0) or np.any(self.contrast > 1):
            raise ValueError("contrast values must lie in [0, 1]")

    @classmethod
    def default(cls, n_max: int, c0: float = 0.9, n_scale: float = 20.0) -> "ActuatorCalibration":
        """Parametric stand-in for measured fringes: c(n) = c0*exp(-n/n_scale), zero offset."""
        n = np.arange(n_max + 1)
        return cls(contrast=c0 * np.exp(-n / n_scale), phase=np.zeros(n_max + 1))

    @classmethod
    def ideal(cls, n_max: int) -> "ActuatorCalibration":
        """Unit contrast, zero offset; the textbook Rabi law."""
        return cls(contrast=np.ones(n_max + 1), phase=np.zeros(n_max + 1))

    @classmethod
    def from_file(cls, path, n_max: int) -> "ActuatorCalibration":
        """Load a table of rows ``n, contrast, phase_offset_rad``.

        Rows must cover n = 0..n_max with strictly increasing n.  Comma or
        whitespace delimited; blank lines and '#' comments are skipped.
        """
        contrast = {}
        phase = {}
        expect = 0
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = [p for p in line.replace(",", " ").split() if p]
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 'n, contrast, phase_offset_rad'")
                n = int(parts[0])
                if n != expect:
                    raise ValueError(
                        f"{path}:{lineno}: rows must have strictly increasing n from 0 (got {n}, expected {expect})"
                    )
                contrast[n] = float(parts[1])
                phase[n] = float(parts[2])
                expect += 1
        if expect <= n_max:
            raise ValueError(f"{path}: table ends at n={expect - 1}, needs n up to {n_max}")
        n = np.arange(n_max + 1)
        return cls(contrast=np.array([contrast[i] for i in n]),
                   phase=np.array([phase[i] for i in n]))


def wrap_angle(x: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    y = math.fmod(x + math.pi, TWO_PI)
    if y <= 0.0:
        y += TWO_PI
    return y - math.pi


def sensor_phase(n_t: int, phi0: float) -> float:
    """Interferometer phase pi/2 - phi0*n_t, reduced to (-pi, pi].

    Centers the steepest part of the sensor fringe on the target photon
    number, where one detected atom discriminates best between neighbours.
    """
    return wrap_angle(math.pi / 2.0 - phi0 * n_t)


@dataclass(frozen=True)
class TargetSpec:
    """A target photon number and the settings derived from it."""

    n_t: int
    phi_r: float   # Ramsey phase giving maximal fringe slope at the target
    t_e: float     # emitter resonant interaction time
    t_g: float     # absorber resonant interaction time

    @classmethod
    def for_target(cls, n_t: int, params: PhysicsParams,
                   t_e: float | None = None, t_g: float | None = None) -> "TargetSpec":
        if not 1 <= n_t <= params.n_max - 4:
            raise ValueError(
                f"target n_t={n_t} outside [1, {params.n_max - 4}] "
                "(headroom above the target is required)"
            )
        phi_r = sensor_phase(n_t, params.phi0)
        if t_e is None:
            t_e = 1.6 * math.pi / (params.omega0 * math.sqrt(n_t + 1.0))
        if t_g is None:
            t_g = 2.4 * math.pi / (params.omega0 * math.sqrt(float(n_t)))
        return cls(n_t=n_t, phi_r=phi_r, t_e=t_e, t_g=t_g)
