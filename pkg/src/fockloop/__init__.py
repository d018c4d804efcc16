"""Simulator of a photon-number stabilizing feedback loop.

A stream of atom samples alternates between dispersive sensors (quantum
non-demolition readout of the photon number) and resonant single-photon
actuators (emitters and absorbers).  A Bayesian filter tracks the photon
number distribution from the sparse detections; a controller picks, for
every control sample, the mode minimizing the expected squared distance to
the target Fock state, and an ensemble runner reproduces trajectory- and
ensemble-level statistics.
"""

from .controller import (
    Decision,
    LoopState,
    PipelineView,
    decide,
    schedule_next,
    sensor_phase,
    stop_rule,
    target_sequencer,
)
from .estimator import (
    ROLE_ABSORBER,
    ROLE_EMITTER,
    ROLE_OFF,
    ROLE_SENSOR,
    InconsistentOutcomeWarning,
    SampleAnnouncement,
    apply_announcement,
    distance,
    occupancy_weights,
    trace_pending,
    two_atom_update,
    update_actuator,
    update_no_detection,
    update_partial_detection,
    update_relaxation,
    update_sensor,
    vacuum_state,
)
from .kernels import KernelCache
from .params import ActuatorCalibration, PhysicsParams, TargetSpec, wrap_angle
from .physics import (
    actuator_likelihood,
    actuator_matrix,
    relaxation_generator,
    relaxation_propagator,
    sensor_likelihood,
    sensor_weights,
    thermal_distribution,
)
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
from .runner import (
    ConfigError,
    ExperimentConfig,
    TrajectoryLog,
    poisson_pmf,
    run_ensemble,
    run_sequence,
    run_sweep,
    run_trajectory,
    write_outputs,
)

__version__ = "0.1.0"
