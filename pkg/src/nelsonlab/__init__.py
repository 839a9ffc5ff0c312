"""Elastic collision kinematics, heat-bath Monte Carlo, and diffusion
ensembles whose defining identities are all executable checks."""

__version__ = "0.1.0"

from .collision import (
    CollisionEvent,
    EnergyLedger,
    EventBatch,
    MassPair,
    Projector,
    collide,
    collide_1d,
    collide_batch,
    collision_matrix,
    nelson_energy_ledger,
    total_energy,
    total_momentum,
)
from .eigenframe import (
    EigenFrame,
    MinkowskiReport,
    decompose,
    frame_check,
    minkowski_frame_residual,
    minkowski_statistical_residual,
    relativistic_mass_ratio,
    time_dilation_ratio,
)
from .heatbath import (
    BathConfig,
    StatSummary,
    correlation_for_constant_speed,
    projector_mean_estimate,
    run_bath,
    sample_bath_velocity,
    sample_correlated_bath,
    sample_events,
    sample_phi,
    sample_tau,
    single_step_moments,
)
from .nelson import (
    DiffusionConfig,
    EnsembleSnapshot,
    continuity_residual,
    drifts,
    energy_mc,
    energy_quadrature,
    evolve_ensemble,
    madelung_residual,
    osmotic_residual,
    step,
    two_particle_energy,
)
from .rng import DEFAULT_SEED, substream
from .waves import (
    WaveModel,
    free_gaussian_packet,
    harmonic_ground_state,
    harmonic_potential,
    plane_wave,
)

__all__ = [
    "BathConfig",
    "CollisionEvent",
    "DiffusionConfig",
    "DEFAULT_SEED",
    "EigenFrame",
    "EnergyLedger",
    "EnsembleSnapshot",
    "EventBatch",
    "MassPair",
    "MinkowskiReport",
    "Projector",
    "StatSummary",
    "WaveModel",
    "collide",
    "collide_1d",
    "collide_batch",
    "collision_matrix",
    "continuity_residual",
    "correlation_for_constant_speed",
    "decompose",
    "drifts",
    "energy_mc",
    "energy_quadrature",
    "evolve_ensemble",
    "frame_check",
    "free_gaussian_packet",
    "harmonic_ground_state",
    "harmonic_potential",
    "madelung_residual",
    "minkowski_frame_residual",
    "minkowski_statistical_residual",
    "nelson_energy_ledger",
    "osmotic_residual",
    "plane_wave",
    "projector_mean_estimate",
    "relativistic_mass_ratio",
    "run_bath",
    "sample_bath_velocity",
    "sample_correlated_bath",
    "sample_events",
    "sample_phi",
    "sample_tau",
    "single_step_moments",
    "step",
    "substream",
    "time_dilation_ratio",
    "total_energy",
    "total_momentum",
    "two_particle_energy",
]
