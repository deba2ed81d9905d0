"""Pilot-wave trajectory simulations and center-of-mass classicality
experiments on 1D grids."""

__version__ = "0.1.0"

from .grid import (GaussianPacketSpec, Grid1D, PotentialSpec, WaveFunction1D,
                   make_gaussian, make_two_packet, quantile_positions,
                   quantum_potential, sample_positions)
from .tdse import EvolutionRecord, PropagatorCN, evolve, stationary_state
from .bohm import (CatStateSpec, ProductStateSpec, SymmetrizedModesSpec,
                   TrajectoryEnsemble, equivariance_check,
                   integrate_trajectories, marginal_vs_experiment_distance,
                   sequential_conditional_sample, velocity_field)
from .manybody import (ComConvergenceConfig, ComConvergenceResult,
                       SingleParticleBasis, TwoPacketSpec, bosonic_velocities,
                       distinguishable_velocities, permanent,
                       run_com_convergence, symmetrized_value_and_gradient)
from .com_analysis import (ComSeries, ErrorBudget, com_of_ensemble,
                           com_of_experiment, free_packet_sigma,
                           newton_reference, phi_normal, phi_normal_inv,
                           required_error, required_particles, worked_example)
from .classical import (ClassicalPropagator, classical_evolve, classical_step,
                        classical_trajectories,
                        quantum_potential_gradient_identity)
from .coords import (CoordChange, build_coord_change, cancellation_factors,
                     laplacian_identity_residual, v_cm_reduction)

__all__ = [name for name in dir() if not name.startswith("_")]
