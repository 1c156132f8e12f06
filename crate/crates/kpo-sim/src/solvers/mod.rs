//! Time evolution: master equation, Monte-Carlo trajectories, and readout extraction.
//!
//! The module splits into an integration core and three consumers:
//!
//! - [`rk`]: adaptive Dormand-Prince 5(4) stepper with dense output, generic over the
//!   integrated quantity (wave function or density matrix).
//! - [`master`]: Lindblad evolution for both representations, with trace, Hermiticity,
//!   and positivity monitored at every output sample.
//! - [`trajectories`]: Monte-Carlo wave-function unraveling of the Fock-space model,
//!   reproducible per trajectory index regardless of thread scheduling.
//! - [`observables`]: outcome bases, expectation values, and readout-window averaging
//!   shared by both solvers.

pub mod master;
pub mod observables;
pub mod rk;
pub mod trajectories;

pub use master::{
    evolve_master, FockLindblad, IntegrityReport, LindbladOptions, LindbladRhs, MasterOutcome,
    SpinLindblad,
};
pub use observables::{
    expectation_dense, expectation_sparse, expectation_sparse_density, fock_outcome_kets,
    outcome_labels, outcome_probabilities, outcome_probabilities_pure, readout_average,
    spin_outcome_kets,
};
pub use rk::{Dopri5, StepControl};
pub use trajectories::{
    run_trajectories, EnsembleOptions, EnsembleResult, FockEffective, TrajectoryData,
};
