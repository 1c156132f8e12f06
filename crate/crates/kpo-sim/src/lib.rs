//! Simulator for quantum annealing with networks of Kerr parametric oscillators (KPOs).
//!
//! Each KPO is a two-photon-pumped nonlinear oscillator whose steady manifold is spanned
//! by a pair of opposite-phase coherent states. A network of such oscillators anneals
//! from vacuum into a classical spin configuration encoded in the phases; this crate
//! simulates that process in two representations and compares them:
//!
//! - a full truncated-Fock-space model (Lindblad master equation or Monte-Carlo wave
//!   function trajectories), and
//! - a reduced spin-1/2 model obtained by projecting every oscillator onto its pair of
//!   cat states, with amplitude trajectories estimated analytically or variationally.
//!
//! The crate is organized around runnable examples; each major capability has one:
//!
//! | example | shows |
//! |---------|-------|
//! | `projected_operators` | closed-form spin operators vs. numerical projection |
//! | `alpha_trajectory` | analytic vs. variational amplitude estimation, CSV export |
//! | `schedule_traces` | annealing schedule time profiles |
//! | `single_kpo_cat` | noiseless cat-state formation, leakage diagnostics |
//! | `trajectories_vs_master` | Monte-Carlo unraveling against the master equation |
//! | `two_kpo_transition` | two-KPO outcome transition, spin vs. Fock |
//! | `four_kpo_outcomes` | four-KPO network with a four-body coupling |
//!
//! Run one with `cargo run --release --example <name>`. The `kpo-sim` binary wraps the
//! same library entry points behind `validate` / `run` / `sweep` / `compare` / `alpha` /
//! `emit` subcommands; see the README for the config file format.
//!
//! Conventions used throughout: hbar = 1, time in microseconds, all rates and frequencies
//! in angular units (rad/us). Config files take plain cycles-based values ("X over 2 pi,
//! in MHz") and the loader multiplies by 2 pi. The Kerr coefficient is negative and the
//! annealer tracks the *highest* eigenvalue of the Hamiltonian; spin outcomes are labeled
//! by sigma-z product states, `+` mapping to the positive-phase coherent state.

pub mod error;
pub mod fock;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod solvers;
pub mod spin;

pub use error::{Error, Result};

/// Complex scalar used for every state and operator in the crate.
pub type C64 = num_complex::Complex64;
