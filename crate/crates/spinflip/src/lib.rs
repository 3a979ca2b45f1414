//! Synthesis and analysis of microwave-driven entangling gates on
//! Rydberg-dressed neutral-atom pairs.
//!
//! An auxiliary hyperfine state |a> is optically dressed with Rydberg
//! character so that it acts as a proxy Rydberg level for a microwave
//! drive on the |1> ↔ |a> transition. The nonlinear two-atom light shift
//! J blockades the doubly-excited dressed state, and modulating the
//! microwave phase over a piecewise-constant waveform implements CZ-class
//! gates. This crate provides:
//!
//! - closed-form and small-matrix dressed-state analytics ([`dressed`]),
//! - rotating-frame Hamiltonian builders, including the optical-control
//!   baseline and the motional-noise model ([`hamiltonian`]),
//! - exact piecewise-constant propagation with non-Hermitian decay
//!   ([`propagator`]),
//! - CZ-equivalence fidelity and decay-limited figures of merit
//!   ([`metrics`]),
//! - GRAPE phase-waveform optimization and quantum-speed-limit searches
//!   ([`grape`]),
//! - ensemble robust control and sensitivity scans ([`robust`]),
//! - scripted sweep pipelines with checkpointed, deterministic output
//!   ([`experiments`]).
//!
//! Public inputs are ordinary frequencies in MHz and times in μs;
//! internally all frequencies are angular (rad/μs), converted by 2π at
//! the API boundary.

pub mod dressed;
pub mod error;
pub mod experiments;
pub mod grape;
pub mod hamiltonian;
pub mod linalg;
pub mod metrics;
pub mod propagator;
pub mod robust;
pub mod units;

pub use error::{Error, Result};
