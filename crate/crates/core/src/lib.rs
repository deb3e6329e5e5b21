//! Controllability analysis and pulse synthesis for truncated bilinear
//! quantum control models.
//!
//! The crate builds skew-Hermitian control operators for several coupled
//! spin/oscillator families, decides finite controllability from the
//! structure of their transfer graphs, estimates Lie-closure dimensions with
//! truncation-safe interior windows, synthesizes explicit piecewise-constant
//! pulse sequences that route finite superpositions through the ground pass
//! state, and verifies every claim by exact unitary simulation.

pub mod error;
pub mod evolution;
pub mod graph;
pub mod lie;
pub mod models;
pub mod numeric;
pub mod report;
pub mod synthesis;

pub use error::{Error, Result};
pub use evolution::{
    apply_pulse, drive_oscillator, fit_coherent, l0_escape_demo, simulate, simulate_traced,
    SimulationReport,
};
pub use graph::{
    build_transfer_graph, check_matching, fct_verdict, ControllabilityVerdict, TransferGraph,
};
pub use lie::{bracket, closure, verify_lemma, ClosureOptions, LieClosureReport};
pub use models::{
    build_operators, coupling, laguerre, BasisState, ControlOperator, Family, Scheme, SpinState,
    SystemModel,
};
pub use numeric::{expm_skew, fidelity, givens_zero, orthonormal_rank, CMatrix, CVector, C64};
pub use synthesis::{invert, sweep_to_ground, transfer, Pulse, PulseSequence};
