//! Numerical verification of phi-irreducibility, aperiodicity and the
//! T-chain property for nonlinear state-space Markov chains
//! `X_{k+1} = F(X_k, a(X_k, U_{k+1}))`, by analyzing the underlying
//! deterministic control model.
//!
//! The toolkit checks the practical sufficient conditions numerically:
//!
//! * the rank of the generalized controllability matrix at a candidate
//!   state ([`diff`]),
//! * globally / steadily attracting certificates built from verified
//!   k-steps paths ([`attract`]),
//! * gcd-based period evidence from return-path lengths ([`attract`] and
//!   [`simulate`]).
//!
//! Three worked models ship with analytic densities ([`models`]): the
//! additive Gaussian random walk, a selection-based random walk, and the
//! normalized chain of a step-size adaptive evolution strategy. A
//! simulation harness ([`simulate`]) validates densities against samplers
//! and estimates the linear convergence rate by two independent routes.
//!
//! Everything is evidence, not proof: certificates record concrete control
//! sequences that re-validate against the model operations, and every
//! verdict carries that caveat.
//!
//! The crate is `no_std` (with `alloc`); IO, configuration and the command
//! line live in the companion `chainverifier-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attract;
pub mod diff;
pub mod dual;
pub mod error;
pub mod linalg;
pub mod model;
pub mod models;
pub mod simulate;
pub mod stats;

pub use attract::{
    assemble_verdict, certify_fixed_point, certify_globally_attracting,
    certify_steadily_attracting, find_path, return_lengths, steadily_via_fixed_point,
    AttractivityCertificate, AttractivityKind, Conclusion, PathCertificate, ReturnLengthSet,
    SearchBudget, SearchFailure, StabilityVerdict, VERDICT_CAVEAT,
};
pub use diff::{
    controllability_matrix, fd_path_jacobian, find_rank_witness, jacobian_w, jacobian_x,
    rank_condition, rank_evidence, ControllabilityMatrix, JacobianMethod, RankEvidence,
};
pub use dual::Dual;
pub use error::{CoreError, Result};
pub use linalg::{numeric_rank, Matrix, RankReport, DEFAULT_RANK_REL_TOL};
pub use model::{
    extended_density, extended_log_density, extended_transition, in_control_set, is_path, step,
    transition_along, ControlBlock, ControlSequence, Model, StateVector,
};
pub use models::{
    check_scaling_invariance, q_value, q_value_monte_carlo, select_candidates, selection_density,
    selection_density_mass, sphere_q_exact, AlternatingModel, FrozenModel, Objective,
    ObjectiveKind, QEstimate, RandomWalk, ScalingCheck, SelectionOutcome, SelectionWalk,
    XnesChain, XnesParams, DEFAULT_Q_SAMPLES,
};
pub use simulate::{
    empirical_density_check, empirical_return_periods, run_chain, xnes_convergence_rate,
    DensityCheck, DensityCheckMode, RateEstimate, ReturnPeriods, Trajectory,
};
pub use stats::{derive_seed, gcd, gcd_of, halton_box};
