//! Collective CHSH tests on several Werner pairs.
//!
//! Alice and Bob each hold one particle from each of `n` Werner pairs. They
//! apply local transformations to their `n` particles, test all particles
//! except the first for spin up, and keep only the runs where every test
//! succeeds. The first pair is left in a new two-qubit state whose maximal
//! CHSH value can exceed 2 even when a single Werner pair cannot.
//!
//! Modules:
//! - [`states`]: Werner states, singlets and density-matrix validation.
//! - [`protocol`]: row pairs, post-selected reduction and its closed form
//!   for XOR transformations.
//! - [`chsh`]: correlation matrix, Horodecki bound and explicit CHSH values.
//! - [`optimize`]: Powell search over row pairs, sweeps and crossovers.
//! - [`oracle`]: naive reference implementations used for cross-checks.

pub mod chsh;
mod error;
pub mod linalg;
pub mod optimize;
pub mod oracle;
pub mod protocol;
pub mod states;

pub use error::{Error, Result};

pub use chsh::{
    chsh_value, correlation_matrix, correlation_matrix_symmetric, horodecki_bound,
    xor_bound_closed_form, BellBound, CorrelationMatrix,
};
pub use optimize::{
    crossover, maximize_bound, maximize_bound_from, orthonormalize, powell_minimize, sweep,
    Crossover, OptimizationConfig, OptimizationResult, PowellOutcome, StrategyLabel, SweepRow,
    SweepStrategy,
};
pub use oracle::{
    brute_force_reduce, dense_reduce, direct_chsh_max, run_equivalence_suite, ComplexRowPair,
    EquivalenceReport, OracleReport,
};
pub use protocol::{
    assemble_composite, gauge_rotate, pair_gauge_rotate, reduce_pairs, tie_partner_rows,
    xor_reduced_closed_form, xor_rows, CompositeDensity, PartyMajorComposite, ReducedState,
    RowPair,
};
pub use states::{
    fidelity, make_singlet, make_werner, validate_density, DensityDiagnostics, SingletFraction,
    TwoQubitDensity,
};
