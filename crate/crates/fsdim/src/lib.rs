//! Finite-state dimension toolkit for binary sequences.
//!
//! The crate simulates deterministic binary automata as fair Markov chains
//! (every state has two outgoing transitions labeled 0 and 1, each taken with
//! probability 1/2), records the empirical joint distributions of
//! (state, transition) visits along a run, and turns those distributions into
//! information quantities:
//!
//! - the conditional Kullback–Leibler divergence of an empirical joint
//!   against the fair reference, which against fair odds equals
//!   `1 - H(E | Q)` in bits;
//! - per-chain and per-family estimates of finite-state dimension and
//!   finite-state strong dimension (`1` exactly for Borel-normal sequences);
//! - stationary distributions, state-distribution gaps, and selector rates
//!   `λ_S` (the stationary mass of the selecting states);
//! - finite-state martingale capital traces in the log domain, including the
//!   witness bettor built from an empirical joint and multi-account runs.
//!
//! The family estimators are finite surrogates: a finite chain family
//! under-approximates the supremum over all fair irreducible chains, so every
//! reported value is an upper bound on the true dimension. Reports carry the
//! checkpoint schedule and cluster tolerance that produced them.
//!
//! Modules follow the pipeline order: [`sequence`] produces bit streams,
//! [`machine`] parses and analyzes automata, [`markov`] solves induced
//! chains, [`empirical`] records runs, [`infotheory`] holds the formula
//! layer, [`dimension`] estimates, and [`selection`] applies selectors and
//! evaluates the λ-weighted selection inequality.

pub mod dimension;
pub mod empirical;
pub mod infotheory;
pub mod machine;
pub mod markov;
pub mod selection;
pub mod sequence;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("source exhausted: requested {requested} bits but only {available} available")]
    SourceExhausted { requested: u64, available: u64 },

    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid bit character {found:?} at offset {offset} in {context}")]
    BadBitChar {
        context: String,
        offset: usize,
        found: char,
    },

    #[error("invalid source spec {spec:?}: {reason}")]
    BadSourceSpec { spec: String, reason: String },

    #[error("line {line}: {message}")]
    MachineSpec { line: usize, message: String },

    #[error("missing transition: state {state:?} has no transition on bit {bit}")]
    MissingTransition { state: String, bit: u8 },

    #[error("machine has no betting function")]
    MissingBetting,

    #[error("machine has no selecting set")]
    MissingSelecting,

    #[error("missing bet for state {state:?}")]
    MissingBet { state: String },

    #[error("run on prefix ends in state {state:?}, which is not in an ergodic set")]
    NotInErgodicSet { state: String },

    #[error("chain is reducible: {ergodic_sets} ergodic sets")]
    ReducibleChain { ergodic_sets: usize },

    #[error("chain member {name:?} is reducible")]
    ReducibleMember { name: String },

    #[error("matrix dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("row {row} of transition matrix sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("stationary linear system is singular")]
    SingularSystem,

    #[error("checkpoint {checkpoint} exceeds input length {len}")]
    CheckpointBeyondInput { checkpoint: u64, len: u64 },

    #[error("word length {n} exceeds the supported maximum of {max}")]
    WordTooLong { n: u32, max: u32 },

    #[error("invalid distribution: {reason}")]
    BadDistribution { reason: String },

    #[error("invalid chain family spec {spec:?}: {reason}")]
    BadFamilySpec { spec: String, reason: String },

    #[error("chain family is empty")]
    EmptyFamily,

    #[error("degenerate selector: {which} states are selecting in the ergodic set")]
    DegenerateSelector { which: &'static str },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
