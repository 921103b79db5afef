//! Shapley values and Shapley-Taylor interaction indices for models over
//! discrete feature domains.
//!
//! Two computation backends are provided and kept in exact agreement:
//!
//! * an exact enumeration backend working on dense value-function tables, and
//! * a tensor-train (TT) backend that contracts a weight tensor built from a
//!   finite-state prefix automaton against a routed value tensor, avoiding
//!   any enumeration over the subset lattice.
//!
//! The crate is organized around the pipeline
//! `model + distribution -> value tensor -> contraction with weight slices
//! -> interaction report`:
//!
//! * [`tt`] — tensor-train representation, TT-SVD decomposition, entry
//!   evaluation and chain contraction;
//! * [`game`] — exact set-function machinery: discrete derivatives, Shapley
//!   values, interaction indices and the multilinear-extension identities
//!   used as independent oracles;
//! * [`value`] — model/distribution tensors and the value tensor over
//!   keep/impute routing words, dense and TT-backed;
//! * [`weight`] — the interaction weight slices, dense by definition and in
//!   TT form via the prefix automaton;
//! * [`engine`] — the top-level interaction computation, report assembly and
//!   benchmarking;
//! * [`synth`] — seeded synthetic problems for verification and benchmarks.

pub mod engine;
pub mod game;
pub mod synth;
pub mod tt;
pub mod value;
pub mod weight;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Default cap on dense materialization (number of entries).
///
/// Operations that would expand a tensor-train or enumerate all routing
/// words refuse to allocate more than this many entries unless the caller
/// passes an explicit limit.
pub const DEFAULT_DENSE_LIMIT: usize = 1 << 24;
