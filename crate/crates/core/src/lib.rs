//! Learning AP-user assignments for cell-free networks with a hierarchically
//! permutation-equivariant GNN.
//!
//! The crate covers the whole pipeline: scenario and dataset generation
//! ([`scenario`]), a small reverse-mode differentiation engine
//! ([`autodiff`]), the GNN with its recurrent softmax assignment head
//! ([`gnn`]), the staged augmented-Lagrangian training loop
//! ([`training`]), and the exhaustive / random / greedy baselines
//! ([`baselines`]).

pub mod autodiff;
pub mod baselines;
pub mod error;
pub mod gnn;
pub mod par;
pub mod scenario;
pub mod textio;
pub mod training;

pub use error::{Error, Result};
pub use par::Execution;
