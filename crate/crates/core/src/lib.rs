//! Reduced dynamics of open quantum systems through reference states.
//!
//! A convex set of system-environment initial states is encoded as a
//! tripartite reference state on R⊗S⊗E. From it the crate builds assignment
//! maps, computes reduced dynamics for arbitrary joint unitaries, and decides
//! complete positivity, either directly from Choi matrices or through the
//! Markov structure of the reference state.
//!
//! "Markov" here is the static structural property of a tripartite state
//! (vanishing conditional mutual information I(R;E|S)), not memorylessness of
//! a dynamical semigroup.

pub mod assignment;
pub mod error;
pub mod experiments;
pub mod operator;
pub mod qmap;
pub mod random;
pub mod reference;
pub mod tol;

pub use error::{Error, Result};
