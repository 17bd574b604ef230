//! Equational rewriting environments with tree-network policies trained by
//! stratified shortest-solution imitation.
//!
//! * [`term`]: terms, s-expression syntax, matching and positional rewriting.
//! * [`envs`]: the Robinson-arithmetic, polynomial and loop-theory rewriting
//!   environments.
//! * [`oracles`]: model-free reference algorithms (evaluation, fixed
//!   strategies, a polynomial normaliser, difficulty scores).
//! * [`neural`]: the tree neural network, its gradients and Adam.
//! * [`training`]: shortest-solution imitation and the baseline learners.
//! * [`harness`]: problem generation, problem files, evaluation and lemma
//!   export.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the trainers use by default.

pub mod envs;
pub mod error;
pub mod harness;
pub mod neural;
pub mod oracles;
pub mod scalar;
pub mod term;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TreePolicy = neural::TreePolicy<f64>;
pub type TreePolicy32 = neural::TreePolicy<f32>;
pub type Gradients = neural::Gradients<f64>;
pub type AdamState = neural::AdamState<f64>;
pub type EpisodeContext = neural::EpisodeContext<f64>;
pub type SolutionHistory = training::SolutionHistory;
