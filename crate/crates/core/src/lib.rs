//! Finite-horizon zero-sum linear-quadratic dynamic games.
//!
//! The crate solves a game three ways and checks the results against each other:
//!
//! - [`certify::solve_nash`]: the saddle point from the generalized Riccati
//!   difference equation;
//! - [`exact`]: nested natural policy gradient with model-based gradients;
//! - [`zo`]: the model-free nested natural policy gradient driven by
//!   single-point zeroth-order estimates built from simulated rollouts ([`sim`]).
//!
//! [`verify`] turns the structural properties of the problem (best-response
//! domination, dual Lyapunov identity, descent, gradient domination) into
//! executable checks, and [`cli`] wires everything to the `lqgame` binary.

pub mod certify;
pub mod cli;
pub mod exact;
pub mod error;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sim;
pub mod trace;
pub mod verify;
pub mod zo;

pub use error::{GameError, Result};
pub use linalg::{BlockDiag, Mat};
pub use model::{build_compact, CompactOperators, GainSide, LqGame, NoiseKind, NoiseModel, StructuredGain};
