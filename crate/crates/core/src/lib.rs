//! Numerical bounds on the strong converse exponent of soft covering over
//! finite discrete memoryless channels.
//!
//! The crate computes a lower bound `E_c(R)` (entropy-constrained channel sets
//! balanced by a slack parameter) and an upper bound `E_a(R)` (random coding,
//! evaluated through a Rényi mutual information dual), together with the
//! finite-blocklength type forms and exact total-variation measurements of
//! explicit covering codes used to check them.
//!
//! Every routine is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`, which is what the CLI uses.

pub mod achievability;
pub mod converse;
pub mod curve;
pub mod error;
pub mod feasible;
pub mod oracles;
pub mod prob;
pub mod scalar;
pub mod search;
pub mod sim;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use prob::{
    backward_of, cond_entropy, cond_kl, entropy, info_density, joint_of, kl, mutual_information,
    push_forward, renyi_mi, BackwardChannel, Channel, InfoDensity, JointPmf, Pmf, RenyiProfile,
};
pub use scalar::Real;

pub type Pmf64 = Pmf<f64>;
pub type Channel64 = Channel<f64>;
pub type JointPmf64 = JointPmf<f64>;
pub type ExponentCurve64 = curve::ExponentCurve<f64>;
pub type FeasiblePolytope64 = feasible::FeasiblePolytope<f64>;
pub type AchievabilityResult64 = achievability::AchievabilityResult<f64>;
pub type BalancedSolution64 = converse::BalancedSolution<f64>;
pub type ConverseInstance64 = converse::ConverseInstance<f64>;


pub type Pmf32 = Pmf<f32>;
pub type Channel32 = Channel<f32>;
