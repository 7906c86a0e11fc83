//! Traffic flow on parametrized torus grid networks.
//!
//! The crate simulates signalized grid networks with a cellular-automaton
//! traffic model, measures network-level flow-density relations (MFDs),
//! trains neural signal policies, and provides the analytical binomial
//! model of intersection throughput.
//!
//! Numeric routines are generic over the scalar type via [`Scalar`];
//! the [`Real`] alias fixes the default precision used by the CLI.

pub mod analytics;
pub mod error;
pub mod lattice;
pub mod learn;
pub mod network;
pub mod policy;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type for simulation harnesses and the CLI.
pub type Real = f64;

/// Signal policy at default precision.
pub type RealPolicy = policy::Policy<Real>;

/// Neural policy network at default precision.
pub type RealNeuralPolicy = policy::NeuralPolicy<Real>;

/// MFD estimate at default precision.
pub type RealMfdEstimate = analytics::MfdEstimate<Real>;
