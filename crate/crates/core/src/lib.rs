//! Reinforcement-learning control of a simulated QAOA circuit for MAXCUT.
//!
//! The crate is organised bottom-up:
//!
//! - [`problems`]: MAXCUT instances, generators, exact solver, edge-list files.
//! - [`simulator`]: statevector evolution under cost and mixer layers.
//! - [`environment`]: episodic agent-facing wrapper with delayed reward.
//! - [`neural`]: dense networks, the NAF head, Adam, checkpoints.
//! - [`agent`]: OU exploration, replay, Bellman training, depth transfer.
//! - [`baseline`]: multi-start BFGS over the 2p angles.

pub mod agent;
pub mod baseline;
pub mod environment;
mod error;
pub mod neural;
pub mod problems;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
