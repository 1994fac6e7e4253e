//! Classical emulation of digital quantum simulation of zero-field NMR:
//! spin Hamiltonians, circuit compilation, noisy simulation, compressed
//! sensing reconstruction and resource estimates.

pub mod circuits;
pub mod cs_reconstruct;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod resources;
pub mod simulator;
pub mod spin_system;

pub use error::{Error, Result};
