//! Slave-spin mean-field theory of the half-filled Hubbard model on the
//! square lattice, with the cluster spin problem solved exactly or on an
//! emulated Rydberg-atom analog processor.

pub mod error;
pub mod fermions;
mod lanczos;
pub mod lattice;
pub mod spins;

pub use error::{Error, Result};
pub mod backend;
pub mod scf;
mod propagate;
pub mod rydberg;
pub mod sampling;
pub mod geometry;
pub mod anneal;
pub mod quench;
pub mod config;
pub mod cli;
