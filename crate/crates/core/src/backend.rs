//! Spin-problem solvers pluggable into the self-consistent loop.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::fermions::SpinCoupling;
use crate::spins::{build_cluster_hamiltonian_with, ground_state, PairCounting, PAIR_COUNTING};

/// What a backend reports about the spin ground state.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinMeasurement {
    pub magnetizations: Vec<f64>,
    pub mean_magnetization: f64,
    pub correlations: DMatrix<f64>,
    /// Standard error of each `<S^z_i>`; zero for exact expectations.
    pub magnetization_errors: Vec<f64>,
    /// Standard error of the mean magnetization.
    pub mean_error: f64,
}

impl SpinMeasurement {
    pub fn exact(magnetizations: Vec<f64>, correlations: DMatrix<f64>) -> Self {
        let n = magnetizations.len();
        let mean_magnetization = magnetizations.iter().sum::<f64>() / n as f64;
        Self {
            magnetizations,
            mean_magnetization,
            correlations,
            magnetization_errors: vec![0.0; n],
            mean_error: 0.0,
        }
    }
}

/// Identifies one spin solve inside a run, used to derive independent
/// random streams.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveTag {
    pub point: u64,
    pub outer: u64,
    pub inner: u64,
}

impl SolveTag {
    pub fn stream(&self) -> u64 {
        (self.point << 32) ^ (self.outer << 16) ^ self.inner
    }
}

/// Solves `H_s^C(J, U, h)` for its ground-state `z` observables.
pub trait SpinBackend: Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, j: &SpinCoupling, u: f64, h: &[f64], tag: SolveTag) -> Result<SpinMeasurement>;
}

/// Exact diagonalization of the cluster Hamiltonian.
#[derive(Clone, Copy, Debug)]
pub struct ExactBackend {
    pub max_sites: usize,
    pub pair_counting: PairCounting,
}

impl Default for ExactBackend {
    fn default() -> Self {
        Self { max_sites: crate::spins::DEFAULT_MAX_SITES, pair_counting: PAIR_COUNTING }
    }
}

impl SpinBackend for ExactBackend {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&self, j: &SpinCoupling, u: f64, h: &[f64], _tag: SolveTag) -> Result<SpinMeasurement> {
        let ham = build_cluster_hamiltonian_with(j, u, h, self.pair_counting, self.max_sites)?;
        let sol = ground_state(&ham)?;
        Ok(SpinMeasurement::exact(sol.magnetizations, sol.correlations))
    }
}
