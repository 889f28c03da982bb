//! Nested self-consistent loops of the slave-spin mean-field theory.
//!
//! The outer loop iterates the renormalized hopping `Q`; for each `Q` the
//! inner loop iterates the cluster mean field `m-bar` through the spin
//! backend. Both loops stop after `k` iterations or when their update falls
//! below `eta`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::backend::{SolveTag, SpinBackend, SpinMeasurement};
use crate::error::{Error, Result};
use crate::fermions::{build_coupling, solve_density_matrix, DensityMatrix, RenormalizedHopping, SpinCoupling};
use crate::lattice::{external_neighbor_counts, ClusterSpec, HoppingMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScfConfig {
    /// Convergence threshold on `|dm|` (inner) and `||dQ||_F` (outer).
    pub tolerance: f64,
    /// Iteration budget per loop.
    pub max_iterations: usize,
    pub initial_magnetization: f64,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self { tolerance: 0.01, max_iterations: 5, initial_magnetization: 0.5 }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(self.initial_magnetization > 0.0 && self.initial_magnetization <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "initial magnetization must lie in (0, 1], got {}",
                self.initial_magnetization
            )));
        }
        Ok(())
    }
}

/// Mean field `h_i = 2 z_i J-bar m-bar`.
pub fn mean_field(z: &[usize], mean_coupling: f64, m_bar: f64) -> Vec<f64> {
    z.iter().map(|&zi| 2.0 * zi as f64 * mean_coupling * m_bar).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerStep {
    pub m_bar: f64,
    pub m_delta: f64,
    pub z: f64,
}

#[derive(Clone, Debug)]
pub struct InnerResult {
    pub measurement: SpinMeasurement,
    pub steps: Vec<InnerStep>,
    pub converged: bool,
}

impl InnerResult {
    pub fn m_bar(&self) -> f64 {
        self.measurement.mean_magnetization
    }
}

/// Iterates the cluster mean field at fixed `J`.
pub fn inner_loop(
    j: &SpinCoupling,
    u: f64,
    cluster: &ClusterSpec,
    m0: f64,
    config: &ScfConfig,
    backend: &dyn SpinBackend,
    tag: SolveTag,
) -> Result<InnerResult> {
    let z = external_neighbor_counts(cluster);
    let mut m = m0;
    let mut steps = Vec::with_capacity(config.max_iterations);
    let mut last = None;
    let mut converged = false;
    for l in 0..config.max_iterations {
        let h = mean_field(&z, j.mean_bond(), m);
        let tag = SolveTag { inner: l as u64, ..tag };
        let meas = backend
            .solve(j, u, &h, tag)
            .map_err(|e| e.context(format!("inner iteration {} at U = {u}", l + 1)))?;
        let m_new = meas.mean_magnetization;
        let m_delta = (m_new - m).abs();
        steps.push(InnerStep { m_bar: m_new, m_delta, z: m_new * m_new });
        m = m_new;
        last = Some(meas);
        if m_delta < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(InnerResult { measurement: last.expect("at least one iteration"), steps, converged })
}

#[derive(Clone, Debug)]
pub struct OuterStep {
    pub q_delta: f64,
    pub inner: Vec<InnerStep>,
    pub inner_converged: bool,
    pub m_bar: f64,
    pub z: f64,
}

/// Audit trail and final state of one self-consistent run.
#[derive(Clone, Debug)]
pub struct ScfRecord {
    pub u: f64,
    pub steps: Vec<OuterStep>,
    pub converged: bool,
    pub coupling: SpinCoupling,
    pub q: RenormalizedHopping,
    pub density: DensityMatrix,
    pub measurement: SpinMeasurement,
}

impl ScfRecord {
    pub fn m_bar(&self) -> f64 {
        self.measurement.mean_magnetization
    }

    /// Quasiparticle weight `Z = m-bar^2`.
    pub fn z(&self) -> f64 {
        self.m_bar().powi(2)
    }

    /// Delta-method standard error of `Z`.
    pub fn z_std_err(&self) -> f64 {
        2.0 * self.m_bar().abs() * self.measurement.mean_error
    }

    /// Site-resolved weights `Z_i = <S^z_i>^2`.
    pub fn site_z(&self) -> Vec<f64> {
        self.measurement.magnetizations.iter().map(|m| m * m).collect()
    }

    pub fn outer_iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn inner_iterations_total(&self) -> usize {
        self.steps.iter().map(|s| s.inner.len()).sum()
    }
}

/// Runs the outer loop starting from `q0`.
pub fn outer_loop_from(
    t: &HoppingMatrix,
    u: f64,
    cluster: &ClusterSpec,
    q0: RenormalizedHopping,
    config: &ScfConfig,
    backend: &dyn SpinBackend,
    point: u64,
) -> Result<ScfRecord> {
    config.validate()?;
    if cluster.bond_count() == 0 {
        return Err(Error::InvalidParameter(
            "cluster has no internal bonds; the mean coupling is undefined".into(),
        ));
    }
    let mut q = q0;
    let mut steps = Vec::with_capacity(config.max_iterations);
    let mut converged = false;
    let mut last = None;
    for l in 0..config.max_iterations {
        let density = solve_density_matrix(&q)?;
        let coupling = build_coupling(t, &density, cluster)?;
        let tag = SolveTag { point, outer: l as u64, inner: 0 };
        let inner = inner_loop(&coupling, u, cluster, config.initial_magnetization, config, backend, tag)
            .map_err(|e| e.context(format!("outer iteration {}", l + 1)))?;
        let q_new = RenormalizedHopping::from_correlations(t, &inner.measurement.correlations)?;
        let q_delta = (q_new.matrix() - q.matrix()).norm();
        let m_bar = inner.m_bar();
        steps.push(OuterStep {
            q_delta,
            inner: inner.steps.clone(),
            inner_converged: inner.converged,
            m_bar,
            z: m_bar * m_bar,
        });
        q = q_new;
        last = Some((coupling, density, inner.measurement));
        if q_delta < config.tolerance {
            converged = true;
            break;
        }
    }
    let (coupling, density, measurement) = last.expect("at least one iteration");
    Ok(ScfRecord { u, steps, converged, coupling, q, density, measurement })
}

/// Full self-consistent solution at interaction `u`, seeded with
/// `<S^z S^z> = 1` on every bond.
pub fn outer_loop(
    t: &HoppingMatrix,
    u: f64,
    cluster: &ClusterSpec,
    config: &ScfConfig,
    backend: &dyn SpinBackend,
) -> Result<ScfRecord> {
    outer_loop_from(t, u, cluster, RenormalizedHopping::classical(t), config, backend, 0)
}

#[derive(Debug)]
pub struct SweepPoint {
    pub u: f64,
    pub result: Result<ScfRecord>,
}

/// Independent self-consistent runs over a list of interactions, evaluated
/// in parallel. Failures are kept per point.
pub fn sweep_equilibrium(
    t: &HoppingMatrix,
    cluster: &ClusterSpec,
    us: &[f64],
    config: &ScfConfig,
    backend: &dyn SpinBackend,
) -> Result<Vec<SweepPoint>> {
    if us.is_empty() {
        return Err(Error::InvalidParameter("empty U list".into()));
    }
    config.validate()?;
    Ok(us
        .par_iter()
        .enumerate()
        .map(|(k, &u)| SweepPoint {
            u,
            result: outer_loop_from(t, u, cluster, RenormalizedHopping::classical(t), config, backend, k as u64),
        })
        .collect())
}

/// Matrix of spin correlations implied by `Q = t * <S^z S^z>` on bonds.
pub fn bond_correlations(t: &HoppingMatrix, q: &RenormalizedHopping) -> DMatrix<f64> {
    let mut zz = DMatrix::identity(t.sites(), t.sites());
    for ((i, j), tij) in t.matrix().iter().enumerate().map(|(k, v)| ((k % t.sites(), k / t.sites()), v)) {
        if *tij != 0.0 {
            zz[(i, j)] = q.matrix()[(i, j)] / tij;
        }
    }
    zz
}
