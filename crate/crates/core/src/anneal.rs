//! Spin backend that solves the cluster problem by emulating an adiabatic
//! sweep on the Rydberg processor, optionally with dephasing and
//! finite-shot readout.

use nalgebra::DMatrix;

use crate::backend::{SolveTag, SpinBackend, SpinMeasurement};
use crate::error::{Error, Result};
use crate::fermions::SpinCoupling;
use crate::geometry::{initial_guess, optimize, GeometryProblem, OptimizerOptions};
use crate::lattice::ClusterSpec;
use crate::rydberg::{
    anneal_schedule_to, evolve, field_detunings, prepare_initial_state, InitialState, Interactions, QuantumState,
    DEFAULT_C6, DEFAULT_DELTA_START, DEFAULT_TAU_MAX,
};
use crate::sampling::{estimate_observables, sample_bitstrings, NoiseParams};
use crate::spins::z_moments;

/// How the target couplings are turned into atom interactions.
#[derive(Clone, Copy, Debug)]
pub enum GeometryMode {
    /// `V = -4 J` exactly.
    Ideal,
    /// `V = C6 / r^6` for positions optimized against `-4 J`.
    Optimized(OptimizerOptions),
}

#[derive(Clone, Debug)]
pub struct AnnealBackend {
    pub cluster: ClusterSpec,
    pub tau_max: f64,
    pub delta_start: f64,
    /// Dephasing rate on every atom, rad/us.
    pub gamma: f64,
    pub c6: f64,
    pub geometry: GeometryMode,
    /// Finite-shot readout; `None` reads exact probabilities.
    pub noise: Option<NoiseParams>,
}

impl AnnealBackend {
    pub fn noiseless(cluster: ClusterSpec) -> Self {
        Self {
            cluster,
            tau_max: DEFAULT_TAU_MAX,
            delta_start: DEFAULT_DELTA_START,
            gamma: 0.0,
            c6: DEFAULT_C6,
            geometry: GeometryMode::Ideal,
            noise: None,
        }
    }

    /// Density-matrix runs above this size are refused.
    pub const MAX_MIXED_SITES: usize = 8;
    pub const MAX_PURE_SITES: usize = 14;

    pub fn interactions(&self, j: &SpinCoupling) -> Result<Interactions> {
        realized_interactions(j, &self.cluster, self.c6, &self.geometry)
    }

    /// Final state of the sweep targeting `-H_s^C(J, U, h)`.
    pub fn anneal(&self, j: &SpinCoupling, u: f64, h: &[f64]) -> Result<QuantumState> {
        let n = j.sites();
        if h.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: h.len() });
        }
        let limit = if self.gamma > 0.0 { Self::MAX_MIXED_SITES } else { Self::MAX_PURE_SITES };
        if n > limit {
            return Err(Error::DimensionOverflow { sites: n, max: limit });
        }
        let v = self.interactions(j)?;
        let schedule = anneal_schedule_to(u, &field_detunings(&v, h), self.tau_max, self.delta_start)?;
        let init = prepare_initial_state(n, &InitialState::AllGround)?;
        let mut out = evolve(&init, &schedule, &v, self.gamma, &[self.tau_max])?;
        Ok(out.pop().expect("one sample time requested"))
    }
}

/// Atom interactions standing in for `-4 J` under the chosen geometry mode.
pub fn realized_interactions(
    j: &SpinCoupling,
    cluster: &ClusterSpec,
    c6: f64,
    mode: &GeometryMode,
) -> Result<Interactions> {
    match mode {
        GeometryMode::Ideal => Ok(Interactions::ideal(j)),
        GeometryMode::Optimized(opts) => {
            if j.matrix().iter().all(|x| *x == 0.0) {
                return Ok(Interactions(DMatrix::zeros(j.sites(), j.sites())));
            }
            let start = initial_guess(j.matrix(), cluster, c6)?;
            let problem = GeometryProblem::new(j.matrix().clone(), c6, start.positions)?;
            optimize(&problem, opts)?.array.interactions()
        }
    }
}

/// Reads out `z` observables from `state`, exactly or through sampling.
pub fn measure(state: &QuantumState, noise: Option<&NoiseParams>, stream: u64) -> Result<SpinMeasurement> {
    let sites = state.sites();
    match noise {
        None => {
            let (mags, corr) = z_moments(&state.probabilities(), sites);
            Ok(SpinMeasurement::exact(mags, corr))
        }
        Some(params) => {
            let est = estimate_observables(&sample_bitstrings(state, params, stream)?)?;
            Ok(SpinMeasurement {
                magnetizations: est.magnetizations,
                mean_magnetization: est.mean_magnetization,
                correlations: est.correlations,
                magnetization_errors: est.magnetization_errors,
                mean_error: est.mean_error,
            })
        }
    }
}

/// Flips every `S^z` of a measurement; correlations are unchanged.
fn mirrored(mut m: SpinMeasurement) -> SpinMeasurement {
    m.magnetizations.iter_mut().for_each(|x| *x = -*x);
    m.mean_magnetization = -m.mean_magnetization;
    m
}

impl SpinBackend for AnnealBackend {
    fn name(&self) -> &'static str {
        if self.noise.is_some() || self.gamma > 0.0 { "anneal-noisy" } else { "anneal-noiseless" }
    }

    /// The sweep starts in `|g...g>`, i.e. all `S^z = -1`. A field favoring
    /// `S^z = +1` would force the state through a level crossing, so the
    /// mirrored problem (`h -> -h`) is run instead and the measured
    /// magnetizations are flipped back.
    fn solve(&self, j: &SpinCoupling, u: f64, h: &[f64], tag: SolveTag) -> Result<SpinMeasurement> {
        let flip = h.iter().sum::<f64>() < 0.0;
        let programmed: Vec<f64> = if flip { h.iter().map(|x| -x).collect() } else { h.to_vec() };
        let state = self.anneal(j, u, &programmed)?;
        let m = measure(&state, self.noise.as_ref(), tag.stream())?;
        Ok(if flip { mirrored(m) } else { m })
    }
}
