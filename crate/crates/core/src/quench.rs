//! Interaction quenches `U: 0 -> U_f` of the cluster spin model, with the
//! pseudo-fermion sector frozen at its `U = 0` solution, and the spectral
//! and damping analysis of the resulting `Z(tau)` traces.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::anneal::{measure, realized_interactions, GeometryMode};
use crate::backend::ExactBackend;
use crate::error::{Error, Result};
use crate::fermions::SpinCoupling;
use crate::lattice::{external_neighbor_counts, ClusterSpec, HoppingMatrix};
use crate::propagate::{evolve_with, PropagatorOptions};
use crate::rydberg::{
    evolve, field_detunings, make_quench_schedule, prepare_initial_state, InitialState,
    DEFAULT_C6, DEFAULT_TAU_RAMP,
};
use crate::sampling::NoiseParams;
use crate::scf::{mean_field, outer_loop, ScfConfig};
use crate::spins::{build_cluster_hamiltonian, z_moments};

/// Default observation window, us.
pub const DEFAULT_DURATION: f64 = 4.0;
/// Default number of samples in the window.
pub const DEFAULT_SAMPLES: usize = 400;
/// Fewest samples accepted by [`fourier_spectrum`].
pub const MIN_SPECTRUM_SAMPLES: usize = 64;

/// `samples` points `k * duration / samples`, `k = 0..samples`.
pub fn uniform_grid(duration: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|k| k as f64 * duration / samples as f64).collect()
}

/// Longitudinal field during the quench.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldPolicy {
    /// `h_i = 2 z_i J m`, with `J` and `m` from the pre-quench solution.
    Frozen,
    /// No embedding field.
    Zero,
}

/// Pre-quench (`U = 0`) solution the quench starts from.
#[derive(Clone, Debug)]
pub struct QuenchSetup {
    pub coupling: SpinCoupling,
    pub z: Vec<usize>,
    pub m_bar: f64,
}

impl QuenchSetup {
    /// Solves the `U = 0` equilibrium with the exact backend.
    pub fn from_equilibrium(t: &HoppingMatrix, cluster: &ClusterSpec, config: &ScfConfig) -> Result<Self> {
        let rec = outer_loop(t, 0.0, cluster, config, &ExactBackend::default())?;
        Ok(Self { m_bar: rec.m_bar(), coupling: rec.coupling, z: external_neighbor_counts(cluster) })
    }

    pub fn sites(&self) -> usize {
        self.z.len()
    }

    pub fn field(&self, policy: FieldPolicy) -> Vec<f64> {
        match policy {
            FieldPolicy::Frozen => mean_field(&self.z, self.coupling.mean_bond(), self.m_bar),
            FieldPolicy::Zero => vec![0.0; self.sites()],
        }
    }
}

/// Rydberg emulation settings for a quench.
#[derive(Clone, Debug)]
pub struct RydbergQuench {
    pub cluster: ClusterSpec,
    pub tau_ramp: f64,
    pub gamma: f64,
    pub c6: f64,
    pub geometry: GeometryMode,
    pub noise: Option<NoiseParams>,
}

impl RydbergQuench {
    pub fn noiseless(cluster: ClusterSpec) -> Self {
        Self { cluster, tau_ramp: DEFAULT_TAU_RAMP, gamma: 0.0, c6: DEFAULT_C6, geometry: GeometryMode::Ideal, noise: None }
    }
}

#[derive(Clone, Debug)]
pub enum QuenchBackend {
    /// Sudden quench of the cluster Hamiltonian, pure-state propagation.
    Exact,
    Rydberg(RydbergQuench),
}

#[derive(Clone, Debug)]
pub struct QuenchRun {
    pub u_f: f64,
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    pub z_err: Vec<f64>,
    pub m_bar: Vec<f64>,
}

/// Starts from the fully polarized state (every `S^z = +1`, the `U = 0`
/// ground state) and records `Z = m^2` at every grid time.
///
/// With finite shots every grid time gets its own independent shot set;
/// since the evolution itself is deterministic, the state is propagated
/// once and sampled at each time.
pub fn run_quench(
    setup: &QuenchSetup,
    u_f: f64,
    backend: &QuenchBackend,
    times: &[f64],
    policy: FieldPolicy,
) -> Result<QuenchRun> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    let n = setup.sites();
    let h = setup.field(policy);
    let init = prepare_initial_state(n, &InitialState::AllExcited)?;
    let (states, noise) = match backend {
        QuenchBackend::Exact => {
            let ham = build_cluster_hamiltonian(&setup.coupling, u_f, &h)?;
            (evolve_with(&init, &|_| ham.clone(), 0.0, times, &PropagatorOptions::default())?, None)
        }
        QuenchBackend::Rydberg(r) => {
            let v = realized_interactions(&setup.coupling, &r.cluster, r.c6, &r.geometry)?;
            let end = times[times.len() - 1].max(r.tau_ramp * 2.0).max(f64::MIN_POSITIVE);
            let schedule = make_quench_schedule(u_f, r.tau_ramp, end, &field_detunings(&v, &h))?;
            (evolve(&init, &schedule, &v, r.gamma, times)?, r.noise.as_ref())
        }
    };
    let measured: Vec<_> = states
        .par_iter()
        .enumerate()
        .map(|(k, st)| measure(st, noise, k as u64))
        .collect::<Result<_>>()?;
    let m_bar: Vec<f64> = measured.iter().map(|m| m.mean_magnetization).collect();
    Ok(QuenchRun {
        u_f,
        times: times.to_vec(),
        z: m_bar.iter().map(|m| m * m).collect(),
        z_err: measured.iter().map(|m| 2.0 * m.mean_magnetization.abs() * m.mean_error).collect(),
        m_bar,
    })
}

/// `Z(tau)` from the eigendecomposition of the quench Hamiltonian; used to
/// cross-check the propagator on small clusters.
pub fn spectral_trace(setup: &QuenchSetup, u_f: f64, times: &[f64], policy: FieldPolicy) -> Result<Vec<f64>> {
    let ham = build_cluster_hamiltonian(&setup.coupling, u_f, &setup.field(policy))?;
    let eig = nalgebra::SymmetricEigen::new(ham.to_dense());
    let last = ham.dim() - 1;
    // initial state is the last basis vector
    let amps: Vec<f64> = (0..ham.dim()).map(|k| eig.eigenvectors[(last, k)]).collect();
    let n = setup.sites();
    Ok(times
        .iter()
        .map(|&tau| {
            let psi: Vec<Complex<f64>> = (0..ham.dim())
                .map(|b| {
                    (0..ham.dim())
                        .map(|k| Complex::from_polar(amps[k] * eig.eigenvectors[(b, k)], -eig.eigenvalues[k] * tau))
                        .sum()
                })
                .collect();
            let probs: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
            let (mags, _) = z_moments(&probs, n);
            let m = mags.iter().sum::<f64>() / n as f64;
            m * m
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

/// One-sided amplitude spectrum. Frequencies are angular, rad/us.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Bin width, `2 pi / (n dt)`.
    pub resolution: f64,
    pub peak_omega: f64,
    pub peak_amplitude: f64,
}

impl Spectrum {
    /// Local maxima whose amplitude is at least `rel` times the largest,
    /// as `(omega, amplitude)`, skipping the zero-frequency bin.
    pub fn peaks(&self, rel: f64) -> Vec<(f64, f64)> {
        let a = &self.amplitude;
        let floor = rel * self.peak_amplitude;
        (1..a.len())
            .filter(|&k| {
                let left = a[k - 1];
                let right = if k + 1 < a.len() { a[k + 1] } else { 0.0 };
                a[k] >= floor && a[k] > left && a[k] >= right && a[k] > 0.0
            })
            .map(|k| (self.omega[k], a[k]))
            .collect()
    }

    /// Largest amplitude within `bins` bins of `omega`.
    pub fn amplitude_near(&self, omega: f64, bins: f64) -> f64 {
        self.omega
            .iter()
            .zip(&self.amplitude)
            .filter(|(w, _)| (*w - omega).abs() <= bins * self.resolution)
            .map(|(_, a)| *a)
            .fold(0.0, f64::max)
    }
}

/// Subtracts the mean, applies `window` and returns the DFT amplitudes
/// normalized so that a pure tone of amplitude `A` peaks near `A`.
pub fn fourier_spectrum(times: &[f64], values: &[f64], window: Window) -> Result<Spectrum> {
    let n = times.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: values.len() });
    }
    if n < MIN_SPECTRUM_SAMPLES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_SPECTRUM_SAMPLES} samples, got {n}")));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::InvalidParameter("time grid is not uniform".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = match window {
        Window::Hann => (0..n).map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos()).collect(),
        Window::Rectangular => vec![1.0; n],
    };
    let norm = w.iter().sum::<f64>();
    let mut buf: Vec<Complex<f64>> = values.iter().zip(&w).map(|(v, wk)| Complex::new((v - mean) * wk, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let resolution = std::f64::consts::TAU / (n as f64 * dt);
    let half = n / 2 + 1;
    let omega: Vec<f64> = (0..half).map(|k| k as f64 * resolution).collect();
    let amplitude: Vec<f64> = buf[..half].iter().map(|c| 2.0 * c.norm() / norm).collect();
    let (kmax, &amax) = amplitude
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap_or((0, &0.0));
    Ok(Spectrum { peak_omega: omega[kmax], peak_amplitude: amax, omega, amplitude, resolution })
}

/// Exponential envelope `A exp(-rate tau)` of the oscillating part of a trace.
#[derive(Clone, Copy, Debug)]
pub struct DampingFit {
    pub rate: f64,
    pub rate_err: f64,
    pub amplitude: f64,
    /// Samples entering the regression.
    pub points: usize,
    /// False when there was too little to fit.
    pub ok: bool,
}

impl DampingFit {
    fn failed(points: usize) -> Self {
        Self { rate: f64::NAN, rate_err: f64::NAN, amplitude: f64::NAN, points, ok: false }
    }

    /// Least-squares line through `(t, ln a)`.
    fn log_linear(pts: &[(f64, f64)]) -> Self {
        let m = pts.len();
        if m < 3 {
            return Self::failed(m);
        }
        let mf = m as f64;
        let xm = pts.iter().map(|p| p.0).sum::<f64>() / mf;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / mf;
        let sxx = pts.iter().map(|p| (p.0 - xm).powi(2)).sum::<f64>();
        let sxy = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum::<f64>();
        let slope = sxy / sxx;
        let intercept = ym - slope * xm;
        let resid = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>();
        Self { rate: -slope, rate_err: (resid / (mf - 2.0) / sxx).sqrt(), amplitude: intercept.exp(), points: m, ok: true }
    }
}

/// Fraction of the window dropped at each end of the envelope fit.
pub const ENVELOPE_EDGE: f64 = 0.1;

/// Exponential fit to the analytic-signal envelope of `Z - mean(Z)`.
pub fn fit_damping(times: &[f64], values: &[f64]) -> DampingFit {
    fit_damping_envelope(times, values, ENVELOPE_EDGE)
}

/// Envelope fit ignoring the outer `edge` fraction of the window at each end.
pub fn fit_damping_envelope(times: &[f64], values: &[f64], edge: f64) -> DampingFit {
    let n = values.len().min(times.len());
    if n < 8 {
        return DampingFit::failed(0);
    }
    let mean = values[..n].iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values[..n].iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let factor = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= factor;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let skip = ((edge.clamp(0.0, 0.5) * n as f64).round() as usize).min(n / 2 - 1);
    let pts: Vec<(f64, f64)> = (skip..n - skip)
        .map(|k| (times[k], buf[k].norm() / n as f64))
        .filter(|p| p.1 > 0.0)
        .map(|(t, e)| (t, e.ln()))
        .collect();
    DampingFit::log_linear(&pts)
}

/// Fit through the local maxima of `|Z - mean(Z)|`.
pub fn fit_damping_maxima(times: &[f64], values: &[f64]) -> DampingFit {
    let n = values.len().min(times.len());
    let mean = values[..n].iter().sum::<f64>() / n.max(1) as f64;
    let dev: Vec<f64> = values[..n].iter().map(|v| (v - mean).abs()).collect();
    let pts: Vec<(f64, f64)> = (1..n.saturating_sub(1))
        .filter(|&k| dev[k] > dev[k - 1] && dev[k] >= dev[k + 1] && dev[k] > 0.0)
        .map(|k| (times[k], dev[k].ln()))
        .collect();
    DampingFit::log_linear(&pts)
}

/// Damping rate per hopping value.
pub fn damping_analysis(runs: &[(f64, QuenchRun)]) -> Result<Vec<(f64, DampingFit)>> {
    if runs.len() < 2 {
        return Err(Error::InvalidParameter("need at least two hopping values".into()));
    }
    Ok(runs.iter().map(|(t, run)| (*t, fit_damping(&run.times, &run.z))).collect())
}
