//! Fixed-step fourth-order Runge-Kutta propagation of pure states
//! (Schrodinger) and density matrices (Lindblad with `L_i = n_i`).
//!
//! The step starts at `initial_step` and is halved whenever a step-doubling
//! estimate of the local error exceeds `error_per_time * dt`. The check is
//! repeated at the start of every chunk of at most `check_interval`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rydberg::{QuantumState, NORM_TOL};
use crate::spins::SpinHamiltonian;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub error_per_time: f64,
    pub check_interval: f64,
    pub check_invariants: bool,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            initial_step: 1e-3,
            min_step: 1e-9,
            error_per_time: 1e-8,
            check_interval: 0.1,
            check_invariants: true,
        }
    }
}

/// State representation used during integration.
trait Integrable: Clone {
    fn rhs(&self, h: &SpinHamiltonian, gamma: f64, out: &mut Self);
    fn axpy_from(&mut self, base: &Self, k: &Self, scale: f64);
    fn accumulate(&mut self, k: &Self, scale: f64);
    fn distance(&self, other: &Self) -> f64;
}

#[derive(Clone)]
struct Pure(Vec<Complex64>);

#[derive(Clone)]
struct Mixed {
    dim: usize,
    /// Row-major: entry `(a, b)` at `a * dim + b`.
    data: Vec<Complex64>,
    /// `popcount(a ^ b)` for every entry.
    dephasing: std::sync::Arc<Vec<f64>>,
}

impl Integrable for Pure {
    fn rhs(&self, h: &SpinHamiltonian, _gamma: f64, out: &mut Self) {
        h.apply_complex(&self.0, &mut out.0);
        out.0.iter_mut().for_each(|x| *x *= -I);
    }

    fn axpy_from(&mut self, base: &Self, k: &Self, scale: f64) {
        for ((s, b), k) in self.0.iter_mut().zip(&base.0).zip(&k.0) {
            *s = b + k * scale;
        }
    }

    fn accumulate(&mut self, k: &Self, scale: f64) {
        for (s, k) in self.0.iter_mut().zip(&k.0) {
            *s += k * scale;
        }
    }

    fn distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Integrable for Mixed {
    fn rhs(&self, h: &SpinHamiltonian, gamma: f64, out: &mut Self) {
        let d = self.dim;
        let diag = h.diagonal();
        let g = h.transverse();
        let rho = &self.data;
        for a in 0..d {
            for b in 0..d {
                let idx = a * d + b;
                // (H rho - rho H)_{ab}
                let mut comm = rho[idx] * (diag[a] - diag[b]);
                for (i, gi) in g.iter().enumerate() {
                    if *gi != 0.0 {
                        let bit = 1 << i;
                        comm += (rho[(a ^ bit) * d + b] - rho[a * d + (b ^ bit)]) * *gi;
                    }
                }
                out.data[idx] = -I * comm - rho[idx] * (0.5 * gamma * self.dephasing[idx]);
            }
        }
    }

    fn axpy_from(&mut self, base: &Self, k: &Self, scale: f64) {
        for ((s, b), k) in self.data.iter_mut().zip(&base.data).zip(&k.data) {
            *s = b + k * scale;
        }
    }

    fn accumulate(&mut self, k: &Self, scale: f64) {
        for (s, k) in self.data.iter_mut().zip(&k.data) {
            *s += k * scale;
        }
    }

    fn distance(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

struct Workspace<S> {
    k1: S,
    k2: S,
    k3: S,
    k4: S,
    tmp: S,
}

impl<S: Integrable> Workspace<S> {
    fn new(proto: &S) -> Self {
        Self { k1: proto.clone(), k2: proto.clone(), k3: proto.clone(), k4: proto.clone(), tmp: proto.clone() }
    }

    fn step<F: Fn(f64) -> SpinHamiltonian + ?Sized>(&mut self, y: &mut S, tau: f64, dt: f64, ham: &F, gamma: f64) {
        let h0 = ham(tau);
        let hm = ham(tau + 0.5 * dt);
        let h1 = ham(tau + dt);
        y.rhs(&h0, gamma, &mut self.k1);
        self.tmp.axpy_from(y, &self.k1, 0.5 * dt);
        self.tmp.rhs(&hm, gamma, &mut self.k2);
        self.tmp.axpy_from(y, &self.k2, 0.5 * dt);
        self.tmp.rhs(&hm, gamma, &mut self.k3);
        self.tmp.axpy_from(y, &self.k3, dt);
        self.tmp.rhs(&h1, gamma, &mut self.k4);
        y.accumulate(&self.k1, dt / 6.0);
        y.accumulate(&self.k2, dt / 3.0);
        y.accumulate(&self.k3, dt / 3.0);
        y.accumulate(&self.k4, dt / 6.0);
    }
}

fn integrate<S, F, C>(
    mut y: S,
    ham: &F,
    gamma: f64,
    sample_times: &[f64],
    opts: &PropagatorOptions,
    mut on_sample: C,
) -> Result<()>
where
    S: Integrable,
    F: Fn(f64) -> SpinHamiltonian + ?Sized,
    C: FnMut(f64, &S) -> Result<()>,
{
    let mut ws = Workspace::new(&y);
    let mut tau = 0.0;
    let mut dt = opts.initial_step;
    for &target in sample_times {
        if target < tau - 1e-12 {
            return Err(Error::InvalidParameter("sample times must be sorted and nonnegative".into()));
        }
        while target - tau > 1e-12 {
            let chunk_end = (tau + opts.check_interval).min(target);
            // step-doubling check at the start of the chunk
            loop {
                let h = dt.min(chunk_end - tau);
                let mut coarse = y.clone();
                ws.step(&mut coarse, tau, h, ham, gamma);
                let mut fine = y.clone();
                ws.step(&mut fine, tau, 0.5 * h, ham, gamma);
                ws.step(&mut fine, tau + 0.5 * h, 0.5 * h, ham, gamma);
                if fine.distance(&coarse) <= opts.error_per_time * h || h < dt {
                    break;
                }
                dt *= 0.5;
                if dt < opts.min_step {
                    return Err(Error::StepUnderflow { tau, dt });
                }
            }
            let span = chunk_end - tau;
            let steps = (span / dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                ws.step(&mut y, tau + s as f64 * h, h, ham, gamma);
            }
            tau = chunk_end;
        }
        on_sample(tau, &y)?;
    }
    Ok(())
}

/// Propagates `initial` under `ham(tau)`. A positive `gamma` promotes a pure
/// input to a density matrix and adds dephasing with jump operators `n_i`.
pub fn evolve_with(
    initial: &QuantumState,
    ham: &dyn Fn(f64) -> SpinHamiltonian,
    gamma: f64,
    sample_times: &[f64],
    opts: &PropagatorOptions,
) -> Result<Vec<QuantumState>> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("dephasing rate must be >= 0, got {gamma}")));
    }
    if sample_times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameter("sample times must be nonnegative".into()));
    }
    let dim = initial.dim();
    let mut out = Vec::with_capacity(sample_times.len());
    let check = |tau: f64, state: &QuantumState| -> Result<()> {
        if opts.check_invariants {
            state
                .check_invariants(NORM_TOL)
                .map_err(|detail| Error::InvariantViolation { tau, detail })?;
        }
        Ok(())
    };

    match initial {
        QuantumState::Pure(psi) if gamma == 0.0 => {
            integrate(Pure(psi.iter().cloned().collect()), ham, gamma, sample_times, opts, |tau, y| {
                let state = QuantumState::Pure(DVector::from_vec(y.0.clone()));
                check(tau, &state)?;
                out.push(state);
                Ok(())
            })?;
        }
        _ => {
            let rho = initial.to_density();
            let mut data = Vec::with_capacity(dim * dim);
            for a in 0..dim {
                for b in 0..dim {
                    data.push(rho[(a, b)]);
                }
            }
            let dephasing = (0..dim * dim).map(|k| ((k / dim) ^ (k % dim)).count_ones() as f64).collect();
            let y = Mixed { dim, data, dephasing: std::sync::Arc::new(dephasing) };
            integrate(y, ham, gamma, sample_times, opts, |tau, y| {
                let state = QuantumState::Mixed(DMatrix::from_row_slice(dim, dim, &y.data));
                check(tau, &state)?;
                out.push(state);
                Ok(())
            })?;
        }
    }
    Ok(out)
}
