//! Emulation of a Rydberg-atom analog processor.
//!
//! Units: hbar = 1, time in microseconds, every frequency stored as an
//! angular coefficient in rad/us. Site `i` in state `|r>` sets bit `i` of the
//! basis index, so `n_i = (1 + S^z_i) / 2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fermions::SpinCoupling;
use crate::spins::{SpinHamiltonian, PAIR_COUNTING};

/// Default van der Waals coefficient, rad/us * um^6. Not a measured value;
/// it only fixes the absolute length scale of the arrays.
pub const DEFAULT_C6: f64 = 5420.0;
/// Default annealing time, us.
pub const DEFAULT_TAU_MAX: f64 = 4.0;
/// Default modulator switch-on time for quenches, us.
pub const DEFAULT_TAU_RAMP: f64 = 0.05;
/// Default starting detuning, rad/us (5 MHz times 2 pi).
pub const DEFAULT_DELTA_START: f64 = 5.0 * std::f64::consts::TAU;

/// Atom positions in the plane (um) and the interaction strength.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomArray {
    pub positions: Vec<[f64; 2]>,
    pub c6: f64,
}

impl AtomArray {
    pub fn new(positions: Vec<[f64; 2]>, c6: f64) -> Result<Self> {
        let array = Self { positions, c6 };
        array.validate()?;
        Ok(array)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite atom position".into()));
        }
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                if self.distance(i, j) <= 0.0 {
                    return Err(Error::CoincidentAtoms(i, j));
                }
            }
        }
        Ok(())
    }

    /// `V_ij = C6 / r_ij^6`, zero on the diagonal.
    pub fn interactions(&self) -> Result<Interactions> {
        self.validate()?;
        let n = self.len();
        let mut v = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let vij = self.c6 / self.distance(i, j).powi(6);
                v[(i, j)] = vij;
                v[(j, i)] = vij;
            }
        }
        Ok(Interactions(v))
    }
}

/// Pairwise van der Waals couplings `V_ij` (symmetric, zero diagonal).
#[derive(Clone, Debug, PartialEq)]
pub struct Interactions(pub DMatrix<f64>);

impl Interactions {
    /// Couplings a perfect geometry would realize: `V_ij = -4 J_ij`.
    pub fn ideal(j: &SpinCoupling) -> Self {
        Self(j.matrix() * -4.0)
    }

    pub fn sites(&self) -> usize {
        self.0.nrows()
    }

    /// `sum_{j != i} V_ij`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.sites()).map(|i| self.0.row(i).sum() - self.0[(i, i)]).collect()
    }
}

/// Piecewise-linear waveform on sorted breakpoints, held constant outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    points: Vec<(f64, f64)>,
}

impl Waveform {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("waveform needs at least one breakpoint".into()));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::InvalidParameter("waveform breakpoints must be sorted".into()));
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64, duration: f64) -> Self {
        Self { points: vec![(0.0, value), (duration, value)] }
    }

    pub fn ramp(from: f64, to: f64, duration: f64) -> Self {
        Self { points: vec![(0.0, from), (duration, to)] }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let p = &self.points;
        if tau <= p[0].0 {
            return p[0].1;
        }
        // last breakpoint at or before tau
        let k = p.partition_point(|&(t, _)| t <= tau);
        if k >= p.len() {
            return p[p.len() - 1].1;
        }
        let (t0, v0) = p[k - 1];
        let (t1, v1) = p[k];
        if t1 == t0 {
            v1
        } else {
            v0 + (v1 - v0) * (tau - t0) / (t1 - t0)
        }
    }
}

/// Global Rabi drive and per-site detunings over `[0, duration]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveSchedule {
    pub omega: Waveform,
    pub detunings: Vec<Waveform>,
    pub duration: f64,
}

impl DriveSchedule {
    pub fn new(omega: Waveform, detunings: Vec<Waveform>, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::InvalidParameter(format!("duration must be > 0, got {duration}")));
        }
        if omega.points.iter().any(|p| p.1 < 0.0) {
            return Err(Error::InvalidParameter("Rabi frequency must be nonnegative".into()));
        }
        for w in std::iter::once(&omega).chain(&detunings) {
            let first = w.points[0].0;
            let last = w.points[w.points.len() - 1].0;
            if first != 0.0 || (last - duration).abs() > 1e-12 {
                return Err(Error::InvalidParameter("waveforms must span exactly [0, duration]".into()));
            }
        }
        Ok(Self { omega, detunings, duration })
    }

    pub fn detunings_at(&self, tau: f64) -> Vec<f64> {
        self.detunings.iter().map(|w| w.eval(tau)).collect()
    }
}

/// `H = sum_{i<j} c V_ij n_i n_j + (Omega/2) sum S^x_i - sum delta_i n_i`,
/// with `c` the crate-wide pair-counting factor.
pub fn rydberg_hamiltonian(v: &Interactions, omega: f64, detunings: &[f64]) -> Result<SpinHamiltonian> {
    let n = v.sites();
    if detunings.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: detunings.len() });
    }
    let c = PAIR_COUNTING.factor();
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter_map(|(i, j)| (v.0[(i, j)] != 0.0).then(|| (i, j, c * v.0[(i, j)])))
        .collect();
    let diagonal = (0..1usize << n)
        .map(|b| {
            let occ = |i: usize| (b >> i & 1) as f64;
            let pair: f64 = pairs.iter().map(|&(i, j, w)| w * occ(i) * occ(j)).sum();
            let det: f64 = detunings.iter().enumerate().map(|(i, d)| d * occ(i)).sum();
            pair - det
        })
        .collect();
    SpinHamiltonian::from_parts(n, diagonal, vec![omega / 2.0; n])
}

/// Resource Hamiltonian of an atom array.
pub fn build_rydberg_hamiltonian(array: &AtomArray, omega: f64, detunings: &[f64]) -> Result<SpinHamiltonian> {
    rydberg_hamiltonian(&array.interactions()?, omega, detunings)
}

/// Final detunings that turn the resource Hamiltonian into `-H_s^C` (up to
/// a constant and the sign of the transverse term): the pair interactions'
/// single-site shifts are compensated and the mean field is added.
pub fn target_detunings(v: &Interactions, mean_coupling: f64, m_bar: f64, z: &[usize]) -> Vec<f64> {
    let h: Vec<f64> = z.iter().map(|&zi| 2.0 * zi as f64 * mean_coupling * m_bar).collect();
    field_detunings(v, &h)
}

/// Same as [`target_detunings`] for an arbitrary longitudinal field `h_i`.
pub fn field_detunings(v: &Interactions, h: &[f64]) -> Vec<f64> {
    v.row_sums()
        .iter()
        .zip(h)
        .map(|(s, hi)| PAIR_COUNTING.factor() / 2.0 * s + FIELD_SIGN * 2.0 * hi)
        .collect()
}

/// Sign of the mean-field contribution to the final detunings, fixed by the
/// two-site equivalence test below.
pub const FIELD_SIGN: f64 = 1.0;

/// Annealing schedule: `Omega` ramps from 0 to `U/2` and each detuning from
/// `delta_start` to its target value, linearly over `tau_max`.
pub fn make_anneal_schedule(
    u: f64,
    mean_coupling: f64,
    m_bar: f64,
    z: &[usize],
    v: &Interactions,
    tau_max: f64,
    delta_start: f64,
) -> Result<DriveSchedule> {
    anneal_schedule_to(u, &target_detunings(v, mean_coupling, m_bar, z), tau_max, delta_start)
}

/// Annealing schedule ending at explicit detunings.
pub fn anneal_schedule_to(u: f64, targets: &[f64], tau_max: f64, delta_start: f64) -> Result<DriveSchedule> {
    if !(tau_max > 0.0) {
        return Err(Error::InvalidParameter(format!("tau_max must be positive, got {tau_max}")));
    }
    DriveSchedule::new(
        Waveform::ramp(0.0, u / 2.0, tau_max),
        targets.iter().map(|&d| Waveform::ramp(delta_start, d, tau_max)).collect(),
        tau_max,
    )
}

/// Quench schedule: `Omega` rises linearly to `U_f/2` over `tau_ramp` and
/// stays there; detunings are held at the supplied values.
pub fn make_quench_schedule(u_f: f64, tau_ramp: f64, duration: f64, detunings: &[f64]) -> Result<DriveSchedule> {
    if !(tau_ramp >= 0.0 && tau_ramp < duration) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= tau_ramp < duration, got {tau_ramp} and {duration}"
        )));
    }
    let top = u_f / 2.0;
    let omega = if tau_ramp == 0.0 {
        Waveform::constant(top, duration)
    } else {
        Waveform::new(vec![(0.0, 0.0), (tau_ramp, top), (duration, top)])?
    };
    DriveSchedule::new(
        omega,
        detunings.iter().map(|&d| Waveform::constant(d, duration)).collect(),
        duration,
    )
}

/// Pure state or density matrix on `N` qubits.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(DVector<Complex64>),
    Mixed(DMatrix<Complex64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    AllGround,
    AllExcited,
    /// Product state with per-site amplitudes `(a_g, a_r)`, normalized site by site.
    Product(Vec<(Complex64, Complex64)>),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(m) => m.nrows(),
        }
    }

    pub fn sites(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn basis(sites: usize, index: usize) -> Self {
        let mut v = DVector::zeros(1 << sites);
        v[index] = Complex64::new(1.0, 0.0);
        QuantumState::Pure(v)
    }

    pub fn to_density(&self) -> DMatrix<Complex64> {
        match self {
            QuantumState::Pure(v) => v * v.adjoint(),
            QuantumState::Mixed(m) => m.clone(),
        }
    }

    /// Computational-basis measurement probabilities, normalized.
    pub fn probabilities(&self) -> Vec<f64> {
        let p: Vec<f64> = match self {
            QuantumState::Pure(v) => v.iter().map(|a| a.norm_sqr()).collect(),
            QuantumState::Mixed(m) => (0..m.nrows()).map(|k| m[(k, k)].re.max(0.0)).collect(),
        };
        let total: f64 = p.iter().sum();
        p.into_iter().map(|x| x / total).collect()
    }

    /// Norm (pure) or trace (mixed).
    pub fn weight(&self) -> f64 {
        match self {
            QuantumState::Pure(v) => v.norm_squared().sqrt(),
            QuantumState::Mixed(m) => m.trace().re,
        }
    }

    /// Checks the normalization, Hermiticity and positivity invariants.
    pub fn check_invariants(&self, norm_tol: f64) -> std::result::Result<(), String> {
        match self {
            QuantumState::Pure(v) => {
                let n = v.norm();
                if (n - 1.0).abs() > norm_tol {
                    return Err(format!("norm {n} deviates from 1"));
                }
            }
            QuantumState::Mixed(m) => {
                let tr = m.trace();
                if (tr.re - 1.0).abs() > norm_tol || tr.im.abs() > norm_tol {
                    return Err(format!("trace {tr} deviates from 1"));
                }
                let herm = (m - m.adjoint()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
                if herm > HERMITICITY_TOL {
                    return Err(format!("hermiticity residual {herm:.3e}"));
                }
                if min_eigenvalue_below(m, -POSITIVITY_TOL) {
                    return Err("negative eigenvalue below tolerance".into());
                }
            }
        }
        Ok(())
    }
}

pub const NORM_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// True when `m` has an eigenvalue below `threshold` (a negative number),
/// tested by attempting a Cholesky factorization of `m - threshold * I`.
pub fn min_eigenvalue_below(m: &DMatrix<Complex64>, threshold: f64) -> bool {
    // hand-rolled so that a non-positive pivot is reported instead of being
    // passed through a complex square root
    let n = m.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)].re - threshold;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if !(pivot > 0.0) {
            return true;
        }
        let d = pivot.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    false
}

pub fn prepare_initial_state(sites: usize, kind: &InitialState) -> Result<QuantumState> {
    if sites == 0 {
        return Err(Error::InvalidParameter("need at least one site".into()));
    }
    match kind {
        InitialState::AllGround => Ok(QuantumState::basis(sites, 0)),
        InitialState::AllExcited => Ok(QuantumState::basis(sites, (1 << sites) - 1)),
        InitialState::Product(amps) => {
            if amps.len() != sites {
                return Err(Error::DimensionMismatch { expected: sites, got: amps.len() });
            }
            let mut v = DVector::from_element(1 << sites, Complex64::new(1.0, 0.0));
            for (i, &(g, r)) in amps.iter().enumerate() {
                let norm = (g.norm_sqr() + r.norm_sqr()).sqrt();
                if norm == 0.0 {
                    return Err(Error::InvalidParameter(format!("site {i} has zero amplitude")));
                }
                for b in 0..v.len() {
                    v[b] *= if b >> i & 1 == 1 { r / norm } else { g / norm };
                }
            }
            Ok(QuantumState::Pure(v))
        }
    }
}

/// Precomputed pieces of the resource Hamiltonian that do not depend on time.
#[derive(Clone, Debug)]
pub struct RydbergDrive {
    interaction_diagonal: Vec<f64>,
    schedule: DriveSchedule,
    sites: usize,
}

impl RydbergDrive {
    pub fn new(v: &Interactions, schedule: DriveSchedule) -> Result<Self> {
        let n = v.sites();
        if schedule.detunings.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: schedule.detunings.len() });
        }
        let interaction_diagonal = rydberg_hamiltonian(v, 0.0, &vec![0.0; n])?.diagonal().to_vec();
        Ok(Self { interaction_diagonal, schedule, sites: n })
    }

    pub fn schedule(&self) -> &DriveSchedule {
        &self.schedule
    }

    pub fn hamiltonian_at(&self, tau: f64) -> SpinHamiltonian {
        let det = self.schedule.detunings_at(tau);
        let diagonal = self
            .interaction_diagonal
            .iter()
            .enumerate()
            .map(|(b, d)| d - det.iter().enumerate().filter(|(i, _)| b >> i & 1 == 1).map(|(_, x)| x).sum::<f64>())
            .collect();
        let omega = self.schedule.omega.eval(tau);
        SpinHamiltonian::from_parts(self.sites, diagonal, vec![omega / 2.0; self.sites])
            .expect("dimensions fixed at construction")
    }
}

pub use crate::propagate::{evolve_with, PropagatorOptions};

/// Evolves `initial` under the drive, with dephasing rate `gamma` on every
/// site, returning the state at each requested time.
pub fn evolve(
    initial: &QuantumState,
    schedule: &DriveSchedule,
    v: &Interactions,
    gamma: f64,
    sample_times: &[f64],
) -> Result<Vec<QuantumState>> {
    let drive = RydbergDrive::new(v, schedule.clone())?;
    evolve_with(initial, &|tau| drive.hamiltonian_at(tau), gamma, sample_times, &PropagatorOptions::default())
}
