//! Cluster transverse-field Ising problem and its exact ground state.
//!
//! Basis state `b` (an integer in `0..2^N`) stores site `i` in bit `i`; a set
//! bit is spin up (`S^z = +1`), which the Rydberg emulator identifies with the
//! excited state `|r>`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fermions::SpinCoupling;
use crate::lanczos;

/// Largest cluster accepted by default.
pub const DEFAULT_MAX_SITES: usize = 14;
/// Dense diagonalization is used up to this many sites.
pub const DENSE_SOLVER_MAX_SITES: usize = 8;
/// Ground-state residual tolerance relative to the operator norm bound.
pub const RESIDUAL_RELATIVE_TOL: f64 = 1e-8;

/// How the double sum `sum_{i,j} J_ij S^z_i S^z_j` is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairCounting {
    /// Each bond once with coefficient `J_ij`.
    Unordered,
    /// Both orderings of each bond, i.e. coefficient `2 J_ij`.
    Ordered,
}

impl PairCounting {
    /// Multiplier applied to `J_ij` for the `i < j` term.
    pub fn factor(self) -> f64 {
        match self {
            PairCounting::Unordered => 1.0,
            PairCounting::Ordered => 2.0,
        }
    }
}

/// Pair convention used throughout the crate.
pub const PAIR_COUNTING: PairCounting = PairCounting::Ordered;

#[inline]
pub fn spin(b: usize, i: usize) -> f64 {
    if b >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Real Hamiltonian of the form `diag(b) + sum_i g_i S^x_i` on `N` qubits.
///
/// Every operator in this crate (the cluster model and the Rydberg resource
/// Hamiltonian) has this shape, so it is stored matrix-free.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinHamiltonian {
    sites: usize,
    diagonal: Vec<f64>,
    transverse: Vec<f64>,
}

impl SpinHamiltonian {
    pub fn from_parts(sites: usize, diagonal: Vec<f64>, transverse: Vec<f64>) -> Result<Self> {
        if diagonal.len() != 1 << sites {
            return Err(Error::DimensionMismatch { expected: 1 << sites, got: diagonal.len() });
        }
        if transverse.len() != sites {
            return Err(Error::DimensionMismatch { expected: sites, got: transverse.len() });
        }
        Ok(Self { sites, diagonal, transverse })
    }

    /// `sum_{i<j} zz_ij S^z_i S^z_j + sum_i z_i S^z_i + sum_i x_i S^x_i`,
    /// reading only the upper triangle of `zz`.
    pub fn from_pauli_terms(zz: &DMatrix<f64>, z: &[f64], x: &[f64]) -> Result<Self> {
        let n = z.len();
        if zz.nrows() != n || zz.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: zz.nrows() });
        }
        let pairs: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| (zz[(i, j)] != 0.0).then(|| (i, j, zz[(i, j)])))
            .collect();
        let diagonal = (0..1usize << n)
            .map(|b| {
                let pair: f64 = pairs.iter().map(|&(i, j, c)| c * spin(b, i) * spin(b, j)).sum();
                let field: f64 = z.iter().enumerate().map(|(i, c)| c * spin(b, i)).sum();
                pair + field
            })
            .collect();
        Self::from_parts(n, diagonal, x.to_vec())
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn transverse(&self) -> &[f64] {
        &self.transverse
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let d = self.diagonal.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        d + self.transverse.iter().map(|g| g.abs()).sum::<f64>()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (b, yb) in y.iter_mut().enumerate() {
            let mut acc = self.diagonal[b] * x[b];
            for (i, g) in self.transverse.iter().enumerate() {
                acc += g * x[b ^ (1 << i)];
            }
            *yb = acc;
        }
    }

    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (b, yb) in y.iter_mut().enumerate() {
            let mut acc = x[b] * self.diagonal[b];
            for (i, g) in self.transverse.iter().enumerate() {
                acc += x[b ^ (1 << i)] * *g;
            }
            *yb = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for b in 0..d {
            m[(b, b)] = self.diagonal[b];
            for (i, g) in self.transverse.iter().enumerate() {
                m[(b ^ (1 << i), b)] += g;
            }
        }
        m
    }

    pub fn expectation(&self, psi: &[f64]) -> f64 {
        let mut y = vec![0.0; psi.len()];
        self.apply(psi, &mut y);
        psi.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// All eigenvalues, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_dense()).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// Builds `H = sum_{i<j} c J_ij S^z S^z + (U/4) sum S^x + sum h_i S^z`, with
/// `c` set by [`PAIR_COUNTING`].
pub fn build_cluster_hamiltonian(j: &SpinCoupling, u: f64, h: &[f64]) -> Result<SpinHamiltonian> {
    build_cluster_hamiltonian_with(j, u, h, PAIR_COUNTING, DEFAULT_MAX_SITES)
}

pub fn build_cluster_hamiltonian_with(
    j: &SpinCoupling,
    u: f64,
    h: &[f64],
    counting: PairCounting,
    max_sites: usize,
) -> Result<SpinHamiltonian> {
    let n = j.sites();
    if n > max_sites {
        return Err(Error::DimensionOverflow { sites: n, max: max_sites });
    }
    if h.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: h.len() });
    }
    let zz = j.matrix() * counting.factor();
    SpinHamiltonian::from_pauli_terms(&zz, h, &vec![u / 4.0; n])
}

/// `<S^z_i>` and `<S^z_i S^z_j>` from a probability distribution over the
/// computational basis.
pub fn z_moments(probabilities: &[f64], sites: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mut mag = vec![0.0; sites];
    let mut corr = DMatrix::zeros(sites, sites);
    for (b, &p) in probabilities.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for i in 0..sites {
            let si = spin(b, i);
            mag[i] += p * si;
            for jj in (i + 1)..sites {
                corr[(i, jj)] += p * si * spin(b, jj);
            }
        }
    }
    let total: f64 = probabilities.iter().sum();
    for i in 0..sites {
        corr[(i, i)] = total;
        for jj in (i + 1)..sites {
            corr[(jj, i)] = corr[(i, jj)];
        }
    }
    (mag, corr)
}

#[derive(Clone, Debug)]
pub struct SpinSolution {
    pub state: Vec<f64>,
    pub energy: f64,
    pub magnetizations: Vec<f64>,
    pub mean_magnetization: f64,
    pub correlations: DMatrix<f64>,
    pub residual: f64,
    /// Set when the ground level was found degenerate at zero field and the
    /// returned vector is the combination with the largest magnetization.
    pub degenerate: bool,
}

impl SpinSolution {
    fn from_state(state: Vec<f64>, energy: f64, residual: f64, degenerate: bool, sites: usize) -> Self {
        let probs: Vec<f64> = state.iter().map(|a| a * a).collect();
        let (magnetizations, correlations) = z_moments(&probs, sites);
        let mean_magnetization = magnetizations.iter().sum::<f64>() / sites as f64;
        Self { state, energy, magnetizations, mean_magnetization, correlations, residual, degenerate }
    }

    pub fn quasiparticle_weight(&self) -> f64 {
        self.mean_magnetization * self.mean_magnetization
    }
}

fn deterministic_start(dim: usize) -> Vec<f64> {
    // fixed, non-symmetric start vector so runs are reproducible
    (0..dim).map(|b| 1.0 + 0.25 * ((b as f64) * 0.754_877_666).sin()).collect()
}

fn flip_all(x: &[f64]) -> Vec<f64> {
    let mask = x.len() - 1;
    (0..x.len()).map(|b| x[b ^ mask]).collect()
}

/// Lowest eigenpair by Lanczos inside the subspace spanned from `start`.
fn iterative_lowest(h: &SpinHamiltonian, start: Vec<f64>, tol: f64) -> (f64, Vec<f64>, f64) {
    let r = lanczos::lowest_eigenpair(|x, y| h.apply(x, y), start, tol, 120, 400);
    (r.value, r.vector, r.residual)
}

fn residual(h: &SpinHamiltonian, psi: &[f64], e: f64) -> f64 {
    let mut y = vec![0.0; psi.len()];
    h.apply(psi, &mut y);
    y.iter().zip(psi).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt()
}

/// Ground state of a real spin Hamiltonian.
///
/// Uses a dense solve up to [`DENSE_SOLVER_MAX_SITES`] sites and Lanczos
/// above. When every longitudinal term is odd-free (zero field), the two
/// spin-flip parity sectors are solved separately so that an exact
/// degeneracy is detected and resolved toward positive magnetization.
pub fn ground_state(h: &SpinHamiltonian) -> Result<SpinSolution> {
    let n = h.sites();
    let tol = RESIDUAL_RELATIVE_TOL * h.norm_bound().max(f64::MIN_POSITIVE);
    let dim = h.dim();

    if h.transverse.iter().all(|g| *g == 0.0) {
        return Ok(classical_ground_state(h));
    }

    let flip_symmetric = {
        let mask = dim - 1;
        (0..dim).all(|b| h.diagonal[b] == h.diagonal[b ^ mask])
    };

    if !flip_symmetric {
        let (e, v, r) = if n <= DENSE_SOLVER_MAX_SITES {
            let eig = SymmetricEigen::new(h.to_dense());
            let k = eig.eigenvalues.imin();
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
            let e = eig.eigenvalues[k];
            let r = residual(h, &v, e);
            (e, v, r)
        } else {
            iterative_lowest(h, deterministic_start(dim), tol)
        };
        if r > tol {
            return Err(Error::GroundStateNoConvergence { residual: r, tolerance: tol });
        }
        return Ok(SpinSolution::from_state(fix_sign(v), e, r, false, n));
    }

    // Zero field: solve each parity sector.
    let start = deterministic_start(dim);
    let flipped = flip_all(&start);
    let even: Vec<f64> = start.iter().zip(&flipped).map(|(a, b)| a + b).collect();
    let odd: Vec<f64> = start.iter().zip(&flipped).map(|(a, b)| a - b).collect();
    let (ee, ve, re) = iterative_lowest(h, even, tol);
    let odd_result = if dim > 1 { Some(iterative_lowest(h, odd, tol)) } else { None };

    let gap_tol = 1e-9 * h.norm_bound().max(1.0);
    match odd_result {
        Some((eo, vo, ro)) if (eo - ee).abs() <= gap_tol => {
            if re.max(ro) > tol {
                return Err(Error::GroundStateNoConvergence { residual: re.max(ro), tolerance: tol });
            }
            let plus: Vec<f64> = ve.iter().zip(&vo).map(|(a, b)| (a + b) / 2f64.sqrt()).collect();
            let minus: Vec<f64> = ve.iter().zip(&vo).map(|(a, b)| (a - b) / 2f64.sqrt()).collect();
            let a = SpinSolution::from_state(fix_sign(plus), 0.5 * (ee + eo), re.max(ro), true, n);
            let b = SpinSolution::from_state(fix_sign(minus), 0.5 * (ee + eo), re.max(ro), true, n);
            Ok(if a.mean_magnetization >= b.mean_magnetization { a } else { b })
        }
        Some((eo, vo, ro)) if eo < ee => {
            if ro > tol {
                return Err(Error::GroundStateNoConvergence { residual: ro, tolerance: tol });
            }
            Ok(SpinSolution::from_state(fix_sign(vo), eo, ro, false, n))
        }
        _ => {
            if re > tol {
                return Err(Error::GroundStateNoConvergence { residual: re, tolerance: tol });
            }
            Ok(SpinSolution::from_state(fix_sign(ve), ee, re, false, n))
        }
    }
}

/// Ground state of a diagonal Hamiltonian, taken exactly as a basis vector.
/// Ties are broken toward the largest magnetization.
fn classical_ground_state(h: &SpinHamiltonian) -> SpinSolution {
    let n = h.sites();
    let e0 = h.diagonal.iter().cloned().fold(f64::INFINITY, f64::min);
    let tie = 1e-12 * h.norm_bound().max(1.0);
    let minima: Vec<usize> = (0..h.dim()).filter(|&b| h.diagonal[b] - e0 <= tie).collect();
    let best = *minima
        .iter()
        .max_by_key(|b| b.count_ones())
        .expect("nonempty spectrum");
    let mut state = vec![0.0; h.dim()];
    state[best] = 1.0;
    SpinSolution::from_state(state, h.diagonal[best], 0.0, minima.len() > 1, n)
}

/// Makes the largest-magnitude amplitude positive.
fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let k = (0..v.len()).fold(0, |k, b| if v[b].abs() > v[k].abs() { b } else { k });
    if v[k] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
    v
}
