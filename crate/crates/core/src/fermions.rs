//! Quadratic pseudo-fermion problem.
//!
//! `H_f = sum_{ij,sigma} Q_ij f+_{i sigma} f_{j sigma}` is spin diagonal, so a
//! single N x N diagonalization with an occupation factor of two per orbital
//! gives the ground-state one-particle density matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lattice::{ClusterSpec, HoppingMatrix};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Relative threshold below which an orbital energy counts as a zero mode.
pub const ZERO_MODE_RELATIVE_TOL: f64 = 1e-9;
/// Absolute threshold used when the whole matrix vanishes.
pub const ZERO_MODE_ABSOLUTE_TOL: f64 = 1e-12;

/// Renormalized hopping `Q_ij = t_ij <S^z_i S^z_j>`.
#[derive(Clone, Debug, PartialEq)]
pub struct RenormalizedHopping(pub DMatrix<f64>);

impl RenormalizedHopping {
    /// `Q` from the bare hopping and a spin correlation matrix.
    pub fn from_correlations(t: &HoppingMatrix, zz: &DMatrix<f64>) -> Result<Self> {
        let n = t.sites();
        if zz.nrows() != n || zz.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: zz.nrows() });
        }
        Ok(Self(t.matrix().component_mul(zz)))
    }

    /// Classical starting guess: `<S^z S^z> = 1` on every bond, so `Q = t`.
    pub fn classical(t: &HoppingMatrix) -> Self {
        Self(t.matrix().clone())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Spin-summed one-particle density matrix `G_ij = sum_sigma <f+_i f_j>`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub DMatrix<f64>);

impl DensityMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Spin coupling `J_ij = t_ij G_ij` together with its bond average.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinCoupling {
    matrix: DMatrix<f64>,
    mean_bond: f64,
}

impl SpinCoupling {
    /// Builds a coupling with an explicitly supplied bond average. Used for
    /// clusters without internal bonds, where the average has to come from
    /// outside the cluster.
    pub fn with_mean(matrix: DMatrix<f64>, mean_bond: f64) -> Self {
        Self { matrix, mean_bond }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `J-bar`, the average coupling over internal nearest-neighbor bonds.
    pub fn mean_bond(&self) -> f64 {
        self.mean_bond
    }

    pub fn sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { matrix: &self.matrix * factor, mean_bond: self.mean_bond * factor }
    }
}

/// Ground-state density matrix of `H_f(Q)` at half filling.
///
/// Orbitals with negative energy are doubly occupied, positive ones empty,
/// and zero modes carry one electron (half of their capacity) so that the
/// result stays particle-hole symmetric when the spectrum is degenerate.
pub fn solve_density_matrix(q: &RenormalizedHopping) -> Result<DensityMatrix> {
    let m = q.matrix();
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    let norm = m.norm();
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_SWEEPS)
        .ok_or(Error::EigenNoConvergence { norm, iterations: EIGEN_MAX_SWEEPS })?;

    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
    let zero_tol = if scale > 0.0 {
        ZERO_MODE_RELATIVE_TOL * scale
    } else {
        ZERO_MODE_ABSOLUTE_TOL
    };

    let mut g = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let occupation = if lambda.abs() < zero_tol {
            1.0
        } else if lambda < 0.0 {
            2.0
        } else {
            continue;
        };
        let v = eig.eigenvectors.column(k);
        g += occupation * &v * v.transpose();
    }
    Ok(DensityMatrix(g))
}

/// `J = t * G` elementwise, with the average over the cluster's bonds.
///
/// Clusters without internal bonds get a zero average; callers that need a
/// mean field for them must use [`SpinCoupling::with_mean`].
pub fn build_coupling(
    t: &HoppingMatrix,
    g: &DensityMatrix,
    cluster: &ClusterSpec,
) -> Result<SpinCoupling> {
    let n = t.sites();
    if g.0.nrows() != n || cluster.sites() != n {
        return Err(Error::DimensionMismatch { expected: n, got: g.0.nrows() });
    }
    let matrix = t.matrix().component_mul(&g.0);
    let bonds = cluster.bonds();
    let mean_bond = if bonds.is_empty() {
        0.0
    } else {
        bonds.iter().map(|&(i, j)| matrix[(i, j)]).sum::<f64>() / bonds.len() as f64
    };
    Ok(SpinCoupling { matrix, mean_bond })
}

#[cfg(test)]
pub(crate) mod fock_oracle {
    //! Many-body enumeration of a spinful quadratic Hamiltonian. Test only.

    use nalgebra::{DMatrix, SymmetricEigen};

    /// Mode index of orbital `i` with spin `s` (0 or 1).
    fn mode(i: usize, s: usize, n: usize) -> usize {
        s * n + i
    }

    /// Applies `c+_a c_b` to a Fock state, returning sign and new state.
    fn hop(state: usize, a: usize, b: usize) -> Option<(f64, usize)> {
        if state & (1 << b) == 0 {
            return None;
        }
        let mut sign = if (state & ((1 << b) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let s1 = state & !(1 << b);
        if s1 & (1 << a) != 0 {
            return None;
        }
        if (s1 & ((1 << a) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        Some((sign, s1 | (1 << a)))
    }

    /// Ground-manifold averaged `G` in the half-filled particle-number sector.
    pub fn density_matrix(q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = q.nrows();
        let modes = 2 * n;
        let states: Vec<usize> =
            (0..1usize << modes).filter(|s| s.count_ones() as usize == n).collect();
        let index = |s: usize| states.binary_search(&s).unwrap();
        let dim = states.len();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for (col, &st) in states.iter().enumerate() {
            for s in 0..2 {
                for i in 0..n {
                    for j in 0..n {
                        if q[(i, j)] == 0.0 {
                            continue;
                        }
                        if let Some((sign, out)) = hop(st, mode(i, s, n), mode(j, s, n)) {
                            h[(index(out), col)] += sign * q[(i, j)];
                        }
                    }
                }
            }
        }
        let eig = SymmetricEigen::<f64, nalgebra::Dyn>::new(h);
        let e0 = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let ground: Vec<usize> = (0..dim)
            .filter(|&k| (eig.eigenvalues[k] - e0).abs() < 1e-9)
            .collect();
        let mut g = DMatrix::zeros(n, n);
        for &k in &ground {
            let v = eig.eigenvectors.column(k);
            for (col, &st) in states.iter().enumerate() {
                if v[col] == 0.0 {
                    continue;
                }
                for s in 0..2 {
                    for i in 0..n {
                        for j in 0..n {
                            if let Some((sign, out)) = hop(st, mode(i, s, n), mode(j, s, n)) {
                                g[(i, j)] += v[index(out)] * sign * v[col];
                            }
                        }
                    }
                }
            }
        }
        g / ground.len() as f64
    }
}
