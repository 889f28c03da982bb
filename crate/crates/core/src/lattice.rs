//! Rectangular clusters of the square lattice.
//!
//! Sites are indexed row-major: site `i` sits at column `i % nx`, row
//! `i / nx`. The same order is used for every matrix and every bitstring in
//! the crate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coordination number of the infinite square lattice.
pub const SQUARE_COORDINATION: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterSpec {
    nx: usize,
    ny: usize,
}

impl ClusterSpec {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter(format!(
                "cluster dimensions must be >= 1, got {nx}x{ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn sites(&self) -> usize {
        self.nx * self.ny
    }

    /// Column and row of a site.
    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.nx, site / self.nx)
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.nx + col
    }

    /// Internal nearest-neighbor bonds `(i, j)` with `i < j`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut bonds = Vec::with_capacity(2 * self.sites());
        for row in 0..self.ny {
            for col in 0..self.nx {
                let i = self.index(col, row);
                if col + 1 < self.nx {
                    bonds.push((i, self.index(col + 1, row)));
                }
                if row + 1 < self.ny {
                    bonds.push((i, self.index(col, row + 1)));
                }
            }
        }
        bonds
    }

    pub fn bond_count(&self) -> usize {
        self.bonds().len()
    }

    /// Number of nearest neighbors of `site` inside the cluster.
    pub fn internal_degree(&self, site: usize) -> usize {
        let (col, row) = self.coords(site);
        usize::from(col > 0)
            + usize::from(col + 1 < self.nx)
            + usize::from(row > 0)
            + usize::from(row + 1 < self.ny)
    }
}

/// Real symmetric hopping matrix `t_ij = -t` on internal bonds.
#[derive(Clone, Debug, PartialEq)]
pub struct HoppingMatrix {
    matrix: DMatrix<f64>,
    t_hop: f64,
}

impl HoppingMatrix {
    /// Wraps an arbitrary symmetric hopping matrix.
    pub fn from_matrix(matrix: DMatrix<f64>, t_hop: f64) -> Self {
        Self { matrix, t_hop }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn t_hop(&self) -> f64 {
        self.t_hop
    }

    pub fn sites(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Hopping matrix of the cluster with open boundaries.
pub fn build_hopping(cluster: &ClusterSpec, t_hop: f64) -> Result<HoppingMatrix> {
    if !(t_hop > 0.0) || !t_hop.is_finite() {
        return Err(Error::InvalidParameter(format!("t_hop must be positive, got {t_hop}")));
    }
    let n = cluster.sites();
    let mut matrix = DMatrix::zeros(n, n);
    for (i, j) in cluster.bonds() {
        matrix[(i, j)] = -t_hop;
        matrix[(j, i)] = -t_hop;
    }
    Ok(HoppingMatrix { matrix, t_hop })
}

/// Number of square-lattice neighbors of each site that lie outside the
/// cluster (`z_i` in the mean-field embedding).
pub fn external_neighbor_counts(cluster: &ClusterSpec) -> Vec<usize> {
    (0..cluster.sites())
        .map(|i| SQUARE_COORDINATION - cluster.internal_degree(i))
        .collect()
}
