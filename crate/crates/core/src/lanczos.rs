//! Restarted Lanczos iteration for the lowest eigenpair of a real symmetric
//! operator, with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};

pub(crate) struct LanczosResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Lowest eigenpair of `apply` reachable from `start`. The search stays in
/// any invariant subspace that contains the start vector.
pub(crate) fn lowest_eigenpair<F>(
    apply: F,
    start: Vec<f64>,
    tolerance: f64,
    krylov_dim: usize,
    max_restarts: usize,
) -> LanczosResult
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = start.len();
    let krylov_dim = krylov_dim.min(dim).max(1);
    let mut x = start;
    normalize(&mut x);
    let mut best = LanczosResult { value: f64::INFINITY, vector: x.clone(), residual: f64::INFINITY };
    let mut w = vec![0.0; dim];

    for _ in 0..=max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(krylov_dim);
        let mut betas: Vec<f64> = Vec::with_capacity(krylov_dim);
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
            }
            let beta = dot(&w, &w).sqrt();
            if basis.len() >= krylov_dim || beta <= 1e-13 * alpha.abs().max(1e-300) || beta == 0.0 {
                break;
            }
            betas.push(beta);
            let mut next = w.clone();
            normalize(&mut next);
            basis.push(next);
        }

        let m = alphas.len();
        let mut t = DMatrix::zeros(m, m);
        for k in 0..m {
            t[(k, k)] = alphas[k];
            if k + 1 < m {
                t[(k, k + 1)] = betas[k];
                t[(k + 1, k)] = betas[k];
            }
        }
        let eig = SymmetricEigen::new(t);
        let k_min = eig.eigenvalues.imin();
        let y = eig.eigenvectors.column(k_min);
        let mut ritz = vec![0.0; dim];
        for (k, v) in basis.iter().enumerate() {
            axpy(y[k], v, &mut ritz);
        }
        normalize(&mut ritz);

        apply(&ritz, &mut w);
        let value = dot(&ritz, &w);
        axpy(-value, &ritz, &mut w);
        let residual = dot(&w, &w).sqrt();
        if residual < best.residual {
            best = LanczosResult { value, vector: ritz.clone(), residual };
        }
        if residual <= tolerance {
            break;
        }
        x = ritz;
    }
    best
}
