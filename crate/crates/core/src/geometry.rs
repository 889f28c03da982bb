//! Atom placement: choose positions whose van der Waals couplings
//! `C6 / r^6` reproduce the target interactions `-4 J_ij`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::ClusterSpec;
use crate::rydberg::AtomArray;

#[derive(Clone, Debug)]
pub struct GeometryProblem {
    /// Target spin couplings `J_ij`.
    pub target: DMatrix<f64>,
    pub c6: f64,
    pub positions: Vec<[f64; 2]>,
    /// Optional soft minimum spacing (um); pairs closer than this pay a
    /// quadratic penalty in units of the largest target coupling.
    pub min_distance: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// Stop once `|grad D| * r_min / (4 max|J|)` drops below this, with
    /// `r_min` the smallest interatomic distance.
    pub grad_tol: f64,
    /// Number of independent starts; start 0 is the unperturbed guess.
    pub starts: usize,
    /// Uniform perturbation of the later starts, as a fraction of the
    /// initial spacing.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { max_iters: 2000, grad_tol: 1e-6, starts: 1, perturbation: 0.1, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct GeometryResult {
    pub array: AtomArray,
    pub initial_cost: f64,
    pub cost: f64,
    /// `D` after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the line search could not decrease the cost before the
    /// gradient criterion was met; the best positions found are returned.
    pub line_search_failed: bool,
}

fn check_inputs(target: &DMatrix<f64>, c6: f64, n: usize) -> Result<()> {
    if target.nrows() != n || target.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: target.nrows() });
    }
    if !(c6 > 0.0) {
        return Err(Error::InvalidParameter(format!("C6 must be positive, got {c6}")));
    }
    Ok(())
}

fn sq_dist(p: &[[f64; 2]], i: usize, j: usize) -> f64 {
    let dx = p[i][0] - p[j][0];
    let dy = p[i][1] - p[j][1];
    dx * dx + dy * dy
}

impl GeometryProblem {
    pub fn new(target: DMatrix<f64>, c6: f64, positions: Vec<[f64; 2]>) -> Result<Self> {
        check_inputs(&target, c6, positions.len())?;
        Ok(Self { target, c6, positions, min_distance: None })
    }

    fn penalty_scale(&self) -> f64 {
        4.0 * self.target.amax()
    }

    /// Sum of squared residuals (the square of `D`) and its gradient.
    fn squared_cost(&self, p: &[[f64; 2]], grad: Option<&mut [[f64; 2]]>) -> f64 {
        let n = p.len();
        let mut s = 0.0;
        let mut g_store;
        let g: &mut [[f64; 2]] = match grad {
            Some(g) => {
                g.iter_mut().for_each(|x| *x = [0.0; 2]);
                g
            }
            None => {
                g_store = Vec::new();
                &mut g_store
            }
        };
        let want_grad = !g.is_empty();
        let scale = self.penalty_scale();
        for i in 0..n {
            for j in (i + 1)..n {
                let r2 = sq_dist(p, i, j);
                if r2 == 0.0 {
                    return f64::INFINITY;
                }
                let v = self.c6 / (r2 * r2 * r2);
                let e = v + 4.0 * self.target[(i, j)];
                s += e * e;
                // d e / d x_i = -6 v / r^2 (x_i - x_j)
                let mut coef = if want_grad { 2.0 * e * (-6.0 * v / r2) } else { 0.0 };
                if let Some(dmin) = self.min_distance {
                    let r = r2.sqrt();
                    if r < dmin {
                        let d = (dmin - r) / dmin;
                        s += (scale * d).powi(2);
                        if want_grad {
                            coef += 2.0 * scale * scale * d * (-1.0 / dmin) / r;
                        }
                    }
                }
                if want_grad {
                    for k in 0..2 {
                        let dx = p[i][k] - p[j][k];
                        g[i][k] += coef * dx;
                        g[j][k] -= coef * dx;
                    }
                }
            }
        }
        s
    }

    /// `D` at the current positions.
    pub fn cost(&self) -> f64 {
        self.squared_cost(&self.positions, None).sqrt()
    }

    /// Analytic gradient of `D` with respect to every coordinate.
    pub fn gradient(&self) -> Vec<[f64; 2]> {
        let mut g = vec![[0.0; 2]; self.positions.len()];
        let s = self.squared_cost(&self.positions, Some(&mut g));
        let d = s.sqrt();
        if d > 0.0 {
            g.iter_mut().for_each(|x| {
                x[0] /= 2.0 * d;
                x[1] /= 2.0 * d;
            });
        }
        g
    }
}

/// `sqrt(sum_{i<j} (C6 / r_ij^6 + 4 J_ij)^2)`; infinite if two atoms coincide.
pub fn cost(array: &AtomArray, j: &DMatrix<f64>) -> Result<f64> {
    Ok(GeometryProblem::new(j.clone(), array.c6, array.positions.clone())?.cost())
}

/// Rectangular grid in the cluster's row-major order with spacing
/// `max_ij (C6 / |4 J_ij|)^(1/6)` over the nonzero couplings.
pub fn initial_guess(j: &DMatrix<f64>, cluster: &ClusterSpec, c6: f64) -> Result<AtomArray> {
    check_inputs(j, c6, cluster.sites())?;
    let spacing = j
        .iter()
        .filter(|x| **x != 0.0)
        .map(|x| (c6 / (4.0 * x.abs())).powf(1.0 / 6.0))
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
        .ok_or(Error::NoTargetCouplings)?;
    let positions = (0..cluster.sites())
        .map(|s| {
            let (col, row) = cluster.coords(s);
            [col as f64 * spacing, row as f64 * spacing]
        })
        .collect();
    AtomArray::new(positions, c6)
}

fn flat(p: &[[f64; 2]]) -> Vec<f64> {
    p.iter().flat_map(|x| x.iter().copied()).collect()
}

fn unflat(x: &[f64]) -> Vec<[f64; 2]> {
    x.chunks(2).map(|c| [c[0], c[1]]).collect()
}

fn min_spacing(p: &[[f64; 2]]) -> f64 {
    (0..p.len())
        .flat_map(|i| ((i + 1)..p.len()).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(p, i, j).sqrt())
        .fold(f64::INFINITY, f64::min)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nonlinear conjugate gradients (Polak-Ribiere with restarts) and an
/// Armijo backtracking line search, run on `D^2` which has the same
/// minimizers as `D` but stays smooth where `D` reaches zero.
fn minimize_from(problem: &GeometryProblem, start: Vec<[f64; 2]>, opts: &OptimizerOptions) -> GeometryResult {
    let n = start.len();
    let eval = |x: &[f64]| {
        let mut g = vec![[0.0; 2]; n];
        let s = problem.squared_cost(&unflat(x), Some(&mut g));
        (s, flat(&g))
    };
    let mut x = flat(&start);
    let (mut s, mut g) = eval(&x);
    let initial_cost = s.sqrt();
    let mut history = vec![initial_cost];
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut step = 1.0 / dot(&g, &g).sqrt().max(f64::MIN_POSITIVE);
    let mut converged = false;
    let mut line_search_failed = false;
    let mut iterations = 0;
    let scale = problem.penalty_scale();
    let relative_gradient = |x: &[f64], s: f64, g: &[f64]| {
        let d = s.sqrt();
        if d > 0.0 { dot(g, g).sqrt() / (2.0 * d) * min_spacing(&unflat(x)) / scale } else { 0.0 }
    };
    while iterations < opts.max_iters {
        if !s.is_finite() {
            break;
        }
        if s == 0.0 || relative_gradient(&x, s, &g) <= opts.grad_tol || dot(&g, &g) == 0.0 {
            converged = true;
            break;
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            let (st, gt) = eval(&trial);
            if st.is_finite() && st <= s + 1e-4 * alpha * slope && st < s {
                accepted = Some((trial, st, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, sn, gn)) = accepted else {
            // no decrease along the current direction: machine precision
            // reached or a genuine failure
            let steepest = dot(&dir, &g) == -dot(&g, &g);
            if steepest {
                // at a zero of the cost rounding noise stops the search
                if s.sqrt() <= 1e-9 * scale {
                    converged = true;
                } else {
                    line_search_failed = true;
                }
                break;
            }
            dir = g.iter().map(|v| -v).collect();
            step = 1.0 / dot(&g, &g).sqrt();
            continue;
        };
        iterations += 1;
        let beta = (dot(&gn, &gn) - dot(&gn, &g)) / dot(&g, &g);
        let beta = if iterations % (2 * n) == 0 { 0.0 } else { beta.max(0.0) };
        dir = gn.iter().zip(&dir).map(|(gi, di)| -gi + beta * di).collect();
        step = alpha * 2.0;
        x = xn;
        s = sn;
        g = gn;
        history.push(s.sqrt());
    }
    GeometryResult {
        array: AtomArray { positions: unflat(&x), c6: problem.c6 },
        initial_cost,
        cost: s.sqrt(),
        history,
        iterations,
        converged,
        line_search_failed,
    }
}

/// Locally minimizes `D`, optionally from several perturbed starts run in
/// parallel, and returns the best result. The cost never ends above the
/// cost of the unperturbed start.
pub fn optimize(problem: &GeometryProblem, opts: &OptimizerOptions) -> Result<GeometryResult> {
    check_inputs(&problem.target, problem.c6, problem.positions.len())?;
    if opts.starts == 0 {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    if !problem.cost().is_finite() {
        return Err(Error::InvalidParameter("initial positions contain coincident atoms".into()));
    }
    let spacing = min_spacing(&problem.positions);
    let spacing = if spacing.is_finite() { spacing } else { 1.0 };
    let results: Vec<GeometryResult> = (0..opts.starts)
        .into_par_iter()
        .map(|k| {
            let mut start = problem.positions.clone();
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(k as u64);
                for p in start.iter_mut() {
                    for c in p.iter_mut() {
                        *c += opts.perturbation * spacing * rng.gen_range(-1.0..=1.0);
                    }
                }
            }
            minimize_from(problem, start, opts)
        })
        .collect();
    let first_initial = results[0].initial_cost;
    let mut best = results
        .into_iter()
        .filter(|r| r.cost.is_finite())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("start 0 has finite cost");
    best.initial_cost = first_initial;
    Ok(best)
}

/// `site_index,x_um,y_um` rows with a header.
pub fn positions_csv(array: &AtomArray) -> String {
    let mut out = String::from("site_index,x_um,y_um\n");
    for (i, p) in array.positions.iter().enumerate() {
        out.push_str(&format!("{i},{:.9},{:.9}\n", p[0], p[1]));
    }
    out
}
