//! Finite-shot measurement with readout errors, and the standard
//! Monte-Carlo estimators built on it.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`): the generator is seeded
//! with `ChaCha8Rng::seed_from_u64(seed)` and each task selects its own
//! stream with `set_stream`, so results do not depend on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rydberg::QuantumState;
use crate::spins::spin;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub shots: usize,
    /// Probability of reading an atom in `|g>` as `|r>`.
    pub epsilon: f64,
    /// Probability of reading an atom in `|r>` as `|g>`.
    pub epsilon_prime: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidParameter("need at least one shot".into()));
        }
        for (name, p) in [("epsilon", self.epsilon), ("epsilon_prime", self.epsilon_prime)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Measured bitstrings; bit `i` of each entry is the outcome on site `i`
/// (1 = detected in `|r>`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotRecord {
    pub sites: usize,
    pub shots: Vec<u64>,
}

impl ShotRecord {
    /// One line per shot, site 0 first, ASCII `0`/`1`.
    pub fn to_lines(&self) -> String {
        let mut out = String::with_capacity(self.shots.len() * (self.sites + 1));
        for &s in &self.shots {
            for i in 0..self.sites {
                out.push(if s >> i & 1 == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self> {
        let mut sites = None;
        let mut shots = Vec::new();
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line = line.trim();
            if *sites.get_or_insert(line.len()) != line.len() {
                return Err(Error::InvalidParameter(format!("line {}: inconsistent bitstring length", k + 1)));
            }
            let mut v = 0u64;
            for (i, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => v |= 1 << i,
                    _ => return Err(Error::InvalidParameter(format!("line {}: invalid character {ch:?}", k + 1))),
                }
            }
            shots.push(v);
        }
        Ok(Self { sites: sites.unwrap_or(0), shots })
    }
}

/// Draws `params.shots` bitstrings from the `z`-basis distribution of
/// `state`, then flips each bit independently with the readout error rates.
pub fn sample_bitstrings(state: &QuantumState, params: &NoiseParams, stream: u64) -> Result<ShotRecord> {
    params.validate()?;
    let sites = state.sites();
    let probs = state.probabilities();
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    let mut rng = params.rng(stream);
    let shots = (0..params.shots)
        .map(|_| {
            let x: f64 = rng.gen::<f64>() * acc;
            let mut b = cumulative.partition_point(|&c| c <= x).min(probs.len() - 1) as u64;
            for i in 0..sites {
                let excited = b >> i & 1 == 1;
                let flip = if excited { params.epsilon_prime } else { params.epsilon };
                if flip > 0.0 && rng.gen::<f64>() < flip {
                    b ^= 1 << i;
                }
            }
            b
        })
        .collect();
    Ok(ShotRecord { sites, shots })
}

#[derive(Clone, Debug)]
pub struct Estimates {
    pub magnetizations: Vec<f64>,
    pub magnetization_errors: Vec<f64>,
    pub correlations: DMatrix<f64>,
    pub correlation_errors: DMatrix<f64>,
    pub mean_magnetization: f64,
    pub mean_error: f64,
}

fn mean_and_error(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Sample means and standard errors of `S^z_i = 2 b_i - 1`, of the pair
/// products, and of the per-shot average magnetization.
pub fn estimate_observables(record: &ShotRecord) -> Result<Estimates> {
    let n = record.shots.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two shots for standard errors".into()));
    }
    let sites = record.sites;
    let shots = &record.shots;
    let s = |b: u64, i: usize| spin(b as usize, i);
    let mut magnetizations = vec![0.0; sites];
    let mut magnetization_errors = vec![0.0; sites];
    let mut correlations = DMatrix::identity(sites, sites);
    let mut correlation_errors = DMatrix::zeros(sites, sites);
    for i in 0..sites {
        let (m, e) = mean_and_error(shots.iter().map(|&b| s(b, i)), n);
        magnetizations[i] = m;
        magnetization_errors[i] = e;
        for j in (i + 1)..sites {
            let (c, ce) = mean_and_error(shots.iter().map(|&b| s(b, i) * s(b, j)), n);
            correlations[(i, j)] = c;
            correlations[(j, i)] = c;
            correlation_errors[(i, j)] = ce;
            correlation_errors[(j, i)] = ce;
        }
    }
    let (mean_magnetization, mean_error) =
        mean_and_error(shots.iter().map(|&b| (0..sites).map(|i| s(b, i)).sum::<f64>() / sites as f64), n);
    Ok(Estimates {
        magnetizations,
        magnetization_errors,
        correlations,
        correlation_errors,
        mean_magnetization,
        mean_error,
    })
}
