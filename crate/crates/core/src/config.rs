//! Run configuration.
//!
//! TOML with dotted keys (`cluster.nx = 3` or a `[cluster]` table). Every
//! knob has a default except the cluster shape, the hopping, and the
//! interaction list of the chosen workflow. Frequencies are given in MHz and
//! converted to rad/us unless `units.angular = true`; times are in us and
//! lengths in um.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anneal::{AnnealBackend, GeometryMode};
use crate::backend::{ExactBackend, SpinBackend};
use crate::error::{Error, Result};
use crate::geometry::OptimizerOptions;
use crate::lattice::{build_hopping, ClusterSpec, HoppingMatrix};
use crate::quench::{FieldPolicy, QuenchBackend, RydbergQuench, Window, MIN_SPECTRUM_SAMPLES};
use crate::rydberg::DEFAULT_C6;
use crate::sampling::NoiseParams;
use crate::scf::ScfConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Exact,
    AnnealNoiseless,
    AnnealNoisy,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [BackendKind::Exact, BackendKind::AnnealNoiseless, BackendKind::AnnealNoisy];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Exact => "exact",
            BackendKind::AnnealNoiseless => "anneal-noiseless",
            BackendKind::AnnealNoisy => "anneal-noisy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|b| b.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|b| b.as_str()).collect();
            Error::Config(format!("unknown backend `{s}`; valid backends: {}", valid.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    #[default]
    Ideal,
    Optimized,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    #[default]
    Frozen,
    Zero,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitsSection {
    /// Read MHz values as rad/us coefficients instead of cyclic frequencies.
    pub angular: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub backend: BackendKind,
    /// Worker threads; all cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_hop_mhz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScfSection {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_magnetization: f64,
}

impl Default for ScfSection {
    fn default() -> Self {
        let d = ScfConfig::default();
        Self { tolerance: d.tolerance, max_iterations: d.max_iterations, initial_magnetization: d.initial_magnetization }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_mhz: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub n_shots: usize,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    /// Seeds every random stream of the run.
    pub seed: u64,
    pub gamma_mhz: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { n_shots: 150, epsilon: 0.03, epsilon_prime: 0.03, seed: 0, gamma_mhz: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSection {
    pub tau_max_us: f64,
    pub delta_start_mhz: f64,
}

impl Default for AnnealSection {
    fn default() -> Self {
        Self { tau_max_us: crate::rydberg::DEFAULT_TAU_MAX, delta_start_mhz: 5.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RydbergSection {
    /// Van der Waals coefficient in MHz um^6; the built-in value when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c6: Option<f64>,
    pub geometry: GeometryKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuenchSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_f_mhz: Option<Vec<f64>>,
    pub duration_us: f64,
    pub samples: usize,
    pub tau_ramp_us: f64,
    pub window: WindowKind,
    pub field: FieldKind,
}

impl Default for QuenchSection {
    fn default() -> Self {
        Self {
            u_f_mhz: None,
            duration_us: crate::quench::DEFAULT_DURATION,
            samples: crate::quench::DEFAULT_SAMPLES,
            tau_ramp_us: crate::rydberg::DEFAULT_TAU_RAMP,
            window: WindowKind::Hann,
            field: FieldKind::Frozen,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    /// Interaction of the equilibrium run supplying `J` when no file is given.
    pub u_mhz: f64,
    /// CSV matrix of `J` in MHz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_file: Option<String>,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub starts: usize,
    pub perturbation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_distance_um: Option<f64>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let d = OptimizerOptions::default();
        Self {
            u_mhz: 0.0,
            j_file: None,
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            starts: d.starts,
            perturbation: d.perturbation,
            min_distance_um: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub units: UnitsSection,
    pub run: RunSection,
    pub cluster: ClusterSection,
    pub scf: ScfSection,
    pub equilibrium: EquilibriumSection,
    pub noise: NoiseSection,
    pub anneal: AnnealSection,
    pub rydberg: RydbergSection,
    pub quench: QuenchSection,
    pub geometry: GeometrySection,
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

fn finite(key: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("`{key}` must be finite, got {x}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// The full effective configuration, defaults included, as TOML.
    pub fn to_toml(&self) -> String {
        let mut full = self.clone();
        full.rydberg.c6.get_or_insert(self.to_mhz(DEFAULT_C6));
        toml::to_string(&full).expect("config is always representable as TOML")
    }

    /// `to_toml` with every line prefixed by `# `, for CSV headers.
    pub fn echo(&self) -> String {
        self.to_toml()
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| format!("# {l}\n"))
            .collect()
    }

    /// Converts a configured frequency to a Hamiltonian coefficient.
    pub fn freq(&self, mhz: f64) -> f64 {
        if self.units.angular {
            mhz
        } else {
            TAU * mhz
        }
    }

    /// Inverse of [`RunConfig::freq`], used when writing frequencies out.
    pub fn to_mhz(&self, coefficient: f64) -> f64 {
        if self.units.angular {
            coefficient
        } else {
            coefficient / TAU
        }
    }

    pub fn cluster_spec(&self) -> Result<ClusterSpec> {
        let nx = self.cluster.nx.ok_or_else(|| missing("cluster.nx"))?;
        let ny = self.cluster.ny.ok_or_else(|| missing("cluster.ny"))?;
        ClusterSpec::new(nx, ny).map_err(|e| Error::Config(format!("cluster.nx/cluster.ny: {e}")))
    }

    pub fn hopping(&self) -> Result<HoppingMatrix> {
        let t = self.cluster.t_hop_mhz.ok_or_else(|| missing("cluster.t_hop_mhz"))?;
        build_hopping(&self.cluster_spec()?, self.freq(finite("cluster.t_hop_mhz", t)?))
    }

    pub fn scf_config(&self) -> Result<ScfConfig> {
        let cfg = ScfConfig {
            tolerance: self.scf.tolerance,
            max_iterations: self.scf.max_iterations,
            initial_magnetization: self.scf.initial_magnetization,
        };
        cfg.validate().map_err(|e| Error::Config(format!("scf: {e}")))?;
        Ok(cfg)
    }

    fn interactions(&self, key: &str, list: &Option<Vec<f64>>) -> Result<Vec<f64>> {
        let list = list.as_ref().ok_or_else(|| missing(key))?;
        if list.is_empty() {
            return Err(Error::Config(format!("`{key}` is empty")));
        }
        list.iter().map(|&u| finite(key, u).map(|u| self.freq(u))).collect()
    }

    /// Equilibrium interactions as Hamiltonian coefficients.
    pub fn equilibrium_us(&self) -> Result<Vec<f64>> {
        self.interactions("equilibrium.u_mhz", &self.equilibrium.u_mhz)
    }

    /// Quench interactions as Hamiltonian coefficients.
    pub fn quench_us(&self) -> Result<Vec<f64>> {
        self.interactions("quench.u_f_mhz", &self.quench.u_f_mhz)
    }

    pub fn noise_params(&self) -> Result<NoiseParams> {
        let p = NoiseParams {
            shots: self.noise.n_shots,
            epsilon: self.noise.epsilon,
            epsilon_prime: self.noise.epsilon_prime,
            seed: self.noise.seed,
        };
        p.validate().map_err(|e| Error::Config(format!("noise: {e}")))?;
        Ok(p)
    }

    pub fn gamma(&self) -> Result<f64> {
        let g = finite("noise.gamma_mhz", self.noise.gamma_mhz)?;
        if g < 0.0 {
            return Err(Error::Config(format!("`noise.gamma_mhz` must be >= 0, got {g}")));
        }
        Ok(self.freq(g))
    }

    pub fn c6(&self) -> Result<f64> {
        match self.rydberg.c6 {
            None => Ok(DEFAULT_C6),
            Some(c) if c.is_finite() && c > 0.0 => Ok(self.freq(c)),
            Some(c) => Err(Error::Config(format!("`rydberg.c6` must be > 0, got {c}"))),
        }
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            max_iters: self.geometry.max_iters,
            grad_tol: self.geometry.grad_tol,
            starts: self.geometry.starts,
            perturbation: self.geometry.perturbation,
            seed: self.noise.seed,
        }
    }

    pub fn geometry_mode(&self) -> GeometryMode {
        match self.rydberg.geometry {
            GeometryKind::Ideal => GeometryMode::Ideal,
            GeometryKind::Optimized => GeometryMode::Optimized(self.optimizer_options()),
        }
    }

    pub fn anneal_backend(&self, noisy: bool) -> Result<AnnealBackend> {
        let cluster = self.cluster_spec()?;
        let tau_max = finite("anneal.tau_max_us", self.anneal.tau_max_us)?;
        if tau_max <= 0.0 {
            return Err(Error::Config(format!("`anneal.tau_max_us` must be > 0, got {tau_max}")));
        }
        let backend = AnnealBackend {
            tau_max,
            delta_start: self.freq(finite("anneal.delta_start_mhz", self.anneal.delta_start_mhz)?),
            gamma: if noisy { self.gamma()? } else { 0.0 },
            c6: self.c6()?,
            geometry: self.geometry_mode(),
            noise: if noisy { Some(self.noise_params()?) } else { None },
            ..AnnealBackend::noiseless(cluster)
        };
        let limit = if backend.gamma > 0.0 { AnnealBackend::MAX_MIXED_SITES } else { AnnealBackend::MAX_PURE_SITES };
        if cluster.sites() > limit {
            return Err(Error::Config(format!(
                "backend `{}` supports at most {limit} sites, cluster has {}",
                self.run.backend.as_str(),
                cluster.sites()
            )));
        }
        Ok(backend)
    }

    pub fn spin_backend(&self) -> Result<Box<dyn SpinBackend>> {
        Ok(match self.run.backend {
            BackendKind::Exact => Box::new(ExactBackend::default()),
            BackendKind::AnnealNoiseless => Box::new(self.anneal_backend(false)?),
            BackendKind::AnnealNoisy => Box::new(self.anneal_backend(true)?),
        })
    }

    pub fn quench_backend(&self) -> Result<QuenchBackend> {
        let noisy = match self.run.backend {
            BackendKind::Exact => return Ok(QuenchBackend::Exact),
            BackendKind::AnnealNoiseless => false,
            BackendKind::AnnealNoisy => true,
        };
        let a = self.anneal_backend(noisy)?;
        let tau_ramp = finite("quench.tau_ramp_us", self.quench.tau_ramp_us)?;
        if tau_ramp < 0.0 {
            return Err(Error::Config(format!("`quench.tau_ramp_us` must be >= 0, got {tau_ramp}")));
        }
        Ok(QuenchBackend::Rydberg(RydbergQuench {
            cluster: a.cluster,
            tau_ramp,
            gamma: a.gamma,
            c6: a.c6,
            geometry: a.geometry,
            noise: a.noise,
        }))
    }

    pub fn time_grid(&self) -> Result<Vec<f64>> {
        let d = finite("quench.duration_us", self.quench.duration_us)?;
        if d <= 0.0 {
            return Err(Error::Config(format!("`quench.duration_us` must be > 0, got {d}")));
        }
        if self.quench.samples < MIN_SPECTRUM_SAMPLES {
            return Err(Error::Config(format!(
                "`quench.samples` must be >= {MIN_SPECTRUM_SAMPLES}, got {}",
                self.quench.samples
            )));
        }
        Ok(crate::quench::uniform_grid(d, self.quench.samples))
    }

    pub fn window(&self) -> Window {
        match self.quench.window {
            WindowKind::Hann => Window::Hann,
            WindowKind::Rectangular => Window::Rectangular,
        }
    }

    pub fn field_policy(&self) -> FieldPolicy {
        match self.quench.field {
            FieldKind::Frozen => FieldPolicy::Frozen,
            FieldKind::Zero => FieldPolicy::Zero,
        }
    }
}
