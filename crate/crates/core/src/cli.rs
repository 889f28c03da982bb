//! `slave-spin` command line: equilibrium sweeps, quenches and atom
//! placement, each writing CSV files headed by the effective configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{BackendKind, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::{cost, initial_guess, optimize, positions_csv, GeometryProblem};
use crate::quench::{fit_damping, fourier_spectrum, run_quench, QuenchSetup};
use crate::scf::{outer_loop, sweep_equilibrium, ScfRecord};
use crate::backend::ExactBackend;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "slave-spin", version, about = "Slave-spin mean-field solver with an emulated Rydberg spin backend")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `noise.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `run.backend`: exact, anneal-noiseless or anneal-noisy.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Overrides `run.jobs`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Self-consistent Z(U) sweep.
    Equilibrium,
    /// Interaction quench from the U = 0 solution.
    Quench,
    /// Atom positions realizing the spin couplings.
    Geometry,
}

/// Parses `args` and runs the selected workflow; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    if let Some(b) = &cli.backend {
        cfg.run.backend = BackendKind::parse(b)?;
    }
    if let Some(j) = cli.jobs {
        cfg.run.jobs = Some(j);
    }
    if cfg.run.jobs == Some(0) {
        return Err(Error::Config("`run.jobs` must be >= 1".into()));
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let cfg = resolve_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.run.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    fs::create_dir_all(&cli.out)?;
    pool.install(|| match cli.command {
        Command::Equilibrium => cmd_equilibrium(&cfg, &cli.out),
        Command::Quench => cmd_quench(&cfg, &cli.out),
        Command::Geometry => cmd_geometry(&cfg, &cli.out),
    })
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn matrix_csv(m: &DMatrix<f64>, scale: impl Fn(f64) -> f64) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.12e}", scale(m[(i, j)]))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(k, l)| {
            l.split(',')
                .map(|x| {
                    x.trim().parse::<f64>().map_err(|e| {
                        Error::Config(format!("{} row {}: cannot parse `{}`: {e}", path.display(), k + 1, x.trim()))
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{}: expected a square matrix", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn scf_log(rec: &ScfRecord, u_mhz: f64, cfg: &RunConfig) -> String {
    let mut s = cfg.echo();
    let _ = writeln!(s, "U = {u_mhz}");
    let _ = writeln!(s, "converged = {}", rec.converged);
    for (l, step) in rec.steps.iter().enumerate() {
        let _ = writeln!(
            s,
            "outer {} q_delta = {:.6e} m_bar = {:.10} Z = {:.10} inner_converged = {}",
            l + 1,
            step.q_delta,
            step.m_bar,
            step.z,
            step.inner_converged
        );
        for (k, inner) in step.inner.iter().enumerate() {
            let _ = writeln!(s, "  inner {} m_bar = {:.10} m_delta = {:.6e} Z = {:.10}", k + 1, inner.m_bar, inner.m_delta, inner.z);
        }
    }
    let mags: Vec<String> = rec.measurement.magnetizations.iter().map(|m| format!("{m:.10}")).collect();
    let _ = writeln!(s, "site_magnetizations = [{}]", mags.join(", "));
    let _ = writeln!(s, "mean_coupling_mhz = {:.12e}", cfg.to_mhz(rec.coupling.mean_bond()));
    s
}

/// `z_vs_u.csv` plus one log and one `J` matrix per interaction.
pub fn cmd_equilibrium(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let cluster = cfg.cluster_spec()?;
    let t = cfg.hopping()?;
    let us = cfg.equilibrium_us()?;
    let scf = cfg.scf_config()?;
    let backend = cfg.spin_backend()?;
    let points = sweep_equilibrium(&t, &cluster, &us, &scf, backend.as_ref())?;
    let u_mhz = cfg.equilibrium.u_mhz.clone().unwrap_or_default();
    let log_dir = out.join("scf");
    fs::create_dir_all(&log_dir)?;
    let mut csv = cfg.echo();
    csv.push_str("U,Z,Z_std_err,m_bar,converged,outer_iters,inner_iters_total\n");
    let mut unconverged = 0;
    let mut failed = 0;
    for (k, (p, u)) in points.iter().zip(&u_mhz).enumerate() {
        match &p.result {
            Ok(rec) => {
                let _ = writeln!(
                    csv,
                    "{u},{:.10},{:.10},{:.10},{},{},{}",
                    rec.z(),
                    rec.z_std_err(),
                    rec.m_bar(),
                    rec.converged,
                    rec.outer_iterations(),
                    rec.inner_iterations_total()
                );
                if !rec.converged {
                    unconverged += 1;
                }
                write(&log_dir.join(format!("point_{k:03}.log")), &scf_log(rec, *u, cfg))?;
                write(&log_dir.join(format!("point_{k:03}_J.csv")), &matrix_csv(rec.coupling.matrix(), |x| cfg.to_mhz(x)))?;
            }
            Err(e) => {
                eprintln!("error at U = {u}: {e}");
                let _ = writeln!(csv, "{u},NaN,NaN,NaN,false,0,0");
                failed += 1;
            }
        }
    }
    write(&out.join("z_vs_u.csv"), &csv)?;
    if failed > 0 {
        return Ok(EXIT_ERROR);
    }
    if unconverged > 0 {
        eprintln!("{unconverged} of {} points did not converge", us.len());
        return Ok(EXIT_UNCONVERGED);
    }
    Ok(EXIT_OK)
}

/// Traces, spectra and damping fits for every `quench.u_f_mhz`.
pub fn cmd_quench(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let cluster = cfg.cluster_spec()?;
    let t = cfg.hopping()?;
    let scf = cfg.scf_config()?;
    let u_fs = cfg.quench_us()?;
    let times = cfg.time_grid()?;
    let backend = cfg.quench_backend()?;
    let policy = cfg.field_policy();
    let setup = QuenchSetup::from_equilibrium(&t, &cluster, &scf)?;
    let runs = u_fs
        .par_iter()
        .map(|&u| run_quench(&setup, u, &backend, &times, policy))
        .collect::<Result<Vec<_>>>()?;
    let labels = cfg.quench.u_f_mhz.clone().unwrap_or_default();
    let dir = out.join("quench");
    fs::create_dir_all(&dir)?;
    let echo = cfg.echo();
    let mut long = format!("{echo}U_f,freq,amplitude\n");
    let mut damping = format!("{echo}U_f,damping_rate,damping_rate_err,peak_freq\n");
    for (k, (run, u)) in runs.iter().zip(&labels).enumerate() {
        let mut trace = format!("{echo}# U_f = {u}\ntau_us,Z,Z_std_err\n");
        for ((tau, z), e) in run.times.iter().zip(&run.z).zip(&run.z_err) {
            let _ = writeln!(trace, "{tau:.6},{z:.10},{e:.10}");
        }
        write(&dir.join(format!("trace_{k:03}.csv")), &trace)?;
        let spectrum = fourier_spectrum(&run.times, &run.z, cfg.window())?;
        let mut body = format!("{echo}# U_f = {u}\nfreq,amplitude\n");
        for (w, a) in spectrum.omega.iter().zip(&spectrum.amplitude) {
            let line = format!("{:.10},{a:.10e}\n", cfg.to_mhz(*w));
            body.push_str(&line);
            let _ = write!(long, "{u},{line}");
        }
        write(&dir.join(format!("spectrum_{k:03}.csv")), &body)?;
        let fit = fit_damping(&run.times, &run.z);
        let _ = writeln!(damping, "{u},{:.8},{:.8},{:.10}", fit.rate, fit.rate_err, cfg.to_mhz(spectrum.peak_omega));
    }
    write(&dir.join("spectra.csv"), &long)?;
    write(&dir.join("damping.csv"), &damping)?;
    Ok(EXIT_OK)
}

/// Initial and optimized atom positions for the target couplings.
pub fn cmd_geometry(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let cluster = cfg.cluster_spec()?;
    let c6 = cfg.c6()?;
    let j = match &cfg.geometry.j_file {
        Some(path) => read_matrix_csv(Path::new(path))?.map(|x| cfg.freq(x)),
        None => {
            let t = cfg.hopping()?;
            let u = cfg.freq(cfg.geometry.u_mhz);
            let rec = outer_loop(&t, u, &cluster, &cfg.scf_config()?, &ExactBackend::default())?;
            rec.coupling.matrix().clone()
        }
    };
    if j.nrows() != cluster.sites() {
        return Err(Error::Config(format!(
            "J has {} sites but the cluster has {}",
            j.nrows(),
            cluster.sites()
        )));
    }
    let start = initial_guess(&j, &cluster, c6)?;
    let mut problem = GeometryProblem::new(j.clone(), c6, start.positions.clone())?;
    problem.min_distance = cfg.geometry.min_distance_um;
    let result = optimize(&problem, &cfg.optimizer_options())?;
    let d_before = cost(&start, &j)?;
    let echo = cfg.echo();
    write(&out.join("positions_initial.csv"), &format!("{echo}{}", positions_csv(&start)))?;
    write(&out.join("positions_optimized.csv"), &format!("{echo}{}", positions_csv(&result.array)))?;
    let mut summary = format!("{echo}D_before,D_after,iterations,converged\n");
    let _ = writeln!(
        summary,
        "{:.12e},{:.12e},{},{}",
        cfg.to_mhz(d_before),
        cfg.to_mhz(result.cost),
        result.iterations,
        result.converged
    );
    write(&out.join("geometry.csv"), &summary)?;
    let mut history = format!("{echo}iteration,D\n");
    for (k, d) in result.history.iter().enumerate() {
        let _ = writeln!(history, "{k},{:.12e}", cfg.to_mhz(*d));
    }
    write(&out.join("cost_history.csv"), &history)?;
    println!("D: {:.6e} -> {:.6e} MHz", cfg.to_mhz(d_before), cfg.to_mhz(result.cost));
    Ok(if result.converged { EXIT_OK } else { EXIT_UNCONVERGED })
}
