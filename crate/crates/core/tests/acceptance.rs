//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its `[PASS]` / `[FAIL]` line in `cargo test` output.
//! Criteria run concurrently; the binary exits non-zero if any fails.
//!
//! Positional arguments filter criteria by name; `--list` prints them.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use slave_spin::anneal::{AnnealBackend, GeometryMode};
use slave_spin::backend::{ExactBackend, SpinBackend};
use slave_spin::geometry::{initial_guess, optimize, GeometryProblem, OptimizerOptions};
use slave_spin::lattice::{build_hopping, ClusterSpec};
use slave_spin::quench::{
    fit_damping, fourier_spectrum, run_quench, uniform_grid, FieldPolicy, QuenchBackend, QuenchRun, QuenchSetup,
    RydbergQuench, Window,
};
use slave_spin::rydberg::{
    evolve, prepare_initial_state, DriveSchedule, InitialState, Interactions, QuantumState, Waveform, NORM_TOL,
};
use slave_spin::sampling::{estimate_observables, sample_bitstrings, NoiseParams};
use slave_spin::scf::{outer_loop, sweep_equilibrium, ScfConfig};
use slave_spin::spins::build_cluster_hamiltonian;

/// Cyclic MHz to rad/us.
fn mhz(x: f64) -> f64 {
    TAU * x
}

struct Outcome {
    pass: bool,
    line: String,
}

fn report(id: u32, title: &str, pass: bool, detail: &str) -> Outcome {
    let tag = if pass { "PASS" } else { "FAIL" };
    Outcome { pass, line: format!("[{tag}] criterion {id:>2} {title}: {detail}") }
}

fn cluster(nx: usize, ny: usize) -> ClusterSpec {
    ClusterSpec::new(nx, ny).unwrap()
}

/// `Z(U)` for interactions given in MHz.
fn z_curve(c: &ClusterSpec, t_mhz: f64, us_mhz: &[f64], cfg: &ScfConfig, backend: &dyn SpinBackend) -> Vec<(f64, f64)> {
    let t = build_hopping(c, mhz(t_mhz)).unwrap();
    let us: Vec<f64> = us_mhz.iter().map(|&u| mhz(u)).collect();
    sweep_equilibrium(&t, c, &us, cfg, backend)
        .unwrap()
        .into_iter()
        .map(|p| {
            let rec = p.result.unwrap();
            (rec.z(), rec.z_std_err())
        })
        .collect()
}

/// First interaction where `Z < 0.02`.
fn critical(us: &[f64], zs: &[f64]) -> Option<f64> {
    us.iter().zip(zs).find(|(_, z)| **z < 0.02).map(|(u, _)| *u)
}

fn grid(max: f64, step: f64) -> Vec<f64> {
    (0..=((max / step).round() as usize)).map(|k| k as f64 * step).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

const T_SWEEP: f64 = 0.25;

/// 12-site exact sweep at `t = 0.25` MHz, shared by criteria 1 and 7.
fn sweep_n12() -> &'static (Vec<f64>, Vec<f64>) {
    static CELL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let us = grid(16.0, 0.25);
        let cfg = ScfConfig { tolerance: 0.01, max_iterations: 5, initial_magnetization: 0.5 };
        let zs = z_curve(&cluster(4, 3), T_SWEEP, &us, &cfg, &ExactBackend::default()).into_iter().map(|p| p.0).collect();
        (us, zs)
    })
}

/// Critical interaction of the 2x2 cluster on a fine grid, exact backend.
fn critical_n4() -> f64 {
    let us = grid(8.0, 0.05);
    let zs: Vec<f64> =
        z_curve(&cluster(2, 2), T_SWEEP, &us, &ScfConfig::default(), &ExactBackend::default()).into_iter().map(|p| p.0).collect();
    critical(&us, &zs).expect("2x2 cluster reaches Z < 0.02 below 8 MHz")
}

fn sweep_points_n4() -> Vec<f64> {
    linspace(0.0, 1.5 * critical_n4(), 12)
}

fn criterion_01_mott_transition_exact_n12() -> Outcome {
    let (us, zs) = sweep_n12();
    let rise = (1..zs.len()).find(|&k| zs[k] > zs[k - 1] + 1e-12);
    let monotone = rise.is_none();
    let rise_note = match rise {
        Some(k) => format!(" (first rise at U = {:.2} MHz: Z {:.3e} -> {:.3e})", us[k], zs[k - 1], zs[k]),
        None => String::new(),
    };
    let uc = critical(us, zs);
    let in_window = uc.is_some_and(|u| (12.0..=15.0).contains(&u));
    let detail = match uc {
        Some(u) => format!(
            "monotone = {monotone}{rise_note}, U_c = {u:.2} MHz (U_c/t = {:.1}; window [12, 15] MHz)",
            u / T_SWEEP
        ),
        None => format!("monotone = {monotone}{rise_note}, Z never drops below 0.02 up to 16 MHz"),
    };
    report(1, "Mott transition, exact, N = 12, t = 0.25 MHz", monotone && in_window, &detail)
}

fn criterion_02_noninteracting_limit() -> Outcome {
    let mut worst: f64 = 0.0;
    for (nx, ny) in [(2, 2), (2, 3), (2, 4), (4, 3)] {
        let c = cluster(nx, ny);
        let backends: [Box<dyn SpinBackend>; 2] = [Box::new(ExactBackend::default()), Box::new(AnnealBackend::noiseless(c))];
        for b in &backends {
            let z = z_curve(&c, T_SWEEP, &[0.0], &ScfConfig::default(), b.as_ref())[0].0;
            worst = worst.max((z - 1.0).abs());
        }
    }
    report(2, "Z(U = 0) = 1, N in {4, 6, 8, 12}", worst <= 1e-12, &format!("max |Z - 1| = {worst:.2e}"))
}

fn criterion_03_backend_equivalence() -> Outcome {
    let c = cluster(2, 2);
    let us = sweep_points_n4();
    let cfg = ScfConfig::default();
    let exact = z_curve(&c, T_SWEEP, &us, &cfg, &ExactBackend::default());
    let anneal = z_curve(&c, T_SWEEP, &us, &cfg, &AnnealBackend::noiseless(c));
    let worst = exact.iter().zip(&anneal).map(|(a, b)| (a.0 - b.0).abs()).fold(0.0, f64::max);
    report(
        3,
        "noiseless anneal vs exact, N = 4, tau_max = 4 us",
        worst <= 0.05,
        &format!("max |dZ| = {worst:.4} over 12 points in [0, {:.2}] MHz", us[11]),
    )
}

fn criterion_04_noisy_pipeline() -> Outcome {
    let c = cluster(2, 2);
    let us = sweep_points_n4();
    let cfg = ScfConfig { tolerance: 0.01, max_iterations: 5, initial_magnetization: 0.5 };
    let noisy_backend = AnnealBackend {
        tau_max: 4.0,
        gamma: mhz(0.02),
        noise: Some(NoiseParams { shots: 150, epsilon: 0.03, epsilon_prime: 0.03, seed: 2024 }),
        ..AnnealBackend::noiseless(c)
    };
    let exact = z_curve(&c, T_SWEEP, &us, &cfg, &ExactBackend::default());
    let noisy = z_curve(&c, T_SWEEP, &us, &cfg, &noisy_backend);
    let inside = exact.iter().zip(&noisy).filter(|(e, n)| (n.0 - e.0).abs() <= 3.0 * n.1).count();
    let frac = inside as f64 / us.len() as f64;
    let devs: Vec<String> = exact.iter().zip(&noisy).map(|(e, n)| format!("{:+.3}({:.3})", n.0 - e.0, n.1)).collect();
    report(
        4,
        "noisy Z within 3 standard errors, N = 4",
        frac >= 0.8,
        &format!("{inside}/{} points inside; dZ(err) = [{}]", us.len(), devs.join(" ")),
    )
}

fn quench_setup(nx: usize, ny: usize, t_mhz: f64) -> QuenchSetup {
    let c = cluster(nx, ny);
    QuenchSetup::from_equilibrium(&build_hopping(&c, mhz(t_mhz)).unwrap(), &c, &ScfConfig::default()).unwrap()
}

fn exact_quench(setup: &QuenchSetup, u_f_mhz: f64) -> QuenchRun {
    run_quench(setup, mhz(u_f_mhz), &QuenchBackend::Exact, &uniform_grid(4.0, 400), FieldPolicy::Frozen).unwrap()
}

/// Hopping used for the quench criteria, chosen so that the 12-site
/// critical interaction sits near 13.5 MHz.
const T_QUENCH: f64 = 1.0;

fn criterion_05_quench_spectroscopy() -> Outcome {
    // small clusters: every peak sits on an eigenenergy difference
    let mut unmatched = Vec::new();
    let mut checked = 0;
    for (nx, ny) in [(2, 2), (2, 3)] {
        let setup = quench_setup(nx, ny, T_QUENCH);
        for u_f in [5.0, 13.0, 25.0] {
            let run = exact_quench(&setup, u_f);
            let spectrum = fourier_spectrum(&run.times, &run.z, Window::Hann).unwrap();
            let ham = build_cluster_hamiltonian(&setup.coupling, mhz(u_f), &setup.field(FieldPolicy::Frozen)).unwrap();
            let e = SymmetricEigen::new(ham.to_dense()).eigenvalues;
            let diffs: Vec<f64> =
                (0..e.len()).flat_map(|a| (0..e.len()).map(move |b| (a, b))).map(|(a, b)| (e[a] - e[b]).abs()).collect();
            for (w, _) in spectrum.peaks(0.1) {
                checked += 1;
                if !diffs.iter().any(|d| (d - w).abs() <= spectrum.resolution) {
                    unmatched.push(format!("N={} U_f={u_f}: {:.2} MHz", nx * ny, w / TAU));
                }
            }
        }
    }
    // 12 sites: plateau near 0.1 at U_f = 13 MHz, U_f component dominant at 25 MHz
    let setup = quench_setup(4, 3, T_QUENCH);
    let run13 = exact_quench(&setup, 13.0);
    let late: Vec<f64> = run13.times.iter().zip(&run13.z).filter(|(t, _)| **t >= 1.0).map(|(_, z)| *z).collect();
    let plateau = late.iter().sum::<f64>() / late.len() as f64;
    let plateau_ok = (plateau - 0.1).abs() <= 0.05;
    let run25 = exact_quench(&setup, 25.0);
    let spectrum25 = fourier_spectrum(&run25.times, &run25.z, Window::Hann).unwrap();
    let dominant_ok = (spectrum25.peak_omega - mhz(25.0)).abs() <= 0.1 * mhz(25.0);
    let near_uf = spectrum25.amplitude_near(mhz(25.0), 0.1 * mhz(25.0) / spectrum25.resolution);
    let pass = unmatched.is_empty() && plateau_ok && dominant_ok;
    report(
        5,
        "quench spectra on eigenenergy differences; N = 12 plateau and dominant peak",
        pass,
        &format!(
            "{}/{checked} small-cluster peaks matched{}; N=12 U_f=13: mean Z[1,4 us] = {plateau:.3} (target 0.1 +- 0.05); \
             U_f=25: dominant peak {:.2} MHz (amplitude {:.3}), largest within 10% of U_f {:.3}",
            checked - unmatched.len(),
            if unmatched.is_empty() { String::new() } else { format!(" (unmatched: {})", unmatched.join(", ")) },
            spectrum25.peak_omega / TAU,
            spectrum25.peak_amplitude,
            near_uf
        ),
    )
}

fn criterion_06_dephasing_damps_without_shift() -> Outcome {
    let c = cluster(2, 2);
    let setup = quench_setup(2, 2, T_QUENCH);
    let times = uniform_grid(4.0, 400);
    let mut rates = Vec::new();
    let mut peaks = Vec::new();
    for gamma in [0.0, 0.02, 0.1] {
        let backend = QuenchBackend::Rydberg(RydbergQuench { gamma: mhz(gamma), ..RydbergQuench::noiseless(c) });
        let run = run_quench(&setup, mhz(13.0), &backend, &times, FieldPolicy::Frozen).unwrap();
        rates.push(fit_damping(&run.times, &run.z).rate);
        peaks.push(fourier_spectrum(&run.times, &run.z, Window::Hann).unwrap().peak_omega);
    }
    let increasing = rates.windows(2).all(|w| w[1] > w[0]);
    let shift = peaks.iter().map(|p| (p - peaks[0]).abs() / peaks[0]).fold(0.0, f64::max);
    report(
        6,
        "dephasing raises damping, keeps frequency, N = 4, U_f = 13 MHz",
        increasing && shift < 0.02,
        &format!(
            "rates [{:.4}, {:.4}, {:.4}] /us, peaks [{:.2}, {:.2}, {:.2}] MHz, max shift {:.2}%",
            rates[0],
            rates[1],
            rates[2],
            peaks[0] / TAU,
            peaks[1] / TAU,
            peaks[2] / TAU,
            100.0 * shift
        ),
    )
}

fn criterion_07_damping_grows_with_hopping() -> Outcome {
    let (us, zs) = sweep_n12();
    let uc_ratio = critical(us, zs).expect("transition inside the sweep") / T_SWEEP;
    let mut rates = Vec::new();
    let mut errs = Vec::new();
    for t in [0.125, 0.25, 0.5] {
        let run = exact_quench(&quench_setup(4, 3, t), uc_ratio * t);
        let fit = fit_damping(&run.times, &run.z);
        rates.push(fit.rate);
        errs.push(fit.rate_err);
    }
    let increasing = rates.windows(2).all(|w| w[1] > w[0]);
    report(
        7,
        "damping increases with t, N = 12, U_f = U_c(t)",
        increasing,
        &format!(
            "U_f/t = {uc_ratio:.1}; rates [{:.3}+-{:.3}, {:.3}+-{:.3}, {:.3}+-{:.3}] /us for t = [0.125, 0.25, 0.5] MHz",
            rates[0], errs[0], rates[1], errs[1], rates[2], errs[2]
        ),
    )
}

fn criterion_08_shot_noise() -> Outcome {
    let amp = (Complex64::new(0.8f64.sqrt(), 0.0), Complex64::new(0.2f64.sqrt(), 0.0));
    let state = prepare_initial_state(2, &InitialState::Product(vec![amp; 2])).unwrap();
    let exact = -0.6;
    let repeats = 20;
    let pts: Vec<(f64, f64)> = [100usize, 10_000, 1_000_000]
        .iter()
        .map(|&n| {
            let params = NoiseParams { shots: n, epsilon: 0.0, epsilon_prime: 0.0, seed: 8 };
            let mse = (0..repeats)
                .map(|k| {
                    let est = estimate_observables(&sample_bitstrings(&state, &params, k).unwrap()).unwrap();
                    (est.mean_magnetization - exact).powi(2)
                })
                .sum::<f64>()
                / repeats as f64;
            ((n as f64).ln(), mse.sqrt().ln())
        })
        .collect();
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum::<f64>() / pts.iter().map(|p| (p.0 - xm).powi(2)).sum::<f64>();

    let c = cluster(2, 2);
    let us = sweep_points_n4();
    let sampled = AnnealBackend {
        noise: Some(NoiseParams { shots: 100, epsilon: 0.0, epsilon_prime: 0.0, seed: 8 }),
        ..AnnealBackend::noiseless(c)
    };
    let exact_z = z_curve(&c, T_SWEEP, &us, &ScfConfig::default(), &ExactBackend::default());
    let sampled_z = z_curve(&c, T_SWEEP, &us, &ScfConfig::default(), &sampled);
    let worst = exact_z.iter().zip(&sampled_z).map(|(a, b)| (a.0 - b.0).abs()).fold(0.0, f64::max);
    report(
        8,
        "shot-noise scaling and N_s = 100 sweep",
        (slope + 0.5).abs() <= 0.1 && worst <= 0.05,
        &format!("log-log slope {slope:.3}; N_s = 100 max |dZ| = {worst:.4}"),
    )
}

fn criterion_09_geometry() -> Outcome {
    let scf = ScfConfig::default();
    let coupling = |nx, ny| {
        let c = cluster(nx, ny);
        let t = build_hopping(&c, mhz(T_SWEEP)).unwrap();
        outer_loop(&t, 0.0, &c, &scf, &ExactBackend::default()).unwrap().coupling
    };
    let opts = OptimizerOptions::default();
    let c6 = slave_spin::rydberg::DEFAULT_C6;

    let j2 = coupling(2, 1);
    let p2 = GeometryProblem::new(j2.matrix().clone(), c6, initial_guess(j2.matrix(), &cluster(2, 1), c6).unwrap().positions)
        .unwrap();
    let r2 = optimize(&p2, &opts).unwrap();
    let bound2 = 1e-6 * (4.0 * j2.matrix()[(0, 1)]).abs();

    let j12 = coupling(4, 3);
    let p12 = GeometryProblem::new(j12.matrix().clone(), c6, initial_guess(j12.matrix(), &cluster(4, 3), c6).unwrap().positions)
        .unwrap();
    let r12 = optimize(&p12, &opts).unwrap();

    let c = cluster(2, 2);
    let us = sweep_points_n4();
    let ideal = AnnealBackend::noiseless(c);
    let placed = AnnealBackend { geometry: GeometryMode::Optimized(opts), ..AnnealBackend::noiseless(c) };
    let a = z_curve(&c, T_SWEEP, &us, &scf, &ideal);
    let b = z_curve(&c, T_SWEEP, &us, &scf, &placed);
    let worst = a.iter().zip(&b).map(|(x, y)| (x.0 - y.0).abs()).fold(0.0, f64::max);
    report(
        9,
        "geometry optimization",
        r2.cost < bound2 && r12.cost < r12.initial_cost && worst <= 0.05,
        &format!(
            "2 atoms D = {:.2e} (bound {bound2:.2e}); 12 atoms D {:.4} -> {:.4} rad/us; N = 4 placed vs ideal max |dZ| = {worst:.4}",
            r2.cost, r12.initial_cost, r12.cost
        ),
    )
}

fn excited(st: &QuantumState) -> f64 {
    st.probabilities()[1]
}

fn criterion_10_open_system_propagator() -> Outcome {
    let single = Interactions(DMatrix::zeros(1, 1));
    let omega = mhz(1.3);
    let period = TAU / omega;
    let rabi = DriveSchedule::new(Waveform::constant(omega, period), vec![Waveform::constant(0.0, period)], period).unwrap();
    let ground = prepare_initial_state(1, &InitialState::AllGround).unwrap();
    let out = evolve(&ground, &rabi, &single, 0.0, &[period / 2.0, period]).unwrap();
    let rabi_err = (excited(&out[0]) - 1.0).abs().max(excited(&out[1]));

    let gamma = mhz(0.1);
    let idle = DriveSchedule::new(Waveform::constant(0.0, 3.0), vec![Waveform::constant(0.0, 3.0)], 3.0).unwrap();
    let plus = prepare_initial_state(1, &InitialState::Product(vec![(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))]))
        .unwrap();
    let times = [0.5, 1.5, 3.0];
    let decay_err = evolve(&plus, &idle, &single, gamma, &times)
        .unwrap()
        .iter()
        .zip(times)
        .map(|(st, tau)| (st.to_density()[(0, 1)].norm() - 0.5 * (-gamma * tau / 2.0).exp()).abs())
        .fold(0.0, f64::max);

    // driven, interacting, dephased: check every sample
    let v = Interactions(DMatrix::from_row_slice(3, 3, &[0.0, 9.0, 1.2, 9.0, 0.0, 9.0, 1.2, 9.0, 0.0]));
    let drive = DriveSchedule::new(
        Waveform::ramp(0.0, mhz(2.0), 2.0),
        vec![Waveform::ramp(-mhz(3.0), mhz(1.0), 2.0), Waveform::ramp(-mhz(3.0), mhz(2.0), 2.0), Waveform::constant(0.5, 2.0)],
        2.0,
    )
    .unwrap();
    let samples: Vec<f64> = (1..=200).map(|k| 0.01 * k as f64).collect();
    let init = prepare_initial_state(3, &InitialState::AllGround).unwrap();
    let states = evolve(&QuantumState::Mixed(init.to_density()), &drive, &v, mhz(0.05), &samples).unwrap();
    let violations = states.iter().filter(|s| s.check_invariants(NORM_TOL).is_err()).count();
    report(
        10,
        "single-atom closed forms and density-matrix invariants",
        rabi_err <= 1e-6 && decay_err <= 1e-6 && violations == 0,
        &format!("Rabi error {rabi_err:.2e}, coherence error {decay_err:.2e}, invariant violations {violations}/200"),
    )
}

fn criterion_11_scf_robust_to_initial_magnetization() -> Outcome {
    let c = cluster(2, 3);
    let coarse = grid(8.0, 0.05);
    let zs: Vec<f64> =
        z_curve(&c, T_SWEEP, &coarse, &ScfConfig::default(), &ExactBackend::default()).into_iter().map(|p| p.0).collect();
    let uc = critical(&coarse, &zs).expect("2x3 cluster reaches Z < 0.02");
    let us = [0.5 * uc, uc, 1.5 * uc];
    // budget and threshold of the reference convergence study
    let curves: Vec<Vec<f64>> = [0.1, 0.5, 0.9]
        .iter()
        .map(|&m0| {
            let cfg = ScfConfig { tolerance: 1e-5, max_iterations: 100, initial_magnetization: m0 };
            z_curve(&c, T_SWEEP, &us, &cfg, &ExactBackend::default()).into_iter().map(|p| p.0).collect()
        })
        .collect();
    let spread = (0..3)
        .map(|k| {
            let col: Vec<f64> = curves.iter().map(|c| c[k]).collect();
            col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - col.iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<_>>();
    let worst = spread.iter().cloned().fold(0.0, f64::max);
    report(
        11,
        "m0 in {0.1, 0.5, 0.9} agree, N = 6, k = 100, eta = 1e-5",
        worst <= 0.01,
        &format!("U = [{:.2}, {:.2}, {:.2}] MHz, Z spread [{:.4}, {:.4}, {:.4}]", us[0], us[1], us[2], spread[0], spread[1], spread[2]),
    )
}

/// Two-site slave-spin problem in the full spin x pseudo-fermion space,
/// without any mean-field decoupling.
mod constraint {
    use super::*;

    // modes: (site 0, up), (site 0, down), (site 1, up), (site 1, down)
    const MODES: usize = 4;
    const FDIM: usize = 1 << MODES;
    pub const DIM: usize = 4 * FDIM;

    /// `f_a^dag f_b` in the occupation basis with Jordan-Wigner signs.
    fn hop(a: usize, b: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(FDIM, FDIM);
        for occ in 0..FDIM {
            if occ >> b & 1 == 0 {
                continue;
            }
            let mid = occ & !(1 << b);
            if a != b && mid >> a & 1 == 1 {
                continue;
            }
            let sign_b = if (occ & ((1 << b) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let sign_a = if (mid & ((1 << a) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(mid | 1 << a, occ)] += sign_a * sign_b;
        }
        m
    }

    fn pauli_z(site: usize) -> DMatrix<f64> {
        DMatrix::from_fn(4, 4, |a, b| if a == b { if a >> site & 1 == 1 { 1.0 } else { -1.0 } } else { 0.0 })
    }

    fn pauli_x(site: usize) -> DMatrix<f64> {
        DMatrix::from_fn(4, 4, |a, b| if a ^ b == 1 << site { 1.0 } else { 0.0 })
    }

    fn kinetic() -> DMatrix<f64> {
        (0..2).fold(DMatrix::zeros(FDIM, FDIM), |acc, s| acc + hop(s, 2 + s) + hop(2 + s, s))
    }

    /// `H = -t S^z_0 S^z_1 sum_sigma (f_0s^dag f_1s + h.c.) + U/4 sum_i S^x_i`.
    pub fn hamiltonian(t: f64, u: f64) -> DMatrix<f64> {
        let mut h = (pauli_z(0) * pauli_z(1)).kronecker(&kinetic()) * (-t);
        for site in 0..2 {
            h += pauli_x(site).kronecker(&DMatrix::identity(FDIM, FDIM)) * (u / 4.0);
        }
        h
    }

    /// `Q_i = (1 - S^x_i exp(i pi n_i)) / 2`, the projector on unphysical states.
    pub fn projector(site: usize) -> DMatrix<f64> {
        let parity = DMatrix::from_fn(FDIM, FDIM, |a, b| {
            if a == b { if (a >> (2 * site) & 0b11).count_ones() % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 }
        });
        (DMatrix::identity(DIM, DIM) - pauli_x(site).kronecker(&parity)) * 0.5
    }

    /// `U = 0` ground state: spins along `+z`, fermions in the half-filled
    /// bonding configuration, projected onto the physical subspace.
    pub fn initial_state() -> DVector<f64> {
        let kin = kinetic() * -1.0;
        let half: Vec<usize> = (0..FDIM).filter(|o| o.count_ones() == 2).collect();
        let sub = DMatrix::from_fn(half.len(), half.len(), |a, b| kin[(half[a], half[b])]);
        let eig = SymmetricEigen::new(sub);
        let k = eig.eigenvalues.imin();
        let mut start = DVector::zeros(DIM);
        for (a, &o) in half.iter().enumerate() {
            start[0b11 * FDIM + o] = eig.eigenvectors[(a, k)];
        }
        let id = DMatrix::identity(DIM, DIM);
        let psi = (&id - projector(0)) * (&id - projector(1)) * start;
        let norm = psi.norm();
        psi / norm
    }
}

fn criterion_12_constraint_preserved_in_quench() -> Outcome {
    let (q0, q1) = (constraint::projector(0), constraint::projector(1));
    let ops = [&q0 * &q1, q0.clone(), q1.clone()];
    let psi0 = constraint::initial_state();
    let eig = SymmetricEigen::new(constraint::hamiltonian(mhz(1.0), mhz(13.0)));
    let coeffs = eig.eigenvectors.transpose() * &psi0;
    let mut worst: f64 = 0.0;
    for k in 0..=200 {
        let tau = 0.01 * k as f64;
        let re = &eig.eigenvectors * DVector::from_fn(constraint::DIM, |i, _| coeffs[i] * (eig.eigenvalues[i] * tau).cos());
        let im = &eig.eigenvectors * DVector::from_fn(constraint::DIM, |i, _| -coeffs[i] * (eig.eigenvalues[i] * tau).sin());
        for op in &ops {
            worst = worst.max((re.dot(&(op * &re)) + im.dot(&(op * &im))).abs());
        }
    }
    report(
        12,
        "constraint projector stays at zero, 2-site full space",
        worst <= 1e-8,
        &format!("max |<Q>| = {worst:.2e} over 2 us at U_f = 13 MHz"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

const CRITERIA: &[Criterion] = &[
    ("criterion_01_mott_transition_exact_n12", criterion_01_mott_transition_exact_n12),
    ("criterion_02_noninteracting_limit", criterion_02_noninteracting_limit),
    ("criterion_03_backend_equivalence", criterion_03_backend_equivalence),
    ("criterion_04_noisy_pipeline", criterion_04_noisy_pipeline),
    ("criterion_05_quench_spectroscopy", criterion_05_quench_spectroscopy),
    ("criterion_06_dephasing_damps_without_shift", criterion_06_dephasing_damps_without_shift),
    ("criterion_07_damping_grows_with_hopping", criterion_07_damping_grows_with_hopping),
    ("criterion_08_shot_noise", criterion_08_shot_noise),
    ("criterion_09_geometry", criterion_09_geometry),
    ("criterion_10_open_system_propagator", criterion_10_open_system_propagator),
    ("criterion_11_scf_robust_to_initial_magnetization", criterion_11_scf_robust_to_initial_magnetization),
    ("criterion_12_constraint_preserved_in_quench", criterion_12_constraint_preserved_in_quench),
];

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let filters: Vec<&str> = args.iter().filter(|a| !a.starts_with('-')).map(String::as_str).collect();
    let selected: Vec<&Criterion> =
        CRITERIA.iter().filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.contains(f))).collect();
    if args.iter().any(|a| a == "--list") {
        for (name, _) in &selected {
            println!("{name}: test");
        }
        return ExitCode::SUCCESS;
    }

    println!("running {} acceptance criteria", selected.len());
    let outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = selected
            .iter()
            .map(|&&(name, run)| {
                scope.spawn(move || {
                    let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Outcome {
                        pass: false,
                        line: format!("[FAIL] {name}: panicked"),
                    });
                    println!("{}", out.line);
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread")).collect()
    });

    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("\nacceptance summary:");
    for o in &outcomes {
        println!("{}", o.line);
    }
    println!("acceptance result: {} passed; {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
