//! Self-test suites run by the `check` command and the acceptance harness.

use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{SiteCouplings, STATE_LEN};
use crate::fixtures::{operating_params, random_state};
use crate::integrator::{midpoint_solve, run_trajectory, StepControl, TrajectoryOptions};
use crate::noise::{build_noise_matrix, diffusion_coefficients, sample_noise, NoiseStream, NOISE_COUNT};
use crate::reference::{relative_linf, solve};
use crate::units::{compute_cooperation_scale, dimensionless_params, DimensionlessParams, GridSpec, PhysicalConfig};

/// Deliberate corruption used as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Perturb one diffusion coefficient before it is factored.
    Diffusion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    /// The quantity compared against `threshold`.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

fn timed(name: &str, threshold: f64, body: impl FnOnce() -> (bool, f64, String)) -> SuiteResult {
    let start = Instant::now();
    let (passed, metric, detail) = body();
    SuiteResult {
        name: name.into(),
        passed,
        metric,
        threshold,
        detail,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

pub const FACTORIZATION_TOLERANCE: f64 = 1e-12;

/// Max-norm residual of `B Bᵀ − D` over random states at the operating point.
pub fn factorization(states: usize, seed: u64, fault: Fault) -> SuiteResult {
    timed("factorization", FACTORIZATION_TOLERANCE, || {
        let p = operating_params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for k in 0..states {
            let s = random_state(&mut rng, 1.0);
            let c = SiteCouplings::at(&p, p.time_at(k % p.time_points), p.z_at(k % p.space_points));
            let truth = diffusion_coefficients(&s, &c, &p);
            let mut factored = truth;
            if fault == Fault::Diffusion {
                factored.values[7] = factored.values[7] * 1.001 + 1e-6;
            }
            let bbt = build_noise_matrix(&factored).reconstruct();
            let dense = truth.to_dense();
            for i in 0..STATE_LEN {
                for j in 0..STATE_LEN {
                    worst = worst.max((bbt[i][j] - dense[i][j]).norm());
                }
            }
        }
        (
            worst < FACTORIZATION_TOLERANCE,
            worst,
            format!("{states} random states, max |BBᵀ − D| = {worst:.3e}"),
        )
    })
}

pub const COVARIANCE_SIGMAS: f64 = 5.0;

/// Sample covariance and mean of the scaled noise at one random state.
///
/// The target covariance is `D / (N_c Δt Δz)`. The metric is the largest
/// deviation in standard errors over every element and both parts.
pub fn noise_covariance(samples: usize, seed: u64) -> SuiteResult {
    timed("noise_covariance", COVARIANCE_SIGMAS, || {
        let p = operating_params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, 0.5);
        let c = SiteCouplings::at(&p, p.dt, 0.5 * p.length);
        let d = diffusion_coefficients(&s, &c, &p);
        let target = d.to_dense();
        let scale2 = p.noise_scale() * p.noise_scale();
        let b = build_noise_matrix(&d);
        let stream = NoiseStream::new(seed, 0);

        let pairs: Vec<(usize, usize)> = (0..STATE_LEN).flat_map(|i| (i..STATE_LEN).map(move |j| (i, j))).collect();
        // Sums of re and im parts and their squares.
        let mut prod = vec![[0.0f64; 4]; pairs.len()];
        let mut mean = vec![[0.0f64; 4]; STATE_LEN];
        let mut xi = [0.0; NOISE_COUNT];
        let add = |acc: &mut [f64; 4], z: C64| {
            acc[0] += z.re;
            acc[1] += z.re * z.re;
            acc[2] += z.im;
            acc[3] += z.im * z.im;
        };
        for n in 0..samples {
            stream.fill(n as u64, 0, &mut xi);
            let v = sample_noise(&b, &xi, &p);
            for (acc, &(i, j)) in prod.iter_mut().zip(&pairs) {
                add(acc, v[i] * v[j]);
            }
            for (acc, z) in mean.iter_mut().zip(v.iter()) {
                add(acc, *z);
            }
        }
        let r = samples as f64;
        // Deviation of a sample mean from `expect`, in standard errors.
        let z_score = |sum: f64, sq: f64, expect: f64| {
            let m = sum / r;
            let se = ((sq / r - m * m).max(0.0) / r).sqrt();
            let dev = (m - expect).abs();
            if dev <= 1e-12 * expect.abs().max(f64::MIN_POSITIVE) {
                0.0
            } else if se == 0.0 {
                f64::INFINITY
            } else {
                dev / se
            }
        };
        let mut worst: f64 = 0.0;
        for (acc, &(i, j)) in prod.iter().zip(&pairs) {
            let t = target[i][j] * scale2;
            worst = worst.max(z_score(acc[0], acc[1], t.re)).max(z_score(acc[2], acc[3], t.im));
        }
        let mut worst_mean: f64 = 0.0;
        for acc in &mean {
            worst_mean = worst_mean.max(z_score(acc[0], acc[1], 0.0)).max(z_score(acc[2], acc[3], 0.0));
        }
        let metric = worst.max(worst_mean);
        (
            metric <= COVARIANCE_SIGMAS,
            metric,
            format!(
                "{samples} samples, {} covariance elements: worst covariance {worst:.2} SE, worst mean {worst_mean:.2} SE",
                pairs.len()
            ),
        )
    })
}

/// Pumps off from the ground state: every recorded value stays exactly zero.
pub fn vacuum(params: &DimensionlessParams, seed: u64) -> SuiteResult {
    timed("vacuum", 0.0, || {
        let p = params.pumps_off();
        let opts = TrajectoryOptions {
            keep_snapshots: true,
            ..TrajectoryOptions::default()
        };
        match run_trajectory(&p, &opts, seed, 0) {
            Err(e) => (false, f64::INFINITY, format!("trajectory failed: {e}")),
            Ok(rec) => {
                let mut worst: f64 = 0.0;
                let mut visit = |z: &C64| worst = worst.max(z.norm());
                rec.signal.iter().chain(&rec.idler).for_each(&mut visit);
                rec.populations_entry.iter().chain(&rec.populations_exit).flatten().for_each(&mut visit);
                for sites in rec.snapshots.iter().flatten() {
                    sites.iter().flat_map(|s| s.0.iter()).for_each(&mut visit);
                }
                (
                    worst == 0.0,
                    worst,
                    format!("{} steps × {} sites, max |value| = {worst:e}", p.time_points, p.space_points),
                )
            }
        }
    })
}

pub const ORACLE_TOLERANCE: f64 = 1e-3;
/// Initial π03 for the noise-free comparison.
pub const ORACLE_SEED_COHERENCE: f64 = 1e-3;
pub const ORACLE_REFINEMENT: usize = 4;

/// Per-quantity relative L∞ errors against the reference solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleErrors {
    pub signal: f64,
    pub idler: f64,
    /// Worst of π11, π22, π33 over both ends.
    pub populations: f64,
}

impl OracleErrors {
    pub fn worst(&self) -> f64 {
        self.signal.max(self.idler).max(self.populations)
    }
}

/// Noise-free trajectory against the independent method-of-lines solver
/// on a grid `ORACLE_REFINEMENT` times finer in t and z.
pub fn oracle_errors(p: &DimensionlessParams) -> Result<OracleErrors, String> {
    let reference = solve(p, ORACLE_SEED_COHERENCE, ORACLE_REFINEMENT);
    let rec = run_trajectory(p, &TrajectoryOptions::deterministic(ORACLE_SEED_COHERENCE), 0, 0)
        .map_err(|e| e.to_string())?;
    let column = |v: &[[C64; 3]], j: usize| v.iter().map(|x| x[j]).collect::<Vec<_>>();
    let mut populations: f64 = 0.0;
    for j in 0..3 {
        populations = populations
            .max(relative_linf(&column(&rec.populations_entry, j), &column(&reference.populations_entry, j)))
            .max(relative_linf(&column(&rec.populations_exit, j), &column(&reference.populations_exit, j)));
    }
    Ok(OracleErrors {
        signal: relative_linf(&rec.signal, &reference.signal),
        idler: relative_linf(&rec.idler, &reference.idler),
        populations,
    })
}

/// Operating-point parameters on an arbitrary grid.
pub fn operating_params_on(grid: &GridSpec) -> DimensionlessParams {
    let cfg = PhysicalConfig::rubidium_cascade(1e10);
    let scale = compute_cooperation_scale(&cfg).expect("reference config is valid");
    dimensionless_params(&cfg, grid, &scale).expect("grid resolves the pump")
}

/// Grid on which the oracle suite runs: the reference 140 ns window with a
/// 0.35 ns step, where the scheme's O(Δt²) error sits below the tolerance.
pub fn oracle_grid() -> GridSpec {
    GridSpec::new(401, 42, 140.0)
}

pub fn oracle(grid: &GridSpec) -> SuiteResult {
    timed("oracle", ORACLE_TOLERANCE, || {
        let p = operating_params_on(grid);
        match oracle_errors(&p) {
            Err(e) => (false, f64::INFINITY, e),
            Ok(e) => (
                e.worst() < ORACLE_TOLERANCE,
                e.worst(),
                format!(
                    "{}×{} grid vs {}× finer: signal {:.2e}, idler {:.2e}, populations {:.2e}",
                    grid.time_points, grid.space_points, ORACLE_REFINEMENT, e.signal, e.idler, e.populations
                ),
            ),
        }
    })
}

pub const STRATONOVICH_SIGMAS: f64 = 3.0;

/// Mean and standard error of log x(1) for dx = x∘dW, x(0) = 1.
///
/// Each path is integrated from its Ito form `dx = x/2 dt + x dW` with the
/// drift correction `-½ b ∂b/∂x` and the same fixed-point midpoint solver as
/// the field equations.
pub fn geometric_brownian_log_mean(paths: usize, steps: usize, seed: u64) -> (f64, f64) {
    let dt = 1.0 / steps as f64;
    let sqrt_dt = dt.sqrt();
    let ctrl = StepControl::default();
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut dw = vec![0.0; steps];
    for path in 0..paths {
        NoiseStream::new(seed, path as u64).gaussians(0, 0, &mut dw);
        let mut x = [C64::new(1.0, 0.0)];
        for w in &dw {
            let dw = w * sqrt_dt;
            midpoint_solve(&mut x, &ctrl, |xb, delta| {
                let ito_drift = 0.5 * xb[0];
                let correction = -0.5 * xb[0];
                delta[0] = (ito_drift + correction) * dt + xb[0] * dw;
            })
            .expect("scalar midpoint step converges");
        }
        let l = x[0].re.ln();
        sum += l;
        sq += l * l;
    }
    let n = paths as f64;
    let mean = sum / n;
    let se = ((sq / n - mean * mean).max(0.0) / n).sqrt();
    (mean, se)
}

pub fn stratonovich(paths: usize, steps: usize, seed: u64) -> SuiteResult {
    timed("stratonovich", STRATONOVICH_SIGMAS, || {
        let (mean, se) = geometric_brownian_log_mean(paths, steps, seed);
        let z = mean.abs() / se;
        let z_ito = (mean + 0.5).abs() / se;
        (
            z <= STRATONOVICH_SIGMAS && z_ito > STRATONOVICH_SIGMAS,
            z,
            format!("<log x(1)> = {mean:.4} ± {se:.4} over {paths} paths; Ito value −0.5 is {z_ito:.1} SE away"),
        )
    })
}

/// Every suite at its standard size.
pub fn run_all(fault: Fault) -> CheckReport {
    let suites = vec![
        factorization(1000, 11, fault),
        noise_covariance(100_000, 12),
        vacuum(&operating_params(), 13),
        oracle(&oracle_grid()),
        stratonovich(10_000, 64, 14),
    ];
    CheckReport {
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}
