//! One stochastic trajectory over the space-time grid.
//!
//! Atomic variables advance in time with the semi-implicit midpoint rule at
//! every z. Inside each midpoint iteration the counter-propagating fields are
//! re-solved by direct quadrature from their own vacuum boundaries (the idler
//! forward from z = 0, the signal backward from z = L). The field equations
//! have no self-coupling, so this solves the two-point boundary problem
//! without a search over guessed boundary values.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    atomic_drift, field_spatial_drift, stratonovich_correction, SiteCouplings, StateSlice, ATOMIC_START, E_I_M,
    E_I_P, E_S_M, E_S_P, P03, P03_D, P11, P22, P33, STATE_LEN,
};
use crate::noise::{build_noise_matrix, diffusion_coefficients, sample_noise, NoiseMatrix, NoiseStream, NOISE_COUNT};
use crate::units::DimensionlessParams;

/// Midpoint iteration policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    /// Relative fixed-point tolerance on the midpoint iterate.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Any |variable| above this discards the trajectory.
    pub divergence_bound: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            tolerance: 1e-10,
            max_iterations: 500,
            divergence_bound: 1e6,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<(), crate::ConfigError> {
        if !(self.tolerance > 0.0) {
            return Err(crate::ConfigError::NonPositive {
                field: "tolerance",
                value: self.tolerance,
            });
        }
        if self.max_iterations < 2 {
            return Err(crate::ConfigError::Parse(format!(
                "max_iterations must be at least 2 (got {})",
                self.max_iterations
            )));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(crate::ConfigError::NonPositive {
                field: "divergence_bound",
                value: self.divergence_bound,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error, Serialize, Deserialize)]
pub enum StepError {
    #[error("midpoint iteration did not converge at step {step} (residual {residual:.3e})")]
    NotConverged { step: usize, residual: f64 },
    #[error("trajectory diverged at step {step} (max |x| = {max_abs:.3e})")]
    Diverged { step: usize, max_abs: f64 },
}

/// Solve `x̄ = x0 + ½ Δ(x̄)` by fixed-point iteration and write
/// `x0 + Δ(x̄)` into `x0`. `increment` receives the current iterate and
/// fills the full-step increment. Returns the iteration count, or the last
/// residual on failure.
///
/// The plain iteration is accelerated with Anderson mixing over the last few
/// iterates. This changes how fast the fixed point is reached, not which
/// point it is.
pub fn midpoint_solve<F>(x0: &mut [C64], ctrl: &StepControl, mut increment: F) -> Result<usize, f64>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut delta = vec![C64::new(0.0, 0.0); n];
    let mut mixer = Anderson::new(n, ANDERSON_DEPTH);
    let mut g = vec![C64::new(0.0, 0.0); n];
    let mut residual = f64::INFINITY;
    for iteration in 1..=ctrl.max_iterations {
        increment(&x, &mut delta);
        let mut change: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (((gi, xi), x0i), d) in g.iter_mut().zip(x.iter()).zip(x0.iter()).zip(delta.iter()) {
            *gi = *x0i + *d * 0.5;
            change = change.max((*gi - *xi).norm());
            size = size.max(gi.norm());
        }
        residual = change / size.max(1.0);
        if residual <= ctrl.tolerance {
            for (x, d) in x0.iter_mut().zip(delta.iter()) {
                *x += *d;
            }
            return Ok(iteration);
        }
        if !residual.is_finite() {
            break;
        }
        mixer.next(&mut x, &g);
    }
    Err(residual)
}

const ANDERSON_DEPTH: usize = 16;

/// Type-II Anderson mixing on complex vectors viewed as real vectors.
struct Anderson {
    depth: usize,
    prev_x: Vec<C64>,
    prev_f: Vec<C64>,
    /// Differences of residuals and of map values, oldest first.
    df: Vec<Vec<C64>>,
    dg: Vec<Vec<C64>>,
    started: bool,
}

impl Anderson {
    fn new(n: usize, depth: usize) -> Self {
        Anderson {
            depth,
            prev_x: vec![C64::new(0.0, 0.0); n],
            prev_f: vec![C64::new(0.0, 0.0); n],
            df: Vec::new(),
            dg: Vec::new(),
            started: false,
        }
    }

    fn dot(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
    }

    /// Replace `x` (the point where `g` was evaluated) with the next iterate.
    fn next(&mut self, x: &mut [C64], g: &[C64]) {
        let f: Vec<C64> = g.iter().zip(x.iter()).map(|(g, x)| *g - *x).collect();
        if self.started {
            if self.df.len() == self.depth {
                self.df.remove(0);
                self.dg.remove(0);
            }
            self.df.push(f.iter().zip(self.prev_f.iter()).map(|(a, b)| *a - *b).collect());
            // g_prev = x_prev + f_prev
            self.dg.push(
                g.iter()
                    .zip(self.prev_x.iter().zip(self.prev_f.iter()))
                    .map(|(g, (px, pf))| *g - (*px + *pf))
                    .collect(),
            );
        }
        self.started = true;
        self.prev_x.copy_from_slice(x);
        self.prev_f.copy_from_slice(&f);

        let gamma = self.coefficients(&f);
        x.copy_from_slice(g);
        if let Some(gamma) = gamma {
            for (gk, dg) in gamma.iter().zip(self.dg.iter()) {
                for (xi, d) in x.iter_mut().zip(dg.iter()) {
                    *xi -= *d * *gk;
                }
            }
        }
    }

    /// Least-squares `argmin ‖f − ΔF γ‖` by modified Gram-Schmidt QR.
    /// Columns that are numerically dependent on newer ones get γ = 0;
    /// `None` falls back to the plain iteration.
    fn coefficients(&self, f: &[C64]) -> Option<Vec<f64>> {
        let m = self.df.len();
        if m == 0 {
            return None;
        }
        // Newest first, so dependent columns drop the stale history.
        let order: Vec<usize> = (0..m).rev().collect();
        let mut kept: Vec<usize> = Vec::with_capacity(m);
        let mut q: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut r = vec![vec![0.0; m]; m];
        for &j in &order {
            let mut v = self.df[j].clone();
            let norm0 = Self::dot(&v, &v).sqrt();
            if !(norm0 > 0.0) {
                continue;
            }
            let mut coeffs = vec![0.0; q.len()];
            for (i, qi) in q.iter().enumerate() {
                let c = Self::dot(qi, &v);
                coeffs[i] = c;
                for (a, b) in v.iter_mut().zip(qi) {
                    *a -= *b * c;
                }
            }
            let norm = Self::dot(&v, &v).sqrt();
            if norm <= 1e-10 * norm0 {
                continue;
            }
            let k = q.len();
            for (i, c) in coeffs.into_iter().enumerate() {
                r[i][k] = c;
            }
            r[k][k] = norm;
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
            kept.push(j);
        }
        if q.is_empty() {
            return None;
        }
        let qtf: Vec<f64> = q.iter().map(|qi| Self::dot(qi, f)).collect();
        let k = q.len();
        let mut local = vec![0.0; k];
        for i in (0..k).rev() {
            let tail: f64 = (i + 1..k).map(|l| r[i][l] * local[l]).sum();
            local[i] = (qtf[i] - tail) / r[i][i];
        }
        let mut gamma = vec![0.0; m];
        for (i, &j) in kept.iter().enumerate() {
            gamma[j] = local[i];
        }
        gamma.iter().all(|g| g.is_finite()).then_some(gamma)
    }
}

/// Fill the field slots of every site from the atomic sources plus optional
/// field noise, with trapezoidal quadrature in z. The idler starts from zero
/// at the first site, the signal from zero at the last.
pub fn integrate_fields(
    sites: &mut [StateSlice],
    couplings: &[SiteCouplings],
    noise: Option<&[[C64; STATE_LEN]]>,
    p: &DimensionlessParams,
) {
    let m = sites.len();
    let mut rates = Vec::with_capacity(m);
    for (k, (s, c)) in sites.iter().zip(couplings.iter()).enumerate() {
        let mut d = field_spatial_drift(s, c, p).0;
        if let Some(n) = noise {
            d[E_I_P] += n[k][E_I_P];
            d[E_I_M] += n[k][E_I_M];
            d[E_S_P] -= n[k][E_S_P];
            d[E_S_M] -= n[k][E_S_M];
        }
        rates.push(d);
    }
    let half = 0.5 * p.dz;
    sites[0][E_I_P] = C64::new(0.0, 0.0);
    sites[0][E_I_M] = C64::new(0.0, 0.0);
    for k in 1..m {
        for slot in [E_I_P, E_I_M] {
            let prev = sites[k - 1][slot];
            sites[k][slot] = prev + (rates[k - 1][slot] + rates[k][slot]) * half;
        }
    }
    sites[m - 1][E_S_P] = C64::new(0.0, 0.0);
    sites[m - 1][E_S_M] = C64::new(0.0, 0.0);
    for k in (0..m - 1).rev() {
        for slot in [E_S_P, E_S_M] {
            let next = sites[k + 1][slot];
            sites[k][slot] = next - (rates[k][slot] + rates[k + 1][slot]) * half;
        }
    }
}

/// How a trajectory is driven and started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub control: StepControl,
    /// `false` forces B = 0 and drops the drift correction.
    pub stochastic: bool,
    /// Initial π03 = π03† at every z. Zero is the physical ground state; a
    /// small value gives the noise-free equations something to amplify.
    pub seed_coherence: f64,
    /// Keep the full state after every step.
    pub keep_snapshots: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            control: StepControl::default(),
            stochastic: true,
            seed_coherence: 0.0,
            keep_snapshots: false,
        }
    }
}

impl TrajectoryOptions {
    pub fn deterministic(seed_coherence: f64) -> Self {
        TrajectoryOptions {
            stochastic: false,
            seed_coherence,
            ..TrajectoryOptions::default()
        }
    }
}

/// All sites of one trajectory at the current time index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub sites: Vec<StateSlice>,
    pub step: usize,
    stream: NoiseStream,
}

impl TrajectoryState {
    /// Ground state at t = 0 with vacuum fields.
    pub fn initial(p: &DimensionlessParams, seed_coherence: f64, stream: NoiseStream) -> Self {
        let mut sites = vec![StateSlice::vacuum(); p.space_points];
        for s in sites.iter_mut() {
            s[P03] = C64::new(seed_coherence, 0.0);
            s[P03_D] = C64::new(seed_coherence, 0.0);
        }
        let mut state = TrajectoryState { sites, step: 0, stream };
        let couplings = site_couplings(p, 0.0);
        integrate_fields(&mut state.sites, &couplings, None, p);
        state
    }

    pub fn max_abs(&self) -> f64 {
        self.sites.iter().fold(0.0, |m, s| m.max(s.max_abs()))
    }
}

fn site_couplings(p: &DimensionlessParams, t: f64) -> Vec<SiteCouplings> {
    (0..p.space_points).map(|k| SiteCouplings::at(p, t, p.z_at(k))).collect()
}

const ATOMIC_LEN: usize = STATE_LEN - ATOMIC_START;

/// Advance every site from step `ts.step` to `ts.step + 1`.
///
/// Noise for each (step, site) is drawn once and held fixed across the
/// midpoint iterations. Fields at the new time are re-solved from the atomic
/// sources alone; field noise enters the dynamics only through the midpoint
/// fields, so leaving it out of the stored endpoint values keeps white-noise
/// variance out of the recorded outputs without biasing their means.
pub fn step_semi_implicit(
    ts: &mut TrajectoryState,
    p: &DimensionlessParams,
    opts: &TrajectoryOptions,
) -> Result<usize, StepError> {
    let m = ts.sites.len();
    let step = ts.step;
    let t_mid = p.time_at(step) + 0.5 * p.dt;
    let couplings = site_couplings(p, t_mid);
    let mut xi = vec![[0.0; NOISE_COUNT]; if opts.stochastic { m } else { 0 }];
    for (k, x) in xi.iter_mut().enumerate() {
        ts.stream.fill(step as u64, k as u64, x);
    }
    let corr_scale = if opts.stochastic { p.correction_scale() } else { 0.0 };

    let mut atoms: Vec<C64> = ts.sites.iter().flat_map(|s| s.0[ATOMIC_START..].iter().copied()).collect();
    // Field values carried between iterations; the diffusion entries that
    // feed the field noise do not depend on them.
    let mut work = ts.sites.clone();
    let mut noise = vec![[C64::new(0.0, 0.0); STATE_LEN]; m];
    let mut branches: Vec<Option<NoiseMatrix>> = vec![None; m];
    // The drift correction is the small-noise limit of a square-root
    // diffusion; where D vanishes exactly (vacuum) the Ito and Stratonovich
    // forms coincide and no correction applies.
    let mut diffusive = vec![false; m];

    let result = midpoint_solve(&mut atoms, &opts.control, |xbar, delta| {
        for (k, site) in work.iter_mut().enumerate() {
            site.0[ATOMIC_START..].copy_from_slice(&xbar[k * ATOMIC_LEN..(k + 1) * ATOMIC_LEN]);
        }
        if opts.stochastic {
            for k in 0..m {
                let d = diffusion_coefficients(&work[k], &couplings[k], p);
                let mut b = build_noise_matrix(&d);
                if let Some(prev) = &branches[k] {
                    b.align_to(prev);
                }
                noise[k] = sample_noise(&b, &xi[k], p);
                diffusive[k] = !b.is_zero();
                branches[k] = Some(b);
            }
            integrate_fields(&mut work, &couplings, Some(&noise), p);
        } else {
            integrate_fields(&mut work, &couplings, None, p);
        }
        for k in 0..m {
            let drift = atomic_drift(&work[k], &couplings[k], p);
            let out = &mut delta[k * ATOMIC_LEN..(k + 1) * ATOMIC_LEN];
            if diffusive[k] {
                let corr = stratonovich_correction(&work[k], &couplings[k], p, corr_scale);
                for (j, o) in out.iter_mut().enumerate() {
                    let slot = ATOMIC_START + j;
                    *o = (drift.0[slot] + corr.0[slot] + noise[k][slot]) * p.dt;
                }
            } else {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = drift.0[ATOMIC_START + j] * p.dt;
                }
            }
        }
    });
    let iterations = result.map_err(|residual| StepError::NotConverged { step, residual })?;

    for (k, site) in ts.sites.iter_mut().enumerate() {
        site.0[ATOMIC_START..].copy_from_slice(&atoms[k * ATOMIC_LEN..(k + 1) * ATOMIC_LEN]);
    }
    let end_couplings = site_couplings(p, p.time_at(step + 1));
    integrate_fields(&mut ts.sites, &end_couplings, None, p);
    ts.step += 1;

    let max_abs = ts.max_abs();
    if !(max_abs <= opts.control.divergence_bound) {
        return Err(StepError::Diverged { step, max_abs });
    }
    Ok(iterations)
}

/// Boundary observables of one trajectory at every time index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// `E_s⁻ E_s⁺` at z = 0, before the signal unit factor.
    pub signal: Vec<C64>,
    /// `E_i⁻ E_i⁺` at z = L.
    pub idler: Vec<C64>,
    /// π11, π22, π33 at z = 0.
    pub populations_entry: Vec<[C64; 3]>,
    /// π11, π22, π33 at z = L.
    pub populations_exit: Vec<[C64; 3]>,
    /// `histogram[n]` counts steps that converged in n iterations.
    pub iteration_histogram: Vec<u64>,
    pub snapshots: Option<Vec<Vec<StateSlice>>>,
}

impl TrajectoryRecord {
    fn with_capacity(n: usize, max_iterations: usize) -> Self {
        TrajectoryRecord {
            signal: Vec::with_capacity(n),
            idler: Vec::with_capacity(n),
            populations_entry: Vec::with_capacity(n),
            populations_exit: Vec::with_capacity(n),
            iteration_histogram: vec![0; max_iterations + 1],
            snapshots: None,
        }
    }

    fn record(&mut self, sites: &[StateSlice]) {
        let first = &sites[0];
        let last = &sites[sites.len() - 1];
        self.signal.push(first[E_S_M] * first[E_S_P]);
        self.idler.push(last[E_I_M] * last[E_I_P]);
        self.populations_entry.push([first[P11], first[P22], first[P33]]);
        self.populations_exit.push([last[P11], last[P22], last[P33]]);
    }
}

/// Full space-time sweep of trajectory `trajectory` under `seed`.
pub fn run_trajectory(
    p: &DimensionlessParams,
    opts: &TrajectoryOptions,
    seed: u64,
    trajectory: u64,
) -> Result<TrajectoryRecord, StepError> {
    let mut ts = TrajectoryState::initial(p, opts.seed_coherence, NoiseStream::new(seed, trajectory));
    let mut rec = TrajectoryRecord::with_capacity(p.time_points, opts.control.max_iterations);
    let mut snapshots = opts.keep_snapshots.then(|| vec![ts.sites.clone()]);
    rec.record(&ts.sites);
    for _ in 1..p.time_points {
        let iterations = step_semi_implicit(&mut ts, p, opts)?;
        rec.iteration_histogram[iterations] += 1;
        rec.record(&ts.sites);
        if let Some(s) = snapshots.as_mut() {
            s.push(ts.sites.clone());
        }
    }
    rec.snapshots = snapshots;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{P32, P01};
    use crate::fixtures::operating_params;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn linear_midpoint_amplification() {
        let a = c(-0.3, 0.8);
        let dt = 0.25;
        let mut x = vec![c(1.0, 0.0)];
        let ctrl = StepControl::default();
        let it = midpoint_solve(&mut x, &ctrl, |xb, d| d[0] = a * xb[0] * dt).unwrap();
        let exact = (1.0 + a * dt / 2.0) / (1.0 - a * dt / 2.0);
        assert!((x[0] - exact).norm() < 1e-10);
        assert!(it > 2);
    }

    #[test]
    fn midpoint_is_second_order() {
        let a = -1.3;
        let err = |n: usize| {
            let mut x = vec![c(1.0, 0.0)];
            for _ in 0..n {
                midpoint_solve(&mut x, &StepControl::default(), |xb, d| d[0] = a * xb[0] / n as f64).unwrap();
            }
            (x[0].re - a.exp()).abs()
        };
        let ratio = err(20) / err(40);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let ctrl = StepControl {
            max_iterations: 3,
            ..StepControl::default()
        };
        let mut x = vec![c(1.0, 0.0)];
        assert!(midpoint_solve(&mut x, &ctrl, |xb, d| d[0] = xb[0].exp()).is_err());
        assert_eq!(x[0], c(1.0, 0.0));
    }

    #[test]
    fn constant_idler_source_is_linear() {
        let p = operating_params();
        let k = c(0.2, -0.7);
        let mut sites = vec![StateSlice::vacuum(); p.space_points];
        for s in sites.iter_mut() {
            s[P03] = k;
        }
        let cpl = site_couplings(&p, 0.0);
        integrate_fields(&mut sites, &cpl, None, &p);
        for (i, s) in sites.iter().enumerate() {
            let z = p.z_at(i);
            assert!((s[E_I_P] - c(0.0, 1.0) * k * z).norm() < 1e-15);
            assert_eq!(s[E_S_P], c(0.0, 0.0));
        }
    }

    #[test]
    fn constant_signal_source_runs_backward() {
        let p = operating_params();
        let k = c(0.4, 0.1);
        let mut sites = vec![StateSlice::vacuum(); p.space_points];
        for s in sites.iter_mut() {
            s[P32] = k;
        }
        let cpl = site_couplings(&p, 0.0);
        integrate_fields(&mut sites, &cpl, None, &p);
        for (i, s) in sites.iter().enumerate() {
            let expected = c(0.0, 1.0) * k * p.coupling_sq * (p.length - p.z_at(i));
            assert!((s[E_S_P] - expected).norm() < 1e-15);
        }
        assert_eq!(sites[p.space_points - 1][E_S_P], c(0.0, 0.0));
        assert_eq!(sites[0][E_I_P], c(0.0, 0.0));
    }

    #[test]
    fn oscillatory_source_against_antiderivative() {
        let mut p = operating_params();
        p.space_points = 1000;
        p.dz = p.length / 999.0;
        p.phase_mismatch = 1.0;
        let k = c(0.3, 0.2);
        let mut sites = vec![StateSlice::vacuum(); p.space_points];
        for s in sites.iter_mut() {
            s[P32] = k;
        }
        let cpl = site_couplings(&p, 0.0);
        integrate_fields(&mut sites, &cpl, None, &p);
        let q = p.phase_mismatch;
        // ∂z E = -i k g² e^{iqz}, E(L) = 0  →  E(z) = k g² (e^{iqL} - e^{iqz}) / q
        for (i, s) in sites.iter().enumerate() {
            let z = p.z_at(i);
            let exact = k * p.coupling_sq * (C64::from_polar(1.0, q * p.length) - C64::from_polar(1.0, q * z)) / q;
            assert!((s[E_S_P] - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn vacuum_with_pumps_off_stays_zero() {
        let p = operating_params().pumps_off();
        let opts = TrajectoryOptions::default();
        let rec = run_trajectory(&p, &opts, 1, 0).unwrap();
        assert!(rec.signal.iter().chain(rec.idler.iter()).all(|v| *v == c(0.0, 0.0)));
        assert!(rec
            .populations_entry
            .iter()
            .chain(rec.populations_exit.iter())
            .flatten()
            .all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn boundaries_hold_after_every_step() {
        let p = operating_params();
        let opts = TrajectoryOptions::default();
        let mut ts = TrajectoryState::initial(&p, 0.0, NoiseStream::new(3, 1));
        for _ in 0..10 {
            step_semi_implicit(&mut ts, &p, &opts).unwrap();
            assert_eq!(ts.sites[0][E_I_P], c(0.0, 0.0));
            assert_eq!(ts.sites[0][E_I_M], c(0.0, 0.0));
            assert_eq!(ts.sites[p.space_points - 1][E_S_P], c(0.0, 0.0));
            assert_eq!(ts.sites[p.space_points - 1][E_S_M], c(0.0, 0.0));
        }
        assert!(ts.sites[0][P01].norm() > 0.0);
    }

    #[test]
    fn trajectory_is_a_function_of_seed_and_index() {
        let mut p = operating_params();
        p.time_points = 20;
        let opts = TrajectoryOptions::default();
        let a = run_trajectory(&p, &opts, 9, 4).unwrap();
        let b = run_trajectory(&p, &opts, 9, 4).unwrap();
        let other = run_trajectory(&p, &opts, 9, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.signal, other.signal);
    }
}
