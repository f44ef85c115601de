//! Ensemble statistics: intensities, the causal two-time signal-idler
//! correlation, and the fitted decay time.
//!
//! Products are formed per trajectory from the independent ± variables and
//! then summed exactly, so merging partial ensembles in any order gives the
//! same bits as a single pass.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::SimError;
use crate::exact_sum::ExactSum;
use crate::integrator::TrajectoryRecord;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexSum {
    pub re: ExactSum,
    pub im: ExactSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn merge(&mut self, other: &ComplexSum) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// π11, π22, π33 at each time index.
pub type PopulationSeries = Vec<[C64; 3]>;

/// Index of `(s, i)`, `i ≥ s`, in the packed upper triangle of an `m × m` grid.
pub fn triangle_index(m: usize, s: usize, i: usize) -> usize {
    debug_assert!(i >= s && i < m);
    s * (2 * m - s + 1) / 2 + (i - s)
}

pub fn triangle_len(m: usize) -> usize {
    m * (m + 1) / 2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleAccumulator {
    pub time_points: usize,
    pub trajectories: u64,
    pub discarded: u64,
    signal: Vec<ComplexSum>,
    idler: Vec<ComplexSum>,
    /// Sums of (Re I)² for standard errors.
    signal_sq: Vec<ExactSum>,
    idler_sq: Vec<ExactSum>,
    correlation: Vec<ComplexSum>,
    populations_entry: Vec<[ComplexSum; 3]>,
    populations_exit: Vec<[ComplexSum; 3]>,
    pub iteration_histogram: Vec<u64>,
}

impl EnsembleAccumulator {
    pub fn new(time_points: usize) -> Self {
        EnsembleAccumulator {
            time_points,
            trajectories: 0,
            discarded: 0,
            signal: vec![ComplexSum::default(); time_points],
            idler: vec![ComplexSum::default(); time_points],
            signal_sq: vec![ExactSum::new(); time_points],
            idler_sq: vec![ExactSum::new(); time_points],
            correlation: vec![ComplexSum::default(); triangle_len(time_points)],
            populations_entry: vec![Default::default(); time_points],
            populations_exit: vec![Default::default(); time_points],
            iteration_histogram: Vec::new(),
        }
    }

    pub fn accumulate(&mut self, rec: &TrajectoryRecord) {
        let m = self.time_points;
        assert_eq!(rec.signal.len(), m, "record length does not match the accumulator");
        self.trajectories += 1;
        for t in 0..m {
            self.signal[t].add(rec.signal[t]);
            self.idler[t].add(rec.idler[t]);
            self.signal_sq[t].add(rec.signal[t].re * rec.signal[t].re);
            self.idler_sq[t].add(rec.idler[t].re * rec.idler[t].re);
            for j in 0..3 {
                self.populations_entry[t][j].add(rec.populations_entry[t][j]);
                self.populations_exit[t][j].add(rec.populations_exit[t][j]);
            }
        }
        let mut k = 0;
        for s in 0..m {
            let is = rec.signal[s];
            for i in s..m {
                self.correlation[k].add(is * rec.idler[i]);
                k += 1;
            }
        }
        merge_histogram(&mut self.iteration_histogram, &rec.iteration_histogram);
    }

    pub fn record_discard(&mut self) {
        self.discarded += 1;
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) {
        assert_eq!(self.time_points, other.time_points, "accumulator grids differ");
        self.trajectories += other.trajectories;
        self.discarded += other.discarded;
        let pairs = |a: &mut [ComplexSum], b: &[ComplexSum]| a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        pairs(&mut self.signal, &other.signal);
        pairs(&mut self.idler, &other.idler);
        pairs(&mut self.correlation, &other.correlation);
        for (a, b) in self.signal_sq.iter_mut().zip(&other.signal_sq) {
            a.merge(b);
        }
        for (a, b) in self.idler_sq.iter_mut().zip(&other.idler_sq) {
            a.merge(b);
        }
        for (a, b) in self.populations_entry.iter_mut().zip(&other.populations_entry) {
            pairs(a, b);
        }
        for (a, b) in self.populations_exit.iter_mut().zip(&other.populations_exit) {
            pairs(a, b);
        }
        merge_histogram(&mut self.iteration_histogram, &other.iteration_histogram);
    }

    fn require_nonempty(&self) -> Result<f64, SimError> {
        if self.trajectories == 0 {
            Err(SimError::Observable("empty ensemble".into()))
        } else {
            Ok(self.trajectories as f64)
        }
    }

    /// Ensemble-mean π11, π22, π33 at z = 0 and z = L.
    pub fn populations(&self) -> Result<(PopulationSeries, PopulationSeries), SimError> {
        let r = self.require_nonempty()?;
        let mean = |v: &[[ComplexSum; 3]]| {
            v.iter()
                .map(|p| [p[0].value() / r, p[1].value() / r, p[2].value() / r])
                .collect()
        };
        Ok((mean(&self.populations_entry), mean(&self.populations_exit)))
    }
}

fn merge_histogram(into: &mut Vec<u64>, from: &[u64]) {
    if into.len() < from.len() {
        into.resize(from.len(), 0);
    }
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

/// Normalised intensities in units of E_c².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intensities {
    pub time_ns: Vec<f64>,
    pub signal: Vec<C64>,
    pub idler: Vec<C64>,
    /// Standard error of Re I at each time.
    pub signal_stderr: Vec<f64>,
    pub idler_stderr: Vec<f64>,
}

impl Intensities {
    /// `|Im I| / max |Re I|` for the signal and the idler.
    pub fn imaginary_residue(&self) -> (f64, f64) {
        let ratio = |v: &[C64]| {
            let peak = v.iter().fold(0.0, |m: f64, z| m.max(z.re.abs()));
            let im = v.iter().fold(0.0, |m: f64, z| m.max(z.im.abs()));
            if peak > 0.0 {
                im / peak
            } else {
                0.0
            }
        };
        (ratio(&self.signal), ratio(&self.idler))
    }
}

/// `dt_ns` is the time step in ns; `signal_factor` the (d_i/d_s)² unit factor.
pub fn intensities(acc: &EnsembleAccumulator, dt_ns: f64, signal_factor: f64) -> Result<Intensities, SimError> {
    let r = acc.require_nonempty()?;
    let stderr = |sum: &ComplexSum, sq: &ExactSum, factor: f64| {
        let mean = sum.re.value() / r;
        let var = (sq.value() / r - mean * mean).max(0.0);
        factor * (var / r).sqrt()
    };
    Ok(Intensities {
        time_ns: (0..acc.time_points).map(|t| t as f64 * dt_ns).collect(),
        signal: acc.signal.iter().map(|s| s.value() * (signal_factor / r)).collect(),
        idler: acc.idler.iter().map(|s| s.value() / r).collect(),
        signal_stderr: acc
            .signal
            .iter()
            .zip(&acc.signal_sq)
            .map(|(s, q)| stderr(s, q, signal_factor))
            .collect(),
        idler_stderr: acc.idler.iter().zip(&acc.idler_sq).map(|(s, q)| stderr(s, q, 1.0)).collect(),
    })
}

/// Causal two-time correlation, `t_i ≥ t_s` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub time_points: usize,
    pub dt_ns: f64,
    /// Packed upper triangle, row `t_s`, columns `t_i ≥ t_s`.
    pub values: Vec<C64>,
    /// Index of max over `t_s` of Re G(t_s, t_s).
    pub peak_index: usize,
    /// `G(t_m, t_m + τ)` for τ = 0, dt, ...
    pub section: Vec<C64>,
}

impl Correlation {
    pub fn get(&self, s: usize, i: usize) -> Option<C64> {
        (i >= s && i < self.time_points).then(|| self.values[triangle_index(self.time_points, s, i)])
    }

    pub fn t_m_ns(&self) -> f64 {
        self.peak_index as f64 * self.dt_ns
    }

    /// Section scaled so that its largest real part is one.
    pub fn normalized_section(&self) -> Vec<C64> {
        let peak = self.section.iter().fold(0.0, |m: f64, z| m.max(z.re));
        if peak > 0.0 {
            self.section.iter().map(|z| z / peak).collect()
        } else {
            self.section.clone()
        }
    }
}

pub fn correlation(acc: &EnsembleAccumulator, dt_ns: f64, signal_factor: f64) -> Result<Correlation, SimError> {
    let r = acc.require_nonempty()?;
    let m = acc.time_points;
    let values: Vec<C64> = acc.correlation.iter().map(|s| s.value() * (signal_factor / r)).collect();
    let peak_index = (0..m)
        .max_by(|&a, &b| {
            let ga = values[triangle_index(m, a, a)].re;
            let gb = values[triangle_index(m, b, b)].re;
            ga.total_cmp(&gb).then(b.cmp(&a))
        })
        .unwrap_or(0);
    let section = (peak_index..m).map(|i| values[triangle_index(m, peak_index, i)]).collect();
    Ok(Correlation {
        time_points: m,
        dt_ns,
        values,
        peak_index,
        section,
    })
}

/// Exponential fit `G ∝ e^{-τ/T_f}` over part of a correlation section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub t_f_ns: f64,
    /// 95 % confidence interval.
    pub ci_low_ns: f64,
    pub ci_high_ns: f64,
    /// Window as fractions of the peak: fitting starts at `start` (= 1, the
    /// peak) and stops once the section falls below `end`.
    pub window_start: f64,
    pub window_end: f64,
    pub points: usize,
    /// Time of the correlation maximum along the diagonal.
    pub t_m_ns: f64,
    /// A non-positive value cut the window short.
    pub window_shrunk: bool,
}

/// Least-squares fit of log Re G from the section maximum down to
/// `end_fraction` of it. `section[k]` sits at τ = k·dt_ns.
pub fn fit_timescale(section: &[f64], dt_ns: f64, end_fraction: f64, t_m_ns: f64) -> Result<FitResult, SimError> {
    let peak = section
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .ok_or_else(|| SimError::Observable("empty correlation section".into()))?;
    let peak_value = section[peak];
    if !(peak_value > 0.0) {
        return Err(SimError::Observable("correlation section has no positive peak".into()));
    }
    let mut window_shrunk = false;
    let mut end = peak;
    for (k, &v) in section.iter().enumerate().skip(peak) {
        if !(v > 0.0) {
            window_shrunk = true;
            break;
        }
        end = k;
        if v < end_fraction * peak_value {
            break;
        }
    }
    let n = end - peak + 1;
    if n < 3 {
        return Err(SimError::Observable(format!(
            "fit window holds {n} points; at least 3 are needed"
        )));
    }
    let ts: Vec<f64> = (peak..=end).map(|k| (k - peak) as f64 * dt_ns).collect();
    let ys: Vec<f64> = (peak..=end).map(|k| section[k].ln()).collect();
    let nf = n as f64;
    let t_mean = ts.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = ts.iter().map(|t| (t - t_mean).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - t_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(SimError::Observable("correlation section does not decay".into()));
    }
    let intercept = y_mean - slope * t_mean;
    let sse: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum();
    let se = (sse / (nf - 2.0) / sxx).sqrt();
    let quantile = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| SimError::Observable(e.to_string()))?
        .inverse_cdf(0.975);
    let steep = slope - quantile * se;
    let shallow = slope + quantile * se;
    let t_f = -1.0 / slope;
    Ok(FitResult {
        t_f_ns: t_f,
        ci_low_ns: (-1.0 / steep).min(t_f),
        ci_high_ns: if shallow < 0.0 { (-1.0 / shallow).max(t_f) } else { f64::INFINITY },
        window_start: 1.0,
        window_end: end_fraction,
        points: n,
        t_m_ns,
        window_shrunk,
    })
}

/// Dicke superradiant time `γ₀₃⁻¹ / (Nμ + 1)` in ns, `gamma03` in s⁻¹.
pub fn dicke_reference(gamma03: f64, n_mu: f64) -> Result<f64, SimError> {
    if !(n_mu >= 0.0) {
        return Err(crate::ConfigError::NegativeNMu(n_mu).into());
    }
    Ok(1e9 / gamma03 / (n_mu + 1.0))
}
