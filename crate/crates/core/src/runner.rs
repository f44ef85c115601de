//! Ensemble orchestration: static worker partition, checkpoints and artifacts.

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, RunFile};
use crate::error::SimError;
use crate::integrator::{run_trajectory, StepControl, TrajectoryOptions};
use crate::observables::{
    correlation, dicke_reference, fit_timescale, intensities, Correlation, EnsembleAccumulator, FitResult, Intensities,
};
use crate::units::{optical_depth_label, CooperationScale, DimensionlessParams, LaboratoryEcho};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const INTENSITIES_FILE: &str = "intensities.tsv";
pub const POPULATIONS_FILE: &str = "populations.tsv";
pub const CORRELATION_FILE: &str = "g_grid.bin";
pub const SECTION_FILE: &str = "g_section.tsv";
pub const FIT_FILE: &str = "fit.json";

/// Runs with more than this share of discarded trajectories are rejected.
pub const DISCARD_LIMIT_PERCENT: u32 = 10;

/// Fit windows, as fractions of the section peak.
pub const FIT_WINDOWS: [f64; 2] = [0.05, 0.25];

const CHECKPOINT_VERSION: u32 = 1;

/// Runs trajectories `range` under `seed` on `workers` threads.
///
/// Worker `w` takes indices `start + w, start + w + workers, ...`, so the
/// assignment of noise streams to trajectories never depends on timing.
/// Sums are exact, so the merged result is identical for any worker count.
pub fn run_ensemble(
    p: &DimensionlessParams,
    opts: &TrajectoryOptions,
    seed: u64,
    range: Range<u64>,
    workers: usize,
) -> EnsembleAccumulator {
    let workers = workers.max(1);
    let run_slice = |w: usize| {
        let mut acc = EnsembleAccumulator::new(p.time_points);
        let mut index = range.start + w as u64;
        while index < range.end {
            match run_trajectory(p, opts, seed, index) {
                Ok(rec) => acc.accumulate(&rec),
                Err(_) => acc.record_discard(),
            }
            index += workers as u64;
        }
        acc
    };
    if workers == 1 {
        return run_slice(0);
    }
    let parts: Vec<EnsembleAccumulator> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers).map(|w| scope.spawn(move || run_slice(w))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trajectory worker panicked"))
            .collect()
    });
    let mut total = EnsembleAccumulator::new(p.time_points);
    for part in &parts {
        total.merge(part);
    }
    total
}

#[derive(Debug, Clone)]
pub struct SimulateRequest {
    pub config: RunConfig,
    pub trajectories: u64,
    pub seed: u64,
    pub workers: usize,
    /// Trajectories between checkpoints; 0 disables checkpoints.
    pub checkpoint_every: u64,
    pub out_dir: PathBuf,
}

/// Field unit conversion echoed in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldUnit {
    /// E_c in V/m.
    pub e_c_v_per_m: f64,
    /// `(d_i/ħ) E_c` in units of γ03.
    pub rabi_per_gamma03: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunFile,
    pub cooperation: CooperationScale,
    pub dimensionless: DimensionlessParams,
    pub laboratory_echo: LaboratoryEcho,
    pub field_unit: FieldUnit,
    pub optical_depth: f64,
    pub seed: u64,
    pub trajectories_requested: u64,
    pub trajectories_completed: u64,
    pub trajectories_discarded: u64,
    pub discard_limit_percent: u32,
    pub workers: usize,
    pub checkpoint_every: u64,
    pub resumed_from: Option<u64>,
    pub wall_time_s: f64,
    pub solver: StepControl,
    /// `histogram[n]`: steps that converged in n midpoint iterations.
    pub iteration_histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: RunConfig,
    pub seed: u64,
    pub next_index: u64,
    pub accumulator: EnsembleAccumulator,
}

/// One fit window, or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub end_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub t_m_ns: f64,
    pub trajectories: u64,
    pub discarded: u64,
    pub windows: Vec<WindowFit>,
    /// Spread of T_f over the windows that succeeded.
    pub t_f_range_ns: Option<(f64, f64)>,
    pub t_1_ns: Option<f64>,
    pub signal_imaginary_residue: f64,
    pub idler_imaginary_residue: f64,
}

impl FitReport {
    /// T_f from the default (peak to 5%) window.
    pub fn primary(&self) -> Option<&FitResult> {
        self.windows.first().and_then(|w| w.fit.as_ref())
    }
}

/// Everything derived from a finished accumulator.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub intensities: Intensities,
    pub correlation: Correlation,
    pub fit: FitReport,
}

pub fn analyse(
    acc: &EnsembleAccumulator,
    p: &DimensionlessParams,
    gamma03_per_s: f64,
    n_mu: Option<f64>,
) -> Result<Analysis, SimError> {
    let dt_ns = p.dt * p.time_unit_ns;
    let ints = intensities(acc, dt_ns, p.signal_unit_factor)?;
    let g = correlation(acc, dt_ns, p.signal_unit_factor)?;
    let section: Vec<f64> = g.section.iter().map(|z| z.re).collect();
    let windows: Vec<WindowFit> = FIT_WINDOWS
        .iter()
        .map(|&end| match fit_timescale(&section, dt_ns, end, g.t_m_ns()) {
            Ok(fit) => WindowFit {
                end_fraction: end,
                fit: Some(fit),
                error: None,
            },
            Err(e) => WindowFit {
                end_fraction: end,
                fit: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let t_f_range_ns = windows
        .iter()
        .filter_map(|w| w.fit.as_ref().map(|f| f.t_f_ns))
        .fold(None, |r: Option<(f64, f64)>, t| Some(r.map_or((t, t), |(lo, hi)| (lo.min(t), hi.max(t)))));
    let (signal_res, idler_res) = ints.imaginary_residue();
    let fit = FitReport {
        t_m_ns: g.t_m_ns(),
        trajectories: acc.trajectories,
        discarded: acc.discarded,
        windows,
        t_f_range_ns,
        t_1_ns: n_mu.and_then(|n| dicke_reference(gamma03_per_s, n).ok()),
        signal_imaginary_residue: signal_res,
        idler_imaginary_residue: idler_res,
    };
    Ok(Analysis {
        intensities: ints,
        correlation: g,
        fit,
    })
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub manifest: RunManifest,
    pub accumulator: EnsembleAccumulator,
    pub analysis: Option<Analysis>,
}

/// Runs (or resumes) an ensemble and writes every artifact into `out_dir`.
///
/// Discarded trajectories above [`DISCARD_LIMIT_PERCENT`] produce
/// [`SimError::TooManyDiscarded`] after the artifacts are written.
pub fn simulate(req: &SimulateRequest, mut progress: impl FnMut(u64, u64)) -> Result<SimulateOutcome, SimError> {
    let started = Instant::now();
    let (scale, p) = req.config.dimensionless()?;
    fs::create_dir_all(&req.out_dir).map_err(|e| SimError::io(format!("creating {}", req.out_dir.display()), e))?;
    let checkpoint_path = req.out_dir.join(CHECKPOINT_FILE);

    let mut acc = EnsembleAccumulator::new(p.time_points);
    let mut next = 0;
    let mut resumed_from = None;
    if checkpoint_path.exists() {
        let cp = read_checkpoint(&checkpoint_path)?;
        if cp.config != req.config || cp.seed != req.seed {
            return Err(SimError::Checkpoint {
                path: checkpoint_path,
                reason: "configuration or seed differs from this run".into(),
            });
        }
        if cp.next_index > req.trajectories {
            return Err(SimError::Checkpoint {
                path: checkpoint_path,
                reason: format!(
                    "already holds {} trajectories, more than the {} requested",
                    cp.next_index, req.trajectories
                ),
            });
        }
        next = cp.next_index;
        resumed_from = Some(next);
        acc = cp.accumulator;
    }

    let opts = TrajectoryOptions {
        control: req.config.control,
        ..TrajectoryOptions::default()
    };
    let chunk = if req.checkpoint_every == 0 {
        req.trajectories.max(1)
    } else {
        req.checkpoint_every
    };
    while next < req.trajectories {
        let end = (next + chunk).min(req.trajectories);
        let part = run_ensemble(&p, &opts, req.seed, next..end, req.workers);
        acc.merge(&part);
        next = end;
        if req.checkpoint_every > 0 {
            write_checkpoint(
                &checkpoint_path,
                &Checkpoint {
                    version: CHECKPOINT_VERSION,
                    config: req.config.clone(),
                    seed: req.seed,
                    next_index: next,
                    accumulator: acc.clone(),
                },
            )?;
        }
        progress(next, req.trajectories);
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: req.config.to_file_format(),
        cooperation: scale,
        dimensionless: p.clone(),
        laboratory_echo: p.to_laboratory(&scale),
        field_unit: FieldUnit {
            e_c_v_per_m: scale.field_v_per_m,
            rabi_per_gamma03: req.config.physical.idler_dipole_cm * scale.field_v_per_m
                / crate::units::HBAR
                / req.config.physical.gamma03,
        },
        optical_depth: optical_depth_label(&req.config.physical),
        seed: req.seed,
        trajectories_requested: req.trajectories,
        trajectories_completed: acc.trajectories,
        trajectories_discarded: acc.discarded,
        discard_limit_percent: DISCARD_LIMIT_PERCENT,
        workers: req.workers.max(1),
        checkpoint_every: req.checkpoint_every,
        resumed_from,
        wall_time_s: started.elapsed().as_secs_f64(),
        solver: req.config.control,
        iteration_histogram: acc.iteration_histogram.clone(),
    };
    write_json(&req.out_dir.join(MANIFEST_FILE), &manifest)?;

    let analysis = if acc.trajectories > 0 {
        let a = analyse(&acc, &p, req.config.physical.gamma03, req.config.physical.n_mu)?;
        write_artifacts(&req.out_dir, &acc, &a)?;
        Some(a)
    } else {
        None
    };

    if acc.discarded * 100 > req.trajectories * DISCARD_LIMIT_PERCENT as u64 {
        return Err(SimError::TooManyDiscarded {
            discarded: acc.discarded,
            requested: req.trajectories,
            limit_percent: DISCARD_LIMIT_PERCENT,
        });
    }
    Ok(SimulateOutcome {
        manifest,
        accumulator: acc,
        analysis,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, SimError> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(format!("reading {}", path.display()), e))?;
    let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| SimError::Checkpoint {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    if cp.version != CHECKPOINT_VERSION {
        return Err(SimError::Checkpoint {
            path: path.to_owned(),
            reason: format!("unsupported version {}", cp.version),
        });
    }
    Ok(cp)
}

fn write_checkpoint(path: &Path, cp: &Checkpoint) -> Result<(), SimError> {
    write_json(path, cp)
}

/// Writes through a temporary file and a rename so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SimError> {
    let tmp = path.with_extension("tmp");
    let io = |e| SimError::io(format!("writing {}", path.display()), e);
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(value).expect("artifact types always serialize");
    write_atomic(path, text.as_bytes())
}

fn write_artifacts(dir: &Path, acc: &EnsembleAccumulator, a: &Analysis) -> Result<(), SimError> {
    let i = &a.intensities;
    let mut text = String::from("# t_ns\tre_I_s\tim_I_s\tre_I_i\tim_I_i\tstderr_I_s\tstderr_I_i\n");
    for k in 0..i.time_ns.len() {
        text += &format!(
            "{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\n",
            i.time_ns[k],
            i.signal[k].re,
            i.signal[k].im,
            i.idler[k].re,
            i.idler[k].im,
            i.signal_stderr[k],
            i.idler_stderr[k]
        );
    }
    write_atomic(&dir.join(INTENSITIES_FILE), text.as_bytes())?;

    let (entry, exit) = acc.populations()?;
    let mut text = String::from("# t_ns");
    for edge in ["z0", "zL"] {
        for level in ["pi11", "pi22", "pi33"] {
            text += &format!("\tre_{level}_{edge}\tim_{level}_{edge}");
        }
    }
    text.push('\n');
    for k in 0..i.time_ns.len() {
        text += &i.time_ns[k].to_string();
        for row in [&entry[k], &exit[k]] {
            for v in row {
                text += &format!("\t{:e}\t{:e}", v.re, v.im);
            }
        }
        text.push('\n');
    }
    write_atomic(&dir.join(POPULATIONS_FILE), text.as_bytes())?;

    write_atomic(&dir.join(CORRELATION_FILE), &encode_correlation(&a.correlation))?;

    let g = &a.correlation;
    let normalized = g.normalized_section();
    let mut text = format!("# t_m_ns = {}\n# tau_ns\tre_G\tim_G\tre_G_norm\tim_G_norm\n", g.t_m_ns());
    for (k, (v, n)) in g.section.iter().zip(&normalized).enumerate() {
        text += &format!("{}\t{:e}\t{:e}\t{:e}\t{:e}\n", k as f64 * g.dt_ns, v.re, v.im, n.re, n.im);
    }
    write_atomic(&dir.join(SECTION_FILE), text.as_bytes())?;

    write_json(&dir.join(FIT_FILE), &a.fit)
}

const CORRELATION_MAGIC: &str = "cascade-correlation 1";

/// Text header terminated by an `end` line, then the packed upper triangle
/// (row `t_s`, columns `t_i ≥ t_s`) as little-endian `f64` pairs.
pub fn encode_correlation(g: &Correlation) -> Vec<u8> {
    let mut out = format!(
        "{CORRELATION_MAGIC}\ntime_points {}\ndt_ns {}\nt0_ns 0\nvalues {}\nlayout upper-triangle row-major complex-f64-le\nend\n",
        g.time_points,
        g.dt_ns,
        g.values.len()
    )
    .into_bytes();
    for v in &g.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// Inverse of [`encode_correlation`]: `(time_points, dt_ns, values)`.
pub fn decode_correlation(bytes: &[u8]) -> Result<(usize, f64, Vec<num_complex::Complex64>), String> {
    let mut pos = 0;
    let mut fields = std::collections::HashMap::new();
    let mut first = true;
    loop {
        let nl = bytes[pos..].iter().position(|&b| b == b'\n').ok_or("truncated header")?;
        let line = std::str::from_utf8(&bytes[pos..pos + nl]).map_err(|e| e.to_string())?;
        pos += nl + 1;
        if first {
            if line != CORRELATION_MAGIC {
                return Err(format!("unexpected header {line:?}"));
            }
            first = false;
            continue;
        }
        if line == "end" {
            break;
        }
        let (key, value) = line.split_once(' ').ok_or("malformed header line")?;
        fields.insert(key.to_owned(), value.to_owned());
    }
    let get = |k: &str| fields.get(k).ok_or(format!("missing {k}"));
    let m: usize = get("time_points")?.parse().map_err(|e| format!("{e}"))?;
    let dt: f64 = get("dt_ns")?.parse().map_err(|e| format!("{e}"))?;
    let n: usize = get("values")?.parse().map_err(|e| format!("{e}"))?;
    let body = &bytes[pos..];
    if body.len() != n * 16 {
        return Err(format!("expected {} bytes of data, found {}", n * 16, body.len()));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            num_complex::Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((m, dt, values))
}

const TRAJECTORY_MAGIC: &str = "cascade-trajectory 1";

/// Writes the full space-time state of one trajectory: a text header ending
/// in an `end` line, then `[t][z][slot]` complex values as little-endian
/// `f64` pairs.
pub fn dump_trajectory(config: &RunConfig, seed: u64, index: u64, path: &Path) -> Result<(), SimError> {
    let (_, p) = config.dimensionless()?;
    let opts = TrajectoryOptions {
        control: config.control,
        keep_snapshots: true,
        ..TrajectoryOptions::default()
    };
    let (steps, failure) = match run_trajectory(&p, &opts, seed, index) {
        Ok(rec) => (rec.snapshots.unwrap_or_default(), None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    if let Some(reason) = failure {
        return Err(SimError::Observable(format!("trajectory {index} failed: {reason}")));
    }
    let mut out = format!(
        "{TRAJECTORY_MAGIC}\nseed {seed}\ntrajectory {index}\ntime_points {}\nspace_points {}\nslots {}\ndt_ns {}\n\
         layout time-space-slot complex-f64-le\nend\n",
        steps.len(),
        p.space_points,
        crate::dynamics::STATE_LEN,
        p.dt * p.time_unit_ns
    )
    .into_bytes();
    for v in steps.iter().flatten().flat_map(|s| s.0.iter()) {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    write_atomic(path, &out)
}

/// One row of a density sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub density_cm3: f64,
    pub optical_depth: f64,
    pub t_f_ns: Option<f64>,
    pub ci_low_ns: Option<f64>,
    pub ci_high_ns: Option<f64>,
    pub t_f_25_ns: Option<f64>,
    pub t_1_ns: Option<f64>,
    pub t_m_ns: Option<f64>,
    pub trajectories: u64,
    pub discarded: u64,
    /// Empty when the row is complete; otherwise why it is not.
    pub flag: String,
}

impl SweepRow {
    pub fn from_outcome(density: f64, optical_depth: f64, result: &Result<SimulateOutcome, SimError>) -> Self {
        let mut row = SweepRow {
            density_cm3: density,
            optical_depth,
            t_f_ns: None,
            ci_low_ns: None,
            ci_high_ns: None,
            t_f_25_ns: None,
            t_1_ns: None,
            t_m_ns: None,
            trajectories: 0,
            discarded: 0,
            flag: String::new(),
        };
        match result {
            Err(e) => row.flag = e.to_string(),
            Ok(out) => {
                row.trajectories = out.accumulator.trajectories;
                row.discarded = out.accumulator.discarded;
                let Some(a) = &out.analysis else {
                    row.flag = "no trajectories".into();
                    return row;
                };
                row.t_m_ns = Some(a.fit.t_m_ns);
                row.t_1_ns = a.fit.t_1_ns;
                let mut flags = Vec::new();
                for w in &a.fit.windows {
                    match (&w.fit, w.end_fraction == FIT_WINDOWS[0]) {
                        (Some(f), true) => {
                            row.t_f_ns = Some(f.t_f_ns);
                            row.ci_low_ns = Some(f.ci_low_ns);
                            row.ci_high_ns = Some(f.ci_high_ns);
                            if f.window_shrunk {
                                flags.push("window shrunk".to_owned());
                            }
                        }
                        (Some(f), false) => row.t_f_25_ns = Some(f.t_f_ns),
                        (None, _) => flags.push(format!(
                            "fit to {}%: {}",
                            w.end_fraction * 100.0,
                            w.error.as_deref().unwrap_or("failed")
                        )),
                    }
                }
                row.flag = flags.join("; ");
            }
        }
        row
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_owned(), |x| format!("{x:.4}"));
    let mut text =
        String::from("# density_cm3\topd\tT_f_ns\tci_low_ns\tci_high_ns\tT_f_25_ns\tT_1_ns\tt_m_ns\tR\tdiscarded\tflag\n");
    for r in rows {
        text += &format!(
            "{:e}\t{:.3}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.density_cm3,
            r.optical_depth,
            opt(r.t_f_ns),
            opt(r.ci_low_ns),
            opt(r.ci_high_ns),
            opt(r.t_f_25_ns),
            opt(r.t_1_ns),
            opt(r.t_m_ns),
            r.trajectories,
            r.discarded,
            if r.flag.is_empty() { "ok" } else { &r.flag }
        );
    }
    text
}

/// Runs each density into `<out_dir>/rho_<density>` and writes `sweep.tsv`
/// and `sweep.json`. A failing density becomes a flagged row.
pub fn sweep(
    base: &SimulateRequest,
    densities: &[f64],
    mut progress: impl FnMut(f64, u64, u64),
) -> Result<Vec<SweepRow>, SimError> {
    fs::create_dir_all(&base.out_dir).map_err(|e| SimError::io(format!("creating {}", base.out_dir.display()), e))?;
    let mut rows = Vec::with_capacity(densities.len());
    for &rho in densities {
        let config = base.config.with_density(rho);
        let req = SimulateRequest {
            config: config.clone(),
            out_dir: base.out_dir.join(format!("rho_{rho:e}")),
            ..base.clone()
        };
        let result = config
            .validate()
            .map_err(SimError::from)
            .and_then(|_| simulate(&req, |done, total| progress(rho, done, total)));
        rows.push(SweepRow::from_outcome(rho, optical_depth_label(&config.physical), &result));
        write_atomic(&base.out_dir.join("sweep.tsv"), sweep_table(&rows).as_bytes())?;
        write_json(&base.out_dir.join("sweep.json"), &rows)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_grid;
    use crate::units::PhysicalConfig;

    fn small_config() -> RunConfig {
        RunConfig {
            physical: PhysicalConfig::rubidium_cascade(1e10),
            grid: crate::units::GridSpec::new(41, 8, 140.0),
            control: StepControl::default(),
        }
    }

    #[test]
    fn worker_count_does_not_change_sums() {
        let (_, p) = small_config().dimensionless().unwrap();
        let opts = TrajectoryOptions::default();
        let one = run_ensemble(&p, &opts, 3, 0..6, 1);
        let three = run_ensemble(&p, &opts, 3, 0..6, 3);
        let four = run_ensemble(&p, &opts, 3, 0..6, 4);
        assert_eq!(one, three);
        assert_eq!(one, four);
        assert_eq!(one.trajectories + one.discarded, 6);
    }

    #[test]
    fn correlation_file_round_trip() {
        let g = Correlation {
            time_points: 3,
            dt_ns: 1.5,
            values: (0..6).map(|k| num_complex::Complex64::new(k as f64, -(k as f64) / 3.0)).collect(),
            peak_index: 1,
            section: Vec::new(),
        };
        let (m, dt, values) = decode_correlation(&encode_correlation(&g)).unwrap();
        assert_eq!((m, dt), (3, 1.5));
        assert_eq!(values, g.values);
        let mut bad = encode_correlation(&g);
        bad.pop();
        assert!(decode_correlation(&bad).is_err());
    }

    #[test]
    fn empty_run_writes_only_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let req = SimulateRequest {
            config: RunConfig {
                grid: reference_grid(),
                ..small_config()
            },
            trajectories: 0,
            seed: 1,
            workers: 2,
            checkpoint_every: 0,
            out_dir: dir.path().to_owned(),
        };
        let out = simulate(&req, |_, _| {}).unwrap();
        assert!(out.analysis.is_none());
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, vec![MANIFEST_FILE.to_owned()]);
        assert_eq!(out.manifest.trajectories_completed, 0);
    }

    #[test]
    fn sweep_row_flags_failures() {
        let err: Result<SimulateOutcome, SimError> = Err(SimError::Observable("x".into()));
        let row = SweepRow::from_outcome(1e10, 2.18, &err);
        assert!(row.t_f_ns.is_none());
        assert!(row.flag.contains('x'));
        assert!(sweep_table(&[row]).lines().nth(1).unwrap().ends_with("observable unavailable: x"));
    }
}
