use std::path::PathBuf;
use std::process::ExitCode;

use cascade_core::checks::{self, Fault};
use cascade_core::config::RunConfig;
use cascade_core::runner::{self, SimulateRequest, SimulateOutcome};
use cascade_core::SimError;
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXAMPLE_CONFIG: &str = include_str!("../../../configs/rb85_operating_point.toml");

#[derive(Parser)]
#[command(name = "cascade-sim", version, about = "Stochastic cascade superfluorescence simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble of trajectories and write its artifacts.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Also write the full space-time state of this trajectory.
        #[arg(long, value_name = "INDEX")]
        dump_trajectory: Option<u64>,
    },
    /// Run one ensemble per density and write a combined T_f table.
    Sweep {
        config: PathBuf,
        /// Comma-separated densities in cm⁻³.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        densities: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the built-in invariant suites.
    Check {
        /// Print a JSON report instead of text.
        #[arg(long)]
        json: bool,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<InjectedFault>,
    },
    /// Print the annotated operating-point configuration.
    ExampleConfig,
}

#[derive(Args)]
struct RunArgs {
    /// Number of trajectories R.
    #[arg(short = 'r', long, default_value_t = 1000)]
    trajectories: u64,
    #[arg(short, long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(short, long)]
    workers: Option<usize>,
    #[arg(short, long, default_value = "run")]
    out: PathBuf,
    /// Trajectories between checkpoints (0 disables them).
    #[arg(short = 'k', long, default_value_t = 1000)]
    checkpoint_every: u64,
    /// Suppress progress output.
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum InjectedFault {
    Diffusion,
}

impl RunArgs {
    fn request(&self, config: RunConfig) -> SimulateRequest {
        let workers = self
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        SimulateRequest {
            config,
            trajectories: self.trajectories,
            seed: self.seed,
            workers,
            checkpoint_every: self.checkpoint_every,
            out_dir: self.out.clone(),
        }
    }
}

fn exit_code(err: &SimError) -> u8 {
    match err {
        SimError::Config(_) => 2,
        SimError::Io { .. } | SimError::Checkpoint { .. } => 3,
        SimError::TooManyDiscarded { .. } => 4,
        SimError::Observable(_) => 1,
    }
}

fn fail(err: SimError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(&err))
}

fn summarize(out: &SimulateOutcome) {
    let m = &out.manifest;
    println!(
        "R = {} completed, {} discarded, {:.1} s",
        m.trajectories_completed, m.trajectories_discarded, m.wall_time_s
    );
    if let Some(a) = &out.analysis {
        println!("t_m = {:.1} ns", a.fit.t_m_ns);
        for w in &a.fit.windows {
            match (&w.fit, &w.error) {
                (Some(f), _) => println!(
                    "T_f (peak to {:.0}%) = {:.2} ns, 95% CI [{:.2}, {:.2}]{}",
                    w.end_fraction * 100.0,
                    f.t_f_ns,
                    f.ci_low_ns,
                    f.ci_high_ns,
                    if f.window_shrunk { " (window shrunk)" } else { "" }
                ),
                (None, e) => println!(
                    "T_f (peak to {:.0}%) unavailable: {}",
                    w.end_fraction * 100.0,
                    e.as_deref().unwrap_or("")
                ),
            }
        }
        if let Some(t1) = a.fit.t_1_ns {
            println!("T_1 = {t1:.2} ns");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            run,
            dump_trajectory,
        } => {
            let cfg = match RunConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let quiet = run.quiet;
            let req = run.request(cfg);
            if let Some(index) = dump_trajectory {
                let path = req.out_dir.join(format!("trajectory_{index}.bin"));
                let dumped = std::fs::create_dir_all(&req.out_dir)
                    .map_err(|e| SimError::io(format!("creating {}", req.out_dir.display()), e))
                    .and_then(|_| runner::dump_trajectory(&req.config, req.seed, index, &path));
                if let Err(e) = dumped {
                    return fail(e);
                }
            }
            let result = runner::simulate(&req, |done, total| {
                if !quiet {
                    eprintln!("{done}/{total} trajectories");
                }
            });
            match result {
                Ok(out) => {
                    summarize(&out);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { config, densities, run } => {
            let cfg = match RunConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let quiet = run.quiet;
            let req = run.request(cfg);
            match runner::sweep(&req, &densities, |rho, done, total| {
                if !quiet {
                    eprintln!("ρ = {rho:e}: {done}/{total} trajectories");
                }
            }) {
                Ok(rows) => {
                    print!("{}", runner::sweep_table(&rows));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Check { json, inject_fault } => {
            let fault = match inject_fault {
                Some(InjectedFault::Diffusion) => Fault::Diffusion,
                None => Fault::None,
            };
            let report = checks::run_all(fault);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                for s in &report.suites {
                    println!(
                        "{:<18} {}  {} ({:.1} s)",
                        s.name,
                        if s.passed { "PASS" } else { "FAIL" },
                        s.detail,
                        s.elapsed_s
                    );
                }
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::ExampleConfig => {
            print!("{EXAMPLE_CONFIG}");
            ExitCode::SUCCESS
        }
    }
}
