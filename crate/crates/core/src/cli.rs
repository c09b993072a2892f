//! Command-line front end and output writers.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::Variant;
use crate::optim::LrSchedule;
use crate::problems::ProblemId;
use crate::trainer::{train_with, LossRecord, RunMetrics, SolutionRow, TrainedRun, TrainingConfig, DEFAULT_LOG_EVERY};

/// Environment variable consulted for the seed when `--seed` is absent.
pub const SEED_ENV: &str = "SPLAYER_SEED";

/// Version string of the build, `git describe` output when available.
pub const VERSION: &str = match option_env!("SPLAYER_GIT_DESCRIBE") {
    Some(v) => v,
    None => concat!("v", env!("CARGO_PKG_VERSION")),
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_IO: i32 = 3;

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {s}"))
    }
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0 {
        Ok(v)
    } else {
        Err("expected a positive integer".to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "splayer", version = VERSION, about = "Composite physics-informed networks for boundary-layer problems")]
struct Args {
    /// cd1d, rd1d, cd-coupled, rd-coupled, cd2d-ex2 or cd2d-ex3.
    #[arg(long)]
    problem: ProblemId,
    /// pinn, pipinn or cpinn.
    #[arg(long, default_value = "cpinn")]
    model: Variant,
    #[arg(long, value_parser = positive_f64)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = positive_f64)]
    mu: Option<f64>,
    #[arg(long, value_parser = positive_usize)]
    epochs: Option<usize>,
    #[arg(long, value_parser = positive_f64)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Interior collocation points.
    #[arg(long, value_parser = positive_usize)]
    points: Option<usize>,
    /// Boundary points per face (2D problems).
    #[arg(long, value_parser = positive_usize)]
    boundary_points: Option<usize>,
    #[arg(long, value_parser = positive_usize)]
    log_every: Option<usize>,
    #[arg(long, default_value = "splayer-out")]
    out_dir: PathBuf,
    /// Also train this variant and write a side-by-side loss table.
    #[arg(long)]
    compare: Option<Variant>,
    #[arg(long)]
    resample_every_epoch: bool,
    /// Multiply the learning rate by this factor every --lr-decay-every epochs.
    #[arg(long, value_parser = positive_f64)]
    lr_decay: Option<f64>,
    #[arg(long, value_parser = positive_usize, requires = "lr_decay")]
    lr_decay_every: Option<usize>,
    /// Write solution.csv on the evaluation grid.
    #[arg(long)]
    emit_solution_grid: bool,
}

/// Everything one invocation does.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub training: TrainingConfig,
    /// The second variant of a comparison run, under the same overrides.
    pub compare: Option<TrainingConfig>,
    pub out_dir: PathBuf,
    pub emit_solution_grid: bool,
}

impl Args {
    fn training(&self, variant: Variant, seed: u64) -> Result<TrainingConfig> {
        let mut c = TrainingConfig::new(self.problem, variant);
        if let Some(e) = self.epsilon {
            c.epsilon = e;
        }
        if self.mu.is_some() {
            c.mu = self.mu;
        }
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        c.log_every = self.log_every.unwrap_or(DEFAULT_LOG_EVERY.min(c.epochs));
        if let Some(lr) = self.lr {
            c.lr = lr;
        }
        if let Some(factor) = self.lr_decay {
            let every = self.lr_decay_every.unwrap_or(1000);
            if factor > 1.0 {
                return Err(Error::config("--lr-decay must not exceed 1"));
            }
            c.schedule = LrSchedule::StepDecay { factor, every };
        }
        c.seed = seed;
        if let Some(n) = self.points {
            c.n_collocation = n;
        }
        if let Some(n) = self.boundary_points {
            c.n_boundary_per_face = n;
        }
        c.resample_every_epoch = self.resample_every_epoch;
        c.validate()?;
        Ok(c)
    }
}

/// Parses a full argument vector (program name first). `env_seed` stands in
/// for the value of [`SEED_ENV`].
pub fn parse_args<I, T>(argv: I, env_seed: Option<&str>) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| Error::config(e.to_string()))?;
    config_from_args(args, env_seed)
}

fn config_from_args(args: Args, env_seed: Option<&str>) -> Result<RunConfig> {
    let seed = match (args.seed, env_seed) {
        (Some(s), _) => s,
        (None, Some(s)) => {
            s.trim().parse().map_err(|_| Error::config(format!("{SEED_ENV} must be an unsigned integer, got `{s}`")))?
        }
        (None, None) => 0,
    };
    let training = args.training(args.model, seed)?;
    let compare = match args.compare {
        Some(v) if v == args.model => {
            return Err(Error::config("--compare needs a variant different from --model"));
        }
        Some(v) => Some(args.training(v, seed)?),
        None => None,
    };
    Ok(RunConfig { training, compare, out_dir: args.out_dir, emit_solution_grid: args.emit_solution_grid })
}

/// Decimal rendering with 17 significant digits, enough to round-trip.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn write_loss_history(path: &Path, records: &[LossRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "total", "residual", "boundary", "lr"])?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            fmt_real(r.total),
            fmt_real(r.residual_term),
            fmt_real(r.boundary_term),
            fmt_real(r.lr_used),
        ])?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_loss_history(path: &Path) -> Result<Vec<LossRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let bad = |what: &str| Error::config(format!("{}: malformed {what}", path.display()));
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let real = |i: usize| row.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad("number"));
        out.push(LossRecord {
            epoch: row.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("epoch"))?,
            total: real(1)?,
            residual_term: real(2)?,
            boundary_term: real(3)?,
            lr_used: real(4)?,
        });
    }
    Ok(out)
}

pub fn write_solution(path: &Path, dim: usize, rows: &[SolutionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = ["x", "y"][..dim.min(2)].to_vec();
    header.extend(["component", "predicted", "exact", "abs_error"]);
    w.write_record(&header)?;
    for row in rows {
        let mut rec: Vec<String> = row.coords.iter().map(|&c| fmt_real(c)).collect();
        rec.push(row.component.to_string());
        rec.extend([fmt_real(row.predicted), fmt_real(row.exact), fmt_real(row.abs_error)]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Losses of several runs side by side, one row per epoch logged by all.
pub fn write_comparison(path: &Path, runs: &[(Variant, &[LossRecord])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["epoch".to_string()];
    header.extend(runs.iter().map(|(v, _)| v.name().to_string()));
    w.write_record(&header)?;
    if let Some((_, first)) = runs.first() {
        for rec in first.iter() {
            let row: Option<Vec<String>> = runs
                .iter()
                .map(|(_, rs)| rs.iter().find(|r| r.epoch == rec.epoch).map(|r| fmt_real(r.total)))
                .collect();
            if let Some(cols) = row {
                let mut line = vec![rec.epoch.to_string()];
                line.extend(cols);
                w.write_record(&line)?;
            }
        }
    }
    w.flush().map_err(|e| io_error(path, e))
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'a str,
    config: &'a TrainingConfig,
    out_dir: &'a Path,
    emit_solution_grid: bool,
    final_loss: f64,
    l2_rel_error: &'a [f64],
    max_abs_error: &'a [f64],
    wall_time_seconds: f64,
    logged_epochs: usize,
}

/// Writes the loss history, the summary and optionally the solution table
/// of one run into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, config: &TrainingConfig, run: &TrainedRun, emit_solution_grid: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_loss_history(&dir.join("loss_history.csv"), &run.records)?;
    if emit_solution_grid {
        write_solution(&dir.join("solution.csv"), config.problem.dim(), &run.evaluation.table)?;
    }
    let metrics: &RunMetrics = &run.metrics;
    let summary = Summary {
        version: VERSION,
        config,
        out_dir: dir,
        emit_solution_grid,
        final_loss: metrics.final_loss,
        l2_rel_error: &metrics.l2_rel_error,
        max_abs_error: &metrics.max_abs_error,
        wall_time_seconds: metrics.wall_time_seconds,
        logged_epochs: run.records.len(),
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
}

fn train_logged(config: &TrainingConfig) -> Result<TrainedRun> {
    eprintln!("training {} / {} for {} epochs (seed {})", config.problem, config.variant, config.epochs, config.seed);
    train_with(config, |r| eprintln!("  epoch {:>6}  loss {:.6e}", r.epoch, r.total))
}

/// Runs the configured experiment and writes its outputs. A comparison run
/// puts each variant in its own subdirectory next to `comparison.csv`.
pub fn execute(config: &RunConfig) -> Result<Vec<TrainedRun>> {
    fs::create_dir_all(&config.out_dir).map_err(|e| io_error(&config.out_dir, e))?;
    match &config.compare {
        None => {
            let run = train_logged(&config.training)?;
            write_outputs(&config.out_dir, &config.training, &run, config.emit_solution_grid)?;
            Ok(vec![run])
        }
        Some(second) => {
            let mut runs = Vec::with_capacity(2);
            for c in [&config.training, second] {
                let run = train_logged(c)?;
                write_outputs(&config.out_dir.join(c.variant.name()), c, &run, config.emit_solution_grid)?;
                runs.push(run);
            }
            write_comparison(
                &config.out_dir.join("comparison.csv"),
                &[(config.training.variant, &runs[0].records), (second.variant, &runs[1].records)],
            )?;
            Ok(runs)
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Checkpoint(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
    }
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = config_from_args(args, env_seed.as_deref()).and_then(|c| execute(&c));
    match result {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
