//! Command-line driver.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{load_config, parse_config, ConfigOverrides, RunConfig, CONFIG_KEYS};
use crate::coupled::{run_simulation, StopReason};
use crate::error::{Error, Result};
use crate::model::{GatingBounds, PotentialGrid};
use crate::plot::emit_plots;
use crate::presets::PRESET_NAMES;
use crate::report::{self, Summary, SUMMARY_FILE};
use crate::sliding;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_MAX_ITERATIONS: i32 = 2;
pub const EXIT_TIME_BUDGET: i32 = 3;
pub const EXIT_USAGE: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

pub fn stop_exit_code(reason: StopReason) -> i32 {
    match reason {
        StopReason::Converged => EXIT_CONVERGED,
        StopReason::MaxIterations => EXIT_MAX_ITERATIONS,
        StopReason::TimeBudget => EXIT_TIME_BUDGET,
    }
}

pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::Config { .. } | Error::UnknownPreset(_) | Error::ConditionViolated { .. } => {
            EXIT_USAGE
        }
        Error::StepUnderflow { .. }
        | Error::NewtonFailure { .. }
        | Error::InnerSolver { .. }
        | Error::NonFinite { .. } => EXIT_NUMERIC,
        Error::Io { .. } | Error::Json(_) | Error::FieldFormat(_) => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "hh-sliding", version, about = "Relay feedback control of the Hodgkin-Huxley cable equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write fields, summary and plots.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        flags: Overrides,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the sufficient sliding bound of a scenario as JSON.
    Analyze {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        flags: Overrides,
        /// Bound the gating variables by a scan of their steady states
        /// instead of by 1.
        #[arg(long)]
        grid_bounds: bool,
    },
    /// Run one scenario per value of a config key, in parallel.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        flags: Overrides,
        /// Config key to vary, e.g. `rho`.
        #[arg(long)]
        param: String,
        /// Comma-separated values; the flag may be repeated.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<String>,
        /// Parent directory; each run writes to `<out>/<param>=<value>`.
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in scenarios.
    Presets,
}

#[derive(Debug, Args)]
pub struct Source {
    /// Built-in scenario.
    #[arg(long)]
    pub preset: Option<String>,
    /// Plain-text `key = value` file applied over the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Re-run the configuration recorded in a previous summary.json.
    #[arg(long, conflicts_with_all = ["preset", "config"])]
    pub from_summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Overrides {
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "maxX")]
    pub max_x: Option<usize>,
    #[arg(long = "maxT")]
    pub max_t: Option<usize>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub time_budget: Option<f64>,
    #[arg(long)]
    pub no_plots: bool,
    #[arg(long)]
    pub no_csv: bool,
}

impl Overrides {
    fn to_config(&self) -> ConfigOverrides {
        ConfigOverrides {
            rho: self.rho,
            epsilon: self.epsilon,
            max_x: self.max_x,
            max_t: self.max_t,
            horizon: self.horizon,
            threshold: self.threshold,
            max_iter: self.max_iter,
            time_budget: self.time_budget,
            csv: self.no_csv.then_some(false),
            plots: self.no_plots.then_some(false),
            ..ConfigOverrides::default()
        }
    }
}

/// Builds the run configuration. Precedence, lowest first: preset, config
/// file, command-line flags. A summary file replaces the first two.
pub fn resolve(source: &Source, flags: &Overrides, extra: Option<ConfigOverrides>) -> Result<RunConfig> {
    let cfg = if let Some(path) = &source.from_summary {
        let base = report::read_summary(path)?.config;
        let mut o = flags.to_config();
        if let Some(e) = extra {
            o.merge(e);
        }
        base.apply(o)?
    } else {
        let mut o = match &source.config {
            Some(path) => load_config(path)?,
            None => ConfigOverrides::default(),
        };
        if let Some(name) = &source.preset {
            o.preset = Some(name.clone());
        }
        if let Some(e) = extra {
            o.merge(e);
        }
        o.merge(flags.to_config());
        RunConfig::resolve(o)?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Outcome of one completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        stop_exit_code(self.summary.stop_reason)
    }
}

/// Runs the simulation and writes all artifacts into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let result = run_simulation(&cfg.scenario, &cfg.settings)?;

    let mut files = Vec::new();
    if cfg.csv {
        files.extend(report::write_fields(&result, out)?);
    }
    if cfg.plots {
        files.extend(emit_plots(&result, &cfg.scenario.target, cfg.x_fixed_index(), out)?);
    }
    let mut summary = Summary::new(cfg, &result)?;
    let summary_path = out.join(SUMMARY_FILE);
    files.push(summary_path.clone());
    summary.files = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    report::write_text(&summary_path, &summary.to_json()?)?;
    Ok(RunOutcome { summary, files })
}

fn report_error(err: &Error) -> i32 {
    eprintln!("error: {err}");
    error_exit_code(err)
}

fn print_outcome(name: &str, out: &Path, outcome: &RunOutcome) {
    let s = &outcome.summary;
    let onset = s
        .sliding
        .empirical_onset
        .map_or_else(|| "none".to_owned(), |t| format!("{t}"));
    println!(
        "{name}: {:?} after {} iterations, residual {:.3e}, empirical onset {onset}, A = {:.6e} -> {}",
        s.stop_reason,
        s.iterations,
        s.residual_trace.last().copied().unwrap_or(f64::NAN),
        s.sliding.theoretical.a,
        out.display()
    );
}

fn simulate(source: &Source, flags: &Overrides, out: &Path) -> i32 {
    let cfg = match resolve(source, flags, None) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    match run(&cfg, out) {
        Ok(outcome) => {
            print_outcome(&cfg.name, out, &outcome);
            outcome.exit_code()
        }
        Err(e) => report_error(&e),
    }
}

fn analyze(source: &Source, flags: &Overrides, grid_bounds: bool) -> i32 {
    let result = resolve(source, flags, None).and_then(|cfg| {
        let bounds = if grid_bounds {
            GatingBounds::from_grid(&PotentialGrid::default())?
        } else {
            GatingBounds::UNIT
        };
        let bound = sliding::analyze(&cfg.scenario, &bounds)?;
        Ok(serde_json::to_string_pretty(&bound)?)
    });
    match result {
        Ok(json) => {
            println!("{json}");
            EXIT_CONVERGED
        }
        Err(e) => report_error(&e),
    }
}

fn sweep(source: &Source, flags: &Overrides, param: &str, values: &[String], out: &Path) -> i32 {
    if !CONFIG_KEYS.contains(&param) || param == "preset" {
        eprintln!("error: `{param}` cannot be swept");
        return EXIT_USAGE;
    }
    let mut configs = Vec::new();
    for value in values {
        let cfg = parse_config(&format!("{param} = {value}"))
            .and_then(|o| resolve(source, flags, Some(o)));
        match cfg {
            Ok(c) => configs.push((value.clone(), c)),
            Err(e) => return report_error(&e),
        }
    }
    let outcomes: Vec<(String, PathBuf, Result<RunOutcome>)> = configs
        .into_par_iter()
        .map(|(value, cfg)| {
            let dir = out.join(format!("{param}={value}"));
            let outcome = run(&cfg, &dir);
            (value, dir, outcome)
        })
        .collect();
    let mut code = EXIT_CONVERGED;
    for (value, dir, outcome) in &outcomes {
        let c = match outcome {
            Ok(o) => {
                print_outcome(&format!("{param}={value}"), dir, o);
                o.exit_code()
            }
            Err(e) => {
                eprintln!("{param}={value}: error: {e}");
                error_exit_code(e)
            }
        };
        if code == EXIT_CONVERGED {
            code = c;
        }
    }
    code
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_CONVERGED };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Simulate { source, flags, out } => simulate(source, flags, out),
        Command::Analyze {
            source,
            flags,
            grid_bounds,
        } => analyze(source, flags, *grid_bounds),
        Command::Sweep {
            source,
            flags,
            param,
            values,
            out,
        } => sweep(source, flags, param, values, out),
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            EXIT_CONVERGED
        }
    }
}
