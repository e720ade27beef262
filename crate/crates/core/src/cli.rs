//! The `cswitch` command line: argument definitions and the four verbs.
//!
//! ```text
//! cswitch solve    --preset paper --out solution.bin
//! cswitch diagnose --bundle solution.bin --out table.csv
//! cswitch simulate --bundle solution.bin --start 0 --start 50 --out sim/
//! cswitch sweep    --preset paper --out sweep/
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bundle::Bundle;
use crate::config::{RunConfig, Scrap};
use crate::diagnostics::{primal_dual_with, simulate_policy, BoundOptions};
use crate::error::{Error, Result};
use crate::experiment::{sweep, Experiment, SweepSpec};
use crate::report::{self, PolicyRuns};
use crate::solver::Evaluation;
use crate::stochastic::simulate_paths;

#[derive(Debug, Parser)]
#[command(
    name = "cswitch",
    version,
    about = "Battery storage and forward trading by convex switching"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute value functions and write a solution bundle.
    Solve(SolveArgs),
    /// Estimate lower and upper bounds of the policy value.
    Diagnose(DiagnoseArgs),
    /// Run the policy forward on simulated scenarios.
    Simulate(SimulateArgs),
    /// Solve and diagnose a list of configurations.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// The reference case study.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScrapArg {
    Sell,
    Zero,
}

impl From<ScrapArg> for Scrap {
    fn from(s: ScrapArg) -> Self {
        match s {
            ScrapArg::Sell => Scrap::Sell,
            ScrapArg::Zero => Scrap::Zero,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Configuration file (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Override the scrap rule.
    #[arg(long, value_enum)]
    pub scrap: Option<ScrapArg>,
}

impl Source {
    fn given(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    fn load(&self) -> Result<RunConfig> {
        let mut c = match (&self.config, self.preset) {
            (Some(path), _) => RunConfig::from_path(path)?,
            (None, Some(Preset::Paper)) => RunConfig::case_study(),
            (None, None) => {
                return Err(Error::InvalidArgument(
                    "no model given: pass --config FILE or --preset paper".into(),
                ))
            }
        };
        if let Some(s) = self.scrap {
            c.scrap = s.into();
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: Source,
    /// Solution bundle to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `level,value` for the initial state.
    #[arg(long)]
    pub values: Option<PathBuf>,
    /// Also write value and policy curves at t = 0 against the price.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Also write transition, excess and shortage tables into this directory.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Use nearest-neighbor evaluation for the policy curves.
    #[arg(long)]
    pub nn_accel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub source: Source,
    /// Solution bundle; without it the model is solved first.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of paths K.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Nested draws per step I.
    #[arg(long)]
    pub subsims: Option<usize>,
    /// Use nearest-neighbor evaluation when the policy picks actions.
    #[arg(long)]
    pub nn_accel: bool,
    /// Drop the martingale increments from the lower bound.
    #[arg(long)]
    pub no_increments: bool,
    /// CSV file to write (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: Source,
    /// Solution bundle; without it the model is solved first.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub scenarios: usize,
    #[arg(long, default_value_t = 12345)]
    pub seed: u64,
    /// Starting battery level in MWh; repeatable (default: the lowest level).
    #[arg(long = "start")]
    pub starts: Vec<f64>,
    #[arg(long)]
    pub nn_accel: bool,
    /// Skip the per-step trace file and write only totals and statistics.
    #[arg(long)]
    pub no_traces: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Sweep specification (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in sweep over mean reversion, capacity and scrap rule.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Override the base scrap rule.
    #[arg(long, value_enum)]
    pub scrap: Option<ScrapArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nn_accel: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn mode(nn: bool) -> Evaluation {
    if nn {
        Evaluation::NearestNeighbor
    } else {
        Evaluation::Exact
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Loads the bundle and reconciles it with an explicitly given model.
fn load_bundle(path: &Path, source: &Source) -> Result<Bundle> {
    let mut bundle = Bundle::load(path)?;
    if source.given() {
        let given = source.load()?;
        let diff = bundle
            .config
            .model_part()
            .differing_sections(&given.model_part());
        if !diff.is_empty() {
            return Err(Error::Bundle(format!(
                "{} was solved for a different model (sections differ: {}); re-run solve",
                path.display(),
                diff.join(", ")
            )));
        }
        bundle.config.diagnostics = given.diagnostics;
    } else if let Some(s) = source.scrap {
        if bundle.config.scrap != Scrap::from(s) {
            return Err(Error::Bundle(format!(
                "{} was solved with scrap = {}",
                path.display(),
                bundle.config.scrap
            )));
        }
    }
    Ok(bundle)
}

/// Bundle from `--bundle`, or a fresh solve of the given model.
fn obtain(bundle: &Option<PathBuf>, source: &Source) -> Result<(Experiment, Bundle)> {
    let bundle = match bundle {
        Some(path) => load_bundle(path, source)?,
        None => {
            let config = source.load()?;
            let exp = Experiment::new(config.clone())?;
            let result = exp.solve()?;
            return Ok((exp, Bundle::new(config, result)));
        }
    };
    let exp = Experiment::new(bundle.config.clone())?;
    exp.check_result(&bundle.result)?;
    Ok((exp, bundle))
}

pub fn cmd_solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = args.source.load()?;
    let exp = Experiment::new(config.clone())?;
    let result = exp.solve()?;
    let values = exp.initial_values(&result)?;
    let levels = exp.model().lattice().levels();
    let bundle = Bundle::new(config, result);
    let mut w = create(&args.out)?;
    bundle.write_to(&mut w)?;
    w.flush()?;
    report::write_initial_values(&levels, &values, &mut *stdout)?;
    if let Some(path) = &args.values {
        let mut w = create(path)?;
        report::write_initial_values(&levels, &values, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.curves {
        let mut w = create(path)?;
        report::write_policy_curves(&exp, &bundle.result, 0, mode(args.nn_accel), &mut w)?;
        w.flush()?;
    }
    if let Some(dir) = &args.tables {
        create_dir(dir)?;
        let mut w = create(&dir.join("transitions.csv"))?;
        report::write_transitions(exp.model(), &mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("excess_shortage.csv"))?;
        report::write_excess_shortage(exp.model(), &mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_diagnose(args: &DiagnoseArgs, stdout: &mut dyn Write) -> Result<()> {
    let (_, mut bundle) = obtain(&args.bundle, &args.source)?;
    let d = &mut bundle.config.diagnostics;
    if let Some(seed) = args.seed {
        d.seed = seed;
    }
    if let Some(k) = args.paths {
        d.paths = k;
    }
    if let Some(i) = args.subsims {
        d.subsims = i;
    }
    let exp = Experiment::new(bundle.config.clone())?;
    let options = BoundOptions {
        policy_eval: mode(args.nn_accel),
        increments: !args.no_increments,
    };
    let paths = exp.paths()?;
    let report = primal_dual_with(&bundle.result, &paths, exp.model(), exp.price(), options)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            report::write_bounds(&report, &mut w)?;
            w.flush()?;
        }
        None => report::write_bounds(&report, &mut *stdout)?,
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, _stdout: &mut dyn Write) -> Result<()> {
    let (exp, bundle) = obtain(&args.bundle, &args.source)?;
    if args.scenarios == 0 {
        return Err(Error::InvalidArgument(
            "--scenarios must be at least 1".into(),
        ));
    }
    let config = exp.config();
    let paths = simulate_paths(
        exp.ar1(),
        config.z0,
        config.horizon,
        args.scenarios,
        1,
        args.seed,
    )?;
    let starts = if args.starts.is_empty() {
        vec![exp.model().lattice().p_min()]
    } else {
        args.starts.clone()
    };
    let runs = starts
        .iter()
        .map(|&start| {
            let p = exp.level_index(start)?;
            let traces = simulate_policy(
                &bundle.result,
                &paths,
                exp.model(),
                exp.price(),
                p,
                args.seed,
                mode(args.nn_accel),
            )?;
            Ok(PolicyRuns { start, traces })
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&args.out)?;
    if !args.no_traces {
        let mut w = create(&args.out.join("traces.csv"))?;
        report::write_traces(exp.model(), &paths, &runs, &mut w)?;
        w.flush()?;
    }
    let mut w = create(&args.out.join("totals.csv"))?;
    report::write_totals(&runs, &mut w)?;
    w.flush()?;
    let mut w = create(&args.out.join("stats.csv"))?;
    report::write_trace_stats(exp.model(), &runs, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut spec = match (&args.config, args.preset) {
        (Some(path), _) => SweepSpec::from_path(path)?,
        (None, Some(Preset::Paper)) => SweepSpec::case_study(),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "no sweep given: pass --config FILE or --preset paper".into(),
            ))
        }
    };
    if let Some(s) = args.scrap {
        spec.base.scrap = s.into();
    }
    if let Some(seed) = args.seed {
        spec.base.diagnostics.seed = seed;
    }
    let options = BoundOptions {
        policy_eval: mode(args.nn_accel),
        increments: true,
    };
    let rows = sweep(&spec.cases(), spec.start_level, options)?;
    create_dir(&args.out)?;
    let mut w = create(&args.out.join("sweep.csv"))?;
    report::write_sweep(&rows, &mut w)?;
    w.flush()?;
    let mut w = create(&args.out.join("capacity_curve.csv"))?;
    report::write_capacity_curve(&rows, &mut w)?;
    w.flush()?;
    report::write_sweep(&rows, &mut *stdout)?;
    Ok(())
}

/// Runs a parsed command line; tabular results also go to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let go = |out: &mut dyn Write| match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Diagnose(a) => cmd_diagnose(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
    };
    match cli.threads {
        Some(0) => Err(Error::InvalidArgument(
            "--threads must be at least 1".into(),
        )),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            let mut buf = Vec::new();
            pool.install(|| go(&mut buf))?;
            stdout.write_all(&buf)?;
            Ok(())
        }
        None => go(stdout),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, T>(args: I, stdout: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let text = e.to_string();
        Error::InvalidArgument(
            text.lines()
                .next()
                .unwrap_or("bad arguments")
                .trim_start_matches("error: ")
                .to_string(),
        )
    })?;
    run(&cli, stdout)
}
