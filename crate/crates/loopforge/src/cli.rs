//! `loopforge` subcommands.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use loopforge_core::gradcheck::{run_suite, GradCheckConfig};
use loopforge_core::harness::{
    compare_arms, compute_metrics, presets, replicate_seeds, run_episode, Comparison,
    ControllerVariant, ScenarioConfig,
};
use serde::Serialize;

use crate::config::{load_config, ConfigError, ScenarioFile, SweepGrid};
use crate::export::{
    kind_name, read_trace_csv, variant_name, write_json, write_metrics_json, write_report_json,
    write_series, write_summary_csv, write_trace_csv, ExportError, MetricsDocument, SeriesSource,
};
use crate::formats::{fmt_num, write_network};

const SCHEMA_HELP: &str = "\
Scenario files are JSON (schema_version 1). Only `schema_version` and the
`scenario` section are required; every other section falls back to its
defaults.

  schema_version   1
  scenario
    kind           tracking | fault-recovery | vibration
    duration       s, a whole number of control periods
    cycles         task repetitions; control ticks must split evenly
    setpoint       {type: constant, position}
                   {type: steps, levels: [..]}      cycle i -> levels[i % n]
                   {type: random-steps, min, max}   one draw per cycle
                   {type: sine, center, amplitude, period}
    disturbance    {cycle_bias, sine_amplitude, sine_frequency, noise_std}
    variant        fixed-baseline | adaptive
    seed           master seed (u64)
    initial_position, sensor_noise {position, velocity, torque,
    temperature, vibration}, warmup_frames (200), warmup_excursion (0.1),
    success {band 0.02, tail_fraction 0.2, sustain 1.0}
  plant            {inertia 1, friction 0.1, dt 0.001,
                    thermal {ambient, heating, cooling}}
  network          {hidden [16], gain_features true}
  training         {gamma 0.9, alpha 0.01, epochs 5, train_every 1,
                    replay_cycles 20, exploration {epsilon 0.1, decay 0.95},
                    reward {error 1, energy 0.1, fault 0.5}}
  controller       {gains {k_p 20, k_d 3}, tau_max 10, decision_steps 10,
                    actions {entries [{name, kp_scale, kd_scale,
                    setpoint_offset, reset}], limits {k_p [5,200],
                    k_d [0.5,30]}}}
  faults           [{onset, duration, kind, magnitude}]
                   kind: bias-torque | sensor-offset | overheat-drift
  sweep            {gamma: [..], alpha: [..], k_p: [..], k_d: [..]}
                   used by `sweep` only

Exit status: 0 success, 1 runtime failure, 2 bad invocation or config.";

#[derive(Debug, Parser)]
#[command(
    name = "loopforge",
    version,
    about = "Adaptive PD control experiments on a simulated joint",
    after_long_help = SCHEMA_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and export its trace, metrics and figure series.
    Run(RunArgs),
    /// Run both controller variants on paired seeds and export the report.
    Compare(CompareArgs),
    /// Compare at every point of the config's sweep grid.
    Sweep(CompareArgs),
    /// Check backpropagated gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Rebuild metrics and figure series from a stored trace.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = presets::DEFAULT_REPLICATES, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub replicates: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Also write gradcheck.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Directory holding the run; outputs are written here too.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace to read (default: <out>/trace.csv).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Scenario for the trace (default: <out>/config.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        Self::Runtime(format!("export failed: {e}"))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("loopforge: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let say = |s: String| {
        if !cli.quiet {
            println!("{s}");
        }
    };
    match &cli.command {
        Command::Run(a) => run(a, say),
        Command::Compare(a) => compare(a, say),
        Command::Sweep(a) => sweep(a, say),
        Command::Gradcheck(a) => gradcheck(a, say),
        Command::Export(a) => export(a, say),
    }
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn load(path: &Path, seed: Option<u64>) -> Result<(ScenarioConfig, SweepGrid), CliError> {
    let loaded = load_config(path)?;
    let mut config = loaded.config;
    if let Some(s) = seed {
        config.scenario.seed = s;
    }
    Ok((config, loaded.sweep))
}

fn write_config(dir: &Path, config: &ScenarioConfig, sweep: SweepGrid) -> Result<(), CliError> {
    write_json(&dir.join("config.json"), &ScenarioFile::new(config, sweep))?;
    Ok(())
}

fn run(a: &RunArgs, say: impl Fn(String)) -> Result<(), CliError> {
    let (config, _) = load(&a.config, a.seed)?;
    make_dir(&a.out)?;
    write_config(&a.out, &config, SweepGrid::default())?;
    let seed = config.scenario.seed;
    let arm = variant_name(config.scenario.variant);
    match run_episode(&config) {
        Ok(out) => {
            write_trace_csv(&a.out.join("trace.csv"), &out.trace)?;
            let doc = MetricsDocument {
                seed,
                scenario: config.scenario.kind,
                variant: config.scenario.variant,
                metrics: out.metrics,
            };
            write_metrics_json(&a.out.join("metrics.json"), &doc)?;
            write_series(
                &a.out,
                &[SeriesSource {
                    arm,
                    seed,
                    metrics: &doc.metrics,
                    trace: &out.trace,
                }],
            )?;
            if let Some(params) = &out.params {
                write_network(&a.out.join("network.json"), params, Some(seed))?;
            }
            let m = &doc.metrics;
            say(format!(
                "{} {arm} seed {seed}: success {} variance {} energy/task {} J{}",
                kind_name(config.scenario.kind),
                fmt_num(m.success_rate),
                fmt_num(m.positional_error_variance),
                fmt_num(m.energy_per_task),
                m.mean_fault_response
                    .map(|r| format!(" fault response {} s", fmt_num(r)))
                    .unwrap_or_default()
            ));
            Ok(())
        }
        Err(f) => {
            write_trace_csv(&a.out.join("trace.csv"), &f.partial)?;
            Err(CliError::Runtime(format!("seed {seed}: {f}")))
        }
    }
}

fn comparison(config: &ScenarioConfig, replicates: usize, keep_traces: bool) -> Comparison {
    let master = config.scenario.seed;
    let seeds = replicate_seeds(master, replicates);
    compare_arms(
        &config.with_variant(ControllerVariant::FixedBaseline),
        &config.with_variant(ControllerVariant::Adaptive),
        master,
        &seeds,
        keep_traces,
    )
}

fn write_comparison(dir: &Path, cmp: &Comparison, with_series: bool) -> Result<(), CliError> {
    write_report_json(&dir.join("report.json"), &cmp.report)?;
    write_summary_csv(&dir.join("summary.csv"), &cmp.report)?;
    if with_series {
        let sources: Vec<SeriesSource<'_>> = cmp
            .traces
            .iter()
            .filter_map(|(seed, arm, trace)| {
                let r = cmp.report.replicates.iter().find(|r| r.seed == *seed)?;
                let outcome = if *arm == "adaptive" { &r.adaptive } else { &r.baseline };
                Some(SeriesSource {
                    arm,
                    seed: *seed,
                    metrics: outcome.metrics.as_ref()?,
                    trace,
                })
            })
            .collect();
        write_series(dir, &sources)?;
    }
    Ok(())
}

fn summarize(cmp: &Comparison) -> String {
    let mut lines = vec![format!(
        "{:<26} {:>14} {:>14} {:>12}",
        "metric", "baseline", "adaptive", "ratio"
    )];
    for m in &cmp.report.summary {
        let cell = |x: Option<f64>| x.map(fmt_num).unwrap_or_else(|| "-".into());
        lines.push(format!(
            "{:<26} {:>14} {:>14} {:>12}",
            m.metric,
            cell(m.baseline.map(|s| s.mean)),
            cell(m.adaptive.map(|s| s.mean)),
            cell(m.ratio)
        ));
    }
    lines.join("\n")
}

fn failures(cmp: &Comparison) -> Result<(), CliError> {
    if cmp.report.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} episode(s) failed: {}",
            cmp.report.failures.len(),
            cmp.report.failures.join("; ")
        )))
    }
}

fn compare(a: &CompareArgs, say: impl Fn(String)) -> Result<(), CliError> {
    let (config, _) = load(&a.config, a.seed)?;
    make_dir(&a.out)?;
    write_config(&a.out, &config, SweepGrid::default())?;
    let cmp = comparison(&config, a.replicates, true);
    write_comparison(&a.out, &cmp, true)?;
    say(format!(
        "{} master seed {}, {} replicates\n{}",
        kind_name(config.scenario.kind),
        config.scenario.seed,
        a.replicates,
        summarize(&cmp)
    ));
    failures(&cmp)
}

#[derive(Serialize)]
struct SweepIndexRow {
    point: String,
    master_seed: u64,
    gamma: f64,
    alpha: f64,
    k_p: f64,
    k_d: f64,
}

fn sweep(a: &CompareArgs, say: impl Fn(String)) -> Result<(), CliError> {
    let (config, grid) = load(&a.config, a.seed)?;
    if grid.is_empty() {
        return Err(ConfigError::Invalid {
            path: a.config.clone(),
            line: 1,
            message: "sweep: the config has no sweep grid".into(),
        }
        .into());
    }
    make_dir(&a.out)?;
    write_config(&a.out, &config, grid.clone())?;
    let index_path = a.out.join("sweep.csv");
    let mut index = csv::Writer::from_path(&index_path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", index_path.display())))?;
    let mut failed = Vec::new();
    for point in grid.points(&config) {
        let dir = a.out.join(&point.label);
        make_dir(&dir)?;
        write_config(&dir, &point.config, SweepGrid::default())?;
        let cmp = comparison(&point.config, a.replicates, false);
        write_comparison(&dir, &cmp, false)?;
        let c = &point.config;
        let row = SweepIndexRow {
            point: point.label.clone(),
            master_seed: c.scenario.seed,
            gamma: c.training.gamma,
            alpha: c.training.alpha,
            k_p: c.controller.gains.k_p,
            k_d: c.controller.gains.k_d,
        };
        index
            .write_record([
                row.point,
                row.master_seed.to_string(),
                fmt_num(row.gamma),
                fmt_num(row.alpha),
                fmt_num(row.k_p),
                fmt_num(row.k_d),
            ])
            .map_err(ExportError::from)?;
        say(format!("{}\n{}", point.label, summarize(&cmp)));
        if let Err(e) = failures(&cmp) {
            failed.push(format!("{}: {e}", point.label));
        }
    }
    index
        .flush()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", index_path.display())))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(failed.join("; ")))
    }
}

#[derive(Serialize)]
struct GradcheckDocument<'a> {
    seed: u64,
    config: &'a GradCheckConfig,
    passed: bool,
    networks: usize,
    entries: usize,
    max_rel_error: f64,
    failures: usize,
}

fn gradcheck(a: &GradcheckArgs, say: impl Fn(String)) -> Result<(), CliError> {
    let mut config = GradCheckConfig::default();
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let report = run_suite(&config).map_err(|e| CliError::Runtime(format!("gradcheck: {e}")))?;
    if let Some(out) = &a.out {
        make_dir(out)?;
        write_json(
            &out.join("gradcheck.json"),
            &GradcheckDocument {
                seed: config.seed,
                config: &config,
                passed: report.passed(),
                networks: report.networks,
                entries: report.entries,
                max_rel_error: report.max_rel_error,
                failures: report.failures.len(),
            },
        )?;
    }
    say(format!(
        "gradcheck seed {}: {} networks, {} entries, max relative error {}",
        config.seed,
        report.networks,
        report.entries,
        fmt_num(report.max_rel_error)
    ));
    if report.passed() {
        Ok(())
    } else {
        let worst = report
            .failures
            .iter()
            .max_by(|x, y| x.rel_error.total_cmp(&y.rel_error))
            .map(|f| format!(" (worst: network {} layer {} entry {})", f.network, f.layer, f.index))
            .unwrap_or_default();
        Err(CliError::Runtime(format!(
            "{} gradient entries outside tolerance{worst}",
            report.failures.len()
        )))
    }
}

fn export(a: &ExportArgs, say: impl Fn(String)) -> Result<(), CliError> {
    let config_path = a.config.clone().unwrap_or_else(|| a.out.join("config.json"));
    let trace_path = a.trace.clone().unwrap_or_else(|| a.out.join("trace.csv"));
    let (config, _) = load(&config_path, None)?;
    if !trace_path.exists() {
        return Err(CliError::Runtime(format!("trace not found: {}", trace_path.display())));
    }
    let trace = read_trace_csv(&trace_path, config.control_period())?;
    let metrics = compute_metrics(&trace, &config)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", trace_path.display())))?;
    make_dir(&a.out)?;
    let doc = MetricsDocument {
        seed: trace.seed,
        scenario: config.scenario.kind,
        variant: config.scenario.variant,
        metrics,
    };
    write_metrics_json(&a.out.join("metrics.json"), &doc)?;
    write_series(
        &a.out,
        &[SeriesSource {
            arm: variant_name(config.scenario.variant),
            seed: trace.seed,
            metrics: &doc.metrics,
            trace: &trace,
        }],
    )?;
    say(format!(
        "exported {} ticks of seed {} to {}",
        trace.records.len(),
        trace.seed,
        a.out.display()
    ));
    Ok(())
}
