//! The `hetbench` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error, 3 completed but degraded.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::bench::{self, aggregate, emit_figures, read_records_csv, read_records_jsonl, Strategy, SweepConfig, SweepResults};
use crate::evoloop::{report_profile, run_ea};
use crate::executor::{BatchRequest, CpuExecutor, DevicePerfModel, SyntheticExecutor, TimingMode};
use crate::monitor::{detect_saturation_knee, MonitorError};
use crate::scheduler::{self, CalibrationProfile};
use crate::simkernel::ModelKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_DEGRADED: i32 = 3;

/// Environment variable that replaces the configured output directory.
pub const OUT_ENV: &str = "HETBENCH_OUT";

#[derive(Debug, Parser)]
#[command(name = "hetbench", about = "CPU/accelerator batch simulation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a sweep described by a config file.
    Bench(BenchArgs),
    /// One calibrate, plan and execute cycle.
    Hybrid(HybridArgs),
    /// Evolutionary loop with a per-phase time profile.
    Ea(EaArgs),
    /// Re-emit figures from persisted results.
    Plot(PlotArgs),
    /// Print the saturation point of the accelerator series.
    Knee(KneeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Modeled,
    Emulated,
}

impl From<ModeArg> for TimingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Modeled => TimingMode::Modeled,
            ModeArg::Emulated => TimingMode::Emulated,
        }
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Keep rows already in results.csv and run only the missing ones.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    repetitions: Option<u32>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    orchestration_overhead_s: Option<f64>,
    /// Skip figure emission after the sweep.
    #[arg(long)]
    no_figures: bool,
}

#[derive(Debug, Args)]
struct HybridArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    variants: u64,
    #[arg(long)]
    steps: u32,
    /// Block for the device's modeled time and run both shares concurrently.
    #[arg(long)]
    emulated: bool,
    /// Device parameters and overhead come from this config's values for the model.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in device preset, e.g. `gtx1070ti-like` or `ideal`.
    #[arg(long, conflicts_with = "config")]
    device: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "orchestration-overhead-s", alias = "overhead")]
    overhead: Option<f64>,
    /// Stub calibration: CPU probe time in seconds, skips measuring.
    #[arg(long, requires = "t_accel")]
    t_cpu: Option<f64>,
    /// Stub calibration: accelerator probe time in seconds.
    #[arg(long, requires = "t_cpu")]
    t_accel: Option<f64>,
}

#[derive(Debug, Args)]
struct EaArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    pop: usize,
    #[arg(long)]
    gens: u32,
    #[arg(long, default_value_t = 1000)]
    steps: u32,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// results.csv or results.jsonl
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KneeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    model: ModelKind,
    /// Defaults to the smallest step count present.
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long, default_value = "AccelOnly")]
    strategy: Strategy,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type Outcome = Result<i32, Failure>;

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing to stdout and stderr. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let sub = args
        .iter()
        .skip(1)
        .filter_map(|a| a.to_str())
        .find(|a| !a.starts_with('-'))
        .map(str::to_string);
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let _ = writeln!(err, "{}\n{}", e.render(), grammar(sub.as_deref()).trim_end());
            return EXIT_USAGE;
        }
    };
    let outcome = match cli.command {
        Command::Bench(a) => bench_cmd(a, out),
        Command::Hybrid(a) => hybrid_cmd(a, out),
        Command::Ea(a) => ea_cmd(a, out),
        Command::Plot(a) => plot_cmd(a, out),
        Command::Knee(a) => knee_cmd(a, out),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}\n\n{}", grammar(sub.as_deref()));
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_RUNTIME
        }
    }
}

/// Usage line of `sub`, or of every subcommand when it is unknown.
fn grammar(sub: Option<&str>) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    if let Some(sc) = sub.and_then(|name| cmd.find_subcommand_mut(name)) {
        return sc.render_usage().to_string();
    }
    let mut text = String::from("Usage:\n");
    for sc in cmd.get_subcommands_mut() {
        let usage = sc.render_usage().to_string();
        text.push_str("  ");
        text.push_str(usage.trim_start_matches("Usage: "));
        text.push('\n');
    }
    text
}

fn load_config(path: &Path) -> Result<SweepConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("config file not found: {}", path.display())));
    }
    SweepConfig::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn bench_cmd(a: BenchArgs, out: &mut dyn Write) -> Outcome {
    let mut config = load_config(&a.config)?;
    if let Some(dir) = std::env::var_os(OUT_ENV) {
        config.output_dir = PathBuf::from(dir);
    }
    if let Some(w) = a.workers {
        config.workers = w;
    }
    if let Some(r) = a.repetitions {
        config.repetitions = r;
    }
    if let Some(m) = a.mode {
        config.mode = m.into();
    }
    if let Some(d) = a.output_dir {
        config.output_dir = d;
    }
    if let Some(o) = a.orchestration_overhead_s {
        config.orchestration_overhead_s = o;
    }
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let results = bench::run_sweep(&config, a.resume).map_err(runtime)?;
    let errors = results.records.iter().filter(|r| r.is_error()).count();
    let _ = writeln!(
        out,
        "rows={} skipped={} errors={} expected={}",
        results.records.len(),
        results.skipped,
        errors,
        bench::expected_row_count(&config)
    );
    let _ = writeln!(out, "results={}", config.output_dir.join("results.csv").display());
    if !a.no_figures {
        match emit_figures(&results, &config.output_dir.join("figures")) {
            Ok(paths) => {
                let _ = writeln!(out, "figures={}", paths.len());
            }
            // every row failed; the error count above already says so
            Err(bench::BenchError::EmptyResults) => {}
            Err(e) => return Err(runtime(e)),
        }
    }
    Ok(if errors > 0 {
        EXIT_RUNTIME
    } else if results.any_degraded() {
        EXIT_DEGRADED
    } else {
        EXIT_OK
    })
}

fn hybrid_cmd(a: HybridArgs, out: &mut dyn Write) -> Outcome {
    if a.variants == 0 {
        return Err(Failure::Usage("--variants must be >= 1".into()));
    }
    if a.steps == 0 {
        return Err(Failure::Usage("--steps must be >= 1".into()));
    }
    let config = a.config.as_deref().map(load_config).transpose()?;
    let device = match (&a.device, &config) {
        (Some(name), _) => DevicePerfModel::preset(name)
            .ok_or_else(|| Failure::Usage(format!("--device: unknown preset '{name}'")))?,
        (None, Some(c)) => c.device_for(a.model),
        (None, None) => DevicePerfModel::default(),
    };
    let mode = if a.emulated {
        TimingMode::Emulated
    } else {
        config.as_ref().map_or(TimingMode::Modeled, |c| c.mode)
    };
    let overhead = a
        .overhead
        .or(config.as_ref().map(|c| c.orchestration_overhead_s))
        .unwrap_or(0.0);
    let workers = a
        .workers
        .or(config.as_ref().map(|c| c.workers))
        .unwrap_or_else(crate::executor::available_cores);
    let cpu = CpuExecutor::new(workers).map_err(|e| Failure::Usage(format!("--workers: {e}")))?;
    let accel = SyntheticExecutor::new(device, mode).map_err(|e| Failure::Usage(e.to_string()))?;

    let (profile, stubbed) = match (a.t_cpu, a.t_accel) {
        (Some(tc), Some(ta)) => {
            if !(tc > 0.0 && ta > 0.0) {
                return Err(Failure::Usage("--t-cpu and --t-accel must be > 0".into()));
            }
            (CalibrationProfile::from_times(a.model, a.steps, a.variants, tc, ta), true)
        }
        _ => (
            scheduler::calibrate(a.model, a.steps, a.variants, &cpu, &accel).map_err(runtime)?,
            false,
        ),
    };
    let plan = scheduler::plan_allocation(&profile, a.variants).map_err(runtime)?;
    let _ = writeln!(
        out,
        "plan: cpu={} accel={} accel_fraction={:.6} target_fraction={:.6}",
        plan.n_cpu, plan.n_accel, plan.accel_fraction, plan.target_fraction
    );
    let request = BatchRequest::range(a.model, a.variants, a.steps).map_err(runtime)?;
    let result = scheduler::run_hybrid(&plan, &request, &cpu, &accel, overhead, mode).map_err(runtime)?;
    let _ = writeln!(out, "calibration_t_cpu_s={:.6}", profile.t_cpu);
    let _ = writeln!(out, "calibration_t_accel_s={:.6}", profile.t_accel);
    if !stubbed && profile.failed.is_none() {
        // the probe was the whole batch, so these are the sequential times
        let _ = writeln!(out, "naive_sum_s={:.6}", scheduler::naive_sum(profile.t_cpu, profile.t_accel));
    }
    let _ = writeln!(out, "cpu_part_s={:.6}", result.t_cpu_part);
    let _ = writeln!(out, "accel_part_s={:.6}", result.t_accel_part);
    let _ = writeln!(out, "overhead_s={:.6}", result.overhead);
    let _ = writeln!(out, "wall_combined_s={:.6}", result.wall_combined);
    let _ = writeln!(out, "degraded={}", result.degraded);
    Ok(if result.degraded { EXIT_DEGRADED } else { EXIT_OK })
}

fn ea_cmd(a: EaArgs, out: &mut dyn Write) -> Outcome {
    let workers = a.workers.unwrap_or_else(crate::executor::available_cores);
    let cpu = CpuExecutor::new(workers).map_err(|e| Failure::Usage(format!("--workers: {e}")))?;
    let (pop, profile) = run_ea(a.model, a.pop, a.gens, a.steps, &cpu, a.seed).map_err(|e| match e {
        crate::evoloop::EvoError::Executor(e) => runtime(e),
        other => Failure::Usage(other.to_string()),
    })?;
    let _ = write!(out, "{}", report_profile(&profile));
    let _ = writeln!(out, "best_fitness={:.6}", pop.best_fitness());
    Ok(EXIT_OK)
}

fn read_any(path: &Path) -> Result<SweepResults, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("input file not found: {}", path.display())));
    }
    let jsonl = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("jsonl"));
    let records = if jsonl {
        read_records_jsonl(path)
    } else {
        read_records_csv(path)
    }
    .map_err(runtime)?;
    Ok(SweepResults::from_records(records))
}

fn plot_cmd(a: PlotArgs, out: &mut dyn Write) -> Outcome {
    let results = read_any(&a.input)?;
    let paths = emit_figures(&results, &a.out).map_err(runtime)?;
    for p in &paths {
        let _ = writeln!(out, "{}", p.display());
    }
    Ok(EXIT_OK)
}

fn knee_cmd(a: KneeArgs, out: &mut dyn Write) -> Outcome {
    let results = read_any(&a.input)?;
    let cells: Vec<_> = aggregate(&results.records)
        .into_iter()
        .filter(|c| c.model == a.model && c.strategy == a.strategy)
        .collect();
    let steps = a
        .steps
        .or_else(|| cells.iter().map(|c| c.steps).min())
        .ok_or_else(|| Failure::Runtime(format!("no {} rows for {}", a.strategy, a.model)))?;
    let series: Vec<(u64, f64)> = cells
        .iter()
        .filter(|c| c.steps == steps)
        .map(|c| (c.n_variants, c.wall.mean))
        .collect();
    match detect_saturation_knee(&series) {
        Ok(n) => {
            let _ = writeln!(out, "knee={n} model={} steps={steps} strategy={}", a.model, a.strategy);
        }
        Err(MonitorError::NoKnee { regime, sentinel }) => {
            let _ = writeln!(
                out,
                "knee={sentinel} regime={regime} model={} steps={steps} strategy={}",
                a.model, a.strategy
            );
        }
        Err(e) => return Err(runtime(e)),
    }
    Ok(EXIT_OK)
}
