//! The three subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dragtrace::analyzer::{self, AnalyzeOptions};
use dragtrace::heap::DEFAULT_HEAP_SLOTS;
use dragtrace::interp::{self, EvalError, InterpConfig, RunError};
use dragtrace::programs;
use dragtrace::runtime::{RuntimeConfig, DEFAULT_GC_INTERVAL};
use dragtrace::TraceLog;

use crate::files::{self, write_atomic};
use crate::plot::{self, PlotFormat};
use crate::{CliError, EXIT_INTERNAL, EXIT_OOM, EXIT_RUNTIME};

pub const MIN_HEAP_SLOTS: usize = 16;

#[derive(Debug, Parser)]
#[command(name = "dragtrace", version, about = "Measure how long heap objects linger after their last use")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a program and write its lifetime log.
    Run(RunArgs),
    /// Compute drag statistics, curves and histogram from a log.
    Analyze(AnalyzeArgs),
    /// Render curves.csv or histogram.csv files.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Program file, or `@name` for a bundled example (e.g. `@motiv`).
    pub source: String,
    /// Collect every K allocations.
    #[arg(long, value_name = "K", default_value_t = DEFAULT_GC_INTERVAL)]
    pub gc_interval: u64,
    /// Capacity of each semispace, in slots.
    #[arg(long, value_name = "SLOTS", default_value_t = DEFAULT_HEAP_SLOTS)]
    pub heap_slots: usize,
    /// Log file to write [default: source name with a .draglog extension].
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Check every collection against the reachability oracle.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub log: PathBuf,
    /// Curve sampling step in ticks [default: end tick / 500, at least 1].
    #[arg(long, value_name = "TICKS")]
    pub sample_interval: Option<u64>,
    /// Drag above which an object counts as dead [default: the log's K].
    #[arg(long, value_name = "TICKS")]
    pub dead_threshold: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(required = true)]
    pub csv: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = PlotFormat::Svg)]
    pub plot_format: PlotFormat,
    /// Output directory [default: next to each CSV].
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run(&args, out),
        Command::Analyze(args) => analyze(&args, out),
        Command::Plot(args) => plot(&args, out),
    }
}

fn print(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(format!("cannot write output: {e}")))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Loads program text and a label for the log header.
fn load_source(source: &str) -> Result<(String, String), CliError> {
    if let Some(name) = source.strip_prefix('@') {
        let p = programs::find(name).ok_or_else(|| {
            let names: Vec<&str> = programs::ALL.iter().map(|p| p.name).collect();
            CliError::input(format!("no bundled program {name:?}; available: {}", names.join(", ")))
        })?;
        return Ok((p.source.to_string(), p.name.to_string()));
    }
    let path = Path::new(source);
    Ok((read_text(path)?, file_label(path)))
}

fn run_error(e: RunError) -> CliError {
    let code = match e.eval_error() {
        None => crate::EXIT_INPUT,
        Some(EvalError::OutOfMemory { .. }) => EXIT_OOM,
        Some(EvalError::Runtime(_)) => EXIT_RUNTIME,
        Some(EvalError::Internal(_)) => EXIT_INTERNAL,
    };
    CliError::new(code, e.to_string())
}

pub fn run(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.gc_interval < 1 {
        return Err(CliError::usage("--gc-interval must be at least 1"));
    }
    if args.heap_slots < MIN_HEAP_SLOTS {
        return Err(CliError::usage(format!("--heap-slots must be at least {MIN_HEAP_SLOTS}")));
    }
    let (text, label) = load_source(&args.source)?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let stem = Path::new(&label).file_stem().map_or("out".into(), |s| s.to_owned());
        let dir = if args.source.starts_with('@') {
            PathBuf::new()
        } else {
            Path::new(&args.source).parent().map(Path::to_path_buf).unwrap_or_default()
        };
        dir.join(stem).with_extension("draglog")
    });
    let config = InterpConfig {
        runtime: RuntimeConfig {
            gc_interval: args.gc_interval,
            heap_slots: args.heap_slots,
            source: label,
            verify: args.verify,
            record_events: false,
        },
        ..InterpConfig::default()
    };
    let result = interp::run(&text, &config).map_err(run_error)?;
    write_atomic(&log_path, result.log.to_text().as_bytes())?;
    let s = &result.summary;
    print(out, &result.output)?;
    if !result.output.is_empty() && !result.output.ends_with('\n') {
        print(out, "\n")?;
    }
    print(
        out,
        &format!(
            "=> {}\ncollections: {} (interval {}, exhaustion {}, final {}), {} objects collected, {} slots copied, peak {} slots\n{} objects allocated, end tick {}; log written to {}\n",
            result.printed,
            s.collections,
            s.by_interval,
            s.by_exhaustion,
            s.manual,
            s.collected,
            s.slots_copied,
            s.peak_slots,
            result.log.records.len(),
            result.log.end_tick,
            log_path.display()
        ),
    )
}

pub fn analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.sample_interval == Some(0) {
        return Err(CliError::usage("--sample-interval must be at least 1"));
    }
    let text = read_text(&args.log)?;
    let log: TraceLog = text
        .parse()
        .map_err(|e| CliError::input(format!("{}: {e}", args.log.display())))?;
    let analysis = analyzer::analyze(
        &log,
        AnalyzeOptions {
            sample_interval: args.sample_interval,
            dead_threshold: args.dead_threshold,
        },
    );
    let report_text = analysis.report.to_string();
    let dir = &args.out_dir;
    write_atomic(&dir.join("report.csv"), &files::report_csv(&analysis.report))?;
    write_atomic(&dir.join("curves.csv"), &files::curves_csv(&analysis.curves))?;
    write_atomic(&dir.join("histogram.csv"), &files::histogram_csv(&analysis.report.histogram))?;
    write_atomic(&dir.join("report.txt"), report_text.as_bytes())?;
    print(out, &report_text)
}

pub fn plot(args: &PlotArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut rendered = Vec::new();
    for path in &args.csv {
        let series = files::parse_series(&read_text(path)?)
            .map_err(|e| CliError::new(e.code, format!("{}: {}", path.display(), e.message)))?;
        let stem = path.file_stem().map_or("plot".into(), |s| s.to_string_lossy().into_owned());
        let dir = match &args.out_dir {
            Some(d) => d.clone(),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let target = dir.join(format!("{stem}.{}", args.plot_format.extension()));
        rendered.push((target, plot::render(&series, args.plot_format, &stem)));
    }
    for (target, body) in rendered {
        write_atomic(&target, body.as_bytes())?;
        print(out, &format!("wrote {}\n", target.display()))?;
    }
    Ok(())
}
