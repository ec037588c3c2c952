//! `kiosk-sim`: sweeps, single-cell probes, break-even frontiers and
//! aggregate reports for the kiosk discount model.
//!
//! Exit codes: 0 success, 2 invalid input (config, flags or CSV schema),
//! 3 I/O failure, 4 sweep finished with failed cells.

mod manifest;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kiosk_core::report::{
    aggregate_file_name, read_sweep_csv, write_aggregate_csv, write_breakeven_csv, write_sweep_csv,
};
use kiosk_core::{
    aggregate, analytic_breakeven, empirical_breakeven, run_sweep, simulate_cell, summary, Axis,
    AxisRange, BreakEvenCurve, CellParams, ConfigDocument, Error, IntentionUpdateRule,
    MarginAccounting, Metric, MetricSource, SweepRow,
};

use crate::manifest::{FailedCell, OutputFile, RunManifest};

#[derive(Parser)]
#[command(
    name = "kiosk-sim",
    version,
    about = "Kiosk discount model: Monte Carlo sweeps and closed-form analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every grid cell and write sweep.csv, summary.json and manifest.json.
    Sweep(SweepArgs),
    /// Simulate a single cell and print its result.
    Cell(CellArgs),
    /// Compute profit intervals (discounts with r_margin > 1) per margin and intention.
    Breakeven(BreakevenArgs),
    /// Average a sweep.csv into per-margin curves, one CSV per metric/axis/margin.
    Report(ReportArgs),
}

/// Model variant flags; they override the config file.
#[derive(Args)]
struct VariantFlags {
    /// Intention update rule: multiplicative or additive.
    #[arg(long)]
    rule: Option<IntentionUpdateRule>,
    /// Margin accounting: discount_all_display_buyers or discount_incremental_only.
    #[arg(long)]
    accounting: Option<MarginAccounting>,
}

impl VariantFlags {
    fn apply(&self, doc: &mut ConfigDocument) {
        if let Some(rule) = self.rule {
            doc.rule = rule;
        }
        if let Some(accounting) = self.accounting {
            doc.accounting = accounting;
        }
    }
}

/// Sampling flags; they override the config file.
#[derive(Args)]
struct SamplingFlags {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Customers simulated per cell.
    #[arg(long)]
    customers: Option<u64>,
}

impl SamplingFlags {
    fn apply(&self, doc: &mut ConfigDocument) {
        if let Some(seed) = self.seed {
            doc.master_seed = seed;
        }
        if let Some(customers) = self.customers {
            doc.customers_per_cell = customers;
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    sampling: SamplingFlags,
    #[command(flatten)]
    variant: VariantFlags,
    /// Worker threads; defaults to one per core.
    #[arg(long, env = "KIOSK_SIM_PARALLELISM")]
    parallelism: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CellArgs {
    /// Share of customers using the display, in [0, 1].
    #[arg(long)]
    u: f64,
    /// Initial purchase intention, in (0, 1].
    #[arg(long)]
    pi: f64,
    /// Discount, in [0, 1).
    #[arg(long)]
    d: f64,
    /// Margin, in (0, 1].
    #[arg(long)]
    m: f64,
    /// Cell index used to derive the cell seed; matches `cell_index` in sweep.csv.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    sampling: SamplingFlags,
    #[command(flatten)]
    variant: VariantFlags,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Analytic,
    Empirical,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Source {
    Analytic,
    Mc,
}

impl From<Source> for MetricSource {
    fn from(s: Source) -> Self {
        match s {
            Source::Analytic => MetricSource::Analytic,
            Source::Mc => MetricSource::MonteCarlo,
        }
    }
}

#[derive(Args)]
struct BreakevenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    variant: VariantFlags,
    /// Comma-separated margins; defaults to the config grid margins
    /// (analytic) or the margins present in the input (empirical).
    #[arg(long, value_delimiter = ',')]
    margins: Vec<f64>,
    /// Comma-separated intentions; defaults to the config pi axis.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["pi_start", "pi_stop", "pi_step"])]
    pi: Vec<f64>,
    #[arg(long)]
    pi_start: Option<f64>,
    #[arg(long)]
    pi_stop: Option<f64>,
    #[arg(long)]
    pi_step: Option<f64>,
    /// Lower end of the discount domain searched analytically.
    #[arg(long, default_value_t = 0.0)]
    d_min: f64,
    /// Upper end of the discount domain; defaults to the config d-axis stop.
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = Method::Analytic)]
    method: Method,
    /// sweep.csv to read; required for the empirical method.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Metric column used by the empirical method.
    #[arg(long, value_enum, default_value_t = Source::Analytic)]
    source: Source,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    #[value(name = "r_margin")]
    RMargin,
    #[value(name = "r_customers")]
    RCustomers,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::RMargin => Metric::RMargin,
            MetricArg::RCustomers => Metric::RCustomers,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    #[value(name = "by_discount")]
    ByDiscount,
    #[value(name = "by_intention")]
    ByIntention,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::ByDiscount => Axis::ByDiscount,
            AxisArg::ByIntention => Axis::ByIntention,
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    /// sweep.csv produced by `sweep`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MetricArg::RMargin, MetricArg::RCustomers])]
    metric: Vec<MetricArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [AxisArg::ByDiscount, AxisArg::ByIntention])]
    axis: Vec<AxisArg>,
    /// Comma-separated margins; defaults to every margin in the input.
    #[arg(long, value_delimiter = ',')]
    margins: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Source::Analytic)]
    source: Source,
}

/// A failed command: the process exit code and the message for stderr.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

const EXIT_INVALID: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load_document(path: Option<&Path>) -> Result<ConfigDocument, Failure> {
    match path {
        None => Ok(ConfigDocument::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
            Ok(ConfigDocument::from_json(&text)?)
        }
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

/// Create `path` and fill it through a buffered writer.
fn write_file<F>(path: &Path, fill: F) -> CmdResult
where
    F: FnOnce(&mut BufWriter<File>) -> kiosk_core::Result<()>,
{
    let file = File::create(path).map_err(|e| Failure::io(path, e))?;
    let mut w = BufWriter::new(file);
    fill(&mut w).map_err(|e| match e {
        Error::Io(msg) => Failure::io(path, msg),
        other => other.into(),
    })?;
    w.flush().map_err(|e| Failure::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CmdResult {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn timestamp(t: chrono::DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn cmd_sweep(args: SweepArgs) -> CmdResult {
    let mut doc = load_document(args.config.as_deref())?;
    args.sampling.apply(&mut doc);
    args.variant.apply(&mut doc);
    let run = doc.resolve()?;
    if args.parallelism == Some(0) {
        return Err(Failure::invalid("parallelism must be at least 1"));
    }
    create_dir(&args.out)?;

    let started_at = Utc::now();
    let clock = Instant::now();
    let outcome = run_sweep(&run.grid, &run.model, args.parallelism, None)?;

    let sweep_path = args.out.join("sweep.csv");
    write_file(&sweep_path, |w| write_sweep_csv(w, &outcome.results))?;

    let rows: Vec<SweepRow> = outcome.results.iter().map(SweepRow::from).collect();
    let stats = match summary(&rows) {
        Ok(s) => Some(s),
        Err(Error::EmptyInput) => None,
        Err(e) => return Err(e.into()),
    };
    let summary_path = args.out.join("summary.json");
    write_json(&summary_path, &stats)?;
    let elapsed_seconds = clock.elapsed().as_secs_f64();
    let finished_at = Utc::now();

    let outputs = [&sweep_path, &summary_path]
        .into_iter()
        .map(|p| OutputFile::of(p).map_err(|e| Failure::io(p, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: run.document(),
        started_at: timestamp(started_at),
        finished_at: timestamp(finished_at),
        elapsed_seconds,
        parallelism: args.parallelism,
        cells: outcome.results.len(),
        customers: outcome.results.iter().map(|r| r.customers).sum(),
        outputs,
        failed_cells: outcome.failures.iter().map(FailedCell::from).collect(),
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;

    eprintln!(
        "{} cells, {} customers in {elapsed_seconds:.1}s -> {}",
        manifest.cells,
        manifest.customers,
        args.out.display()
    );
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_PARTIAL,
            message: format!(
                "{} of {} cells failed; see manifest.json",
                outcome.failures.len(),
                run.grid.cell_count()
            ),
        })
    }
}

fn cmd_cell(args: CellArgs) -> CmdResult {
    let mut doc = load_document(args.config.as_deref())?;
    args.sampling.apply(&mut doc);
    args.variant.apply(&mut doc);
    let run = doc.resolve()?;
    let cell = CellParams::new(args.u, args.pi, args.d, args.m)?;
    let result = simulate_cell(&cell, &run.model, args.index)?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let written = match args.format {
        Format::Json => serde_json::to_writer_pretty(&mut out, &result)
            .map_err(|e| Error::Io(e.to_string()))
            .and_then(|()| Ok(out.write_all(b"\n")?)),
        Format::Csv => write_sweep_csv(&mut out, [&result]),
    };
    written.map_err(Failure::from)
}

fn distinct_margins(rows: &[SweepRow]) -> Vec<f64> {
    let mut margins: Vec<f64> = rows.iter().map(|r| r.cell.m).collect();
    margins.sort_by(f64::total_cmp);
    margins.dedup();
    margins
}

fn read_rows(path: &Path) -> Result<Vec<SweepRow>, Failure> {
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    let rows = read_sweep_csv(io::BufReader::new(file))?;
    if rows.is_empty() {
        return Err(Failure::invalid(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn cmd_breakeven(args: BreakevenArgs) -> CmdResult {
    let mut doc = load_document(args.config.as_deref())?;
    args.variant.apply(&mut doc);
    let run = doc.resolve()?;

    let curves: Vec<BreakEvenCurve> = match args.method {
        Method::Analytic => {
            let pis = if args.pi.is_empty() {
                let base = run.grid.pi;
                let axis = AxisRange::new(
                    args.pi_start.unwrap_or(base.start),
                    args.pi_stop.unwrap_or(base.stop),
                    args.pi_step.unwrap_or(base.step),
                );
                axis.validate("pi")?;
                axis.points()
            } else {
                args.pi.clone()
            };
            let margins = if args.margins.is_empty() {
                run.grid.margins.clone()
            } else {
                args.margins.clone()
            };
            let d_max = args.d_max.unwrap_or(run.grid.d.stop);
            let model = run.model.model();
            margins
                .iter()
                .map(|&m| analytic_breakeven(&model, m, &pis, args.d_min, d_max))
                .collect::<kiosk_core::Result<_>>()?
        }
        Method::Empirical => {
            let input = args.input.as_deref().ok_or_else(|| {
                Failure::invalid("--method empirical requires --input <sweep.csv>")
            })?;
            let rows = read_rows(input)?;
            let margins = if args.margins.is_empty() {
                distinct_margins(&rows)
            } else {
                args.margins.clone()
            };
            let mut curves = margins
                .iter()
                .map(|&m| empirical_breakeven(&rows, m, args.source.into()))
                .collect::<kiosk_core::Result<Vec<_>>>()?;
            if !args.pi.is_empty() {
                for curve in &mut curves {
                    curve
                        .points
                        .retain(|p| args.pi.iter().any(|&pi| (pi - p.pi).abs() < 1e-9));
                    if curve.points.len() != args.pi.len() {
                        return Err(Failure::invalid(format!(
                            "requested pi values are not all on the input grid for margin {}",
                            curve.margin
                        )));
                    }
                }
            }
            curves
        }
    };

    create_dir(&args.out)?;
    let path = args.out.join("breakeven.csv");
    write_file(&path, |w| write_breakeven_csv(w, &curves))?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CmdResult {
    let rows = read_rows(&args.input)?;
    let margins = if args.margins.is_empty() {
        distinct_margins(&rows)
    } else {
        args.margins.clone()
    };

    // Compute everything before touching the output directory.
    let mut curves = BTreeMap::new();
    for &m in &margins {
        for &metric in &args.metric {
            for &axis in &args.axis {
                let curve = aggregate(&rows, metric.into(), axis.into(), m, args.source.into())?;
                curves.insert(aggregate_file_name(&curve), curve);
            }
        }
    }

    create_dir(&args.out)?;
    for (name, curve) in &curves {
        let path = args.out.join(name);
        write_file(&path, |w| write_aggregate_csv(w, curve))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Cell(a) => cmd_cell(a),
        Command::Breakeven(a) => cmd_breakeven(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kiosk-sim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
