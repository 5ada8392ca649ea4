use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridcast_core::ingest::{format_sig6, parse_datetime};
use gridcast_core::synth::derive_seeds;
use gridcast_core::{generate_panel, pacf, parse_price_csv, performance_indicator, GapPolicy, IngestOptions, MetricSet, ScoreTable, SynthSpec};
use gridcast_harness::{
    emit_report, rank_scores, read_panel, run_benchmark, write_panel, BenchConfig, HarnessError, Precision, ReportKind,
    ResultStore, RunOptions,
};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "gridcast", version, about = "Walk-forward benchmark workbench for hourly price forecasting")]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel model jobs (overrides the config file).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Floating-point precision of neural models: 32 or 64.
    #[arg(long, global = true)]
    precision: Option<Precision>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a long-format price CSV into a panel file.
    Ingest {
        csv: PathBuf,
        /// Gap policy: error, forward_fill or linear_interpolate.
        #[arg(long, default_value = "error")]
        fill: GapPolicy,
        /// UTC range `start..end` (end exclusive), ISO 8601.
        #[arg(long)]
        range: Option<String>,
        /// Comma-separated channel names to keep.
        #[arg(long, value_delimiter = ',')]
        countries: Option<Vec<String>>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a synthetic panel from a TOML spec.
    Synth {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Autocorrelation and partial autocorrelation of one channel.
    Pacf {
        panel: PathBuf,
        #[arg(long)]
        channel: String,
        #[arg(long, default_value_t = 100)]
        max_lag: usize,
        /// CSV output; printed to stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run (or resume) a benchmark.
    Bench {
        config: PathBuf,
        /// Run directory; defaults to `output_dir` from the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write report CSVs for a run directory.
    Report {
        rundir: PathBuf,
        /// One or more of ranking, heatmap, boxplot, geomap, tables (default: all).
        #[arg(long, value_delimiter = ',')]
        kind: Vec<String>,
        /// Defaults to `<rundir>/reports`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rank models from a `model,country,...` score CSV.
    Rank { scores: PathBuf },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthFile {
    #[serde(default)]
    seed: Option<u64>,
    channels: Vec<SynthSpec>,
}

fn read(path: &Path) -> Result<Vec<u8>, HarnessError> {
    std::fs::read(path).map_err(|e| HarnessError::io(path, e))
}

fn ingest(
    csv: &Path,
    fill: GapPolicy,
    range: Option<&str>,
    countries: Option<Vec<String>>,
    output: &Path,
) -> Result<(), HarnessError> {
    let time_range = match range {
        None => None,
        Some(r) => {
            let (a, b) = r.split_once("..").ok_or_else(|| HarnessError::Config(format!("range {r:?} is not start..end")))?;
            let parse = |s: &str| {
                parse_datetime(s).map(|d| d.to_utc()).ok_or_else(|| HarnessError::Config(format!("cannot parse datetime {s:?}")))
            };
            Some((parse(a)?, parse(b)?))
        }
    };
    let options = IngestOptions { gap_policy: fill, time_range, country_filter: countries, ..IngestOptions::default() };
    let panel = parse_price_csv(&read(csv)?, &options)?;
    write_panel(output, &panel)?;
    eprintln!("{} hours x {} channels -> {}", panel.n_hours(), panel.n_channels(), output.display());
    Ok(())
}

fn synth(spec: &Path, seed: Option<u64>, output: &Path) -> Result<(), HarnessError> {
    let text = String::from_utf8(read(spec)?).map_err(|_| HarnessError::Config("spec is not UTF-8".into()))?;
    let mut file: SynthFile = toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
    // a master seed assigns derived seeds to every channel
    if let Some(master) = seed.or(file.seed) {
        let seeds = derive_seeds(master, file.channels.len());
        for (ch, s) in file.channels.iter_mut().zip(seeds) {
            ch.seed = s;
        }
    }
    let panel = generate_panel(&file.channels)?;
    write_panel(output, &panel)?;
    eprintln!("{} hours x {} channels -> {}", panel.n_hours(), panel.n_channels(), output.display());
    Ok(())
}

fn pacf_cmd(panel: &Path, channel: &str, max_lag: usize, output: Option<&Path>) -> Result<(), HarnessError> {
    let panel = read_panel(panel)?;
    let ci = panel.channel_index(channel).ok_or_else(|| HarnessError::Config(format!("no channel {channel:?}")))?;
    let r = pacf(&panel.column(ci), max_lag)?;
    let mut out = String::from("lag,acf,pacf,band\n");
    for k in 1..=r.max_lag() {
        out.push_str(&format!("{k},{},{},{}\n", format_sig6(r.acf[k]), format_sig6(r.at(k)), format_sig6(r.band)));
    }
    match output {
        Some(p) => std::fs::write(p, &out).map_err(|e| HarnessError::io(p, e))?,
        None => print!("{out}"),
    }
    match r.last_significant_lag() {
        Some(k) => eprintln!("last significant lag: {k}"),
        None => eprintln!("no lag outside the 95% band"),
    }
    Ok(())
}

fn bench(cli: &Cli, config: &Path, output: Option<PathBuf>) -> Result<ExitCode, HarnessError> {
    let mut cfg = BenchConfig::load(config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(p) = cli.precision {
        cfg.precision = p;
    }
    let dir = output
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| HarnessError::Config("no output directory: pass -o or set output_dir".into()))?;
    let outcome = run_benchmark(&cfg, &dir, &RunOptions::default())?;
    eprintln!("{} records in {}", outcome.store.records.len(), dir.display());
    let failed: Vec<_> = outcome.store.failures().collect();
    for f in &failed {
        eprintln!("failed: {} fold {}: {}", f.model, f.fold, f.error.as_deref().unwrap_or("unknown error"));
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn report(rundir: &Path, kinds: &[String], output: Option<PathBuf>) -> Result<(), HarnessError> {
    let kinds: Vec<ReportKind> = if kinds.is_empty() {
        ReportKind::ALL.to_vec()
    } else {
        kinds.iter().map(|k| k.parse()).collect::<Result<_, _>>()?
    };
    let store = ResultStore::load(rundir)?;
    let out = output.unwrap_or_else(|| rundir.join("reports"));
    let records = store.result_records();
    for k in kinds {
        for p in emit_report(&records, k, store.meta.config.aggregation, &out)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn rank(scores: &Path) -> Result<(), HarnessError> {
    let bad = |msg: String| HarnessError::Format { path: scores.to_path_buf(), msg };
    let mut rdr = csv::Reader::from_path(scores).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (model, country) = col("model").zip(col("country")).ok_or_else(|| bad("need model and country columns".into()))?;
    let indicator = col("indicator");
    let smape_rmse = col("smape").zip(col("rmse"));
    if indicator.is_none() && smape_rmse.is_none() {
        return Err(bad("need an indicator column or smape and rmse columns".into()));
    }
    let mut cells = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let num = |c: usize| row[c].trim().parse::<f64>().map_err(|_| bad(format!("row {}: bad number {:?}", i + 2, &row[c])));
        let score = match (indicator, smape_rmse) {
            (Some(c), _) => num(c)?,
            (None, Some((s, r))) => performance_indicator(&MetricSet { smape: num(s)?, rmse: num(r)?, mae: 0.0, mse: 0.0 }),
            (None, None) => unreachable!("checked above"),
        };
        cells.push((row[model].to_string(), row[country].to_string(), score));
    }
    let table = ScoreTable::from_cells(cells.iter().map(|(m, c, s)| (m.as_str(), c.as_str(), *s)))?;
    print!("{}", rank_scores(&table)?.summary_csv());
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, HarnessError> {
    match &cli.command {
        Command::Ingest { csv, fill, range, countries, output } => {
            ingest(csv, *fill, range.as_deref(), countries.clone(), output)?
        }
        Command::Synth { spec, output } => synth(spec, cli.seed, output)?,
        Command::Pacf { panel, channel, max_lag, output } => pacf_cmd(panel, channel, *max_lag, output.as_deref())?,
        Command::Bench { config, output } => return bench(cli, config, output.clone()),
        Command::Report { rundir, kind, output } => report(rundir, kind, output.clone())?,
        Command::Rank { scores } => rank(scores)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
