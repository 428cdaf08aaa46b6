//! `docpipe` command line: the corpus pipeline plus its companion tools.

use std::path::PathBuf;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use docpipe::dedup::dedup_corpus_file;
use docpipe::pipeline::{run, PipelineConfig};
use docpipe::stats;

#[derive(Parser)]
#[command(
    name = "docpipe",
    version,
    about = "Document-oriented multilingual corpus pipeline",
    long_about = "Converts WET-style crawled text into per-language document corpora \
                  with boilerplate filtering, document-level language identification \
                  and quality annotations, plus dedup, stats and carbon tools."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: ingest, filter, identify, annotate, write
    Pipeline(PipelineArgs),
    /// Deduplicate a line-oriented corpus file (keep first occurrences)
    Dedup(DedupArgs),
    /// Corpus audit reports over pipeline output
    Stats(StatsArgs),
    /// Energy and CO2-equivalent estimate for a generation run
    Carbon(CarbonArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// Input WET files or fixture directories (repeatable)
    #[arg(long = "input", value_name = "PATH")]
    inputs: Vec<PathBuf>,
    /// Line classifier: fastText .bin model or stub rules TSV
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Blocklist root (UT1 layout with an adult/ category, or one category dir)
    #[arg(long, value_name = "DIR")]
    blocklist: Option<PathBuf>,
    /// Output directory for <lang>_meta.jsonl files
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Concurrent workers
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Line identification confidence threshold (strict >)
    #[arg(long = "line-threshold", value_name = "P")]
    line_threshold: Option<f64>,
    /// Document confidence threshold (inclusive >=)
    #[arg(long = "doc-threshold", value_name = "P")]
    doc_threshold: Option<f64>,
    /// Short-line threshold in characters
    #[arg(long = "short-chars", value_name = "N")]
    short_chars: Option<usize>,
    /// Also write rejected documents with reasons to rejected/
    #[arg(long = "keep-rejected")]
    keep_rejected: bool,
    /// Write output in input order regardless of worker count
    #[arg(long)]
    deterministic: bool,
    /// Exit with status 2 when the per-record error rate exceeds this
    #[arg(long = "max-error-rate", value_name = "RATE")]
    max_error_rate: Option<f64>,
    /// Flat key=value config file; flags override file settings
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DedupArgs {
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
    /// Track full line bytes instead of digests (immune to collisions)
    #[arg(long = "verify-bytes")]
    verify_bytes: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportName {
    /// Per-language bytes, documents and words
    Size,
    /// Documents per annotation, with total and clean
    Annotations,
    /// Language pair counts over the multilingual corpus
    Cooccurrence,
    /// Case-insensitive occurrence count of a term
    Term,
    /// Content length statistics for clean vs annotated documents
    CleanLength,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(value_enum)]
    report: ReportName,
    /// Corpus directory (or a single .jsonl file)
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    /// Term for the `term` report
    #[arg(long, value_name = "T")]
    term: Option<String>,
    /// Display threshold for the `cooccurrence` report
    #[arg(long, value_name = "N", default_value_t = 20_000)]
    threshold: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct CarbonArgs {
    /// Total runtime in hours
    #[arg(long)]
    hours: f64,
    /// CPU socket count
    #[arg(long)]
    cpus: u32,
    /// Average power draw per CPU socket in watts
    #[arg(long = "cpu-watts")]
    cpu_watts: f64,
    /// Average DRAM power draw in watts
    #[arg(long = "dram-watts")]
    dram_watts: f64,
    /// Power Usage Effectiveness multiplier
    #[arg(long, default_value_t = stats::DEFAULT_PUE)]
    pue: f64,
    /// Grid intensity in kg CO2e per kWh
    #[arg(long, default_value_t = stats::DEFAULT_INTENSITY_KG_PER_KWH)]
    intensity: f64,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Pipeline(args) => run_pipeline(args),
        Command::Dedup(args) => {
            let report = dedup_corpus_file(&args.input, &args.output, args.verify_bytes)
                .context("deduplication failed")?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(0)
        }
        Command::Stats(args) => run_stats(args),
        Command::Carbon(args) => {
            let params = stats::CarbonParams {
                runtime_hours: args.hours,
                cpu_count: args.cpus,
                cpu_power_watts: args.cpu_watts,
                dram_power_watts: args.dram_watts,
                pue: args.pue,
                intensity_kg_per_kwh: args.intensity,
            };
            let kwh = stats::power_consumption(&params)?;
            let kg = stats::co2e(kwh, params.intensity_kg_per_kwh)?;
            println!(
                "{}",
                serde_json::json!({
                    "kwh": kwh,
                    "co2e_kg": kg,
                    "co2e_g": kg * 1000.0,
                })
            );
            Ok(0)
        }
    }
}

fn run_pipeline(args: PipelineArgs) -> anyhow::Result<i32> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &args.config {
        config
            .load_file(path)
            .with_context(|| format!("loading config {}", path.display()))?;
    }
    // Flags override whatever the config file set.
    config.inputs.extend(args.inputs);
    if let Some(v) = args.model {
        config.model_path = v;
    }
    if let Some(v) = args.blocklist {
        config.blocklist_root = Some(v);
    }
    if let Some(v) = args.output {
        config.output_dir = v;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    if let Some(v) = args.line_threshold {
        config.id_params.line_conf_threshold = v;
    }
    if let Some(v) = args.doc_threshold {
        config.id_params.doc_conf_threshold = v;
    }
    if let Some(v) = args.short_chars {
        config.short_line_chars = v;
    }
    if args.keep_rejected {
        config.keep_rejected = true;
    }
    if args.deterministic {
        config.deterministic = true;
    }
    if let Some(v) = args.max_error_rate {
        config.max_error_rate = v;
    }
    anyhow::ensure!(
        config.blocklist_root.is_some(),
        "--blocklist is required (flag or config file)"
    );
    let report = run(&config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !report.conservation_holds() {
        anyhow::bail!("record accounting failed conservation check");
    }
    if report.error_rate() > config.max_error_rate {
        log::warn!(
            "completed with per-record error rate {:.3} above {:.3}",
            report.error_rate(),
            config.max_error_rate
        );
        return Ok(2);
    }
    Ok(0)
}

fn run_stats(args: StatsArgs) -> anyhow::Result<i32> {
    let out = match args.report {
        ReportName::Size => {
            let report = stats::corpus_size_report(&args.corpus)?;
            render(&report, report.to_tsv(), args.format)?
        }
        ReportName::Annotations => {
            let report = stats::annotation_distribution(&args.corpus)?;
            render(&report, report.to_tsv(), args.format)?
        }
        ReportName::Cooccurrence => {
            let report = stats::language_cooccurrence(&args.corpus, args.threshold)?;
            render(&report, report.to_tsv(), args.format)?
        }
        ReportName::Term => {
            let term = args
                .term
                .as_deref()
                .context("--term is required for the term report")?;
            let report = stats::term_count(&args.corpus, term)?;
            render(&report, report.to_tsv(), args.format)?
        }
        ReportName::CleanLength => {
            let report = stats::clean_length_stats(&args.corpus)?;
            render(&report, report.to_tsv(), args.format)?
        }
    };
    print!("{out}");
    Ok(0)
}

fn render<T: serde::Serialize>(report: &T, tsv: String, format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(report)? + "\n",
        Format::Tsv => tsv,
    })
}
