use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use groundsynth::config::PipelineConfig;
use groundsynth::eval::ReportFormat;
use groundsynth::review::ReviewStore;
use groundsynth::synth::SynthesisMode;
use groundsynth_cli::commands::{self, StatsKind};
use groundsynth_cli::{serve, BelowThreshold, UsageError};

/// Build GUI grounding datasets and benchmarks from UI captures.
#[derive(Debug, Parser)]
#[command(name = "groundsynth", version)]
struct Cli {
    /// Pipeline configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true, env = "GROUNDSYNTH_CONFIG")]
    config: Option<PathBuf>,

    /// Emit logs as JSON lines on stderr.
    #[arg(long, global = true)]
    log_json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse capture bundles into an element pool (JSONL).
    Parse {
        /// A bundle directory or a directory of bundles.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resample a pool toward the configured type/ratio distribution.
    Sample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of elements to draw.
        #[arg(short, long)]
        n: usize,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render Set-of-Marks images for each capture.
    Annotate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory for `<capture>-<batch>.png` files.
        #[arg(long)]
        out: PathBuf,
        /// Only mark elements present in this pool.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Generate grounding records with the two-step LLM protocol.
    Synthesize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use this pool's elements instead of parsing the bundles again.
        #[arg(long)]
        pool: Option<PathBuf>,
        /// full, no_instruction_synthesis or no_llm.
        #[arg(long)]
        mode: Option<SynthesisMode>,
        /// Replay LLM responses from this directory.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Call the API and record responses into --fixtures.
        #[arg(long, requires = "fixtures")]
        record: bool,
    },
    /// Print distribution statistics for a pool, record or benchmark file.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "records")]
        kind: StatsKind,
    },
    /// Pick a per-type balanced subset of records and create a review build.
    BenchBuild {
        #[arg(long)]
        records: PathBuf,
        /// Review build directory to create.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        per_type: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn a reviewed build into benchmark samples.
    BenchAssemble {
        #[arg(long)]
        build: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against a benchmark.
    Eval {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long = "pred")]
        predictions: PathBuf,
        /// json or markdown.
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 2 when overall accuracy is below this fraction.
        #[arg(long)]
        fail_under: Option<f64>,
    },
    /// Serve the review API for a build directory.
    ReviewServe {
        #[arg(long)]
        build: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Listen on all interfaces instead of localhost only.
        #[arg(long)]
        expose: bool,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Parse { input, out } => {
            let n = commands::parse(&cfg, &input, &out)?;
            eprintln!("wrote {n} elements to {}", out.display());
        }
        Command::Sample { input, out, n, seed } => {
            if let Some(s) = seed {
                cfg.distribution.seed = s;
            }
            let got = commands::sample(&cfg, &input, &out, n)?;
            eprintln!("wrote {got} of {n} requested elements to {}", out.display());
        }
        Command::Annotate { input, out, pool } => {
            let n = commands::annotate(&cfg, &input, &out, pool.as_deref())?;
            eprintln!("wrote {n} marked images to {}", out.display());
        }
        Command::Synthesize {
            input,
            out,
            pool,
            mode,
            fixtures,
            record,
        } => {
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(f) = fixtures {
                cfg.fixture_dir = Some(f);
                cfg.record_fixtures = record;
            }
            cfg.validate().map_err(|e| UsageError(e.to_string()))?;
            let o = commands::synthesize(&cfg, &input, &out, pool.as_deref())?;
            eprintln!(
                "wrote {} records to {} ({} warnings)",
                o.records,
                out.display(),
                o.warnings
            );
            if !o.failed.is_empty() {
                anyhow::bail!("{} captures failed:\n  {}", o.failed.len(), o.failed.join("\n  "));
            }
        }
        Command::Stats { input, kind } => print!("{}", commands::stats(&input, kind)?),
        Command::BenchBuild {
            records,
            out,
            per_type,
            seed,
        } => {
            let n = commands::bench_build(&records, &out, per_type, seed)?;
            eprintln!("created review build {} with {n} tasks", out.display());
        }
        Command::BenchAssemble { build, out } => {
            let o = commands::bench_assemble(&build, &out)?;
            eprintln!(
                "assembled {} samples from {} tasks ({} reviewed)",
                o.samples, o.tasks, o.reviewed
            );
        }
        Command::Eval {
            bench,
            predictions,
            format,
            out,
            fail_under,
        } => print!("{}", commands::eval(&bench, &predictions, format, out.as_ref(), fail_under)?),
        Command::ReviewServe { build, port, expose } => {
            let store = ReviewStore::open(&build)?;
            let ip = if expose {
                IpAddr::V4(Ipv4Addr::UNSPECIFIED)
            } else {
                IpAddr::V4(Ipv4Addr::LOCALHOST)
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve::serve(store, SocketAddr::new(ip, port)))?;
        }
    }
    Ok(())
}

fn init_logging(json: bool) {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.log_json);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            if let Some(b) = e.downcast_ref::<BelowThreshold>() {
                eprintln!("{b}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
