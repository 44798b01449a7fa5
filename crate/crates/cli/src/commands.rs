use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use groundsynth::config::PipelineConfig;
use groundsynth::dataset::{
    assemble_benchmark, build_review_tasks, dataset_stats, read_records, read_records_with_header,
    write_records, write_records_with_header, BenchmarkSample, PoolEntry, ReadMode, ReviewTask,
};
use groundsynth::eval::{render_report, score, Prediction, ReportFormat};
use groundsynth::parse::{load_bundles, CaptureBundle};
use groundsynth::review::{create_build, load_verdict_log, SCREENSHOT_DIR, TASKS_FILE, VERDICTS_FILE};
use groundsynth::sampler::{balanced_resample, stratified_bench_sample, SampleHeader};
use groundsynth::synth::llm::HttpClient;
use groundsynth::synth::{
    synthesize_all, CaptureJob, ChatRequest, FixtureClient, GroundingRecord, LlmClient, RecordingClient,
    RetryingClient, SynthesisMode,
};
use groundsynth::{som, UiElement, PIPELINE_VERSION};

use crate::{BelowThreshold, UsageError};

#[derive(Debug, Serialize, Deserialize)]
pub struct PoolHeader {
    pub pipeline_version: String,
    pub config_hash: String,
    pub captures: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampledHeader {
    pub pipeline_version: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub sample: SampleHeader,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecordsHeader {
    pub pipeline_version: String,
    pub config_hash: String,
    pub mode: SynthesisMode,
    pub failed_captures: Vec<String>,
}

fn read_pool(path: &Path) -> Result<Vec<PoolEntry>> {
    let (_, pool) = read_records_with_header::<serde_json::Value, PoolEntry>(path, ReadMode::Strict)?;
    Ok(pool.records)
}

pub fn parse(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<usize> {
    let bundles = load_bundles(input)?;
    if bundles.is_empty() {
        bail!("no capture bundles under {}", input.display());
    }
    let mut pool = Vec::new();
    for b in &bundles {
        let elements = b.parse(&cfg.parse)?;
        tracing::info!(capture = b.capture_id(), elements = elements.len(), "parsed");
        pool.extend(elements.into_iter().map(|element| PoolEntry {
            capture_id: b.capture_id().to_string(),
            platform: b.platform(),
            screenshot_path: b.screenshot_path().to_string_lossy().into_owned(),
            screen: b.screen(),
            element,
        }));
    }
    let header = PoolHeader {
        pipeline_version: PIPELINE_VERSION.into(),
        config_hash: cfg.hash(),
        captures: bundles.len(),
    };
    write_records_with_header(out, &header, &pool)?;
    Ok(pool.len())
}

pub fn sample(cfg: &PipelineConfig, input: &Path, out: &Path, n: usize) -> Result<usize> {
    let pool = read_pool(input)?;
    let sampled = balanced_resample(&pool, &cfg.distribution, n)?;
    let header = SampledHeader {
        pipeline_version: PIPELINE_VERSION.into(),
        config_hash: cfg.hash(),
        sample: sampled.header,
    };
    write_records_with_header(out, &header, &sampled.items)?;
    Ok(sampled.items.len())
}

/// Elements per capture: the pool's entries when a pool is given, otherwise
/// a fresh parse.
fn elements_for(
    cfg: &PipelineConfig,
    bundle: &CaptureBundle,
    pool: Option<&HashMap<String, Vec<UiElement>>>,
) -> Result<Vec<UiElement>> {
    Ok(match pool {
        Some(p) => p.get(bundle.capture_id()).cloned().unwrap_or_default(),
        None => bundle.parse(&cfg.parse)?,
    })
}

fn group_pool(path: Option<&Path>) -> Result<Option<HashMap<String, Vec<UiElement>>>> {
    let Some(path) = path else { return Ok(None) };
    let mut map: HashMap<String, Vec<UiElement>> = HashMap::new();
    for e in read_pool(path)? {
        map.entry(e.capture_id).or_default().push(e.element);
    }
    Ok(Some(map))
}

pub fn annotate(cfg: &PipelineConfig, input: &Path, out: &Path, pool: Option<&Path>) -> Result<usize> {
    let pool = group_pool(pool)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = 0;
    for b in load_bundles(input)? {
        let elements = elements_for(cfg, &b, pool.as_ref())?;
        let shot = som::load_rgb(&b.screenshot_path())?;
        for (k, group) in som::batch_marks(elements.len(), cfg.max_marks_per_image)?
            .into_iter()
            .enumerate()
        {
            let batch: Vec<UiElement> = group.iter().map(|&i| elements[i].clone()).collect();
            let marked = som::render_marks(&shot, &batch, &cfg.marks)?;
            let path = out.join(format!("{}-{k}.png", b.capture_id()));
            fs::write(&path, som::encode_png(&marked)?).with_context(|| format!("writing {}", path.display()))?;
            written += 1;
        }
    }
    Ok(written)
}

/// LLM client for the configured mode: fixture replay, recording, or live.
pub fn build_client(cfg: &PipelineConfig) -> Result<Box<dyn LlmClient>> {
    if cfg.mode == SynthesisMode::NoLlm {
        return Ok(Box::new(NoCalls));
    }
    let live = || -> Result<RetryingClient<HttpClient>> {
        Ok(RetryingClient::new(
            HttpClient::from_settings(&cfg.llm)?,
            cfg.llm.max_retries,
            Duration::from_millis(cfg.llm.backoff_base_ms),
        )
        .with_rate_limit(cfg.llm.requests_per_minute))
    };
    Ok(match (&cfg.fixture_dir, cfg.record_fixtures) {
        (Some(dir), false) => Box::new(FixtureClient::new(dir)),
        (Some(dir), true) => Box::new(RecordingClient::new(live()?, dir)?),
        (None, _) => Box::new(live()?),
    })
}

struct NoCalls;

impl LlmClient for NoCalls {
    fn submit(&self, _: &ChatRequest) -> groundsynth::Result<String> {
        Err(groundsynth::Error::Llm {
            message: "no_llm mode never calls the LLM".into(),
            retryable: false,
        })
    }
}

pub struct SynthesizeOutcome {
    pub records: usize,
    pub failed: Vec<String>,
    pub warnings: usize,
}

pub fn synthesize(cfg: &PipelineConfig, input: &Path, out: &Path, pool: Option<&Path>) -> Result<SynthesizeOutcome> {
    let pool = group_pool(pool)?;
    let mut jobs = Vec::new();
    for bundle in load_bundles(input)? {
        let elements = elements_for(cfg, &bundle, pool.as_ref())?;
        if elements.is_empty() {
            tracing::info!(capture = bundle.capture_id(), "no elements; skipping");
            continue;
        }
        jobs.push(CaptureJob { bundle, elements });
    }
    let client = build_client(cfg)?;
    let run = synthesize_all(&jobs, &client, &cfg.synth_settings(), cfg.concurrency.in_flight_captures)?;
    for w in &run.warnings {
        tracing::warn!("{w}");
    }
    let header = RecordsHeader {
        pipeline_version: PIPELINE_VERSION.into(),
        config_hash: cfg.hash(),
        mode: cfg.mode,
        failed_captures: run.failed.iter().map(|(id, _)| id.clone()).collect(),
    };
    write_records_with_header(out, &header, &run.records)?;
    Ok(SynthesizeOutcome {
        records: run.records.len(),
        failed: run.failed.iter().map(|(id, e)| format!("{id}: {e}")).collect(),
        warnings: run.warnings.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StatsKind {
    Pool,
    Records,
    Bench,
}

pub fn stats(input: &Path, kind: StatsKind) -> Result<String> {
    let stats = match kind {
        StatsKind::Pool => dataset_stats(&read_pool(input)?)?,
        StatsKind::Records => {
            let (_, r) = read_records_with_header::<serde_json::Value, GroundingRecord>(input, ReadMode::Strict)?;
            dataset_stats(&r.records)?
        }
        StatsKind::Bench => dataset_stats(&read_records::<BenchmarkSample>(input, ReadMode::Strict)?.records)?,
    };
    Ok(serde_json::to_string_pretty(&stats)? + "\n")
}

pub fn bench_build(records: &Path, out: &Path, per_type: usize, seed: u64) -> Result<usize> {
    if per_type == 0 {
        return Err(UsageError("--per-type must be at least 1".into()).into());
    }
    let (_, r) = read_records_with_header::<serde_json::Value, GroundingRecord>(records, ReadMode::Strict)?;
    let picked = stratified_bench_sample(&r.records, per_type, seed);
    let tasks = build_review_tasks(&picked);
    create_build(out, &tasks)?;
    Ok(tasks.len())
}

pub struct AssembleOutcome {
    pub samples: usize,
    pub tasks: usize,
    pub reviewed: usize,
}

pub fn bench_assemble(build: &Path, out: &Path) -> Result<AssembleOutcome> {
    // read-only: works while a review server holds the build open
    let tasks: Vec<ReviewTask> = read_records(build.join(TASKS_FILE), ReadMode::Strict)?.records;
    let verdicts: Vec<_> = load_verdict_log(&build.join(VERDICTS_FILE))?.into_values().collect();
    let mut samples = assemble_benchmark(&tasks, &verdicts)?;
    for s in &mut samples {
        s.screenshot_path = build
            .join(SCREENSHOT_DIR)
            .join(&s.screenshot_path)
            .to_string_lossy()
            .into_owned();
    }
    write_records(out, &samples)?;
    if !samples.is_empty() {
        let stats_path = out.with_file_name("stats.json");
        let stats = serde_json::to_string_pretty(&dataset_stats(&samples)?)?;
        fs::write(&stats_path, stats + "\n").with_context(|| format!("writing {}", stats_path.display()))?;
    }
    Ok(AssembleOutcome {
        samples: samples.len(),
        tasks: tasks.len(),
        reviewed: verdicts.len(),
    })
}

pub fn eval(
    bench: &Path,
    predictions: &Path,
    format: ReportFormat,
    out: Option<&PathBuf>,
    fail_under: Option<f64>,
) -> Result<String> {
    if let Some(t) = fail_under {
        if !(0.0..=1.0).contains(&t) {
            return Err(UsageError(format!("--fail-under {t} is outside [0, 1]")).into());
        }
    }
    let bench: Vec<BenchmarkSample> = read_records(bench, ReadMode::Strict)?.records;
    let preds: Vec<Prediction> = read_records(predictions, ReadMode::Strict)?.records;
    let report = score(&bench, &preds)?;
    let text = render_report(&report, format);
    if let Some(path) = out {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(threshold) = fail_under {
        if report.overall_accuracy < threshold {
            return Err(BelowThreshold {
                accuracy: report.overall_accuracy,
                threshold,
            }
            .into());
        }
    }
    Ok(text)
}
