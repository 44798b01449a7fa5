//! Click-accuracy scoring with per-platform, per-type, per-implicitness and
//! per-ratio-bucket breakdowns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{BenchmarkSample, InstructionKind};
use crate::error::{Error, Result};
use crate::model::{bbox_center, point_in_box, BoundingBox, ElementType, Platform, Point, RatioBucket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    Point(Point),
    Bbox(BoundingBox),
}

impl Payload {
    /// The point that gets scored: boxes collapse to their center.
    pub fn click_point(&self) -> Point {
        match *self {
            Payload::Point(p) => p,
            Payload::Bbox(b) => bbox_center(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    #[serde(flatten)]
    pub payload: Payload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_model_output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceStats {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl SliceStats {
    fn add(&mut self, hit: bool) {
        self.n += 1;
        self.correct += usize::from(hit);
        self.accuracy = self.correct as f64 / self.n as f64;
    }
}

/// Only non-empty slices are present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Slices {
    pub platform: BTreeMap<Platform, SliceStats>,
    pub element_type: BTreeMap<ElementType, SliceStats>,
    pub implicitness: BTreeMap<InstructionKind, SliceStats>,
    pub ratio_bucket: BTreeMap<RatioBucket, SliceStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub correct: usize,
    pub overall_accuracy: f64,
    pub slices: Slices,
    pub unmatched_predictions: usize,
    pub missing_predictions: usize,
}

fn bump<K: Ord>(map: &mut BTreeMap<K, SliceStats>, key: K, hit: bool) {
    map.entry(key)
        .or_insert(SliceStats {
            n: 0,
            correct: 0,
            accuracy: 0.0,
        })
        .add(hit);
}

/// Score predictions against a benchmark. Samples without a prediction count
/// as misses; predictions for unknown samples are counted and ignored.
pub fn score(bench: &[BenchmarkSample], predictions: &[Prediction]) -> Result<EvalReport> {
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.sample_id.as_str(), p).is_some() {
            return Err(Error::invalid(format!("duplicate prediction for sample {}", p.sample_id)));
        }
    }
    let known: BTreeSet<&str> = bench.iter().map(|s| s.sample_id.as_str()).collect();
    if known.len() != bench.len() {
        return Err(Error::invalid("benchmark sample ids are not unique"));
    }

    let mut slices = Slices::default();
    let mut correct = 0;
    let mut missing = 0;
    for s in bench {
        let hit = match by_id.get(s.sample_id.as_str()) {
            Some(p) => point_in_box(p.payload.click_point(), s.bbox),
            None => {
                missing += 1;
                false
            }
        };
        correct += usize::from(hit);
        bump(&mut slices.platform, s.platform, hit);
        bump(&mut slices.element_type, s.element_type, hit);
        bump(&mut slices.implicitness, s.implicitness, hit);
        bump(&mut slices.ratio_bucket, s.ratio_bucket(), hit);
    }
    let unmatched = by_id.keys().filter(|id| !known.contains(*id)).count();
    Ok(EvalReport {
        n: bench.len(),
        correct,
        overall_accuracy: if bench.is_empty() {
            0.0
        } else {
            correct as f64 / bench.len() as f64
        },
        slices,
        unmatched_predictions: unmatched,
        missing_predictions: missing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// Element types in report column order.
const TYPE_ORDER: [ElementType; 5] = [
    ElementType::Text,
    ElementType::Icon,
    ElementType::Dropdown,
    ElementType::Inputfield,
    ElementType::Toggle,
];

fn table<'a, K: Ord + 'a>(
    out: &mut String,
    title: &str,
    map: &BTreeMap<K, SliceStats>,
    rows: impl IntoIterator<Item = (&'a K, &'a str)>,
) {
    let _ = writeln!(out, "\n## {title}\n");
    out.push_str("| Slice | n | Accuracy (%) |\n|---|---:|---:|\n");
    for (key, label) in rows {
        if let Some(s) = map.get(key) {
            let _ = writeln!(out, "| {label} | {} | {:.1} |", s.n, s.accuracy * 100.0);
        }
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => {
            let mut out = String::from("# Grounding accuracy\n\n");
            let _ = writeln!(
                out,
                "Overall: {:.1}% ({}/{}); missing predictions: {}; unmatched predictions: {}",
                report.overall_accuracy * 100.0,
                report.correct,
                report.n,
                report.missing_predictions,
                report.unmatched_predictions
            );
            let platforms: Vec<_> = Platform::ALL.iter().map(|p| (p, p.label())).collect();
            table(&mut out, "Platform", &report.slices.platform, platforms.iter().map(|(k, l)| (*k, *l)));
            let types: Vec<_> = TYPE_ORDER.iter().map(|t| (t, t.label())).collect();
            table(&mut out, "Element type", &report.slices.element_type, types.iter().map(|(k, l)| (*k, *l)));
            let kinds: Vec<_> = InstructionKind::ALL.iter().map(|k| (k, k.label())).collect();
            table(&mut out, "Implicitness", &report.slices.implicitness, kinds.iter().map(|(k, l)| (*k, *l)));
            let buckets: Vec<_> = RatioBucket::ALL.iter().map(|b| (b, b.label())).collect();
            table(
                &mut out,
                "Element-to-screen ratio",
                &report.slices.ratio_bucket,
                buckets.iter().map(|(k, l)| (*k, *l)),
            );
            out
        }
    }
}

/// A point that is guaranteed to miss `b`: just left of it, just above it,
/// or at its exclusive bottom-right corner when it touches the origin.
fn miss_point(b: BoundingBox) -> Point {
    if b.x1 > 0 {
        Point::new(i64::from(b.x1) - 1, i64::from(b.y1))
    } else if b.y1 > 0 {
        Point::new(i64::from(b.x1), i64::from(b.y1) - 1)
    } else {
        Point::new(i64::from(b.x2), i64::from(b.y2))
    }
}

/// Synthetic predictor that hits exactly `floor(hit_fraction * n)` samples,
/// chosen by `seed`.
pub fn oracle_model(bench: &[BenchmarkSample], hit_fraction: f64, seed: u64) -> Result<Vec<Prediction>> {
    if !(0.0..=1.0).contains(&hit_fraction) {
        return Err(Error::invalid(format!("hit_fraction {hit_fraction} outside [0, 1]")));
    }
    let hits = (hit_fraction * bench.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: BTreeSet<usize> = index::sample(&mut rng, bench.len(), hits).into_iter().collect();
    Ok(bench
        .iter()
        .enumerate()
        .map(|(i, s)| Prediction {
            sample_id: s.sample_id.clone(),
            payload: Payload::Point(if chosen.contains(&i) {
                bbox_center(s.bbox)
            } else {
                miss_point(s.bbox)
            }),
            raw_model_output: None,
        })
        .collect())
}
