//! On-disk formats, dataset statistics and benchmark assembly.
//!
//! Every collection is stored as JSONL: one UTF-8 JSON object per line, with
//! fields in declaration order. Writers take an exclusive advisory lock on the
//! target file for the duration of the write.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    element_to_screen_ratio, ratio_bucket, BoundingBox, ElementType, Platform, RatioBucket,
    ScreenDims, UiElement,
};
use crate::synth::{GroundingRecord, Implicitness};

/// How `read_records` treats lines that fail to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

pub fn write_records<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    write_lines(path.as_ref(), None::<&()>, records)
}

pub fn read_records<T: DeserializeOwned>(
    path: impl AsRef<Path>,
    mode: ReadMode,
) -> Result<ReadOutcome<T>> {
    let (_, outcome) = read_lines::<(), T>(path.as_ref(), mode, false)?;
    Ok(outcome)
}

/// Write JSONL whose first line is `{"header": <header>}`.
pub fn write_records_with_header<H: Serialize, T: Serialize>(
    path: impl AsRef<Path>,
    header: &H,
    records: &[T],
) -> Result<()> {
    write_lines(path.as_ref(), Some(header), records)
}

/// Read JSONL written by [`write_records_with_header`]. A file without a
/// header line yields `None`.
pub fn read_records_with_header<H: DeserializeOwned, T: DeserializeOwned>(
    path: impl AsRef<Path>,
    mode: ReadMode,
) -> Result<(Option<H>, ReadOutcome<T>)> {
    read_lines(path.as_ref(), mode, true)
}

#[derive(Serialize, Deserialize)]
struct HeaderLine<H> {
    header: H,
}

fn write_lines<H: Serialize, T: Serialize>(
    path: &Path,
    header: Option<&H>,
    records: &[T],
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(false)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.lock().map_err(|e| Error::io(path, e))?;
    file.set_len(0).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(&file);
    let io = |e| Error::io(path, e);
    if let Some(h) = header {
        serde_json::to_writer(&mut w, &HeaderLine { header: h })?;
        w.write_all(b"\n").map_err(io)?;
    }
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)?;
    drop(w);
    file.sync_all().map_err(io)?;
    file.unlock().map_err(io)?;
    Ok(())
}

fn read_lines<H: DeserializeOwned, T: DeserializeOwned>(
    path: &Path,
    mode: ReadMode,
    expect_header: bool,
) -> Result<(Option<H>, ReadOutcome<T>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    let mut skipped = 0;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if expect_header && idx == 0 {
            if let Ok(h) = serde_json::from_str::<HeaderLine<H>>(&line) {
                header = Some(h.header);
                continue;
            }
        }
        match serde_json::from_str::<T>(&line) {
            Ok(r) => records.push(r),
            Err(e) => match mode {
                ReadMode::Strict => {
                    return Err(Error::Record {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        reason: e.to_string(),
                    })
                }
                ReadMode::Lenient => {
                    tracing::warn!(path = %path.display(), line = idx + 1, "skipping malformed record: {e}");
                    skipped += 1;
                }
            },
        }
    }
    Ok((header, ReadOutcome { records, skipped }))
}

/// A parsed element together with the capture it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub capture_id: String,
    pub platform: Platform,
    pub screenshot_path: String,
    pub screen: ScreenDims,
    pub element: UiElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewTask {
    pub task_id: String,
    pub screenshot_path: String,
    pub bbox: BoundingBox,
    pub instruction: String,
    pub element_type: ElementType,
    pub platform: Platform,
    pub status: TaskStatus,
    /// Screenshot size, needed to recompute the ratio of corrected boxes.
    pub screen: ScreenDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Valid,
    Slight,
    Serious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionKind {
    Explicit,
    Implicit,
}

impl InstructionKind {
    pub const ALL: [InstructionKind; 2] = [InstructionKind::Explicit, InstructionKind::Implicit];

    pub fn label(&self) -> &'static str {
        match self {
            InstructionKind::Explicit => "Explicit",
            InstructionKind::Implicit => "Implicit",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            InstructionKind::Explicit => "explicit",
            InstructionKind::Implicit => "implicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub task_id: String,
    pub box_quality: Quality,
    pub instruction_quality: Quality,
    pub instruction_kind: InstructionKind,
    #[serde(default)]
    pub corrected_bbox: Option<BoundingBox>,
    #[serde(default)]
    pub corrected_instruction: Option<String>,
    #[serde(default)]
    pub reviewer_tag: String,
    #[serde(default)]
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl ReviewVerdict {
    pub fn is_serious(&self) -> bool {
        self.box_quality == Quality::Serious || self.instruction_quality == Quality::Serious
    }

    /// Check the correction invariants; with a task, corrected boxes must
    /// also fit its screenshot.
    pub fn validate(&self, task: Option<&ReviewTask>) -> std::result::Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        let mut err = |field: &str, message: &str| {
            errors.push(FieldError {
                field: field.into(),
                message: message.into(),
            })
        };
        if self.task_id.is_empty() {
            err("task_id", "must not be empty");
        }
        if let Some(task) = task {
            if task.task_id != self.task_id {
                err("task_id", "does not match the addressed task");
            }
        }
        if self.box_quality == Quality::Slight {
            match (self.corrected_bbox, task) {
                (None, _) => err("corrected_bbox", "required when box_quality is slight"),
                (Some(b), Some(t)) if !b.fits(t.screen) => {
                    err("corrected_bbox", "lies outside the screenshot")
                }
                _ => {}
            }
        }
        if self.instruction_quality == Quality::Slight
            && self
                .corrected_instruction
                .as_deref()
                .is_none_or(|s| s.trim().is_empty())
        {
            err(
                "corrected_instruction",
                "required when instruction_quality is slight",
            );
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub sample_id: String,
    pub screenshot_path: String,
    pub instruction: String,
    pub bbox: BoundingBox,
    pub element_type: ElementType,
    pub platform: Platform,
    pub implicitness: InstructionKind,
    pub ratio: f64,
}

impl BenchmarkSample {
    pub fn ratio_bucket(&self) -> RatioBucket {
        ratio_bucket(self.ratio).unwrap_or(RatioBucket::Large)
    }
}

/// One review task per grounding record, ids `t00000..` in record order.
pub fn build_review_tasks(records: &[GroundingRecord]) -> Vec<ReviewTask> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| ReviewTask {
            task_id: format!("t{i:05}"),
            screenshot_path: r.screenshot_path.clone(),
            bbox: r.bbox,
            instruction: r.instruction.clone(),
            element_type: r.element_type,
            platform: r.platform,
            status: TaskStatus::Pending,
            screen: r.screen,
        })
        .collect()
}

/// Turn reviewed tasks into benchmark samples.
///
/// Tasks with a serious verdict in either dimension are dropped, slight
/// verdicts have their corrections applied, and tasks without a verdict are
/// excluded. Output is sorted by task id.
pub fn assemble_benchmark(
    tasks: &[ReviewTask],
    verdicts: &[ReviewVerdict],
) -> Result<Vec<BenchmarkSample>> {
    let by_id: HashMap<&str, &ReviewTask> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    if by_id.len() != tasks.len() {
        return Err(Error::Data("duplicate task_id in task list".into()));
    }
    let mut verdict_for: HashMap<&str, &ReviewVerdict> = HashMap::new();
    for v in verdicts {
        let Some(task) = by_id.get(v.task_id.as_str()) else {
            return Err(Error::Data(format!("verdict for unknown task {}", v.task_id)));
        };
        if verdict_for.insert(v.task_id.as_str(), v).is_some() {
            return Err(Error::Data(format!("duplicate verdict for task {}", v.task_id)));
        }
        if let Err(errs) = v.validate(Some(task)) {
            let fields: Vec<_> = errs.iter().map(|e| e.field.as_str()).collect();
            return Err(Error::Data(format!(
                "invalid verdict for task {}: {}",
                v.task_id,
                fields.join(", ")
            )));
        }
    }

    let mut ordered: Vec<&ReviewTask> = tasks.iter().collect();
    ordered.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let mut out = Vec::new();
    for task in ordered {
        let Some(v) = verdict_for.get(task.task_id.as_str()) else {
            continue;
        };
        if v.is_serious() {
            continue;
        }
        let bbox = match v.box_quality {
            Quality::Slight => v.corrected_bbox.unwrap_or(task.bbox),
            _ => task.bbox,
        };
        let instruction = match v.instruction_quality {
            Quality::Slight => v
                .corrected_instruction
                .clone()
                .unwrap_or_else(|| task.instruction.clone()),
            _ => task.instruction.clone(),
        };
        out.push(BenchmarkSample {
            sample_id: task.task_id.clone(),
            screenshot_path: task.screenshot_path.clone(),
            instruction,
            bbox,
            element_type: task.element_type,
            platform: task.platform,
            implicitness: v.instruction_kind,
            ratio: element_to_screen_ratio(bbox, task.screen)?,
        });
    }
    Ok(out)
}

/// Row view shared by every dataset that statistics are computed over.
pub trait StatsRow {
    fn element_type(&self) -> ElementType;
    fn platform(&self) -> Platform;
    fn screenshot(&self) -> &str;
    fn ratio_bucket(&self) -> RatioBucket;
    /// `None` for rows that carry no instruction (raw element pools).
    fn implicitness(&self) -> Option<InstructionKind>;
}

impl StatsRow for PoolEntry {
    fn element_type(&self) -> ElementType {
        self.element.element_type
    }
    fn platform(&self) -> Platform {
        self.platform
    }
    fn screenshot(&self) -> &str {
        &self.screenshot_path
    }
    fn ratio_bucket(&self) -> RatioBucket {
        self.element.ratio_bucket()
    }
    fn implicitness(&self) -> Option<InstructionKind> {
        None
    }
}

impl StatsRow for GroundingRecord {
    fn element_type(&self) -> ElementType {
        self.element_type
    }
    fn platform(&self) -> Platform {
        self.platform
    }
    fn screenshot(&self) -> &str {
        &self.screenshot_path
    }
    fn ratio_bucket(&self) -> RatioBucket {
        element_to_screen_ratio(self.bbox, self.screen)
            .and_then(ratio_bucket)
            .unwrap_or(RatioBucket::Large)
    }
    fn implicitness(&self) -> Option<InstructionKind> {
        Some(match self.implicitness {
            Implicitness::Explicit => InstructionKind::Explicit,
            Implicitness::ImplicitFunction | Implicitness::ImplicitNear => {
                InstructionKind::Implicit
            }
        })
    }
}

impl StatsRow for BenchmarkSample {
    fn element_type(&self) -> ElementType {
        self.element_type
    }
    fn platform(&self) -> Platform {
        self.platform
    }
    fn screenshot(&self) -> &str {
        &self.screenshot_path
    }
    fn ratio_bucket(&self) -> RatioBucket {
        BenchmarkSample::ratio_bucket(self)
    }
    fn implicitness(&self) -> Option<InstructionKind> {
        Some(self.implicitness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub screenshots: usize,
    pub instructions: usize,
    pub by_element_type: BTreeMap<ElementType, Share>,
    pub by_platform: BTreeMap<Platform, Share>,
    pub by_implicitness: BTreeMap<InstructionKind, Share>,
    pub by_ratio_bucket: BTreeMap<RatioBucket, Share>,
    pub non_text_fraction: f64,
    /// Fraction of implicit instructions; `None` for pools without instructions.
    pub implicit_fraction: Option<f64>,
}

fn shares<K: Ord + Copy>(keys: impl Iterator<Item = K>, total: usize) -> BTreeMap<K, Share> {
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(k, count)| {
            (
                k,
                Share {
                    count,
                    fraction: count as f64 / total as f64,
                },
            )
        })
        .collect()
}

pub fn dataset_stats<R: StatsRow>(rows: &[R]) -> Result<DatasetStats> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot compute statistics of an empty dataset"));
    }
    let n = rows.len();
    let screenshots: BTreeSet<&str> = rows.iter().map(StatsRow::screenshot).collect();
    let by_element_type = shares(rows.iter().map(StatsRow::element_type), n);
    let text = by_element_type.get(&ElementType::Text).map_or(0, |s| s.count);
    let with_kind: Vec<InstructionKind> = rows.iter().filter_map(StatsRow::implicitness).collect();
    let implicit_fraction = (!with_kind.is_empty()).then(|| {
        with_kind
            .iter()
            .filter(|k| **k == InstructionKind::Implicit)
            .count() as f64
            / with_kind.len() as f64
    });
    Ok(DatasetStats {
        screenshots: screenshots.len(),
        instructions: with_kind.len(),
        by_platform: shares(rows.iter().map(StatsRow::platform), n),
        by_implicitness: shares(with_kind.iter().copied(), with_kind.len().max(1)),
        by_ratio_bucket: shares(rows.iter().map(StatsRow::ratio_bucket), n),
        non_text_fraction: 1.0 - text as f64 / n as f64,
        implicit_fraction,
        by_element_type,
    })
}
