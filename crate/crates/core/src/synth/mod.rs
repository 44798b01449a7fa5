//! Two-step instruction synthesis.
//!
//! Step 1 sends a Set-of-Marks screenshot plus the parsed element list and
//! asks for five referring expressions per element. Step 2 sends those
//! expressions back (text only) and asks for action parameters and
//! first-person instructions. Geometry never passes through the LLM: every
//! record copies its box from the parsed element.

pub mod llm;
pub mod prompts;
pub mod response;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundingBox, ElementType, Platform, ScreenDims, UiElement};
use crate::parse::CaptureBundle;
use crate::som::{self, MarkStyle};

pub use llm::{ChatRequest, FixtureClient, LlmClient, LlmSettings, RecordingClient, RetryingClient};
pub use prompts::{build_step1_prompt, build_step2_prompt, Prompt};
pub use response::{
    parse_step1_response, parse_step2_response, ParseWarning, RejectReason, Rejection, Step1Outcome,
    Step2Entry, Step2Outcome,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferringExpressionSet {
    #[serde(rename = "id")]
    pub element_id: String,
    #[serde(rename = "shortDescription")]
    pub short_description: String,
    #[serde(rename = "fullDescription")]
    pub full_description: String,
    #[serde(rename = "explicitRefer")]
    pub explicit_refer: String,
    #[serde(rename = "implicitReferByElementFunction")]
    pub implicit_refer_by_element_function: String,
    #[serde(rename = "implicitReferByNearElement")]
    pub implicit_refer_by_near_element: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionType {
    Click,
    Type,
    Select,
    Toggle,
    /// Any other verb the model chose, uppercased.
    Other(String),
}

impl ActionType {
    pub fn normalize(raw: &str) -> Self {
        let up = raw.trim().to_uppercase();
        match up.as_str() {
            "CLICK" => ActionType::Click,
            "TYPE" => ActionType::Type,
            "SELECT" => ActionType::Select,
            "TOGGLE" => ActionType::Toggle,
            _ => ActionType::Other(up),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            ActionType::Click => "CLICK",
            ActionType::Type => "TYPE",
            ActionType::Select => "SELECT",
            ActionType::Toggle => "TOGGLE",
            ActionType::Other(s) => s,
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ActionType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ActionType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(ActionType::normalize(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionParams {
    pub action_type: ActionType,
    pub action_content_description: String,
    pub action_content: String,
}

impl ActionParams {
    /// Action implied by the element type alone, used when no LLM step
    /// produced one.
    pub fn default_for(element_type: ElementType) -> Self {
        let action_type = match element_type {
            ElementType::Text | ElementType::Icon => ActionType::Click,
            ElementType::Inputfield => ActionType::Type,
            ElementType::Dropdown => ActionType::Select,
            ElementType::Toggle => ActionType::Toggle,
        };
        Self {
            action_type,
            action_content_description: String::new(),
            action_content: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Implicitness {
    Explicit,
    ImplicitFunction,
    ImplicitNear,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub capture_id: String,
    pub element_id: String,
    pub llm_model_tag: String,
    pub pipeline_version: String,
}

/// `<screenshot, instruction, element box>` with its lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingRecord {
    pub screenshot_path: String,
    pub instruction: String,
    pub bbox: BoundingBox,
    pub element_type: ElementType,
    pub platform: Platform,
    pub implicitness: Implicitness,
    pub action: ActionParams,
    pub provenance: Provenance,
    pub screen: ScreenDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    /// Set-of-Marks, referring expressions, then instruction synthesis.
    #[default]
    Full,
    /// Referring expressions are used as instructions directly.
    NoInstructionSynthesis,
    /// No LLM at all: `type: content` attribute strings.
    NoLlm,
}

impl FromStr for SynthesisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SynthesisMode::Full),
            "no_instruction_synthesis" => Ok(SynthesisMode::NoInstructionSynthesis),
            "no_llm" => Ok(SynthesisMode::NoLlm),
            other => Err(Error::invalid(format!("unknown synthesis mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub mode: SynthesisMode,
    pub model: String,
    pub temperature: f64,
    pub style: MarkStyle,
    pub max_marks_per_image: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            mode: SynthesisMode::Full,
            model: LlmSettings::default().model,
            temperature: 0.2,
            style: MarkStyle::default(),
            max_marks_per_image: som::DEFAULT_MAX_MARKS,
        }
    }
}

/// Records for one capture plus everything that was dropped along the way.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaptureOutcome {
    pub records: Vec<GroundingRecord>,
    pub warnings: Vec<String>,
}

/// `type: content`, or just the type for elements without content.
pub fn attribute_instruction(el: &UiElement) -> String {
    if el.content.is_empty() {
        el.element_type.to_string()
    } else {
        format!("{}: {}", el.element_type, el.content)
    }
}

struct RecordFactory<'a> {
    bundle: &'a CaptureBundle,
    model_tag: &'a str,
}

impl RecordFactory<'_> {
    fn make(
        &self,
        el: &UiElement,
        instruction: &str,
        implicitness: Implicitness,
        action: ActionParams,
    ) -> GroundingRecord {
        GroundingRecord {
            screenshot_path: self.bundle.screenshot_path().to_string_lossy().into_owned(),
            instruction: instruction.to_string(),
            bbox: el.bbox,
            element_type: el.element_type,
            platform: self.bundle.platform(),
            implicitness,
            action,
            provenance: Provenance {
                capture_id: self.bundle.capture_id().to_string(),
                element_id: el.id.clone(),
                llm_model_tag: self.model_tag.to_string(),
                pipeline_version: crate::PIPELINE_VERSION.to_string(),
            },
            screen: self.bundle.screen(),
        }
    }
}

/// Run the configured mode over one capture.
///
/// Malformed LLM responses cost the affected batch only; transport failures
/// (after the client's own retries) fail the whole capture.
pub fn synthesize_capture(
    bundle: &CaptureBundle,
    elements: &[UiElement],
    client: &dyn LlmClient,
    settings: &SynthSettings,
) -> Result<CaptureOutcome> {
    let mut outcome = CaptureOutcome::default();
    if settings.mode == SynthesisMode::NoLlm {
        let f = RecordFactory {
            bundle,
            model_tag: "none",
        };
        outcome.records = elements
            .iter()
            .map(|el| {
                f.make(
                    el,
                    &attribute_instruction(el),
                    Implicitness::Explicit,
                    ActionParams::default_for(el.element_type),
                )
            })
            .collect();
        return Ok(outcome);
    }

    let f = RecordFactory {
        bundle,
        model_tag: &settings.model,
    };
    let shot = som::load_rgb(&bundle.screenshot_path())?;
    for group in som::batch_marks(elements.len(), settings.max_marks_per_image)? {
        let batch: Vec<UiElement> = group.iter().map(|&i| elements[i].clone()).collect();
        match run_batch(&batch, &shot, client, settings)? {
            BatchResult::Skipped(reason) => outcome.warnings.push(format!(
                "{}: batch starting at {} skipped: {reason}",
                bundle.capture_id(),
                batch[0].id
            )),
            BatchResult::Done {
                sets,
                actions,
                warnings,
            } => {
                outcome
                    .warnings
                    .extend(warnings.into_iter().map(|w| format!("{}: {w}", bundle.capture_id())));
                for el in &batch {
                    let Some(set) = sets.get(&el.id) else {
                        continue;
                    };
                    match settings.mode {
                        SynthesisMode::NoInstructionSynthesis => {
                            let action = ActionParams::default_for(el.element_type);
                            outcome.records.extend([
                                f.make(el, &set.explicit_refer, Implicitness::Explicit, action.clone()),
                                f.make(
                                    el,
                                    &set.implicit_refer_by_element_function,
                                    Implicitness::ImplicitFunction,
                                    action.clone(),
                                ),
                                f.make(
                                    el,
                                    &set.implicit_refer_by_near_element,
                                    Implicitness::ImplicitNear,
                                    action,
                                ),
                            ]);
                        }
                        _ => {
                            let Some(entry) = actions.get(&el.id) else {
                                continue;
                            };
                            outcome.records.extend([
                                f.make(
                                    el,
                                    &set.explicit_refer,
                                    Implicitness::Explicit,
                                    entry.action.clone(),
                                ),
                                f.make(
                                    el,
                                    &entry.instruction_by_function,
                                    Implicitness::ImplicitFunction,
                                    entry.action.clone(),
                                ),
                                f.make(
                                    el,
                                    &entry.instruction_by_near,
                                    Implicitness::ImplicitNear,
                                    entry.action.clone(),
                                ),
                            ]);
                        }
                    }
                }
            }
        }
    }
    Ok(outcome)
}

enum BatchResult {
    Skipped(String),
    Done {
        sets: BTreeMap<String, ReferringExpressionSet>,
        actions: BTreeMap<String, Step2Entry>,
        warnings: Vec<String>,
    },
}

fn is_response_problem(e: &Error) -> bool {
    matches!(e, Error::ResponseInvalid { .. } | Error::EmptyResult { .. })
}

fn run_batch(
    batch: &[UiElement],
    shot: &RgbImage,
    client: &dyn LlmClient,
    settings: &SynthSettings,
) -> Result<BatchResult> {
    let marked = som::render_marks(shot, batch, &settings.style)?;
    let step1 = build_step1_prompt(batch)?;
    let request = ChatRequest {
        model: settings.model.clone(),
        temperature: settings.temperature,
        prompt: step1.text,
        image_png: Some(som::encode_png(&marked)?),
    };
    let raw = client.submit(&request)?;
    let expected: BTreeSet<String> = batch.iter().map(|e| e.id.clone()).collect();
    let parsed = match parse_step1_response(&raw, &expected) {
        Ok(p) => p,
        Err(e) if is_response_problem(&e) => return Ok(BatchResult::Skipped(format!("step 1: {e}"))),
        Err(e) => return Err(e),
    };
    let mut warnings: Vec<String> = parsed
        .rejected
        .iter()
        .map(|r| format!("step 1 rejected entry {} ({:?}): {}", r.index, r.id, r.reason))
        .collect();
    let sets: BTreeMap<String, ReferringExpressionSet> = parsed
        .sets
        .iter()
        .map(|s| (s.element_id.clone(), s.clone()))
        .collect();
    if settings.mode == SynthesisMode::NoInstructionSynthesis {
        return Ok(BatchResult::Done {
            sets,
            actions: BTreeMap::new(),
            warnings,
        });
    }

    let step2 = build_step2_prompt(&parsed.sets)?;
    let request = ChatRequest {
        model: settings.model.clone(),
        temperature: settings.temperature,
        prompt: step2.text,
        image_png: None,
    };
    let raw = client.submit(&request)?;
    let parsed2 = match parse_step2_response(&raw, &sets) {
        Ok(p) => p,
        Err(e) if is_response_problem(&e) => return Ok(BatchResult::Skipped(format!("step 2: {e}"))),
        Err(e) => return Err(e),
    };
    warnings.extend(
        parsed2
            .rejected
            .iter()
            .map(|r| format!("step 2 rejected entry {} ({:?}): {}", r.index, r.id, r.reason)),
    );
    warnings.extend(parsed2.warnings.iter().map(|w| format!("{}: {}", w.id, w.warning)));
    let actions = parsed2
        .entries
        .into_iter()
        .map(|e| (e.element_id.clone(), e))
        .collect();
    Ok(BatchResult::Done {
        sets,
        actions,
        warnings,
    })
}

/// One capture's work item for [`synthesize_all`].
pub struct CaptureJob {
    pub bundle: CaptureBundle,
    pub elements: Vec<UiElement>,
}

#[derive(Debug, Default)]
pub struct SynthesisRun {
    /// Records in job order.
    pub records: Vec<GroundingRecord>,
    pub warnings: Vec<String>,
    /// `(capture_id, error)` for captures that failed entirely.
    pub failed: Vec<(String, String)>,
}

/// Process captures concurrently with at most `in_flight` in progress.
/// Output order follows `jobs`, independent of scheduling.
pub fn synthesize_all(
    jobs: &[CaptureJob],
    client: &dyn LlmClient,
    settings: &SynthSettings,
    in_flight: usize,
) -> Result<SynthesisRun> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(in_flight.max(1))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let results: Vec<Result<CaptureOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| synthesize_capture(&job.bundle, &job.elements, client, settings))
            .collect()
    });
    let mut run = SynthesisRun::default();
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(o) => {
                run.records.extend(o.records);
                run.warnings.extend(o.warnings);
            }
            Err(e) => {
                tracing::error!(capture = job.bundle.capture_id(), "capture failed: {e}");
                run.failed
                    .push((job.bundle.capture_id().to_string(), e.to_string()));
            }
        }
    }
    Ok(run)
}
