mod common;

use std::collections::HashMap;

use common::{fixtures, ScriptedClient};
use groundsynth::parse::{load_bundles, ParseConfig};
use groundsynth::synth::{
    synthesize_all, synthesize_capture, CaptureJob, ChatRequest, FixtureClient, Implicitness, LlmClient,
    RecordingClient, SynthSettings, SynthesisMode,
};
use groundsynth::{Error, UiElement};

fn jobs() -> Vec<CaptureJob> {
    load_bundles(fixtures().join("captures"))
        .unwrap()
        .into_iter()
        .map(|bundle| {
            let elements = bundle.parse(&ParseConfig::default()).unwrap();
            CaptureJob { bundle, elements }
        })
        .collect()
}

fn settings(mode: SynthesisMode) -> SynthSettings {
    SynthSettings {
        mode,
        ..Default::default()
    }
}

/// Rewrites `tests/fixtures/llm` from the scripted model. Run after changing
/// prompts, mark rendering or the capture fixtures.
#[test]
#[ignore]
fn regenerate_llm_fixtures() {
    let dir = fixtures().join("llm");
    let _ = std::fs::remove_dir_all(&dir);
    let client = RecordingClient::new(ScriptedClient::default(), &dir).unwrap();
    for mode in [SynthesisMode::Full, SynthesisMode::NoInstructionSynthesis] {
        let run = synthesize_all(&jobs(), &client, &settings(mode), 1).unwrap();
        assert!(run.failed.is_empty());
    }
}

#[test]
fn fixture_store_replays_scripted_model() {
    let jobs = jobs();
    assert_eq!(jobs.len(), 3);
    let live = synthesize_all(&jobs, &ScriptedClient::default(), &settings(SynthesisMode::Full), 2).unwrap();
    let replay = synthesize_all(
        &jobs,
        &FixtureClient::new(fixtures().join("llm")),
        &settings(SynthesisMode::Full),
        3,
    )
    .unwrap();
    assert!(replay.failed.is_empty(), "{:?}", replay.failed);
    assert_eq!(live.records, replay.records);

    let total: usize = jobs.iter().map(|j| j.elements.len()).sum();
    assert_eq!(replay.records.len(), 3 * total);
    let by_key: HashMap<(String, String), &UiElement> = jobs
        .iter()
        .flat_map(|j| {
            j.elements
                .iter()
                .map(move |e| ((j.bundle.capture_id().to_string(), e.id.clone()), e))
        })
        .collect();
    for r in &replay.records {
        let src = by_key[&(r.provenance.capture_id.clone(), r.provenance.element_id.clone())];
        assert_eq!(r.bbox, src.bbox);
        assert_eq!(r.element_type, src.element_type);
        assert_eq!(r.provenance.llm_model_tag, "gpt-4o");
    }
}

#[test]
fn output_order_is_independent_of_parallelism() {
    let jobs = jobs();
    let client = FixtureClient::new(fixtures().join("llm"));
    let one = synthesize_all(&jobs, &client, &settings(SynthesisMode::Full), 1).unwrap();
    let many = synthesize_all(&jobs, &client, &settings(SynthesisMode::Full), 8).unwrap();
    assert_eq!(one.records, many.records);
}

#[test]
fn ablation_modes() {
    let jobs = jobs();
    let client = FixtureClient::new(fixtures().join("llm"));

    let no_synth = synthesize_all(&jobs, &client, &settings(SynthesisMode::NoInstructionSynthesis), 2).unwrap();
    assert!(no_synth.failed.is_empty());
    let explicit: Vec<_> = no_synth
        .records
        .iter()
        .filter(|r| r.implicitness == Implicitness::Explicit)
        .collect();
    let total: usize = jobs.iter().map(|j| j.elements.len()).sum();
    assert_eq!(explicit.len(), total);
    // the scripted model's explicit RE is "the <content> <type>"
    assert!(explicit.iter().any(|r| r.instruction == "the Subscribe text"));

    let no_llm = synthesize_all(&jobs, &client, &settings(SynthesisMode::NoLlm), 2).unwrap();
    assert_eq!(no_llm.records.len(), total);
    for r in &no_llm.records {
        assert_eq!(r.provenance.llm_model_tag, "none");
        assert_eq!(r.implicitness, Implicitness::Explicit);
    }
    let instructions: Vec<_> = no_llm.records.iter().map(|r| r.instruction.as_str()).collect();
    assert!(instructions.contains(&"text: Subscribe"));
    assert!(instructions.contains(&"icon: Account"));
}

struct Canned(&'static str);

impl LlmClient for Canned {
    fn submit(&self, _: &ChatRequest) -> groundsynth::Result<String> {
        Ok(self.0.to_string())
    }
}

struct Down;

impl LlmClient for Down {
    fn submit(&self, _: &ChatRequest) -> groundsynth::Result<String> {
        Err(Error::Llm {
            message: "connection refused".into(),
            retryable: true,
        })
    }
}

#[test]
fn malformed_response_skips_batch_only() {
    let job = &jobs()[0];
    let out = synthesize_capture(&job.bundle, &job.elements, &Canned("I cannot help with that."), &settings(SynthesisMode::Full))
        .unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.warnings.len(), 1);
    assert!(out.warnings[0].contains("step 1"), "{}", out.warnings[0]);
}

#[test]
fn transport_failure_fails_capture() {
    let run = synthesize_all(&jobs(), &Down, &settings(SynthesisMode::Full), 2).unwrap();
    assert!(run.records.is_empty());
    assert_eq!(run.failed.len(), 3);
}

#[test]
fn missing_fixture_is_reported() {
    let empty = tempfile::tempdir().unwrap();
    let run = synthesize_all(&jobs(), &FixtureClient::new(empty.path()), &settings(SynthesisMode::Full), 1).unwrap();
    assert_eq!(run.failed.len(), 3);
    assert!(run.failed[0].1.contains("fixture missing"));
}
