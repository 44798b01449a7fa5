#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use groundsynth::synth::prompts::{STEP1_SLOT, STEP2_SLOT};
use groundsynth::synth::{ChatRequest, LlmClient};
use serde_json::{json, Value};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Deterministic stand-in for a chat model: answers both steps from the
/// element data embedded in the prompt, wrapped in prose and a code fence
/// the way real models tend to reply.
#[derive(Default)]
pub struct ScriptedClient {
    pub calls: AtomicUsize,
}

fn describe(kind: &str, content: &str) -> String {
    if content.is_empty() {
        format!("the {kind}")
    } else {
        format!("the {content} {kind}")
    }
}

fn step1(list: &str) -> String {
    let elements: Vec<Value> = list
        .lines()
        .map(|line| {
            let (id, rest) = line.split_once(": ").expect("id: type");
            let (kind, content) = rest.split_once(", ").unwrap_or((rest, ""));
            json!({
                "id": id,
                "shortDescription": rest,
                "fullDescription": format!("A {kind} labelled '{content}'; interacting with it acts on that control."),
                "explicitRefer": describe(kind, content),
                "implicitReferByElementFunction": format!("the control used for {}", if content.is_empty() { kind } else { content }),
                "implicitReferByNearElement": format!("the {kind} next to element {id}"),
            })
        })
        .collect();
    format!(
        "Sure! Here is the updated element list:\n```json\n{}\n```\n",
        serde_json::to_string_pretty(&json!({ "elements": elements })).unwrap()
    )
}

fn step2(input: &str) -> String {
    let v: Value = serde_json::from_str(input).expect("step 2 input JSON");
    let elements: Vec<Value> = v["elements"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            let short = e["shortDescription"].as_str().unwrap();
            let kind = short.split(", ").next().unwrap();
            let (action, desc, content) = match kind {
                "inputfield" => ("TYPE", "text to enter", "hello world"),
                "dropdown" => ("SELECT", "option to pick", "the second option"),
                "toggle" => ("TOGGLE", "ON or OFF", "ON"),
                _ => ("CLICK", "", ""),
            };
            let suffix = if content.is_empty() { String::new() } else { format!(" with {content}") };
            json!({
                "id": e["id"],
                "shortDescription": short,
                "instructionArgs": {
                    "actionType": action,
                    "actionContentDescription": desc,
                    "actionContent": content,
                },
                "convertedUserInstructionByElementFunction":
                    format!("I want to use {}{suffix}", e["implicitReferByElementFunction"].as_str().unwrap()),
                "convertedUserInstructionByNearElement":
                    format!("Go to {}{suffix}", e["implicitReferByNearElement"].as_str().unwrap()),
            })
        })
        .collect();
    format!(
        "```json\n{}\n```",
        serde_json::to_string_pretty(&json!({ "elements": elements })).unwrap()
    )
}

impl LlmClient for ScriptedClient {
    fn submit(&self, request: &ChatRequest) -> groundsynth::Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some((_, list)) = request.prompt.split_once(STEP1_SLOT) {
            assert!(request.image_png.is_some(), "step 1 must carry the marked screenshot");
            return Ok(step1(list));
        }
        if let Some((_, input)) = request.prompt.split_once(STEP2_SLOT) {
            assert!(request.image_png.is_none());
            return Ok(step2(input));
        }
        panic!("unrecognised prompt");
    }
}
