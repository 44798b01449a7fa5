//! Prompt construction for both synthesis steps.
//!
//! The templates in `prompts/` are used verbatim; each step appends its input
//! after a fixed slot marker.

use serde::Serialize;

use super::ReferringExpressionSet;
use crate::error::{Error, Result};
use crate::model::UiElement;

pub const STEP1_TEMPLATE: &str = include_str!("../../prompts/step1.txt");
pub const STEP2_TEMPLATE: &str = include_str!("../../prompts/step2.txt");

pub const STEP1_SLOT: &str = "\n\nHere is the input element list:\n";
pub const STEP2_SLOT: &str = "\n\nHere is the input:\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    /// Whether the rendered Set-of-Marks screenshot must accompany the text.
    pub attach_image: bool,
}

/// One `id: type, content` line per element (`id: type` when there is no
/// content).
pub fn element_list(elements: &[UiElement]) -> String {
    elements
        .iter()
        .map(|e| {
            if e.content.is_empty() {
                format!("{}: {}", e.id, e.element_type)
            } else {
                format!("{}: {}, {}", e.id, e.element_type, e.content)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_step1_prompt(elements: &[UiElement]) -> Result<Prompt> {
    if elements.is_empty() {
        return Err(Error::invalid("step 1 prompt needs at least one element"));
    }
    Ok(Prompt {
        text: format!("{STEP1_TEMPLATE}{STEP1_SLOT}{}", element_list(elements)),
        attach_image: true,
    })
}

#[derive(Serialize)]
struct ElementsEnvelope<'a, T> {
    elements: &'a [T],
}

/// JSON with four-space indentation, matching the template layout.
pub(crate) fn to_indented_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn build_step2_prompt(sets: &[ReferringExpressionSet]) -> Result<Prompt> {
    if sets.is_empty() {
        return Err(Error::invalid("step 2 prompt needs at least one referring expression set"));
    }
    let input = to_indented_json(&ElementsEnvelope { elements: sets })?;
    Ok(Prompt {
        text: format!("{STEP2_TEMPLATE}{STEP2_SLOT}{input}"),
        attach_image: false,
    })
}
