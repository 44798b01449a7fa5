//! Validation of LLM responses for both steps.
//!
//! Repair is limited to stripping Markdown code fences and surrounding prose;
//! the remaining text must parse as strict JSON. Each entry is then either
//! accepted in full or rejected with a machine-readable reason.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ActionParams, ActionType, ReferringExpressionSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RejectReason {
    NotAnObject,
    MissingField(&'static str),
    EmptyField(&'static str),
    UnknownId,
    DuplicateId,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NotAnObject => f.write_str("not-an-object"),
            RejectReason::MissingField(name) => write!(f, "missing-field:{name}"),
            RejectReason::EmptyField(name) => write!(f, "empty-field:{name}"),
            RejectReason::UnknownId => f.write_str("unknown-id"),
            RejectReason::DuplicateId => f.write_str("duplicate-id"),
        }
    }
}

impl Serialize for RejectReason {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// Position of the entry in the response array.
    pub index: usize,
    pub id: Option<String>,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub id: String,
    pub warning: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step1Outcome {
    pub sets: Vec<ReferringExpressionSet>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2Entry {
    pub element_id: String,
    pub action: ActionParams,
    pub instruction_by_function: String,
    pub instruction_by_near: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step2Outcome {
    pub entries: Vec<Step2Entry>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<ParseWarning>,
}

/// Remove a Markdown code fence and any prose around the JSON payload.
pub fn strip_to_json(raw: &str) -> &str {
    let mut text = raw.trim();
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        // skip the language tag on the opening fence line
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        text = match body.find("```") {
            Some(end) => &body[..end],
            None => body,
        };
    }
    let open = text.find(['{', '[']);
    let close = text.rfind(['}', ']']);
    match (open, close) {
        (Some(a), Some(b)) if a <= b => &text[a..=b],
        _ => text.trim(),
    }
}

/// Parse the response into its list of entries. Accepts both
/// `{"elements": [...]}` and a bare array.
fn entries(raw: &str) -> Result<Vec<Value>> {
    let invalid = |reason: String| Error::ResponseInvalid {
        reason,
        raw: raw.to_string(),
    };
    let value: Value =
        serde_json::from_str(strip_to_json(raw)).map_err(|e| invalid(format!("not valid JSON: {e}")))?;
    match value {
        Value::Array(items) => Ok(items),
        Value::Object(mut obj) => match obj.remove("elements") {
            Some(Value::Array(items)) => Ok(items),
            _ => Err(invalid("object response without an \"elements\" array".into())),
        },
        _ => Err(invalid("response is neither an object nor an array".into())),
    }
}

/// Required non-empty string field.
fn text_field(obj: &Map<String, Value>, name: &'static str) -> std::result::Result<String, RejectReason> {
    match obj.get(name) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(Value::String(_)) => Err(RejectReason::EmptyField(name)),
        _ => Err(RejectReason::MissingField(name)),
    }
}

/// Optional string field; absent or null reads as empty.
fn optional_text(obj: &Map<String, Value>, name: &'static str) -> std::result::Result<String, RejectReason> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(String::new()),
        Some(Value::String(s)) => Ok(s.trim().to_string()),
        Some(_) => Err(RejectReason::MissingField(name)),
    }
}

/// Shared id checks; returns the id when it is known and first-seen.
fn check_id(
    obj: &Map<String, Value>,
    expected: &BTreeSet<String>,
    seen: &mut HashSet<String>,
) -> std::result::Result<String, (Option<String>, RejectReason)> {
    let id = text_field(obj, "id").map_err(|r| (None, r))?;
    if !expected.contains(&id) {
        return Err((Some(id), RejectReason::UnknownId));
    }
    if !seen.insert(id.clone()) {
        return Err((Some(id), RejectReason::DuplicateId));
    }
    Ok(id)
}

pub fn parse_step1_response(raw: &str, expected_ids: &BTreeSet<String>) -> Result<Step1Outcome> {
    let mut sets = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for (index, item) in entries(raw)?.into_iter().enumerate() {
        let Value::Object(obj) = item else {
            rejected.push(Rejection {
                index,
                id: None,
                reason: RejectReason::NotAnObject,
            });
            continue;
        };
        let id = match check_id(&obj, expected_ids, &mut seen) {
            Ok(id) => id,
            Err((id, reason)) => {
                rejected.push(Rejection { index, id, reason });
                continue;
            }
        };
        let fields = (|| {
            Ok::<_, RejectReason>(ReferringExpressionSet {
                element_id: id.clone(),
                short_description: text_field(&obj, "shortDescription")?,
                full_description: text_field(&obj, "fullDescription")?,
                explicit_refer: text_field(&obj, "explicitRefer")?,
                implicit_refer_by_element_function: text_field(&obj, "implicitReferByElementFunction")?,
                implicit_refer_by_near_element: text_field(&obj, "implicitReferByNearElement")?,
            })
        })();
        match fields {
            Ok(set) => sets.push(set),
            Err(reason) => rejected.push(Rejection {
                index,
                id: Some(id),
                reason,
            }),
        }
    }
    if sets.is_empty() {
        return Err(Error::EmptyResult {
            rejected: rejected.len(),
        });
    }
    Ok(Step1Outcome { sets, rejected })
}

pub fn parse_step2_response(
    raw: &str,
    res_by_id: &BTreeMap<String, ReferringExpressionSet>,
) -> Result<Step2Outcome> {
    let expected: BTreeSet<String> = res_by_id.keys().cloned().collect();
    let mut out = Vec::new();
    let mut rejected = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for (index, item) in entries(raw)?.into_iter().enumerate() {
        let Value::Object(obj) = item else {
            rejected.push(Rejection {
                index,
                id: None,
                reason: RejectReason::NotAnObject,
            });
            continue;
        };
        let id = match check_id(&obj, &expected, &mut seen) {
            Ok(id) => id,
            Err((id, reason)) => {
                rejected.push(Rejection { index, id, reason });
                continue;
            }
        };
        let parsed = (|| {
            let Some(Value::Object(args)) = obj.get("instructionArgs") else {
                return Err(RejectReason::MissingField("instructionArgs"));
            };
            let action_type = ActionType::normalize(&text_field(args, "actionType")?);
            let action = ActionParams {
                action_type,
                action_content_description: optional_text(args, "actionContentDescription")?,
                action_content: optional_text(args, "actionContent")?,
            };
            Ok(Step2Entry {
                element_id: id.clone(),
                action,
                instruction_by_function: text_field(&obj, "convertedUserInstructionByElementFunction")?,
                instruction_by_near: text_field(&obj, "convertedUserInstructionByNearElement")?,
            })
        })();
        match parsed {
            Ok(mut entry) => {
                if entry.action.action_type == ActionType::Click && !entry.action.action_content.is_empty() {
                    entry.action.action_content.clear();
                    warnings.push(ParseWarning {
                        id: id.clone(),
                        warning: "click-content-cleared".into(),
                    });
                }
                out.push(entry);
            }
            Err(reason) => rejected.push(Rejection {
                index,
                id: Some(id),
                reason,
            }),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyResult {
            rejected: rejected.len(),
        });
    }
    Ok(Step2Outcome {
        entries: out,
        rejected,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn step1_entry(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","shortDescription":"button Submit","fullDescription":"Submits the form.","explicitRefer":"the Submit button","implicitReferByElementFunction":"the control that sends the form","implicitReferByNearElement":"the button under the email field"}}"#
        )
    }

    fn res_map(list: &[&str]) -> BTreeMap<String, ReferringExpressionSet> {
        list.iter()
            .map(|id| {
                (
                    id.to_string(),
                    ReferringExpressionSet {
                        element_id: id.to_string(),
                        short_description: "s".into(),
                        full_description: "f".into(),
                        explicit_refer: "e".into(),
                        implicit_refer_by_element_function: "i".into(),
                        implicit_refer_by_near_element: "n".into(),
                    },
                )
            })
            .collect()
    }

    #[test]
    fn well_formed_single_entry() {
        let raw = format!(r#"{{"elements":[{}]}}"#, step1_entry("e0"));
        let out = parse_step1_response(&raw, &ids(&["e0"])).unwrap();
        assert_eq!(out.sets.len(), 1);
        assert_eq!(out.sets[0].explicit_refer, "the Submit button");
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn unknown_id_rejected() {
        let raw = format!(r#"{{"elements":[{},{}]}}"#, step1_entry("e0"), step1_entry("e99"));
        let out = parse_step1_response(&raw, &ids(&["e0", "e1"])).unwrap();
        assert_eq!(out.sets.len(), 1);
        assert_eq!(out.rejected[0].reason, RejectReason::UnknownId);
        assert_eq!(out.rejected[0].reason.to_string(), "unknown-id");
    }

    #[test]
    fn fenced_equals_unfenced() {
        let plain = format!(r#"{{"elements":[{}]}}"#, step1_entry("e0"));
        let fenced = format!("Here you go:\n```json\n{plain}\n```\nLet me know!");
        let a = parse_step1_response(&plain, &ids(&["e0"])).unwrap();
        let b = parse_step1_response(&fenced, &ids(&["e0"])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_and_missing_fields() {
        let missing = r#"{"id":"e1","shortDescription":"x","fullDescription":"y","explicitRefer":"z","implicitReferByElementFunction":"w"}"#;
        let empty = r#"{"id":"e2","shortDescription":"","fullDescription":"y","explicitRefer":"z","implicitReferByElementFunction":"w","implicitReferByNearElement":"v"}"#;
        let raw = format!("[{},{},{missing},{empty},3]", step1_entry("e0"), step1_entry("e0"));
        let out = parse_step1_response(&raw, &ids(&["e0", "e1", "e2"])).unwrap();
        let reasons: Vec<_> = out.rejected.iter().map(|r| r.reason.to_string()).collect();
        assert_eq!(
            reasons,
            [
                "duplicate-id",
                "missing-field:implicitReferByNearElement",
                "empty-field:shortDescription",
                "not-an-object"
            ]
        );
    }

    #[test]
    fn broken_json_and_empty_result() {
        let err = parse_step1_response("{\"elements\": [", &ids(&["e0"])).unwrap_err();
        match err {
            Error::ResponseInvalid { raw, .. } => assert_eq!(raw, "{\"elements\": ["),
            other => panic!("{other:?}"),
        }
        // trailing commas are not repaired
        assert!(matches!(
            parse_step1_response(r#"[{"id":"e0",}]"#, &ids(&["e0"])),
            Err(Error::ResponseInvalid { .. })
        ));
        assert!(matches!(
            parse_step1_response("I cannot help with that.", &ids(&["e0"])),
            Err(Error::ResponseInvalid { .. })
        ));
        assert!(matches!(
            parse_step1_response(r#"{"elements":[{"id":"e5"}]}"#, &ids(&["e0"])),
            Err(Error::EmptyResult { rejected: 1 })
        ));
    }

    #[test]
    fn step2_type_action() {
        let raw = r#"[{"id":"e0","instructionArgs":{"actionType":"TYPE","actionContent":"Gangsta-Groove"},
            "convertedUserInstructionByElementFunction":"Enter 'Gangsta-Groove' in the search bar",
            "convertedUserInstructionByNearElement":"Type 'Gangsta-Groove' in the search field above the article"}]"#;
        let out = parse_step2_response(raw, &res_map(&["e0"])).unwrap();
        let e = &out.entries[0];
        assert_eq!(e.action.action_type, ActionType::Type);
        assert_eq!(e.action.action_content, "Gangsta-Groove");
        assert_eq!(e.instruction_by_function, "Enter 'Gangsta-Groove' in the search bar");
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn step2_click_content_cleared() {
        let raw = r#"{"elements":[{"id":"e0","instructionArgs":{"actionType":"click","actionContent":"x"},
            "convertedUserInstructionByElementFunction":"a","convertedUserInstructionByNearElement":"b"}]}"#;
        let out = parse_step2_response(raw, &res_map(&["e0"])).unwrap();
        assert_eq!(out.entries[0].action.action_type, ActionType::Click);
        assert_eq!(out.entries[0].action.action_content, "");
        assert_eq!(out.warnings[0].warning, "click-content-cleared");
    }

    #[test]
    fn step2_missing_near_instruction() {
        let raw = r#"[{"id":"e0","instructionArgs":{"actionType":"CLICK","actionContent":""},
            "convertedUserInstructionByElementFunction":"a"},
            {"id":"e1","instructionArgs":{"actionType":"scroll"},
            "convertedUserInstructionByElementFunction":"a","convertedUserInstructionByNearElement":"b"}]"#;
        let out = parse_step2_response(raw, &res_map(&["e0", "e1"])).unwrap();
        assert_eq!(
            out.rejected[0].reason,
            RejectReason::MissingField("convertedUserInstructionByNearElement")
        );
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.entries[0].action.action_type, ActionType::Other("SCROLL".into()));
    }

    #[test]
    fn step2_requires_instruction_args() {
        let raw = r#"[{"id":"e0","convertedUserInstructionByElementFunction":"a","convertedUserInstructionByNearElement":"b"}]"#;
        assert!(matches!(
            parse_step2_response(raw, &res_map(&["e0"])),
            Err(Error::EmptyResult { rejected: 1 })
        ));
    }
}
