use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{first_non_empty, normalize_text, parse_tree, Candidate, MetaNode, ParseConfig};
use crate::error::Result;
use crate::model::{BoundingBox, ElementType, ScreenDims, UiElement};

/// One node of a layout-resolved DOM snapshot. Boxes are computed by the
/// capture tool; this crate never lays out HTML itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomSnapshotNode {
    pub tag: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub bbox: Option<BoundingBox>,
    #[serde(default = "yes")]
    pub visible: bool,
    #[serde(default)]
    pub cursor: Option<String>,
    #[serde(default)]
    pub children: Vec<DomSnapshotNode>,
}

fn yes() -> bool {
    true
}

const TEXT_TAGS: &[&str] = &["a", "button", "summary"];
const TEXT_ROLES: &[&str] = &["button", "link", "tab", "menuitem"];
const INPUT_TYPES: &[&str] = &["text", "search", "email", "url", "password", "number", "tel"];
const TOGGLE_TYPES: &[&str] = &["checkbox", "radio"];
const TOGGLE_ROLES: &[&str] = &["checkbox", "radio", "switch"];
const DROPDOWN_ROLES: &[&str] = &["combobox", "listbox"];

impl DomSnapshotNode {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    fn tag(&self) -> String {
        self.tag.to_ascii_lowercase()
    }

    fn role(&self) -> Option<String> {
        self.attr("role").map(|r| r.trim().to_ascii_lowercase())
    }

    /// `<input>` without a type attribute is a text input.
    fn input_type(&self) -> String {
        self.attr("type")
            .map(|t| t.trim().to_ascii_lowercase())
            .unwrap_or_else(|| "text".to_string())
    }

    fn has_pointer(&self) -> bool {
        self.cursor.as_deref() == Some("pointer")
    }

    fn is_graphic(&self) -> bool {
        matches!(self.tag().as_str(), "img" | "svg")
    }

    fn contains_graphic(&self) -> bool {
        self.is_graphic() || self.children.iter().any(DomSnapshotNode::contains_graphic)
    }

    /// `alt` of the first descendant image, used as an accessible name.
    fn graphic_alt(&self) -> Option<&str> {
        if self.tag() == "img" {
            if let Some(alt) = self.attr("alt").filter(|a| !a.trim().is_empty()) {
                return Some(alt);
            }
        }
        self.children.iter().find_map(DomSnapshotNode::graphic_alt)
    }

    fn content(&self) -> String {
        first_non_empty([
            Some(self.text.as_str()),
            self.attr("aria-label"),
            self.attr("title"),
            self.attr("placeholder"),
            self.graphic_alt(),
        ])
    }
}

/// Web rule table. `parent` is consulted only to tell an element that sets
/// `cursor: pointer` apart from one that merely inherits it.
pub(crate) fn classify(
    node: &DomSnapshotNode,
    parent: Option<&DomSnapshotNode>,
) -> Option<ElementType> {
    let tag = node.tag();
    let role = node.role();
    let role = role.as_deref();
    let has_role = |set: &[&str]| role.is_some_and(|r| set.contains(&r));

    if (tag == "input" && TOGGLE_TYPES.contains(&node.input_type().as_str()))
        || has_role(TOGGLE_ROLES)
    {
        return Some(ElementType::Toggle);
    }
    if (tag == "input" && INPUT_TYPES.contains(&node.input_type().as_str()))
        || tag == "textarea"
        || node
            .attr("contenteditable")
            .is_some_and(|v| v.is_empty() || v.eq_ignore_ascii_case("true"))
    {
        return Some(ElementType::Inputfield);
    }
    if tag == "select" || has_role(DROPDOWN_ROLES) {
        return Some(ElementType::Dropdown);
    }

    let has_text = !normalize_text(&node.text).is_empty();
    if has_text && (TEXT_TAGS.contains(&tag.as_str()) || has_role(TEXT_ROLES)) {
        return Some(ElementType::Text);
    }

    let pointer_origin = node.has_pointer() && !parent.is_some_and(DomSnapshotNode::has_pointer);
    let clickable = tag == "button" || tag == "a" || role == Some("button") || pointer_origin;
    if clickable && !has_text && node.contains_graphic() {
        return Some(ElementType::Icon);
    }
    None
}

impl MetaNode for DomSnapshotNode {
    fn children(&self) -> &[Self] {
        &self.children
    }

    fn shown(&self) -> bool {
        self.visible
    }

    fn segment(&self) -> &str {
        &self.tag
    }

    fn candidate(&self, parent: Option<&Self>, path: &str) -> Option<Candidate> {
        let element_type = classify(self, parent)?;
        let content = if element_type == ElementType::Text {
            normalize_text(&self.text)
        } else {
            self.content()
        };
        Some(Candidate {
            path: path.to_string(),
            element_type,
            content,
            bbox: self.bbox,
        })
    }
}

pub fn parse_dom(
    root: &DomSnapshotNode,
    screen: ScreenDims,
    cfg: &ParseConfig,
) -> Result<Vec<UiElement>> {
    parse_tree(root, screen, cfg)
}
