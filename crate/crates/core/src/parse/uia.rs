use serde::{Deserialize, Serialize};

use super::{normalize_text, parse_tree, Candidate, MetaNode, ParseConfig};
use crate::error::Result;
use crate::model::{BoundingBox, ElementType, ScreenDims, UiElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToggleState {
    On,
    Off,
    Indeterminate,
}

/// Windows UI Automation element as recorded by the capture tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiaNode {
    pub control_type: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub bounding_rectangle: Option<BoundingBox>,
    #[serde(default)]
    pub is_offscreen: bool,
    #[serde(default = "yes")]
    pub is_enabled: bool,
    #[serde(default)]
    pub toggle_state: Option<ToggleState>,
    /// ValuePattern.IsReadOnly when the element exposes it.
    #[serde(default)]
    pub is_read_only: Option<bool>,
    #[serde(default)]
    pub children: Vec<UiaNode>,
}

fn yes() -> bool {
    true
}

const LINK_LIKE: &[&str] = &["Hyperlink", "MenuItem", "TabItem"];
const INVOKABLE: &[&str] = &["Button", "SplitButton", "Hyperlink", "MenuItem", "TabItem"];

pub(crate) fn classify(node: &UiaNode, parent: Option<&UiaNode>) -> Option<ElementType> {
    let named = !normalize_text(&node.name).is_empty();
    match node.control_type.as_str() {
        "Button" if named => Some(ElementType::Text),
        "Button" => Some(ElementType::Icon),
        t if LINK_LIKE.contains(&t) && named => Some(ElementType::Text),
        "Edit" => Some(ElementType::Inputfield),
        "Document" if node.is_read_only == Some(false) => Some(ElementType::Inputfield),
        "ComboBox" => Some(ElementType::Dropdown),
        "CheckBox" | "RadioButton" => Some(ElementType::Toggle),
        // an image is the icon of an unnamed invokable parent
        "Image"
            if parent.is_some_and(|p| {
                INVOKABLE.contains(&p.control_type.as_str()) && normalize_text(&p.name).is_empty()
            }) =>
        {
            Some(ElementType::Icon)
        }
        _ => None,
    }
}

impl MetaNode for UiaNode {
    fn children(&self) -> &[Self] {
        &self.children
    }

    fn shown(&self) -> bool {
        !self.is_offscreen
    }

    fn segment(&self) -> &str {
        &self.control_type
    }

    fn atomic(&self) -> bool {
        self.control_type == "ComboBox"
    }

    fn candidate(&self, parent: Option<&Self>, path: &str) -> Option<Candidate> {
        Some(Candidate {
            path: path.to_string(),
            element_type: classify(self, parent)?,
            content: normalize_text(&self.name),
            bbox: self.bounding_rectangle,
        })
    }
}

pub fn parse_uia(root: &UiaNode, screen: ScreenDims, cfg: &ParseConfig) -> Result<Vec<UiElement>> {
    parse_tree(root, screen, cfg)
}
