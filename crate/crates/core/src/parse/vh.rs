use serde::{Deserialize, Serialize};

use super::{first_non_empty, normalize_text, parse_tree, Candidate, MetaNode, ParseConfig};
use crate::error::Result;
use crate::model::{BoundingBox, ElementType, ScreenDims, UiElement};

/// Android view-hierarchy node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VhNode {
    pub class_name: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub content_desc: String,
    #[serde(default)]
    pub bounds: Option<BoundingBox>,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub checkable: bool,
    #[serde(default)]
    pub checked: bool,
    #[serde(default)]
    pub editable: bool,
    #[serde(default = "yes")]
    pub visible_to_user: bool,
    #[serde(default)]
    pub children: Vec<VhNode>,
}

fn yes() -> bool {
    true
}

impl VhNode {
    fn class_is(&self, suffix: &str) -> bool {
        self.class_name.rsplit('.').next() == Some(suffix)
    }

    fn is_image_class(&self) -> bool {
        self.class_is("ImageView") || self.class_is("ImageButton")
    }
}

pub(crate) fn classify(node: &VhNode) -> Option<ElementType> {
    let has_text = !normalize_text(&node.text).is_empty();
    let has_desc = !normalize_text(&node.content_desc).is_empty();
    if node.checkable {
        Some(ElementType::Toggle)
    } else if node.class_is("EditText") || node.editable {
        Some(ElementType::Inputfield)
    } else if node.class_is("Spinner") {
        Some(ElementType::Dropdown)
    } else if node.clickable && has_text {
        Some(ElementType::Text)
    } else if node.clickable && (has_desc || node.is_image_class()) {
        Some(ElementType::Icon)
    } else {
        None
    }
}

impl MetaNode for VhNode {
    fn children(&self) -> &[Self] {
        &self.children
    }

    fn shown(&self) -> bool {
        self.visible_to_user
    }

    fn segment(&self) -> &str {
        self.class_name.rsplit('.').next().unwrap_or(&self.class_name)
    }

    fn atomic(&self) -> bool {
        self.class_is("Spinner")
    }

    fn candidate(&self, _parent: Option<&Self>, path: &str) -> Option<Candidate> {
        let element_type = classify(self)?;
        let content = match element_type {
            ElementType::Icon => normalize_text(&self.content_desc),
            _ => first_non_empty([Some(self.text.as_str()), Some(self.content_desc.as_str())]),
        };
        Some(Candidate {
            path: path.to_string(),
            element_type,
            content,
            bbox: self.bounds,
        })
    }
}

pub fn parse_view_hierarchy(
    root: &VhNode,
    screen: ScreenDims,
    cfg: &ParseConfig,
) -> Result<Vec<UiElement>> {
    parse_tree(root, screen, cfg)
}
