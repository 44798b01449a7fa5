//! Precision-first metadata parsers.
//!
//! Each platform parser walks its metadata tree, classifies nodes with a fixed
//! rule table and emits only elements that survive visibility, size and
//! duplicate filters. Recall is deliberately sacrificed: a node is emitted only
//! when its type and content are unambiguous from the node evidence alone.
//!
//! When interactive nodes nest (a button inside a link, an image inside an
//! invokable control) only the innermost emitted node is kept.

mod bundle;
mod dom;
mod uia;
mod vh;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundingBox, ElementType, ScreenDims, UiElement};

pub use bundle::{load_bundles, CaptureBundle, Manifest, Metadata};
pub use dom::{parse_dom, DomSnapshotNode};
pub use uia::{parse_uia, ToggleState, UiaNode};
pub use vh::{parse_view_hierarchy, VhNode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseConfig {
    pub min_box_side: u32,
    pub max_ratio: f64,
    pub dedup_iou_threshold: f64,
}

impl Default for ParseConfig {
    fn default() -> Self {
        Self {
            min_box_side: 4,
            max_ratio: 0.9,
            dedup_iou_threshold: 0.9,
        }
    }
}

impl ParseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_ratio > 0.0 && self.max_ratio <= 1.0) {
            return Err(Error::invalid("max_ratio must be in (0, 1]"));
        }
        if !(self.dedup_iou_threshold > 0.0 && self.dedup_iou_threshold <= 1.0) {
            return Err(Error::invalid("dedup_iou_threshold must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Everything a classifier may look at for one node.
#[derive(Debug, Clone, Copy)]
pub enum NodeEvidence<'a> {
    Web {
        node: &'a DomSnapshotNode,
        parent: Option<&'a DomSnapshotNode>,
    },
    Desktop {
        node: &'a UiaNode,
        parent: Option<&'a UiaNode>,
    },
    Mobile(&'a VhNode),
}

/// Rule-table classification; `None` means "not an interactive target".
pub fn classify_element_type(evidence: NodeEvidence<'_>) -> Option<ElementType> {
    match evidence {
        NodeEvidence::Web { node, parent } => dom::classify(node, parent),
        NodeEvidence::Desktop { node, parent } => uia::classify(node, parent),
        NodeEvidence::Mobile(node) => vh::classify(node),
    }
}

/// Drop every element whose box overlaps an earlier kept element with
/// IoU ≥ the configured threshold, then renumber ids `e0..eN`.
pub fn dedup_elements(elements: Vec<UiElement>, cfg: &ParseConfig) -> Vec<UiElement> {
    let mut kept: Vec<UiElement> = Vec::with_capacity(elements.len());
    for el in elements {
        let dup = kept
            .iter()
            .any(|k| k.bbox.iou(&el.bbox) >= cfg.dedup_iou_threshold - 1e-12);
        if !dup {
            kept.push(el);
        }
    }
    renumber(&mut kept);
    kept
}

fn renumber(elements: &mut [UiElement]) {
    for (i, el) in elements.iter_mut().enumerate() {
        el.id = format!("e{i}");
    }
}

/// A classified node awaiting filtering.
#[derive(Debug)]
pub(crate) struct Candidate {
    pub path: String,
    pub element_type: ElementType,
    pub content: String,
    pub bbox: Option<BoundingBox>,
}

/// Apply geometry filters to one classified node. `Ok(None)` means the node
/// was filtered out (clipped away, too small or page-sized).
pub(crate) fn accept(
    c: Candidate,
    screen: ScreenDims,
    cfg: &ParseConfig,
) -> Result<Option<UiElement>> {
    let bbox = c.bbox.ok_or_else(|| Error::Parse {
        path: c.path.clone(),
        reason: "kept node has no bounding box".into(),
    })?;
    let Some(bbox) = bbox.clip(screen) else {
        return Ok(None);
    };
    if bbox.width() < cfg.min_box_side || bbox.height() < cfg.min_box_side {
        return Ok(None);
    }
    let el = UiElement::new("", c.element_type, c.content, bbox, screen).map_err(|e| {
        Error::Parse {
            path: c.path.clone(),
            reason: e.to_string(),
        }
    })?;
    if el.ratio > cfg.max_ratio {
        return Ok(None);
    }
    Ok(Some(el))
}

/// Common shape of the three metadata trees.
pub(crate) trait MetaNode: Sized {
    fn children(&self) -> &[Self];
    /// False for invisible or offscreen nodes; their whole subtree is skipped.
    fn shown(&self) -> bool;
    /// Path segment used in error messages.
    fn segment(&self) -> &str;
    /// Composite controls whose internals must not be emitted on their own.
    fn atomic(&self) -> bool {
        false
    }
    fn candidate(&self, parent: Option<&Self>, path: &str) -> Option<Candidate>;
}

/// Pre-order walk that keeps only the innermost accepted node of any nested
/// chain, then dedups.
pub(crate) fn parse_tree<N: MetaNode>(
    root: &N,
    screen: ScreenDims,
    cfg: &ParseConfig,
) -> Result<Vec<UiElement>> {
    cfg.validate()?;
    let mut out = Vec::new();
    let path = format!("/{}", root.segment());
    walk(root, None, &path, screen, cfg, &mut out)?;
    Ok(dedup_elements(out, cfg))
}

fn walk<N: MetaNode>(
    node: &N,
    parent: Option<&N>,
    path: &str,
    screen: ScreenDims,
    cfg: &ParseConfig,
    out: &mut Vec<UiElement>,
) -> Result<bool> {
    if !node.shown() {
        return Ok(false);
    }
    let slot = out.len();
    let mut inner = false;
    let children = if node.atomic() { &[] } else { node.children() };
    for (i, child) in children.iter().enumerate() {
        let child_path = format!("{path}/{}[{i}]", child.segment());
        inner |= walk(child, Some(node), &child_path, screen, cfg, out)?;
    }
    if inner {
        return Ok(true);
    }
    match node.candidate(parent, path) {
        Some(c) => match accept(c, screen, cfg)? {
            Some(el) => {
                out.insert(slot, el);
                Ok(true)
            }
            None => Ok(false),
        },
        None => Ok(false),
    }
}

/// Trim and collapse internal whitespace runs.
pub(crate) fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First non-empty candidate after normalization.
pub(crate) fn first_non_empty<'a>(options: impl IntoIterator<Item = Option<&'a str>>) -> String {
    options
        .into_iter()
        .flatten()
        .map(normalize_text)
        .find(|s| !s.is_empty())
        .unwrap_or_default()
}
