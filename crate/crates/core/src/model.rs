//! Shared element model and screen geometry.
//!
//! Coordinates are integer pixels with the origin at the top-left corner.
//! A box's `(x1, y1)` corner is inclusive and its `(x2, y2)` corner is
//! exclusive, so adjacent boxes never overlap and a `w × h` box spans exactly
//! `w × h` pixels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoundingBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

#[derive(Deserialize)]
struct RawBox {
    x1: u32,
    y1: u32,
    x2: u32,
    y2: u32,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoundingBox::new(raw.x1, raw.y1, raw.x2, raw.y2)
    }
}

impl BoundingBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::invalid(format!(
                "degenerate box ({x1},{y1},{x2},{y2})"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn fits(&self, screen: ScreenDims) -> bool {
        self.x2 <= screen.width && self.y2 <= screen.height
    }

    /// Clip to the screen rectangle; `None` when nothing is left.
    pub fn clip(&self, screen: ScreenDims) -> Option<Self> {
        let x2 = self.x2.min(screen.width);
        let y2 = self.y2.min(screen.height);
        BoundingBox::new(self.x1, self.y1, x2, y2).ok()
    }

    pub fn intersection_area(&self, other: &Self) -> u64 {
        let w = self.x2.min(other.x2).saturating_sub(self.x1.max(other.x1));
        let h = self.y2.min(other.y2).saturating_sub(self.y1.max(other.y1));
        u64::from(w) * u64::from(h)
    }

    pub fn iou(&self, other: &Self) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.x1, self.y1, self.x2, self.y2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims")]
pub struct ScreenDims {
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawDims {
    width: u32,
    height: u32,
}

impl TryFrom<RawDims> for ScreenDims {
    type Error = Error;

    fn try_from(raw: RawDims) -> Result<Self> {
        ScreenDims::new(raw.width, raw.height)
    }
}

impl ScreenDims {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("empty screen {width}x{height}")));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    pub fn full_box(&self) -> BoundingBox {
        BoundingBox {
            x1: 0,
            y1: 0,
            x2: self.width,
            y2: self.height,
        }
    }
}

/// A pixel location. Signed so that model predictions outside the image can
/// be represented (and scored as misses).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementType {
    Text,
    Inputfield,
    Dropdown,
    Icon,
    Toggle,
}

impl ElementType {
    pub const ALL: [ElementType; 5] = [
        ElementType::Text,
        ElementType::Inputfield,
        ElementType::Dropdown,
        ElementType::Icon,
        ElementType::Toggle,
    ];

    /// Serialized name, also used in prompts and attribute strings.
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementType::Text => "text",
            ElementType::Inputfield => "inputfield",
            ElementType::Dropdown => "dropdown",
            ElementType::Icon => "icon",
            ElementType::Toggle => "toggle",
        }
    }

    /// Column label used in report tables.
    pub fn label(&self) -> &'static str {
        match self {
            ElementType::Text => "Text",
            ElementType::Inputfield => "Input",
            ElementType::Dropdown => "Dropdown",
            ElementType::Icon => "Icon",
            ElementType::Toggle => "Toggle",
        }
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Web,
    Desktop,
    Mobile,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Web, Platform::Desktop, Platform::Mobile];

    pub fn as_str(&self) -> &'static str {
        match self {
            Platform::Web => "web",
            Platform::Desktop => "desktop",
            Platform::Mobile => "mobile",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Platform::Web => "Web",
            Platform::Desktop => "Desktop",
            Platform::Mobile => "Mobile",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiElement {
    pub id: String,
    pub element_type: ElementType,
    pub content: String,
    pub bbox: BoundingBox,
    pub ratio: f64,
}

impl UiElement {
    pub fn new(
        id: impl Into<String>,
        element_type: ElementType,
        content: impl Into<String>,
        bbox: BoundingBox,
        screen: ScreenDims,
    ) -> Result<Self> {
        let content = content.into();
        if element_type == ElementType::Text && content.trim().is_empty() {
            return Err(Error::invalid("text element without content"));
        }
        Ok(Self {
            id: id.into(),
            element_type,
            content,
            bbox,
            ratio: element_to_screen_ratio(bbox, screen)?,
        })
    }

    pub fn ratio_bucket(&self) -> RatioBucket {
        // ratio is always in (0, 1] for constructed elements
        ratio_bucket(self.ratio).unwrap_or(RatioBucket::Large)
    }
}

/// Element-to-screen ratio buckets: `[0, 0.02)`, `[0.02, 0.04)`, `[0.04, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RatioBucket {
    #[serde(rename = "0.00-0.02")]
    Small,
    #[serde(rename = "0.02-0.04")]
    Medium,
    #[serde(rename = "0.04-1.00")]
    Large,
}

impl RatioBucket {
    pub const ALL: [RatioBucket; 3] = [RatioBucket::Small, RatioBucket::Medium, RatioBucket::Large];

    pub fn label(&self) -> &'static str {
        match self {
            RatioBucket::Small => "0.00-0.02",
            RatioBucket::Medium => "0.02-0.04",
            RatioBucket::Large => "0.04-1.00",
        }
    }
}

impl fmt::Display for RatioBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `sqrt(box area) / sqrt(screen area)`.
pub fn element_to_screen_ratio(bbox: BoundingBox, screen: ScreenDims) -> Result<f64> {
    if bbox.area() == 0 {
        return Err(Error::invalid("zero-area box"));
    }
    if !bbox.fits(screen) {
        return Err(Error::invalid(format!(
            "box {bbox} exceeds screen {}x{}",
            screen.width, screen.height
        )));
    }
    Ok((bbox.area() as f64).sqrt() / (screen.area() as f64).sqrt())
}

/// Integer center, rounding exact halves down.
pub fn bbox_center(bbox: BoundingBox) -> Point {
    let cx = (u64::from(bbox.x1) + u64::from(bbox.x2)) / 2;
    let cy = (u64::from(bbox.y1) + u64::from(bbox.y2)) / 2;
    Point::new(cx as i64, cy as i64)
}

pub fn point_in_box(p: Point, bbox: BoundingBox) -> bool {
    i64::from(bbox.x1) <= p.x
        && p.x < i64::from(bbox.x2)
        && i64::from(bbox.y1) <= p.y
        && p.y < i64::from(bbox.y2)
}

pub fn ratio_bucket(ratio: f64) -> Result<RatioBucket> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("ratio {ratio} outside (0, 1]")));
    }
    Ok(if ratio < 0.02 {
        RatioBucket::Small
    } else if ratio < 0.04 {
        RatioBucket::Medium
    } else {
        RatioBucket::Large
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x1: u32, y1: u32, x2: u32, y2: u32) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    fn dims(w: u32, h: u32) -> ScreenDims {
        ScreenDims::new(w, h).unwrap()
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(
            element_to_screen_ratio(bb(0, 0, 1920, 1080), dims(1920, 1080)).unwrap(),
            1.0
        );
        let r = element_to_screen_ratio(bb(100, 100, 196, 154), dims(1920, 1080)).unwrap();
        assert!((r - 0.05).abs() < 1e-15, "{r}");
        let r = element_to_screen_ratio(bb(0, 0, 1, 1), dims(100, 100)).unwrap();
        assert!((r - 0.01).abs() < 1e-15, "{r}");
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(BoundingBox::new(5, 0, 5, 10).is_err());
        assert!(BoundingBox::new(0, 7, 10, 3).is_err());
        assert!(serde_json::from_str::<BoundingBox>(r#"{"x1":3,"y1":0,"x2":3,"y2":1}"#).is_err());
        assert!(ScreenDims::new(0, 10).is_err());
    }

    #[test]
    fn box_outside_screen_rejected() {
        assert!(element_to_screen_ratio(bb(0, 0, 101, 10), dims(100, 100)).is_err());
    }

    #[test]
    fn center_examples() {
        assert_eq!(bbox_center(bb(0, 0, 10, 10)), Point::new(5, 5));
        assert_eq!(bbox_center(bb(0, 0, 3, 3)), Point::new(1, 1));
        assert_eq!(bbox_center(bb(100, 200, 300, 260)), Point::new(200, 230));
    }

    #[test]
    fn point_in_box_boundaries() {
        let b = bb(0, 0, 10, 10);
        assert!(point_in_box(Point::new(5, 5), b));
        assert!(point_in_box(Point::new(0, 0), b));
        assert!(!point_in_box(Point::new(10, 5), b));
        assert!(!point_in_box(Point::new(5, 10), b));
        assert!(!point_in_box(Point::new(-1, 5), b));
    }

    #[test]
    fn bucket_examples() {
        assert_eq!(ratio_bucket(0.0199).unwrap(), RatioBucket::Small);
        assert_eq!(ratio_bucket(0.02).unwrap(), RatioBucket::Medium);
        assert_eq!(ratio_bucket(0.04).unwrap(), RatioBucket::Large);
        assert_eq!(ratio_bucket(1.0).unwrap(), RatioBucket::Large);
        assert!(ratio_bucket(0.0).is_err());
        assert!(ratio_bucket(1.0001).is_err());
        assert!(ratio_bucket(f64::NAN).is_err());
    }

    #[test]
    fn canonical_json_names() {
        let s: Vec<String> = ElementType::ALL
            .iter()
            .map(|t| serde_json::to_string(t).unwrap())
            .collect();
        assert_eq!(
            s,
            [r#""text""#, r#""inputfield""#, r#""dropdown""#, r#""icon""#, r#""toggle""#]
        );
        let el = UiElement::new("e0", ElementType::Text, "Go", bb(0, 0, 10, 10), dims(100, 100))
            .unwrap();
        assert_eq!(
            serde_json::to_string(&el).unwrap(),
            r#"{"id":"e0","element_type":"text","content":"Go","bbox":{"x1":0,"y1":0,"x2":10,"y2":10},"ratio":0.1}"#
        );
    }

    #[test]
    fn text_element_requires_content() {
        assert!(UiElement::new("e0", ElementType::Text, " ", bb(0, 0, 4, 4), dims(10, 10)).is_err());
        assert!(UiElement::new("e0", ElementType::Icon, "", bb(0, 0, 4, 4), dims(10, 10)).is_ok());
    }

    #[test]
    fn iou_by_hand() {
        assert!((bb(0, 0, 10, 10).iou(&bb(0, 0, 10, 9)) - 0.9).abs() < 1e-12);
        assert_eq!(bb(0, 0, 10, 10).iou(&bb(20, 20, 30, 30)), 0.0);
    }

    prop_compose! {
        fn screen_and_box()(w in 1u32..4000, h in 1u32..4000)
            (x1 in 0..w, y1 in 0..h, w in Just(w), h in Just(h), dx in 1u32..4000, dy in 1u32..4000)
            -> (BoundingBox, ScreenDims) {
            let x2 = (x1 + dx).min(w);
            let y2 = (y1 + dy).min(h);
            (bb(x1, y1, x2, y2), dims(w, h))
        }
    }

    proptest! {
        #[test]
        fn ratio_in_unit_interval((b, s) in screen_and_box()) {
            let r = element_to_screen_ratio(b, s).unwrap();
            prop_assert!(r > 0.0 && r <= 1.0);
            prop_assert_eq!(r == 1.0, b == s.full_box());
            prop_assert!(ratio_bucket(r).is_ok());
        }

        #[test]
        fn center_is_inside((b, _s) in screen_and_box()) {
            prop_assert!(point_in_box(bbox_center(b), b));
        }

        #[test]
        fn ratio_scale_invariant((b, s) in screen_and_box(), k in 1u32..5) {
            let scaled = bb(b.x1 * k, b.y1 * k, b.x2 * k, b.y2 * k);
            let r1 = element_to_screen_ratio(b, s).unwrap();
            let r2 = element_to_screen_ratio(scaled, dims(s.width * k, s.height * k)).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-15 * r1.max(1.0));
        }
    }
}
