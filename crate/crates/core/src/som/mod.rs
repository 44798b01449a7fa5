//! Set-of-Marks rendering: element outlines with an id chip under each box.

mod font;

use std::path::Path;

pub use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::UiElement;

pub use font::{GLYPH_H, GLYPH_W};

pub const DEFAULT_MAX_MARKS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkStyle {
    pub palette: Vec<[u8; 3]>,
    pub stroke_width: u32,
    pub label_font_px: u32,
    pub label_bg: [u8; 3],
    pub label_fg: [u8; 3],
}

impl Default for MarkStyle {
    fn default() -> Self {
        Self {
            palette: vec![
                [230, 25, 75],
                [60, 180, 75],
                [0, 130, 200],
                [245, 130, 48],
                [145, 30, 180],
                [70, 240, 240],
                [240, 50, 230],
                [210, 245, 60],
            ],
            stroke_width: 2,
            label_font_px: 14,
            label_bg: [0, 0, 0],
            label_fg: [255, 255, 255],
        }
    }
}

impl MarkStyle {
    pub fn validate(&self) -> Result<()> {
        if self.palette.is_empty() {
            return Err(Error::invalid("mark palette is empty"));
        }
        if self.stroke_width == 0 {
            return Err(Error::invalid("stroke_width must be at least 1"));
        }
        Ok(())
    }

    fn scale(&self) -> u32 {
        (self.label_font_px / GLYPH_H).max(1)
    }

    /// Size of the chip holding `label`.
    pub fn chip_size(&self, label: &str) -> (u32, u32) {
        let s = self.scale();
        let n = label.chars().count() as u32;
        let text_w = if n == 0 { 0 } else { n * GLYPH_W * s + (n - 1) * s };
        (text_w + 2 * s, GLYPH_H * s + 2 * s)
    }
}

/// Chip rectangle `(x, y, w, h)` for an element: directly below the box and
/// left-aligned to it, or directly above when it would cross the bottom edge.
pub fn chip_position(el: &UiElement, style: &MarkStyle, width: u32, height: u32) -> (u32, u32, u32, u32) {
    let (w, h) = style.chip_size(&el.id);
    let b = el.bbox;
    let y = if b.y2 + h <= height {
        b.y2
    } else if b.y1 >= h {
        b.y1 - h
    } else {
        height.saturating_sub(h)
    };
    let x = if b.x1 + w <= width {
        b.x1
    } else {
        width.saturating_sub(w)
    };
    (x, y, w, h)
}

/// Draw all marks onto a copy of `screenshot`.
pub fn render_marks(
    screenshot: &RgbImage,
    elements: &[UiElement],
    style: &MarkStyle,
) -> Result<RgbImage> {
    style.validate()?;
    let (width, height) = screenshot.dimensions();
    for el in elements {
        if el.bbox.x2 > width || el.bbox.y2 > height {
            return Err(Error::invalid(format!(
                "element {} box {} lies outside the {width}x{height} image",
                el.id, el.bbox
            )));
        }
    }

    let mut out = screenshot.clone();
    for (i, el) in elements.iter().enumerate() {
        let color = Rgb(style.palette[i % style.palette.len()]);
        draw_outline(&mut out, el, style.stroke_width, color);
    }
    // chips go on top of every outline so labels stay legible
    for el in elements {
        let (x, y, w, h) = chip_position(el, style, width, height);
        fill_rect(&mut out, x, y, w, h, Rgb(style.label_bg));
        draw_text(&mut out, x + style.scale(), y + style.scale(), &el.id, style);
    }
    Ok(out)
}

fn draw_outline(img: &mut RgbImage, el: &UiElement, stroke: u32, color: Rgb<u8>) {
    let b = el.bbox;
    let sw = stroke.min(b.width()).min(b.height());
    fill_rect(img, b.x1, b.y1, b.width(), sw, color);
    fill_rect(img, b.x1, b.y2 - sw, b.width(), sw, color);
    fill_rect(img, b.x1, b.y1, sw, b.height(), color);
    fill_rect(img, b.x2 - sw, b.y1, sw, b.height(), color);
}

fn fill_rect(img: &mut RgbImage, x: u32, y: u32, w: u32, h: u32, color: Rgb<u8>) {
    let x_end = (x + w).min(img.width());
    let y_end = (y + h).min(img.height());
    for yy in y..y_end {
        for xx in x..x_end {
            img.put_pixel(xx, yy, color);
        }
    }
}

fn draw_text(img: &mut RgbImage, x: u32, y: u32, text: &str, style: &MarkStyle) {
    let s = style.scale();
    let fg = Rgb(style.label_fg);
    for (ci, c) in text.chars().enumerate() {
        let gx = x + ci as u32 * (GLYPH_W + 1) * s;
        for (row, bits) in font::glyph(c).iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits & (1 << (GLYPH_W - 1 - col)) != 0 {
                    fill_rect(img, gx + col * s, y + row as u32 * s, s, s, fg);
                }
            }
        }
    }
}

/// Split `count` element indices into consecutive groups of at most
/// `max_per_image`.
pub fn batch_marks(count: usize, max_per_image: usize) -> Result<Vec<Vec<usize>>> {
    if max_per_image == 0 {
        return Err(Error::invalid("max_per_image must be at least 1"));
    }
    Ok((0..count)
        .collect::<Vec<_>>()
        .chunks(max_per_image)
        .map(<[usize]>::to_vec)
        .collect())
}

/// Load an image file as 8-bit RGB.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

/// Encode as PNG bytes.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, ElementType, ScreenDims};

    fn el(id: &str, b: (u32, u32, u32, u32), screen: (u32, u32)) -> UiElement {
        UiElement::new(
            id,
            ElementType::Icon,
            "",
            BoundingBox::new(b.0, b.1, b.2, b.3).unwrap(),
            ScreenDims::new(screen.0, screen.1).unwrap(),
        )
        .unwrap()
    }

    fn canvas(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([200, 200, 200]))
    }

    #[test]
    fn empty_list_is_identity() {
        let img = canvas(64, 48);
        assert_eq!(render_marks(&img, &[], &MarkStyle::default()).unwrap(), img);
    }

    #[test]
    fn label_below_box() {
        let style = MarkStyle::default();
        let e = el("e0", (10, 10, 40, 30), (200, 100));
        let (x, y, w, h) = chip_position(&e, &style, 200, 100);
        assert_eq!((x, y), (10, 30));
        // "e0": 2 glyphs at scale 2
        assert_eq!((w, h), (2 * 10 + 2 + 4, 14 + 4));
        let out = render_marks(&canvas(200, 100), &[e], &style).unwrap();
        assert_eq!(out.get_pixel(10, 30), &Rgb(style.label_bg));
        assert_eq!(out.get_pixel(10, 10), &Rgb(style.palette[0]));
    }

    #[test]
    fn bottom_edge_flips_label_above() {
        let style = MarkStyle::default();
        let e = el("e0", (10, 60, 40, 100), (200, 100));
        let (_, y, _, h) = chip_position(&e, &style, 200, 100);
        assert_eq!(y + h, 60);
    }

    #[test]
    fn chip_stays_inside_when_box_spans_height() {
        let style = MarkStyle::default();
        let e = el("e12", (190, 0, 200, 100), (200, 100));
        let (x, y, w, h) = chip_position(&e, &style, 200, 100);
        assert!(x + w <= 200 && y + h <= 100);
    }

    #[test]
    fn out_of_bounds_names_element() {
        let e = el("e7", (0, 0, 100, 100), (100, 100));
        let err = render_marks(&canvas(50, 50), &[e], &MarkStyle::default()).unwrap_err();
        assert!(err.to_string().contains("e7"), "{err}");
    }

    #[test]
    fn input_untouched_and_deterministic() {
        let img = canvas(120, 80);
        let before = img.clone();
        let els = vec![el("e0", (5, 5, 50, 30), (120, 80)), el("e1", (60, 40, 110, 78), (120, 80))];
        let a = render_marks(&img, &els, &MarkStyle::default()).unwrap();
        let b = render_marks(&img, &els, &MarkStyle::default()).unwrap();
        assert_eq!(img, before);
        assert_eq!(crate::sha256_hex(a.as_raw()), crate::sha256_hex(b.as_raw()));
        assert_ne!(a, img);
    }

    #[test]
    fn style_validation() {
        let mut s = MarkStyle::default();
        s.palette.clear();
        assert!(render_marks(&canvas(4, 4), &[], &s).is_err());
        let s = MarkStyle {
            stroke_width: 0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn batching() {
        assert_eq!(batch_marks(5, 40).unwrap(), vec![vec![0, 1, 2, 3, 4]]);
        let g = batch_marks(41, 40).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].len(), 40);
        assert_eq!(g[1], vec![40]);
        assert!(batch_marks(0, 40).unwrap().is_empty());
        assert!(batch_marks(3, 0).is_err());
    }
}
