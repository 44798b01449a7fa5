//! Synthetic inputs shared by the benchmarks.

use groundsynth::dataset::{BenchmarkSample, InstructionKind, PoolEntry};
use groundsynth::{element_to_screen_ratio, BoundingBox, ElementType, Platform, ScreenDims, UiElement};

/// `n` square elements on a 1000x1000 screen spread over all types, platforms
/// and ratio buckets.
pub fn pool(n: usize) -> Vec<PoolEntry> {
    let screen = ScreenDims::new(1000, 1000).unwrap();
    (0..n as u32)
        .map(|i| {
            let side = 5 + (i * 31) % 300;
            let x = (i * 7) % (1000 - side);
            let y = (i * 13) % (1000 - side);
            let kind = ElementType::ALL[(i % 5) as usize];
            let bbox = BoundingBox::new(x, y, x + side, y + side).unwrap();
            PoolEntry {
                capture_id: format!("c{}", i / 40),
                platform: Platform::ALL[(i % 3) as usize],
                screenshot_path: format!("c{}.png", i / 40),
                screen,
                element: UiElement::new(format!("e{i}"), kind, "label", bbox, screen).unwrap(),
            }
        })
        .collect()
}

/// A grid of `n` icon elements on a `width` x `height` screenshot.
pub fn grid(n: u32, width: u32, height: u32) -> Vec<UiElement> {
    let screen = ScreenDims::new(width, height).unwrap();
    let cols = 8;
    let (cw, ch) = (width / cols, height / n.div_ceil(cols));
    (0..n)
        .map(|i| {
            let (x, y) = ((i % cols) * cw, (i / cols) * ch);
            let bbox = BoundingBox::new(x + 4, y + 4, x + cw - 4, y + ch - 4).unwrap();
            UiElement::new(format!("{i}"), ElementType::Icon, "", bbox, screen).unwrap()
        })
        .collect()
}

pub fn benchmark(n: usize) -> Vec<BenchmarkSample> {
    let screen = ScreenDims::new(1920, 1080).unwrap();
    (0..n)
        .map(|i| {
            let x = ((i * 37) % 1800) as u32;
            let y = ((i * 53) % 1000) as u32;
            let bbox = BoundingBox::new(x, y, x + 40, y + 40).unwrap();
            BenchmarkSample {
                sample_id: format!("s{i}"),
                screenshot_path: "s.png".into(),
                instruction: "open it".into(),
                bbox,
                element_type: ElementType::ALL[i % 5],
                platform: Platform::ALL[i % 3],
                implicitness: InstructionKind::ALL[i % 2],
                ratio: element_to_screen_ratio(bbox, screen).unwrap(),
            }
        })
        .collect()
}
