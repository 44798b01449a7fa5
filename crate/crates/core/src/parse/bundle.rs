use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_dom, parse_uia, parse_view_hierarchy, DomSnapshotNode, ParseConfig, UiaNode, VhNode};
use crate::error::{Error, Result};
use crate::model::{Platform, ScreenDims, UiElement};

pub const SCREENSHOT_FILE: &str = "screenshot.png";
pub const METADATA_FILE: &str = "metadata.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub platform: Platform,
    pub viewport: ScreenDims,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zoom: Option<f64>,
}

/// `metadata.json`: a node tree tagged by its platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "platform", rename_all = "lowercase")]
pub enum Metadata {
    Web { root: DomSnapshotNode },
    Desktop { root: UiaNode },
    Mobile { root: VhNode },
}

impl Metadata {
    pub fn platform(&self) -> Platform {
        match self {
            Metadata::Web { .. } => Platform::Web,
            Metadata::Desktop { .. } => Platform::Desktop,
            Metadata::Mobile { .. } => Platform::Mobile,
        }
    }
}

/// One screenshot with its metadata tree and manifest, loaded from a bundle
/// directory.
#[derive(Debug, Clone)]
pub struct CaptureBundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub metadata: Metadata,
}

impl CaptureBundle {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
        let metadata: Metadata = read_json(&dir.join(METADATA_FILE))?;
        if metadata.platform() != manifest.platform {
            return Err(Error::Data(format!(
                "{}: manifest platform {} does not match metadata platform {}",
                dir.display(),
                manifest.platform,
                metadata.platform()
            )));
        }
        let shot = dir.join(SCREENSHOT_FILE);
        let (w, h) = image::image_dimensions(&shot)?;
        if (w, h) != (manifest.viewport.width, manifest.viewport.height) {
            return Err(Error::Data(format!(
                "{}: screenshot is {w}x{h} but viewport is {}x{}",
                dir.display(),
                manifest.viewport.width,
                manifest.viewport.height
            )));
        }
        Ok(Self {
            dir,
            manifest,
            metadata,
        })
    }

    pub fn capture_id(&self) -> &str {
        &self.manifest.source_id
    }

    pub fn platform(&self) -> Platform {
        self.manifest.platform
    }

    pub fn screen(&self) -> ScreenDims {
        self.manifest.viewport
    }

    pub fn screenshot_path(&self) -> PathBuf {
        self.dir.join(SCREENSHOT_FILE)
    }

    pub fn parse(&self, cfg: &ParseConfig) -> Result<Vec<UiElement>> {
        let screen = self.screen();
        match &self.metadata {
            Metadata::Web { root } => parse_dom(root, screen, cfg),
            Metadata::Desktop { root } => parse_uia(root, screen, cfg),
            Metadata::Mobile { root } => parse_view_hierarchy(root, screen, cfg),
        }
        .map_err(|e| match e {
            Error::Parse { path, reason } => Error::Parse {
                path: format!("{}:{path}", self.dir.display()),
                reason,
            },
            other => other,
        })
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Load every bundle directory under `root` (or `root` itself when it is a
/// bundle), sorted by directory name.
pub fn load_bundles(root: impl AsRef<Path>) -> Result<Vec<CaptureBundle>> {
    let root = root.as_ref();
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![CaptureBundle::load(root)?]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.into_iter().map(CaptureBundle::load).collect()
}
