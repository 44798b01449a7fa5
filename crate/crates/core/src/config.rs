//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parse::ParseConfig;
use crate::sampler::DistributionSpec;
use crate::som::{MarkStyle, DEFAULT_MAX_MARKS};
use crate::synth::{LlmSettings, SynthSettings, SynthesisMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Concurrency {
    /// Captures processed at the same time during synthesis.
    pub in_flight_captures: usize,
}

impl Default for Concurrency {
    fn default() -> Self {
        Self { in_flight_captures: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Replay LLM responses from this directory instead of calling the API.
    pub fixture_dir: Option<PathBuf>,
    /// Call the API and store every response in `fixture_dir`.
    pub record_fixtures: bool,
    pub parse: ParseConfig,
    pub distribution: DistributionSpec,
    pub marks: MarkStyle,
    pub max_marks_per_image: usize,
    pub llm: LlmSettings,
    pub mode: SynthesisMode,
    pub concurrency: Concurrency,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fixture_dir: None,
            record_fixtures: false,
            parse: ParseConfig::default(),
            distribution: DistributionSpec::default(),
            marks: MarkStyle::default(),
            max_marks_per_image: DEFAULT_MAX_MARKS,
            llm: LlmSettings::default(),
            mode: SynthesisMode::Full,
            concurrency: Concurrency::default(),
        }
    }
}

impl PipelineConfig {
    /// Load and validate. Relative `fixture_dir` paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if let (Some(dir), Some(base)) = (cfg.fixture_dir.as_mut(), path.parent()) {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.parse.validate()?;
        self.distribution.validate()?;
        self.marks.validate()?;
        if self.max_marks_per_image == 0 {
            return Err(Error::invalid("max_marks_per_image must be at least 1"));
        }
        if self.concurrency.in_flight_captures == 0 {
            return Err(Error::invalid("concurrency.in_flight_captures must be at least 1"));
        }
        if self.record_fixtures && self.fixture_dir.is_none() {
            return Err(Error::invalid("record_fixtures requires fixture_dir"));
        }
        if let Some(dir) = &self.fixture_dir {
            if !self.record_fixtures && !dir.is_dir() {
                return Err(Error::invalid(format!(
                    "fixture_dir {} is not a directory",
                    dir.display()
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, recorded in output headers.
    pub fn hash(&self) -> String {
        crate::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn synth_settings(&self) -> SynthSettings {
        SynthSettings {
            mode: self.mode,
            model: self.llm.model.clone(),
            temperature: self.llm.temperature,
            style: self.marks.clone(),
            max_marks_per_image: self.max_marks_per_image,
        }
    }
}
