use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::VisibilityConfig;
use crate::pose::DEFAULT_PITCH_CAP_DEG;
use crate::render::RenderConfig;
use crate::sampler::{SamplingConfig, Task};
use crate::synthetic::DEFAULT_RESOLUTION;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    /// The record's own mesh, falling back to the generic one when absent.
    PerRecord,
    /// The generic mesh for every record.
    Generic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSourceConfig {
    pub source: MeshSource,
    /// `synthetic:<resolution>` or an OBJ path relative to the manifest root.
    pub generic: String,
    /// File of 68 vertex indices for an OBJ generic mesh.
    pub generic_landmarks: Option<String>,
    /// Mesh-frame direction the face looks along.
    pub frontal_axis: [f64; 3],
}

impl Default for MeshSourceConfig {
    fn default() -> Self {
        MeshSourceConfig {
            source: MeshSource::PerRecord,
            generic: format!("synthetic:{DEFAULT_RESOLUTION}"),
            generic_landmarks: None,
            frontal_axis: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub seed: u64,
    pub pitch_cap_deg: f64,
    pub sampling: SamplingConfig,
    pub render: RenderConfig,
    pub visibility: VisibilityConfig,
    pub mesh: MeshSourceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Landmark,
            seed: 0,
            pitch_cap_deg: DEFAULT_PITCH_CAP_DEG,
            sampling: SamplingConfig::default(),
            render: RenderConfig::default(),
            visibility: VisibilityConfig::default(),
            mesh: MeshSourceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.render.validate()?;
        VisibilityConfig::new(self.visibility.tau).map_err(|e| Error::Config(e.to_string()))?;
        if !(0.0..=90.0).contains(&self.pitch_cap_deg) {
            return Err(Error::Config(format!(
                "pitch_cap_deg {} outside [0, 90]",
                self.pitch_cap_deg
            )));
        }
        if self.mesh.frontal_axis.iter().all(|&v| v == 0.0)
            || self.mesh.frontal_axis.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Config(
                "frontal_axis must be a finite non-zero vector".into(),
            ));
        }
        Ok(())
    }
}
