use std::collections::HashSet;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotate::{AlignTemplate, AnnotatedFace};
use crate::pose::PoseRecord;
use crate::render::LightId;
use crate::{Error, Result};

pub const SCHEMA_NAME: &str = "faceaug-manifest";
pub const SCHEMA_VERSION: u32 = 1;
/// Overrides the manifest root directory when set.
pub const ROOT_ENV_VAR: &str = "FACEAUG_ROOT";

fn default_root() -> String {
    ".".into()
}

fn default_units() -> String {
    "pixels".into()
}

/// First line of a manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub schema: String,
    pub version: u32,
    /// Directory that record paths are relative to, itself relative to the
    /// manifest file.
    #[serde(default = "default_root")]
    pub root: String,
    #[serde(default = "default_units")]
    pub units: String,
    #[serde(default)]
    pub template: AlignTemplate,
}

impl Default for ManifestHeader {
    fn default() -> Self {
        ManifestHeader {
            schema: SCHEMA_NAME.into(),
            version: SCHEMA_VERSION,
            root: default_root(),
            units: default_units(),
            template: AlignTemplate::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light: Option<LightId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    #[serde(flatten)]
    pub face: AnnotatedFace,
    /// OBJ file of this face's reconstruction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    /// Mesh-frame positions of the 68 landmarks, used to estimate the pose
    /// when `pose` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_landmarks: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<ViewRecord>,
}

/// Parsed manifest. `raw` keeps each record's original line so real
/// records can be re-emitted byte for byte.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
    pub raw: Vec<String>,
}

fn check_relative(path: &str, line: usize) -> Result<()> {
    let p = Path::new(path);
    let ok = !path.is_empty()
        && p.components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if ok {
        Ok(())
    } else {
        Err(Error::Manifest {
            line,
            msg: format!("path '{path}' must be relative and stay under the root"),
        })
    }
}

impl DatasetManifest {
    pub fn new(header: ManifestHeader) -> Self {
        DatasetManifest {
            header,
            records: Vec::new(),
            raw: Vec::new(),
        }
    }

    /// Appends a record, keeping its serialized form as the raw line.
    pub fn push(&mut self, record: ManifestRecord) -> Result<()> {
        self.raw.push(serde_json::to_string(&record)?);
        self.records.push(record);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let Some((hline, htext)) = lines.next() else {
            return Err(Error::Manifest {
                line: 0,
                msg: "missing header".into(),
            });
        };
        let header: ManifestHeader = serde_json::from_str(htext).map_err(|e| Error::Manifest {
            line: hline,
            msg: format!("bad header: {e}"),
        })?;
        if header.schema != SCHEMA_NAME || header.version != SCHEMA_VERSION {
            return Err(Error::Manifest {
                line: hline,
                msg: format!(
                    "unsupported schema {} v{} (expected {SCHEMA_NAME} v{SCHEMA_VERSION})",
                    header.schema, header.version
                ),
            });
        }
        let mut out = DatasetManifest::new(header);
        let mut ids = HashSet::new();
        for (line, text) in lines {
            let rec: ManifestRecord = serde_json::from_str(text).map_err(|e| Error::Manifest {
                line,
                msg: e.to_string(),
            })?;
            if !ids.insert(rec.id.clone()) {
                return Err(Error::Manifest {
                    line,
                    msg: format!("duplicate id '{}'", rec.id),
                });
            }
            check_relative(&rec.face.image, line)?;
            if let Some(m) = &rec.mesh {
                check_relative(m, line)?;
            }
            out.records.push(rec);
            out.raw.push(text.to_string());
        }
        Ok(out)
    }

    /// Header line followed by one line per record.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = serde_json::to_string(&self.header)?;
        s.push('\n');
        for line in &self.raw {
            s.push_str(line);
            s.push('\n');
        }
        Ok(s)
    }
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetManifest::parse(&text)
}

/// Root directory of a manifest: `FACEAUG_ROOT` when set, otherwise the
/// header root relative to the manifest's directory.
pub fn resolve_root(manifest_path: &Path, header: &ManifestHeader) -> PathBuf {
    if let Some(root) = std::env::var_os(ROOT_ENV_VAR).filter(|v| !v.is_empty()) {
        return PathBuf::from(root);
    }
    manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&header.root)
}
