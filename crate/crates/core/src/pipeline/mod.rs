//! Orchestration and I/O: manifests, run configuration, the end-to-end
//! augmentation run and its reports.

mod config;
mod manifest;
mod overlay;
mod report;
mod run;

pub use config::{MeshSource, MeshSourceConfig, RunConfig};
pub use manifest::{
    read_manifest, resolve_root, DatasetManifest, ManifestHeader, ManifestRecord, ViewRecord,
    ROOT_ENV_VAR, SCHEMA_NAME, SCHEMA_VERSION,
};
pub use overlay::{
    draw_landmarks, emit_overlays, overlay_grid, OverlayItem, OCCLUDED_COLOR, VISIBLE_COLOR,
};
pub use report::{cumulative_curve, emit_entropy_report, EntropyCurve};
pub use run::{run_augmentation, RunOptions, RunReport, MAX_FAILURE_RATE};
