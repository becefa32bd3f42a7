use std::borrow::Cow;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{MeshSource, MeshSourceConfig, RunConfig};
use super::manifest::{DatasetManifest, ManifestRecord, ViewRecord};
use super::report::emit_entropy_report;
use crate::annotate::{
    format_landmark_line, lift_landmarks_to_3d, project_landmarks, propagate_labels, scheme, BBox,
    Landmark3DSet, LiftStatus,
};
use crate::mesh::{back_plane, fit_bilateral_plane_points, parse_obj, Bvh, Mesh, Plane};
use crate::pose::{
    admissible_offset_set, compose_view, estimate_pose, Camera, EulerOffsets, RigidPose,
};
use crate::raster::Raster;
use crate::render::rasterize_with;
use crate::sampler::{
    self, near_frontal, task_strategy, AugmentationPlan, PlannedView, SampleRecord, Scheme,
};
use crate::synthetic::generate_head;
use crate::texture::bake_vertex_colors_with;
use crate::{Error, Exec, Point3, Result, Vector3};

/// Runs fail when more than this fraction of records fail.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Directory that manifest paths are relative to.
    pub root: PathBuf,
    pub out_dir: PathBuf,
    pub exec: Exec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: sampler::Task,
    pub scheme: Scheme,
    pub seed: u64,
    pub ratio_cap: f64,
    pub real_count: usize,
    pub near_frontal_count: usize,
    pub planned_count: usize,
    pub synth_count: usize,
    pub failed_count: usize,
    pub identities: usize,
    pub identities_augmented: usize,
    pub mean_entropy_before: f64,
    pub mean_entropy_after: f64,
}

struct GenericMesh {
    mesh: Mesh,
    landmarks: Vec<Point3>,
}

fn load_generic(cfg: &MeshSourceConfig, root: &Path) -> Result<GenericMesh> {
    if let Some(res) = cfg.generic.strip_prefix("synthetic:") {
        let res: usize = res
            .parse()
            .map_err(|_| Error::Config(format!("bad synthetic resolution in '{}'", cfg.generic)))?;
        let head = generate_head(res)?;
        let landmarks = head.landmark_points();
        return Ok(GenericMesh {
            mesh: head.mesh,
            landmarks,
        });
    }
    let path = root.join(&cfg.generic);
    let mesh = parse_obj(&std::fs::read(&path).map_err(|e| Error::io(&path, e))?)?;
    let lm_name = cfg.generic_landmarks.as_ref().ok_or_else(|| {
        Error::Config("generic_landmarks is required for an OBJ generic mesh".into())
    })?;
    let lm_path = root.join(lm_name);
    let text = std::fs::read_to_string(&lm_path).map_err(|e| Error::io(&lm_path, e))?;
    let ids = text
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad vertex index '{t}' in {lm_name}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if ids.len() != scheme::NUM_LANDMARKS || ids.iter().any(|&i| i >= mesh.vertices().len()) {
        return Err(Error::Config(format!(
            "{lm_name} must hold {} valid vertex indices",
            scheme::NUM_LANDMARKS
        )));
    }
    let landmarks = ids.iter().map(|&i| mesh.vertices()[i]).collect();
    Ok(GenericMesh { mesh, landmarks })
}

/// Per-record state shared by the analysis and synthesis passes.
struct Setup<'a> {
    image: Raster,
    camera: Camera,
    mesh: Cow<'a, Mesh>,
    pose: RigidPose,
    lifted: Landmark3DSet,
    bilateral: Plane,
    back: Plane,
}

fn setup<'a>(
    rec: &ManifestRecord,
    root: &Path,
    cfg: &RunConfig,
    generic: Option<&'a GenericMesh>,
) -> Result<Setup<'a>> {
    let image = Raster::load(root.join(&rec.face.image))?;
    rec.face.validate(image.width(), image.height())?;
    let camera = Camera::new(image.width(), image.height(), 1.0)?;
    let lms2 = rec.face.landmark_points();

    let own_mesh = match (&rec.mesh, cfg.mesh.source) {
        (Some(p), MeshSource::PerRecord) => {
            let path = root.join(p);
            Some(parse_obj(
                &std::fs::read(&path).map_err(|e| Error::io(&path, e))?,
            )?)
        }
        _ => None,
    };
    let (mesh, pose, known): (Cow<'a, Mesh>, RigidPose, Option<Vec<Point3>>) = match own_mesh {
        Some(mesh) => {
            let known: Option<Vec<Point3>> = rec
                .mesh_landmarks
                .as_ref()
                .map(|v| v.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect());
            let pose = match (&rec.pose, &known) {
                (Some(p), _) => p.to_pose()?,
                (None, Some(k)) => estimate_pose(&lms2, k, &camera)?.pose,
                (None, None) => {
                    return Err(Error::InvalidInput(
                        "record has neither a pose nor mesh landmarks".into(),
                    ))
                }
            };
            (Cow::Owned(mesh), pose, known)
        }
        None => {
            let g = generic
                .ok_or_else(|| Error::InvalidInput("no mesh available for record".into()))?;
            let pose = estimate_pose(&lms2, &g.landmarks, &camera)?.pose;
            (Cow::Borrowed(&g.mesh), pose, Some(g.landmarks.clone()))
        }
    };

    let bvh = Bvh::build(&mesh);
    let lifted = lift_landmarks_to_3d(&lms2, &bvh, &pose, &camera)?;
    let pairs: Vec<(Point3, Point3)> = scheme::mirror_pairs()
        .into_iter()
        .filter_map(|(r, l)| match &known {
            Some(k) => Some((k[r], k[l])),
            None => (lifted.status[r] == LiftStatus::Hit && lifted.status[l] == LiftStatus::Hit)
                .then(|| (lifted.points[r], lifted.points[l])),
        })
        .collect();
    let bilateral = fit_bilateral_plane_points(&pairs)?;
    let axis = cfg.mesh.frontal_axis;
    let back = back_plane(&mesh, &Vector3::new(axis[0], axis[1], axis[2]))?;
    drop(bvh);
    Ok(Setup {
        image,
        camera,
        mesh,
        pose,
        lifted,
        bilateral,
        back,
    })
}

fn synthetic_id(source: &str, k: usize) -> String {
    format!("{source}__v{k:02}")
}

/// Renders every planned view of one record and writes the images.
fn synthesize(
    rec: &ManifestRecord,
    views: &[PlannedView],
    root: &Path,
    opts: &RunOptions,
    cfg: &RunConfig,
    generic: Option<&GenericMesh>,
) -> Result<Vec<ManifestRecord>> {
    let s = setup(rec, root, cfg, generic)?;
    let colored = bake_vertex_colors_with(&s.mesh, &s.image, &s.pose, &s.camera, opts.exec)?;
    let bvh = Bvh::build(&s.mesh);
    let pivot = s.mesh.centroid();
    let mut out = Vec::with_capacity(views.len());
    let mut images = Vec::with_capacity(views.len());
    for (k, view) in views.iter().enumerate() {
        let q = compose_view(&s.pose, &view.offsets, &pivot);
        let render = rasterize_with(
            &colored,
            &q,
            &s.camera,
            view.light,
            &cfg.render,
            Some(&s.image),
            opts.exec,
        )?;
        let projected = project_landmarks(&s.lifted, &bvh, &q, &s.camera, &cfg.visibility);
        let id = synthetic_id(&rec.id, k);
        let mut face = propagate_labels(&rec.face, &view.offsets, view.light);
        face.image = format!("synthetic/{id}.png");
        face.landmarks = projected.iter().map(|p| [p.point.x, p.point.y]).collect();
        face.visible = Some(projected.iter().map(|p| p.visible).collect());
        face.bbox = BBox::around(&face.landmarks);
        images.push((opts.out_dir.join(&face.image), render.image));
        out.push(ManifestRecord {
            id,
            face,
            mesh: None,
            mesh_landmarks: None,
            pose: Some(q.to_record()),
            source_id: Some(rec.id.clone()),
            view: Some(ViewRecord {
                yaw_deg: view.offsets.yaw,
                pitch_deg: view.offsets.pitch,
                light: view.light,
            }),
        });
    }
    for (path, img) in images {
        img.save(path)?;
    }
    Ok(out)
}

fn copy_into(root: &Path, out_dir: &Path, rel: &str) -> Result<()> {
    let src = root.join(rel);
    let dst = out_dir.join(rel);
    if let (Ok(a), Ok(b)) = (src.canonicalize(), dst.canonicalize()) {
        if a == b {
            return Ok(());
        }
    }
    if let Some(parent) = dst.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
    Ok(())
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Plans, renders and writes an augmented copy of `manifest` into
/// `opts.out_dir`: `manifest.jsonl`, `landmarks.txt`, `synthetic/*.png`,
/// `entropy_report.csv`, `entropy_curve.json`, `failures.log` and
/// `report.json`. Real records and their files are carried over unchanged.
///
/// A record that fails is logged and skipped; the run returns
/// [`Error::FailureRate`] after writing all outputs when more than
/// [`MAX_FAILURE_RATE`] of the records failed.
pub fn run_augmentation(
    manifest: &DatasetManifest,
    config: &RunConfig,
    opts: &RunOptions,
) -> Result<RunReport> {
    config.validate()?;
    let synth_dir = opts.out_dir.join("synthetic");
    std::fs::create_dir_all(&synth_dir).map_err(|e| Error::io(&synth_dir, e))?;
    let records = &manifest.records;
    let n = records.len();
    let samples: Vec<SampleRecord> = records
        .iter()
        .map(|r| SampleRecord {
            identity: r.face.identity.clone(),
            yaw_deg: r.face.yaw_deg,
        })
        .collect();
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| near_frontal(samples[i].yaw_deg, config.sampling.near_frontal_deg))
        .collect();

    let needs_generic = config.mesh.source == MeshSource::Generic
        || candidates.iter().any(|&i| records[i].mesh.is_none());
    let generic = if needs_generic && !candidates.is_empty() {
        Some(load_generic(&config.mesh, &opts.root)?)
    } else {
        None
    };

    let menu = task_strategy(config.task);
    let mut failures: Vec<Option<String>> = vec![None; n];
    let analysed = opts.exec.map_slice(&candidates, |&i| {
        setup(&records[i], &opts.root, config, generic.as_ref()).map(|s| {
            admissible_offset_set(
                &s.pose,
                &s.bilateral,
                &s.back,
                &menu.offsets,
                config.pitch_cap_deg,
            )
        })
    });
    let mut admissible: Vec<Vec<EulerOffsets>> = vec![Vec::new(); n];
    for (&i, res) in candidates.iter().zip(analysed) {
        match res {
            Ok(a) => admissible[i] = a,
            Err(e) => failures[i] = Some(e.to_string()),
        }
    }
    let plan = sampler::plan(&samples, &menu, &config.sampling, config.seed, &|i, o| {
        admissible[i].contains(o)
    });
    info!(
        "planned {} synthetic views for {} records",
        plan.synth_count, n
    );

    let with_views: Vec<usize> = (0..n).filter(|&i| !plan.views[i].is_empty()).collect();
    let rendered = opts.exec.map_slice(&with_views, |&i| {
        synthesize(
            &records[i],
            &plan.views[i],
            &opts.root,
            opts,
            config,
            generic.as_ref(),
        )
    });
    let mut synthetic: Vec<Vec<ManifestRecord>> = vec![Vec::new(); n];
    let mut realized = AugmentationPlan {
        views: vec![Vec::new(); n],
        real_count: n,
        synth_count: 0,
    };
    for (&i, res) in with_views.iter().zip(rendered) {
        match res {
            Ok(recs) => {
                realized.views[i] = plan.views[i].clone();
                realized.synth_count += recs.len();
                synthetic[i] = recs;
            }
            Err(e) => failures[i] = Some(e.to_string()),
        }
    }

    for (i, rec) in records.iter().enumerate() {
        let files = std::iter::once(&rec.face.image).chain(rec.mesh.as_ref());
        for f in files {
            if let Err(e) = copy_into(&opts.root, &opts.out_dir, f) {
                failures[i].get_or_insert_with(|| e.to_string());
            }
        }
    }

    let mut out_manifest = DatasetManifest::new(manifest.header.clone());
    out_manifest.header.root = ".".into();
    let mut landmarks = String::new();
    for (i, rec) in records.iter().enumerate() {
        out_manifest.records.push(rec.clone());
        out_manifest.raw.push(manifest.raw[i].clone());
        for s in &synthetic[i] {
            out_manifest.push(s.clone())?;
        }
    }
    for rec in &out_manifest.records {
        let vis = rec
            .face
            .visible
            .clone()
            .unwrap_or_else(|| vec![true; rec.face.landmarks.len()]);
        landmarks.push_str(&format_landmark_line(&rec.face.landmarks, &vis));
        landmarks.push('\n');
    }
    write(
        opts.out_dir.join("manifest.jsonl"),
        &out_manifest.to_jsonl()?,
    )?;
    write(opts.out_dir.join("landmarks.txt"), &landmarks)?;

    let rows = sampler::entropy_before_after(&samples, &realized);
    emit_entropy_report(&rows, &opts.out_dir)?;

    let mut log = String::new();
    let mut failed_count = 0;
    for (rec, f) in records.iter().zip(&failures) {
        if let Some(msg) = f {
            warn!("record {} skipped: {msg}", rec.id);
            failed_count += 1;
            let _ = writeln!(log, "{}\t{}", rec.id, msg);
        }
    }
    write(opts.out_dir.join("failures.log"), &log)?;

    let mean = |f: fn(&sampler::EntropyRow) -> f64| {
        if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(f).sum::<f64>() / rows.len() as f64
        }
    };
    let report = RunReport {
        task: config.task,
        scheme: config.sampling.scheme,
        seed: config.seed,
        ratio_cap: config.sampling.ratio_cap,
        real_count: n,
        near_frontal_count: candidates.len(),
        planned_count: plan.synth_count,
        synth_count: realized.synth_count,
        failed_count,
        identities: rows.len(),
        identities_augmented: rows
            .iter()
            .filter(|r| {
                records
                    .iter()
                    .zip(&realized.views)
                    .any(|(rec, v)| rec.face.identity == r.identity && !v.is_empty())
            })
            .count(),
        mean_entropy_before: mean(|r| r.e_before),
        mean_entropy_after: mean(|r| r.e_after),
    };
    write(
        opts.out_dir.join("report.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;

    if n > 0 && failed_count as f64 > MAX_FAILURE_RATE * n as f64 {
        return Err(Error::FailureRate {
            failed: failed_count,
            total: n,
        });
    }
    Ok(report)
}
