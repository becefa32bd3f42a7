//! Fixtures shared by the integration tests: the synthetic head painted
//! with a smooth mirror-symmetric albedo, rendered into source images and
//! small on-disk datasets.
#![allow(dead_code)]

use std::path::Path;

use faceaug::annotate::{scheme, AnnotatedFace, BBox};
use faceaug::mesh::{serialize_obj, Rgb};
use faceaug::pipeline::{DatasetManifest, ManifestHeader, ManifestRecord};
use faceaug::pose::{Camera, RigidPose};
use faceaug::raster::Raster;
use faceaug::render::{rasterize, Background, RenderConfig};
use faceaug::synthetic::{generate_head, SyntheticHead, DEFAULT_RESOLUTION};
use faceaug::texture::ColoredMesh;
use faceaug::{Point2, Point3, Vector3};

pub fn head() -> SyntheticHead {
    generate_head(DEFAULT_RESOLUTION).unwrap()
}

/// Smooth albedo, even in x.
pub fn albedo(p: &Point3) -> Rgb {
    let r = 0.55 + 0.25 * (2.0 * p.y).sin() + 0.1 * p.z;
    let g = 0.45 + 0.2 * (3.0 * p.x * p.x).cos() * (1.5 * p.y).cos();
    let b = 0.35 + 0.2 * (p.x * p.x + 0.5 * p.z).sin();
    [
        r.clamp(0.0, 1.0) as f32,
        g.clamp(0.0, 1.0) as f32,
        b.clamp(0.0, 1.0) as f32,
    ]
}

pub fn painted(head: &SyntheticHead) -> ColoredMesh {
    let colors: Vec<Rgb> = head.mesh.vertices().iter().map(albedo).collect();
    ColoredMesh {
        mesh: head.mesh.clone(),
        textured: vec![true; colors.len()],
        colors,
    }
}

/// Head centred in a `size`² image, filling about three quarters of it.
pub fn frontal_pose(size: usize) -> RigidPose {
    RigidPose::new(
        RigidPose::from_euler_deg(0.0, 0.0, 0.0),
        Vector3::zeros(),
        0.38 * size as f64,
    )
    .unwrap()
}

pub fn posed(size: usize, yaw: f64, pitch: f64) -> RigidPose {
    RigidPose::new(
        RigidPose::from_euler_deg(yaw, pitch, 0.0),
        Vector3::zeros(),
        0.38 * size as f64,
    )
    .unwrap()
}

pub const BACKDROP: Rgb = [0.15, 0.2, 0.25];

/// Emission-only render of the painted head over a flat backdrop.
pub fn source_image(head: &SyntheticHead, pose: &RigidPose, camera: &Camera) -> Raster {
    let cfg = RenderConfig {
        emission_weight: 1.0,
        background: Background::Solid(BACKDROP),
        ..Default::default()
    };
    rasterize(&painted(head), pose, camera, None, &cfg, None)
        .unwrap()
        .image
}

pub fn project_all(points: &[Point3], pose: &RigidPose, camera: &Camera) -> Vec<Point2> {
    points
        .iter()
        .map(|p| camera.project(&pose.transform_point(p)))
        .collect()
}

/// Writes `identities × per_identity` rendered records of the head (with
/// the listed source yaws cycling) plus the mesh OBJ and a manifest.
pub fn write_dataset(dir: &Path, identities: usize, yaws: &[f64], size: usize) -> DatasetManifest {
    let head = head();
    let camera = Camera::new(size, size, 1.0).unwrap();
    std::fs::create_dir_all(dir.join("images")).unwrap();
    std::fs::create_dir_all(dir.join("meshes")).unwrap();
    std::fs::write(dir.join("meshes/head.obj"), serialize_obj(&head.mesh)).unwrap();
    let mut manifest = DatasetManifest::new(ManifestHeader::default());
    let lm3 = head.landmark_points();
    for id in 0..identities {
        for (k, &yaw) in yaws.iter().enumerate() {
            let pose = posed(size, yaw, 0.0);
            let name = format!("images/p{id}_{k}.png");
            source_image(&head, &pose, &camera)
                .save(dir.join(&name))
                .unwrap();
            let landmarks: Vec<[f64; 2]> = project_all(&lm3, &pose, &camera)
                .iter()
                .map(|p| [p.x, p.y])
                .collect();
            let face = AnnotatedFace {
                image: name,
                bbox: BBox::around(&landmarks),
                landmarks,
                visible: None,
                five_points: scheme::FIVE_POINTS,
                identity: format!("person{id}"),
                age: Some(faceaug::annotate::Age::Years(20.0 + id as f64)),
                gender: Some(if id % 2 == 0 { "f" } else { "m" }.into()),
                yaw_deg: yaw,
                pitch_deg: 0.0,
                is_synthetic: false,
                light_id: None,
            };
            manifest
                .push(ManifestRecord {
                    id: format!("p{id}_{k}"),
                    face,
                    mesh: Some("meshes/head.obj".into()),
                    mesh_landmarks: None,
                    pose: Some(pose.to_record()),
                    source_id: None,
                    view: None,
                })
                .unwrap();
        }
    }
    std::fs::write(dir.join("manifest.jsonl"), manifest.to_jsonl().unwrap()).unwrap();
    manifest
}
