//! Annotation lifecycle: lifting 2D landmarks onto the mesh, visibility in
//! new views, projection into synthesized images and label propagation.

mod align;
pub mod scheme;

pub use align::{
    align_5pt, apply_similarity_2d, fit_similarity_2d, similarity_2d_augment, AlignTemplate,
    AlignedCrop, Similarity2, SimilarityAugmentParams,
};

use serde::{Deserialize, Serialize};

use crate::mesh::{Bvh, Ray};
use crate::pose::{Camera, EulerOffsets, RigidPose};
use crate::render::LightId;
use crate::{Error, Point2, Point3, Result, Vector3};

/// Detection box in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Tight box around a point set.
    pub fn around(points: &[[f64; 2]]) -> BBox {
        let (mut x0, mut y0, mut x1, mut y1) = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for p in points {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        BBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }
}

/// Age annotation: numeric years or a class label such as `"25-32"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Age {
    Years(f64),
    Class(String),
}

fn default_five_points() -> [usize; 5] {
    scheme::FIVE_POINTS
}

/// One face record with its annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedFace {
    pub image: String,
    pub landmarks: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible: Option<Vec<bool>>,
    #[serde(default = "default_five_points")]
    pub five_points: [usize; 5],
    pub bbox: BBox,
    pub identity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<Age>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub pitch_deg: f64,
    #[serde(default)]
    pub is_synthetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_id: Option<LightId>,
}

impl AnnotatedFace {
    /// Checks the record against its image size.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.landmarks.len() != scheme::NUM_LANDMARKS {
            return Err(Error::InvalidInput(format!(
                "expected {} landmarks, got {}",
                scheme::NUM_LANDMARKS,
                self.landmarks.len()
            )));
        }
        if let Some(v) = &self.visible {
            if v.len() != self.landmarks.len() {
                return Err(Error::InvalidInput("visibility length mismatch".into()));
            }
        }
        let mut seen = [false; scheme::NUM_LANDMARKS];
        for &i in &self.five_points {
            if i >= scheme::NUM_LANDMARKS || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInput(format!(
                    "bad five-point indices {:?}",
                    self.five_points
                )));
            }
        }
        let (mx, my) = (0.2 * width as f64, 0.2 * height as f64);
        for p in &self.landmarks {
            if !(p[0] >= -mx
                && p[0] <= width as f64 + mx
                && p[1] >= -my
                && p[1] <= height as f64 + my)
            {
                return Err(Error::InvalidInput(format!(
                    "landmark {p:?} far outside the image"
                )));
            }
        }
        Ok(())
    }

    pub fn landmark_points(&self) -> Vec<Point2> {
        self.landmarks
            .iter()
            .map(|p| Point2::new(p[0], p[1]))
            .collect()
    }

    pub fn five_point_coords(&self) -> [Point2; 5] {
        self.five_points
            .map(|i| Point2::new(self.landmarks[i][0], self.landmarks[i][1]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftStatus {
    Hit,
    Miss,
}

/// Landmarks lifted into the mesh frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Landmark3DSet {
    /// Mesh-frame points. For misses, the point where the view ray crosses
    /// the depth of the mesh centroid.
    pub points: Vec<Point3>,
    pub status: Vec<LiftStatus>,
    /// The 2D landmarks the set was lifted from.
    pub source: Vec<Point2>,
}

impl Landmark3DSet {
    pub fn hit_count(&self) -> usize {
        self.status
            .iter()
            .filter(|s| **s == LiftStatus::Hit)
            .count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityConfig {
    /// Distance threshold as a fraction of the mesh bbox diagonal.
    pub tau: f64,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        VisibilityConfig { tau: 2e-3 }
    }
}

impl VisibilityConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tau must be positive, got {tau}"
            )));
        }
        Ok(VisibilityConfig { tau })
    }
}

/// Mesh-frame view ray through a camera-plane point, starting in front of
/// the whole mesh.
fn view_ray(bvh: &Bvh<'_>, pose: &RigidPose, cam_x: f64, cam_y: f64) -> (Ray, Point3) {
    let mesh = bvh.mesh();
    let dir = pose.inverse_transform_vector(&(-Vector3::z()));
    let centroid = mesh.centroid();
    let c_cam = pose.transform_point(&centroid);
    let on_plane = pose.inverse_transform_point(&Point3::new(cam_x, cam_y, c_cam.z));
    let back_off = 2.0 * mesh.bbox_diag() + (on_plane - centroid).norm();
    let ray = Ray::new(on_plane - dir * back_off, dir).expect("rotation preserves unit length");
    (ray, on_plane)
}

/// Casts the orthographic view ray of every 2D landmark onto the mesh.
///
/// Fails when more than half of the landmarks miss, which means the pose
/// does not align the mesh with the image.
pub fn lift_landmarks_to_3d(
    landmarks: &[Point2],
    bvh: &Bvh<'_>,
    pose: &RigidPose,
    camera: &Camera,
) -> Result<Landmark3DSet> {
    let mut points = Vec::with_capacity(landmarks.len());
    let mut status = Vec::with_capacity(landmarks.len());
    for lm in landmarks {
        let (x, y) = camera.unproject(lm);
        let (ray, on_plane) = view_ray(bvh, pose, x, y);
        match bvh.intersect(&ray) {
            Some(hit) => {
                points.push(hit.point);
                status.push(LiftStatus::Hit);
            }
            None => {
                points.push(on_plane);
                status.push(LiftStatus::Miss);
            }
        }
    }
    let misses = status.iter().filter(|s| **s == LiftStatus::Miss).count();
    if 2 * misses > landmarks.len() {
        return Err(Error::LiftFailure {
            misses,
            total: landmarks.len(),
        });
    }
    Ok(Landmark3DSet {
        points,
        status,
        source: landmarks.to_vec(),
    })
}

/// Distance from `p` to the first surface point on the view ray towards it
/// under pose `q`, or `None` when the ray misses.
pub fn occluder_distance(p: &Point3, bvh: &Bvh<'_>, q: &RigidPose) -> Option<f64> {
    let cam = q.transform_point(p);
    let (ray, _) = view_ray(bvh, q, cam.x, cam.y);
    bvh.intersect(&ray).map(|h| (h.point - p).norm())
}

/// A landmark is visible when the first surface hit on the view ray towards
/// it lies within `tau · bbox_diag` of it. A ray that misses counts as
/// visible (silhouette).
pub fn landmark_visibility(
    p: &Point3,
    bvh: &Bvh<'_>,
    q: &RigidPose,
    cfg: &VisibilityConfig,
) -> bool {
    match occluder_distance(p, bvh, q) {
        None => true,
        Some(d) => d <= cfg.tau * bvh.mesh().bbox_diag(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedLandmark {
    pub point: Point2,
    pub visible: bool,
}

/// Projects lifted landmarks into the view rendered with pose `q`.
///
/// Missed lifts move with the 2D motion of their nearest (in the source
/// image) hit landmark and are reported occluded.
pub fn project_landmarks(
    l3: &Landmark3DSet,
    bvh: &Bvh<'_>,
    q: &RigidPose,
    camera: &Camera,
    cfg: &VisibilityConfig,
) -> Vec<ProjectedLandmark> {
    let mut out: Vec<Option<ProjectedLandmark>> = l3
        .points
        .iter()
        .zip(&l3.status)
        .map(|(p, s)| {
            (*s == LiftStatus::Hit).then(|| ProjectedLandmark {
                point: camera.project(&q.transform_point(p)),
                visible: landmark_visibility(p, bvh, q, cfg),
            })
        })
        .collect();
    for i in 0..out.len() {
        if out[i].is_some() {
            continue;
        }
        let src = l3.source[i];
        let nearest = (0..out.len())
            .filter(|&j| l3.status[j] == LiftStatus::Hit)
            .min_by(|&a, &b| {
                (l3.source[a] - src)
                    .norm_squared()
                    .total_cmp(&(l3.source[b] - src).norm_squared())
                    .then(a.cmp(&b))
            });
        let point = match nearest {
            Some(j) => {
                let moved = camera.project(&q.transform_point(&l3.points[j]));
                src + (moved - l3.source[j])
            }
            None => src,
        };
        out[i] = Some(ProjectedLandmark {
            point,
            visible: false,
        });
    }
    out.into_iter().map(|p| p.expect("filled above")).collect()
}

/// Copies identity, age and gender; shifts the pose labels by the view
/// offsets and marks the record synthetic.
pub fn propagate_labels(
    src: &AnnotatedFace,
    offsets: &EulerOffsets,
    light: Option<LightId>,
) -> AnnotatedFace {
    AnnotatedFace {
        yaw_deg: src.yaw_deg + offsets.yaw,
        pitch_deg: src.pitch_deg + offsets.pitch,
        is_synthetic: true,
        light_id: light,
        ..src.clone()
    }
}

/// One line of a landmark file: `x y v` for each landmark, whitespace
/// separated, `v` being 1 (visible) or 0.
pub fn format_landmark_line(points: &[[f64; 2]], visible: &[bool]) -> String {
    points
        .iter()
        .zip(visible)
        .map(|(p, &v)| format!("{:?} {:?} {}", p[0], p[1], v as u8))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_landmark_line(line: &str) -> Result<(Vec<[f64; 2]>, Vec<bool>)> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 3 * scheme::NUM_LANDMARKS {
        return Err(Error::InvalidInput(format!(
            "landmark line has {} values, expected {}",
            tokens.len(),
            3 * scheme::NUM_LANDMARKS
        )));
    }
    let mut pts = Vec::with_capacity(scheme::NUM_LANDMARKS);
    let mut vis = Vec::with_capacity(scheme::NUM_LANDMARKS);
    for c in tokens.chunks_exact(3) {
        let parse = |t: &str| {
            t.parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad landmark value '{t}': {e}")))
        };
        pts.push([parse(c[0])?, parse(c[1])?]);
        vis.push(match c[2] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::InvalidInput(format!(
                    "bad visibility flag '{other}'"
                )))
            }
        });
    }
    Ok((pts, vis))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn face() -> AnnotatedFace {
        AnnotatedFace {
            image: "a.png".into(),
            landmarks: (0..68).map(|i| [10.0 + i as f64, 20.0]).collect(),
            visible: None,
            five_points: scheme::FIVE_POINTS,
            bbox: BBox {
                x: 0.0,
                y: 0.0,
                w: 100.0,
                h: 100.0,
            },
            identity: "id_7".into(),
            age: Some(Age::Years(31.0)),
            gender: Some("f".into()),
            yaw_deg: 3.0,
            pitch_deg: -1.0,
            is_synthetic: false,
            light_id: None,
        }
    }

    #[test]
    fn propagation_copies_labels() {
        let src = face();
        let out = propagate_labels(
            &src,
            &EulerOffsets::new(20.0, 0.0).unwrap(),
            Some(LightId::Top),
        );
        assert_eq!(out.identity, "id_7");
        assert_eq!(out.yaw_deg, 23.0);
        assert!(out.is_synthetic);
        assert_eq!(out.light_id, Some(LightId::Top));

        let same = propagate_labels(&src, &EulerOffsets::ZERO, None);
        assert_eq!(
            AnnotatedFace {
                is_synthetic: false,
                ..same
            },
            src
        );

        for yaw in [-60.0, -40.0, -20.0, -10.0, 10.0, 20.0, 40.0, 60.0] {
            let o = propagate_labels(&src, &EulerOffsets::new(yaw, 0.0).unwrap(), None);
            assert_eq!(
                (o.identity.as_str(), &o.age, &o.gender),
                ("id_7", &src.age, &src.gender)
            );
        }
    }

    #[test]
    fn record_validation() {
        let f = face();
        f.validate(200, 100).unwrap();
        let mut bad = f.clone();
        bad.five_points = [36, 36, 30, 48, 54];
        assert!(bad.validate(200, 100).is_err());
        let mut far = f.clone();
        far.landmarks[0] = [500.0, 0.0];
        assert!(far.validate(200, 100).is_err());
        let mut short = f;
        short.landmarks.pop();
        assert!(short.validate(200, 100).is_err());
    }

    #[test]
    fn serde_shape() {
        let f = face();
        let js = serde_json::to_string(&f).unwrap();
        assert!(js.contains("\"age\":31.0"));
        assert!(!js.contains("light_id"));
        let back: AnnotatedFace = serde_json::from_str(&js).unwrap();
        assert_eq!(back, f);
        let class: Age = serde_json::from_str("\"25-32\"").unwrap();
        assert_eq!(class, Age::Class("25-32".into()));
    }

    #[test]
    fn landmark_line_round_trip() {
        let f = face();
        let vis: Vec<bool> = (0..68).map(|i| i % 3 != 0).collect();
        let line = format_landmark_line(&f.landmarks, &vis);
        let (p, v) = parse_landmark_line(&line).unwrap();
        assert_eq!(p, f.landmarks);
        assert_eq!(v, vis);
        assert!(parse_landmark_line("1 2 1").is_err());
    }
}
