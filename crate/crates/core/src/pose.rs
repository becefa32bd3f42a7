//! Scaled-orthographic head pose, yaw/pitch view offsets and the rotation
//! admissibility gate.
//!
//! Camera frame: x right, y up, z towards the viewer. The camera looks down
//! `-z`; the viewing direction used by the admissibility inequalities is
//! `(0, 0, 1)`. A frontal face (mesh `+z` out of the face) at the identity
//! pose looks straight at the camera.

use nalgebra::{Matrix2x3, Matrix3, Rotation3, Vector2, SVD};
use serde::{Deserialize, Serialize};

use crate::mesh::Plane;
use crate::{Error, Point2, Point3, Result, Vector3};

/// Maximum absolute pitch offset accepted by [`admissible_offset_set`].
pub const DEFAULT_PITCH_CAP_DEG: f64 = 45.0;

/// Mesh-to-camera transform `x_cam = s·R·x_mesh + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidPose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3,
    pub scale: f64,
}

impl Default for RigidPose {
    fn default() -> Self {
        RigidPose::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        RigidPose {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pose scale must be positive, got {scale}"
            )));
        }
        Ok(RigidPose {
            rotation,
            translation,
            scale,
        })
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    /// Directions and normals rotate only.
    pub fn transform_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    pub fn inverse_transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.inverse() * ((p.coords - self.translation) / self.scale))
    }

    pub fn inverse_transform_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation.inverse() * v
    }

    /// Applies a camera-frame rotation about `pivot` (camera frame) after
    /// this pose: `x ↦ R_off·(T(x) − pivot) + pivot`.
    pub fn then_rotate_about(&self, offset: &Rotation3<f64>, pivot: &Point3) -> RigidPose {
        RigidPose {
            rotation: offset * self.rotation,
            translation: offset * (self.translation - pivot.coords) + pivot.coords,
            scale: self.scale,
        }
    }

    /// Euler decomposition `R = R_y(yaw)·R_x(pitch)·R_z(roll)`, degrees.
    pub fn euler_deg(&self) -> (f64, f64, f64) {
        let m = self.rotation.matrix();
        let pitch = (-m[(1, 2)]).clamp(-1.0, 1.0).asin();
        let (yaw, roll) = if pitch.cos().abs() > 1e-12 {
            (m[(0, 2)].atan2(m[(2, 2)]), m[(1, 0)].atan2(m[(1, 1)]))
        } else {
            // gimbal lock: fold everything into yaw
            ((-m[(2, 0)]).atan2(m[(0, 0)]), 0.0)
        };
        (yaw.to_degrees(), pitch.to_degrees(), roll.to_degrees())
    }

    pub fn from_euler_deg(yaw: f64, pitch: f64, roll: f64) -> Rotation3<f64> {
        rot_y(yaw.to_radians()) * rot_x(pitch.to_radians()) * rot_z(roll.to_radians())
    }

    pub fn to_record(&self) -> PoseRecord {
        let (yaw_deg, pitch_deg, roll_deg) = self.euler_deg();
        PoseRecord {
            yaw_deg,
            pitch_deg,
            roll_deg,
            tx: self.translation.x,
            ty: self.translation.y,
            tz: self.translation.z,
            scale: self.scale,
        }
    }
}

/// Manifest form of a pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub scale: f64,
}

impl PoseRecord {
    pub fn to_pose(&self) -> Result<RigidPose> {
        RigidPose::new(
            RigidPose::from_euler_deg(self.yaw_deg, self.pitch_deg, self.roll_deg),
            Vector3::new(self.tx, self.ty, self.tz),
            self.scale,
        )
    }
}

fn rot_x(a: f64) -> Rotation3<f64> {
    let (s, c) = a.sin_cos();
    Rotation3::from_matrix_unchecked(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
}

fn rot_y(a: f64) -> Rotation3<f64> {
    let (s, c) = a.sin_cos();
    Rotation3::from_matrix_unchecked(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
}

fn rot_z(a: f64) -> Rotation3<f64> {
    let (s, c) = a.sin_cos();
    Rotation3::from_matrix_unchecked(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
}

/// Orthographic camera. Pixel centers sit at integer coordinates; the
/// optical axis passes through the image center `((w−1)/2, (h−1)/2)` and
/// image rows grow downwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Camera-frame units per pixel.
    pub pixel_scale: f64,
}

impl Camera {
    pub fn new(width: usize, height: usize, pixel_scale: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("camera has zero size".into()));
        }
        if !(pixel_scale > 0.0) {
            return Err(Error::InvalidInput("pixel scale must be positive".into()));
        }
        Ok(Camera {
            width,
            height,
            pixel_scale,
        })
    }

    /// Viewing direction in camera coordinates.
    pub const VIEW_DIRECTION: Vector3 = Vector3::new(0.0, 0.0, 1.0);

    fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) * 0.5,
            (self.height as f64 - 1.0) * 0.5,
        )
    }

    /// Camera-frame point to pixel coordinates (depth dropped).
    pub fn project(&self, p: &Point3) -> Point2 {
        let (cx, cy) = self.center();
        Point2::new(cx + p.x / self.pixel_scale, cy - p.y / self.pixel_scale)
    }

    /// Pixel coordinates to the camera-frame `(x, y)` of the view ray.
    pub fn unproject(&self, px: &Point2) -> (f64, f64) {
        let (cx, cy) = self.center();
        (
            (px.x - cx) * self.pixel_scale,
            (cy - px.y) * self.pixel_scale,
        )
    }
}

/// Yaw (about y) and pitch (about x) offsets in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerOffsets {
    pub yaw: f64,
    pub pitch: f64,
}

impl EulerOffsets {
    pub fn new(yaw: f64, pitch: f64) -> Result<Self> {
        for (name, v) in [("yaw", yaw), ("pitch", pitch)] {
            if !(-90.0..=90.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "{name} offset {v} outside [-90, 90]"
                )));
            }
        }
        Ok(EulerOffsets { yaw, pitch })
    }

    pub const ZERO: EulerOffsets = EulerOffsets {
        yaw: 0.0,
        pitch: 0.0,
    };

    /// `R_y(yaw)·R_x(pitch)`.
    pub fn rotation(&self) -> Rotation3<f64> {
        rot_y(self.yaw.to_radians()) * rot_x(self.pitch.to_radians())
    }

    /// `R_x(−pitch)·R_y(−yaw)`.
    pub fn inverse_rotation(&self) -> Rotation3<f64> {
        rot_x(-self.pitch.to_radians()) * rot_y(-self.yaw.to_radians())
    }
}

/// Pure rotation pose for the given offsets (`t = 0`, `s = 1`).
pub fn compose_rotation(offsets: &EulerOffsets) -> RigidPose {
    RigidPose {
        rotation: offsets.rotation(),
        translation: Vector3::zeros(),
        scale: 1.0,
    }
}

/// Total pose of a synthesized view: `base` followed by the offset rotation
/// about the camera-frame position of `pivot` (a mesh-frame point, usually
/// the centroid).
pub fn compose_view(base: &RigidPose, offsets: &EulerOffsets, pivot: &Point3) -> RigidPose {
    base.then_rotate_about(&offsets.rotation(), &base.transform_point(pivot))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseEstimate {
    pub pose: RigidPose,
    /// Root-mean-square reprojection residual in pixels.
    pub rms_px: f64,
}

/// Scaled orthographic Procrustes fit of 2D pixel landmarks to mesh points.
///
/// Solves the unconstrained affine camera by linear least squares, then
/// projects its 2×3 block onto the nearest scaled pair of orthonormal rows
/// (SVD). The third rotation row is `r1 × r2`. Depth is unobservable under
/// orthography; `t.z` puts the landmark centroid at camera depth 0.
pub fn estimate_pose(
    landmarks_2d: &[Point2],
    landmarks_3d: &[Point3],
    camera: &Camera,
) -> Result<PoseEstimate> {
    let n = landmarks_2d.len();
    if n != landmarks_3d.len() {
        return Err(Error::InvalidInput(format!(
            "{} image points vs {} mesh points",
            n,
            landmarks_3d.len()
        )));
    }
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 correspondences, got {n}"
        )));
    }
    let image: Vec<Vector2<f64>> = landmarks_2d
        .iter()
        .map(|p| {
            let (x, y) = camera.unproject(p);
            Vector2::new(x, y)
        })
        .collect();
    let mean2 = image.iter().sum::<Vector2<f64>>() / n as f64;
    let mean3 = landmarks_3d.iter().map(|p| p.coords).sum::<Vector3>() / n as f64;

    let mut xx = Matrix3::zeros();
    let mut yx = Matrix2x3::zeros();
    for (p2, p3) in image.iter().zip(landmarks_3d) {
        let a = p3.coords - mean3;
        let b = p2 - mean2;
        xx += a * a.transpose();
        yx += b * a.transpose();
    }
    let eig = xx.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo <= 1e-10 * hi {
        return Err(Error::Degenerate(
            "mesh landmarks are (nearly) coplanar; affine camera is unobservable".into(),
        ));
    }
    let xx_inv = xx
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular landmark scatter".into()))?;
    let affine: Matrix2x3<f64> = yx * xx_inv;

    let svd = SVD::new(affine, true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Degenerate("svd failed".into())),
    };
    let sv = svd.singular_values;
    if !(sv[1] > 1e-12 * sv[0]) {
        return Err(Error::Degenerate(
            "projected landmarks are collinear".into(),
        ));
    }
    let scale = 0.5 * (sv[0] + sv[1]);
    let rows: Matrix2x3<f64> = u * vt;
    let r1 = rows.row(0).transpose();
    let r2 = rows.row(1).transpose();
    let r3 = r1.cross(&r2);
    let m = Matrix3::from_rows(&[r1.transpose(), r2.transpose(), r3.transpose()]);
    let rotation = Rotation3::from_matrix_unchecked(m);

    let rc = rotation * mean3 * scale;
    let translation = Vector3::new(mean2.x - rc.x, mean2.y - rc.y, -rc.z);
    let pose = RigidPose::new(rotation, translation, scale)?;

    let sq: f64 = landmarks_2d
        .iter()
        .zip(landmarks_3d)
        .map(|(p2, p3)| (camera.project(&pose.transform_point(p3)) - p2).norm_squared())
        .sum();
    Ok(PoseEstimate {
        pose,
        rms_px: (sq / n as f64).sqrt(),
    })
}

/// Evaluates the two view-admissibility inequalities for the total pose `q`:
///
/// `[R·n_bilateral × (0,0,1)]_y ≥ 0` and `R·n_back · (0,0,1) ≤ 0`.
///
/// Only the rotation of `q` enters; plane normals are in the mesh frame.
pub fn check_rotation_admissible(q: &RigidPose, bilateral: &Plane, back: &Plane) -> bool {
    let v = Camera::VIEW_DIRECTION;
    let nb = q.transform_vector(&bilateral.normal);
    let nk = q.transform_vector(&back.normal);
    nb.cross(&v).y >= 0.0 && nk.dot(&v) <= 0.0
}

/// Keeps the candidates whose total view pose passes
/// [`check_rotation_admissible`] and whose pitch magnitude does not exceed
/// `pitch_cap_deg`. Order is preserved.
pub fn admissible_offset_set(
    base: &RigidPose,
    bilateral: &Plane,
    back: &Plane,
    candidates: &[EulerOffsets],
    pitch_cap_deg: f64,
) -> Vec<EulerOffsets> {
    candidates
        .iter()
        .filter(|o| o.pitch.abs() <= pitch_cap_deg)
        .filter(|o| {
            let q = base.then_rotate_about(&o.rotation(), &Point3::origin());
            check_rotation_admissible(&q, bilateral, back)
        })
        .copied()
        .collect()
}

/// Angle of the relative rotation `a·bᵀ`, radians.
pub fn rotation_angle_between(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    (a * b.inverse()).angle()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planes() -> (Plane, Plane) {
        (
            Plane {
                normal: -Vector3::x(),
                offset: 0.0,
            },
            Plane {
                normal: -Vector3::z(),
                offset: 0.0,
            },
        )
    }

    #[test]
    fn zero_offsets_are_identity() {
        let p = compose_rotation(&EulerOffsets::ZERO);
        assert_eq!(p.rotation, Rotation3::identity());
        assert_eq!(p.translation, Vector3::zeros());
        assert_eq!(p.scale, 1.0);
    }

    #[test]
    fn yaw_90_turns_z_into_x() {
        let p = compose_rotation(&EulerOffsets::new(90.0, 0.0).unwrap());
        let v = p.transform_vector(&Vector3::z());
        assert_relative_eq!(v, Vector3::x(), epsilon = 1e-15);
    }

    #[test]
    fn composition_matches_per_axis_product() {
        let o = EulerOffsets::new(20.0, -20.0).unwrap();
        let r = o.rotation().into_inner();
        let (y, x) = (20f64.to_radians(), (-20f64).to_radians());
        let ry = Matrix3::new(y.cos(), 0.0, y.sin(), 0.0, 1.0, 0.0, -y.sin(), 0.0, y.cos());
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, x.cos(), -x.sin(), 0.0, x.sin(), x.cos());
        assert_relative_eq!(r, ry * rx, epsilon = 1e-15);
        assert_relative_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        let back = o.inverse_rotation() * o.rotation();
        assert_relative_eq!(back.into_inner(), Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn offsets_out_of_range() {
        assert!(EulerOffsets::new(91.0, 0.0).is_err());
        assert!(EulerOffsets::new(0.0, -90.5).is_err());
        assert!(EulerOffsets::new(-90.0, 90.0).is_ok());
    }

    #[test]
    fn euler_round_trip() {
        for &(y, p, r) in &[(10.0, -20.0, 5.0), (-70.0, 30.0, -40.0), (0.0, 0.0, 0.0)] {
            let pose =
                RigidPose::new(RigidPose::from_euler_deg(y, p, r), Vector3::zeros(), 1.0).unwrap();
            let (a, b, c) = pose.euler_deg();
            assert_relative_eq!(a, y, epsilon = 1e-9);
            assert_relative_eq!(b, p, epsilon = 1e-9);
            assert_relative_eq!(c, r, epsilon = 1e-9);
            let back = pose.to_record().to_pose().unwrap();
            assert!(rotation_angle_between(&back.rotation, &pose.rotation) < 1e-12);
        }
    }

    #[test]
    fn camera_projection_round_trip() {
        let cam = Camera::new(256, 128, 0.5).unwrap();
        let px = cam.project(&Point3::new(0.0, 0.0, 3.0));
        assert_eq!((px.x, px.y), (127.5, 63.5));
        let p = Point2::new(10.0, 20.0);
        let (x, y) = cam.unproject(&p);
        assert_eq!(cam.project(&Point3::new(x, y, 0.0)), p);
        // +y camera is up in the image
        assert!(cam.project(&Point3::new(0.0, 1.0, 0.0)).y < 63.5);
        assert!(Camera::new(0, 3, 1.0).is_err());
    }

    #[test]
    fn frontal_literal_evaluation() {
        let (bilateral, back) = planes();
        assert!(check_rotation_admissible(
            &RigidPose::identity(),
            &bilateral,
            &back
        ));
        // opposite bilateral orientation: [(1,0,0)×(0,0,1)]_y = −1 < 0
        let flipped = Plane {
            normal: Vector3::x(),
            offset: 0.0,
        };
        assert!(!check_rotation_admissible(
            &RigidPose::identity(),
            &flipped,
            &back
        ));
    }

    #[test]
    fn back_facing_is_rejected() {
        let (bilateral, _) = planes();
        let away = Plane {
            normal: Vector3::z(),
            offset: 0.0,
        };
        assert!(!check_rotation_admissible(
            &RigidPose::identity(),
            &bilateral,
            &away
        ));
    }

    #[test]
    fn admissibility_ignores_translation_and_scale() {
        let (bilateral, back) = planes();
        for yaw in (-90..=90).step_by(5) {
            let r = EulerOffsets::new(yaw as f64, 10.0).unwrap().rotation();
            let a = RigidPose::new(r, Vector3::zeros(), 1.0).unwrap();
            let b = RigidPose::new(r, Vector3::new(3.0, -7.0, 100.0), 4.5).unwrap();
            assert_eq!(
                check_rotation_admissible(&a, &bilateral, &back),
                check_rotation_admissible(&b, &bilateral, &back)
            );
        }
    }

    #[test]
    fn offset_filtering() {
        let (bilateral, back) = planes();
        let frontal = RigidPose::identity();
        let cands: Vec<_> = [-40.0, -20.0, 20.0, 40.0]
            .iter()
            .map(|&y| EulerOffsets::new(y, 0.0).unwrap())
            .collect();
        assert_eq!(
            admissible_offset_set(&frontal, &bilateral, &back, &cands, DEFAULT_PITCH_CAP_DEG),
            cands
        );

        let turned = compose_rotation(&EulerOffsets::new(60.0, 0.0).unwrap());
        let plus40 = [EulerOffsets::new(40.0, 0.0).unwrap()];
        assert!(admissible_offset_set(&turned, &bilateral, &back, &plus40, 45.0).is_empty());

        let steep = [EulerOffsets::new(0.0, 80.0).unwrap()];
        assert!(admissible_offset_set(&frontal, &bilateral, &back, &steep, 45.0).is_empty());
    }
}
