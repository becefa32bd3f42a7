use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::raster::Raster;
use crate::{Error, Point2, Result};

/// 2D similarity `p' = [a -b; b a] p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity2 {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Similarity2 {
    pub const IDENTITY: Similarity2 = Similarity2 {
        a: 1.0,
        b: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    /// Rotation by `deg` about `center`, then translation by `shift`.
    pub fn about(center: Point2, deg: f64, scale: f64, shift: [f64; 2]) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        let (a, b) = (scale * c, scale * s);
        Similarity2 {
            a,
            b,
            tx: center.x - (a * center.x - b * center.y) + shift[0],
            ty: center.y - (b * center.x + a * center.y) + shift[1],
        }
    }

    pub fn scale(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn rotation_deg(&self) -> f64 {
        self.b.atan2(self.a).to_degrees()
    }

    pub fn apply(&self, p: &Point2) -> Point2 {
        Point2::new(
            self.a * p.x - self.b * p.y + self.tx,
            self.b * p.x + self.a * p.y + self.ty,
        )
    }

    pub fn inverse(&self) -> Similarity2 {
        let n = self.a * self.a + self.b * self.b;
        let (a, b) = (self.a / n, -self.b / n);
        Similarity2 {
            a,
            b,
            tx: -(a * self.tx - b * self.ty),
            ty: -(b * self.tx + a * self.ty),
        }
    }
}

/// Least-squares similarity taking `src` onto `dst`.
///
/// Fails on fewer than two points or a collinear source set.
pub fn fit_similarity_2d(src: &[Point2], dst: &[Point2]) -> Result<Similarity2> {
    if src.len() != dst.len() || src.len() < 2 {
        return Err(Error::InvalidInput(
            "need matching point sets of size >= 2".into(),
        ));
    }
    let n = src.len() as f64;
    let ms = src
        .iter()
        .fold(Point2::origin().coords, |acc, p| acc + p.coords)
        / n;
    let md = dst
        .iter()
        .fold(Point2::origin().coords, |acc, p| acc + p.coords)
        / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut num_a, mut num_b) = (0.0, 0.0);
    for (p, q) in src.iter().zip(dst) {
        let (x, y) = (p.x - ms.x, p.y - ms.y);
        let (u, v) = (q.x - md.x, q.y - md.y);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        num_a += x * u + y * v;
        num_b += x * v - y * u;
    }
    let trace = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    if !(trace > 0.0) || det <= 1e-9 * trace * trace {
        return Err(Error::Degenerate("alignment points are collinear".into()));
    }
    let (a, b) = (num_a / trace, num_b / trace);
    Ok(Similarity2 {
        a,
        b,
        tx: md.x - (a * ms.x - b * ms.y),
        ty: md.y - (b * ms.x + a * ms.y),
    })
}

pub fn apply_similarity_2d(t: &Similarity2, points: &[Point2]) -> Vec<Point2> {
    points.iter().map(|p| t.apply(p)).collect()
}

/// Canonical five points (eye centers, nose tip, mouth corners) inside a
/// square crop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignTemplate {
    pub points: [[f64; 2]; 5],
    pub size: usize,
}

impl AlignTemplate {
    pub fn square(size: usize) -> Self {
        let s = size as f64;
        AlignTemplate {
            points: [
                [0.3 * s, 0.4 * s],
                [0.7 * s, 0.4 * s],
                [0.5 * s, 0.57 * s],
                [0.35 * s, 0.75 * s],
                [0.65 * s, 0.75 * s],
            ],
            size,
        }
    }

    pub fn point2s(&self) -> [Point2; 5] {
        self.points.map(|p| Point2::new(p[0], p[1]))
    }
}

impl Default for AlignTemplate {
    fn default() -> Self {
        AlignTemplate::square(112)
    }
}

#[derive(Clone, Debug)]
pub struct AlignedCrop {
    pub image: Raster,
    pub transform: Similarity2,
    pub rms_residual: f64,
}

fn warp(image: &Raster, to_output: &Similarity2, width: usize, height: usize) -> Raster {
    let back = to_output.inverse();
    Raster::from_fn(width, height, |x, y| {
        let p = back.apply(&Point2::new(x as f64, y as f64));
        image.sample_bilinear(p.x, p.y, [0.0; 3])
    })
}

/// Warps `image` so that `points` land on the template.
pub fn align_5pt(
    image: &Raster,
    points: &[Point2; 5],
    template: &AlignTemplate,
) -> Result<AlignedCrop> {
    let dst = template.point2s();
    let t = fit_similarity_2d(points, &dst)?;
    let rms = (points
        .iter()
        .zip(&dst)
        .map(|(p, q)| (t.apply(p) - q).norm_squared())
        .sum::<f64>()
        / 5.0)
        .sqrt();
    Ok(AlignedCrop {
        image: warp(image, &t, template.size, template.size),
        transform: t,
        rms_residual: rms,
    })
}

/// In-plane rotation (degrees) about the image center plus a translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityAugmentParams {
    pub rotation_deg: f64,
    pub translation: [f64; 2],
}

impl SimilarityAugmentParams {
    /// Draws rotation from `±max_rotation_deg` and each translation
    /// component from `±max_translation_px`.
    pub fn sample(max_rotation_deg: f64, max_translation_px: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |m: f64| {
            if m > 0.0 {
                rng.random_range(-m..=m)
            } else {
                0.0
            }
        };
        SimilarityAugmentParams {
            rotation_deg: draw(max_rotation_deg),
            translation: [draw(max_translation_px), draw(max_translation_px)],
        }
    }

    pub fn transform(&self, width: usize, height: usize) -> Similarity2 {
        let center = Point2::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        Similarity2::about(center, self.rotation_deg, 1.0, self.translation)
    }
}

/// Applies the same 2D rotation and translation to an image and its
/// landmarks. Pixels mapped from outside the source are black.
pub fn similarity_2d_augment(
    image: &Raster,
    landmarks: &[Point2],
    params: &SimilarityAugmentParams,
) -> Result<(Raster, Vec<Point2>)> {
    if !params.rotation_deg.is_finite() || !params.translation.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(
            "augmentation parameters must be finite".into(),
        ));
    }
    let t = params.transform(image.width(), image.height());
    Ok((
        warp(image, &t, image.width(), image.height()),
        apply_similarity_2d(&t, landmarks),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix2, Vector2};

    // Closed-form Umeyama estimate through an SVD of the cross-covariance.
    fn umeyama(src: &[Point2], dst: &[Point2]) -> (Matrix2<f64>, f64, Vector2<f64>) {
        let n = src.len() as f64;
        let ms: Vector2<f64> = src.iter().map(|p| p.coords).sum::<Vector2<f64>>() / n;
        let md: Vector2<f64> = dst.iter().map(|p| p.coords).sum::<Vector2<f64>>() / n;
        let mut cov = Matrix2::zeros();
        let mut var = 0.0;
        for (p, q) in src.iter().zip(dst) {
            cov += (q.coords - md) * (p.coords - ms).transpose();
            var += (p.coords - ms).norm_squared();
        }
        cov /= n;
        var /= n;
        let svd = cov.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix2::identity();
        if (u * vt).determinant() < 0.0 {
            d[(1, 1)] = -1.0;
        }
        let r = u * d * vt;
        let c = (svd.singular_values[0] * d[(0, 0)] + svd.singular_values[1] * d[(1, 1)]) / var;
        (r, c, md - c * r * ms)
    }

    #[test]
    fn identity_when_points_match_template() {
        let tpl = AlignTemplate::square(8);
        let img = Raster::from_fn(8, 8, |x, y| [x as f32 / 8.0, y as f32 / 8.0, 0.5]);
        let out = align_5pt(&img, &tpl.point2s(), &tpl).unwrap();
        assert_abs_diff_eq!(out.transform.a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.transform.b, 0.0, epsilon = 1e-12);
        for (p, q) in out.image.pixels().iter().zip(img.pixels()) {
            for c in 0..3 {
                assert_abs_diff_eq!(p[c], q[c], epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn recovers_inverse_of_rotated_scaled_template() {
        let tpl = AlignTemplate::default();
        let fwd = Similarity2::about(Point2::new(56.0, 56.0), 30.0, 2.0, [5.0, -3.0]);
        let moved: Vec<Point2> = apply_similarity_2d(&fwd, &tpl.point2s());
        let t = fit_similarity_2d(&moved, &tpl.point2s()).unwrap();
        assert_abs_diff_eq!(t.rotation_deg(), -30.0, epsilon = 1e-6);
        assert_abs_diff_eq!(t.scale(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn noisy_fit_matches_umeyama() {
        let tpl = AlignTemplate::default().point2s();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let fwd = Similarity2::about(
                Point2::new(40.0, 60.0),
                rng.random_range(-40.0..40.0),
                1.3,
                [4.0, 2.0],
            );
            let src: Vec<Point2> = tpl
                .iter()
                .map(|p| {
                    fwd.apply(p)
                        + Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
                .collect();
            let t = fit_similarity_2d(&src, &tpl).unwrap();
            let (r, c, tr) = umeyama(&src, &tpl);
            let rms = |f: &dyn Fn(&Point2) -> Point2| {
                (src.iter()
                    .zip(&tpl)
                    .map(|(p, q)| (f(p) - q).norm_squared())
                    .sum::<f64>()
                    / 5.0)
                    .sqrt()
            };
            let ours = rms(&|p| t.apply(p));
            let oracle = rms(&|p| Point2::from(c * r * p.coords + tr));
            assert_abs_diff_eq!(ours, oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn collinear_points_rejected() {
        let pts: Vec<Point2> = (0..5)
            .map(|i| Point2::new(i as f64, 2.0 * i as f64))
            .collect();
        assert!(fit_similarity_2d(&pts, &AlignTemplate::default().point2s()).is_err());
    }

    #[test]
    fn augment_identity_and_quarter_turn() {
        let img = Raster::from_fn(9, 9, |x, y| [x as f32, y as f32, 0.0]);
        let lms = vec![Point2::new(1.0, 2.0), Point2::new(7.5, 3.25)];
        let zero = SimilarityAugmentParams {
            rotation_deg: 0.0,
            translation: [0.0, 0.0],
        };
        let (out, moved) = similarity_2d_augment(&img, &lms, &zero).unwrap();
        assert_eq!(moved, lms);
        assert_eq!(out.pixels(), img.pixels());

        let quarter = SimilarityAugmentParams {
            rotation_deg: 90.0,
            translation: [0.0, 0.0],
        };
        let (_, moved) = similarity_2d_augment(&img, &lms, &quarter).unwrap();
        for (p, q) in lms.iter().zip(&moved) {
            let (dx, dy) = (p.x - 4.0, p.y - 4.0);
            assert_abs_diff_eq!(q.x, 4.0 - dy, epsilon = 1e-12);
            assert_abs_diff_eq!(q.y, 4.0 + dx, epsilon = 1e-12);
        }
    }

    #[test]
    fn augment_inverse_restores_landmarks() {
        for seed in 0..50 {
            let p = SimilarityAugmentParams::sample(30.0, 10.0, seed);
            let t = p.transform(64, 48);
            let lms: Vec<Point2> = (0..68)
                .map(|i| Point2::new(i as f64 * 0.9, 48.0 - i as f64 * 0.5))
                .collect();
            let back = apply_similarity_2d(&t.inverse(), &apply_similarity_2d(&t, &lms));
            for (a, b) in lms.iter().zip(&back) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }
}
