//! Orthographic z-buffer rasterizer with Gouraud shading and a four-spot
//! light rig.
//!
//! Vertices are shaded once in the camera frame with an emission/diffuse mix
//! and their colors are interpolated with screen-space barycentrics (exact
//! under orthographic projection). Rows are processed in independent bands,
//! each owning its slice of the color/depth buffer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh, Rgb};
use crate::pose::{Camera, RigidPose};
use crate::raster::Raster;
use crate::texture::ColoredMesh;
use crate::{Error, Exec, Point2, Point3, Result, Vector3};

const BAND_ROWS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightId {
    Top,
    Left,
    Right,
    Bottom,
}

impl LightId {
    pub const ALL: [LightId; 4] = [LightId::Top, LightId::Left, LightId::Right, LightId::Bottom];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LightId::Top => "top",
            LightId::Left => "left",
            LightId::Right => "right",
            LightId::Bottom => "bottom",
        }
    }

    /// Unit offset from the mesh centroid in the mesh frame.
    fn axis(self) -> Vector3 {
        match self {
            LightId::Top => Vector3::y(),
            LightId::Bottom => -Vector3::y(),
            LightId::Left => -Vector3::x(),
            LightId::Right => Vector3::x(),
        }
    }

    /// Uniform draw from the four lights.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> LightId {
        LightId::ALL[rng.random_range(0..4)]
    }
}

impl std::str::FromStr for LightId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LightId::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown light '{s}'")))
    }
}

/// Uniform light choice, deterministic in `seed`.
pub fn select_random_light(seed: u64) -> LightId {
    LightId::sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpotLight {
    pub id: LightId,
    pub position: Point3,
    /// Unit aim direction.
    pub direction: Vector3,
    pub intensity: f64,
    pub cone_half_angle_deg: f64,
    pub falloff: f64,
}

impl SpotLight {
    /// Angular attenuation at `p`: 1 on the aim axis, 0 at and beyond the
    /// cone edge, `((cosθ − cos cone) / (1 − cos cone))^falloff` in between.
    pub fn attenuation(&self, p: &Point3) -> f64 {
        let to_p = p - self.position;
        let d = to_p.norm();
        if d == 0.0 {
            return 1.0;
        }
        let cos_t = self.direction.dot(&to_p) / d;
        let cos_c = self.cone_half_angle_deg.to_radians().cos();
        if cos_t <= cos_c {
            return 0.0;
        }
        ((cos_t - cos_c) / (1.0 - cos_c))
            .min(1.0)
            .powf(self.falloff)
    }

    /// The same light after the rigid motion applied to the face.
    pub fn transformed(&self, pose: &RigidPose) -> SpotLight {
        SpotLight {
            position: pose.transform_point(&self.position),
            direction: pose.transform_vector(&self.direction).normalize(),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightRigConfig {
    /// Light distance from the centroid, in units of the mesh bbox diagonal.
    pub radius_factor: f64,
    pub intensity: f64,
    pub cone_half_angle_deg: f64,
    pub falloff: f64,
}

impl Default for LightRigConfig {
    fn default() -> Self {
        LightRigConfig {
            radius_factor: 2.0,
            intensity: 1.2,
            cone_half_angle_deg: 40.0,
            falloff: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightRig {
    lights: [SpotLight; 4],
}

impl LightRig {
    pub fn get(&self, id: LightId) -> &SpotLight {
        &self.lights[id.index()]
    }

    pub fn lights(&self) -> &[SpotLight; 4] {
        &self.lights
    }

    pub fn transformed(&self, pose: &RigidPose) -> LightRig {
        LightRig {
            lights: self.lights.map(|l| l.transformed(pose)),
        }
    }
}

/// Four spots above, below, left (−x) and right (+x) of the centroid, aimed
/// at it, in the mesh frame.
pub fn make_light_rig(mesh: &Mesh, config: &LightRigConfig) -> Result<LightRig> {
    let diag = mesh.bbox_diag();
    if !(diag > 0.0) {
        return Err(Error::Degenerate(
            "mesh has zero bounding-box diagonal".into(),
        ));
    }
    if !(1.5..=3.0).contains(&config.radius_factor) {
        return Err(Error::Config(format!(
            "light radius factor {} outside [1.5, 3]",
            config.radius_factor
        )));
    }
    if config.intensity < 0.0 {
        return Err(Error::Config("negative light intensity".into()));
    }
    let c = mesh.centroid();
    let r = config.radius_factor * diag;
    let lights = LightId::ALL.map(|id| SpotLight {
        id,
        position: c + id.axis() * r,
        direction: -id.axis(),
        intensity: config.intensity,
        cone_half_angle_deg: config.cone_half_angle_deg,
        falloff: config.falloff,
    });
    Ok(LightRig { lights })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    /// The source image, painted behind everything.
    SourceImage,
    Solid(Rgb),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Mix between the emissive (1) and diffuse (0) terms.
    pub emission_weight: f64,
    pub ambient: f64,
    pub background: Background,
    /// Camera-frame z of the background plane; geometry at or behind it is
    /// hidden. `None` puts the plane at infinity.
    pub background_z: Option<f64>,
    pub rig: LightRigConfig,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            emission_weight: 0.6,
            ambient: 0.55,
            background: Background::SourceImage,
            background_z: None,
            rig: LightRigConfig::default(),
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.emission_weight) {
            return Err(Error::Config(format!(
                "emission_weight {} outside [0, 1]",
                self.emission_weight
            )));
        }
        if !(self.ambient >= 0.0) {
            return Err(Error::Config("ambient must be non-negative".into()));
        }
        Ok(())
    }
}

/// Emission/diffuse mix for one surface point, camera frame.
///
/// `w·albedo + (1−w)·albedo·(ambient + max(0, n·l)·attenuation·intensity)`,
/// clamped to `[0, 1]`.
pub fn shade_vertex(
    albedo: Rgb,
    normal: &Vector3,
    position: &Point3,
    light: Option<&SpotLight>,
    config: &RenderConfig,
) -> Rgb {
    let w = config.emission_weight;
    let mut diffuse = config.ambient;
    if let Some(l) = light {
        let to_light = l.position - position;
        let len = to_light.norm();
        if len > 0.0 {
            let lambert = normal.dot(&(to_light / len)).max(0.0);
            diffuse += lambert * l.attenuation(position) * l.intensity;
        }
    }
    let k = w + (1.0 - w) * diffuse;
    albedo.map(|a| ((a as f64) * k).clamp(0.0, 1.0) as f32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub image: Raster,
    /// Distance along the viewing direction (`−z_cam`), `+∞` on background.
    pub depth: Vec<f64>,
    pub coverage: Vec<bool>,
}

impl RenderOutput {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn depth_at(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width() + x]
    }
}

/// Edge function `(b − a) × (c − a)`.
#[inline]
pub fn edge_function(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Barycentric weights of `p` in the screen triangle if it is covered
/// (edges inclusive), for either winding.
#[inline]
pub fn triangle_coverage(tri: &[Point2; 3], p: &Point2) -> Option<[f64; 3]> {
    let area = edge_function(&tri[0], &tri[1], &tri[2]);
    if area == 0.0 {
        return None;
    }
    let w0 = edge_function(&tri[1], &tri[2], p) / area;
    let w1 = edge_function(&tri[2], &tri[0], p) / area;
    let w2 = edge_function(&tri[0], &tri[1], p) / area;
    (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0).then_some([w0, w1, w2])
}

/// Shaded vertex in screen space.
#[derive(Clone, Copy, Debug)]
struct ScreenVertex {
    p: Point2,
    depth: f64,
    color: Rgb,
}

#[derive(Clone, Copy, Debug)]
struct Fragment {
    color: Rgb,
    depth: f64,
}

pub fn rasterize(
    cm: &ColoredMesh,
    pose: &RigidPose,
    camera: &Camera,
    light: Option<LightId>,
    config: &RenderConfig,
    source: Option<&Raster>,
) -> Result<RenderOutput> {
    rasterize_with(cm, pose, camera, light, config, source, Exec::default())
}

pub fn rasterize_with(
    cm: &ColoredMesh,
    pose: &RigidPose,
    camera: &Camera,
    light: Option<LightId>,
    config: &RenderConfig,
    source: Option<&Raster>,
    exec: Exec,
) -> Result<RenderOutput> {
    let rig = make_light_rig(&cm.mesh, &config.rig)?;
    rasterize_with_rig(cm, &rig, pose, camera, light, config, source, exec)
}

/// Like [`rasterize_with`] but with an explicit mesh-frame light rig.
#[allow(clippy::too_many_arguments)]
pub fn rasterize_with_rig(
    cm: &ColoredMesh,
    rig: &LightRig,
    pose: &RigidPose,
    camera: &Camera,
    light: Option<LightId>,
    config: &RenderConfig,
    source: Option<&Raster>,
    exec: Exec,
) -> Result<RenderOutput> {
    config.validate()?;
    let (w, h) = (camera.width, camera.height);
    if w == 0 || h == 0 {
        return Err(Error::InvalidInput("zero-size output".into()));
    }
    if cm.colors.len() != cm.mesh.vertices().len() {
        return Err(Error::InvalidInput(
            "color count does not match vertex count".into(),
        ));
    }
    let background = background_layer(config, source, w, h)?;
    let active = light.map(|id| rig.get(id).transformed(pose));

    let normals = cm.mesh.vertex_normals();
    let verts = cm.mesh.vertices();
    let screen: Vec<ScreenVertex> = exec.map_range(verts.len(), |i| {
        let p = pose.transform_point(&verts[i]);
        let n = pose.transform_vector(&normals[i]);
        ScreenVertex {
            p: camera.project(&p),
            depth: -p.z,
            color: shade_vertex(cm.colors[i], &n, &p, active.as_ref(), config),
        }
    });

    let depth_limit = config.background_z.map_or(f64::INFINITY, |z| -z);
    let tris: Vec<([ScreenVertex; 3], [i64; 4])> = cm
        .mesh
        .triangles()
        .iter()
        .filter_map(|t| {
            let sv = t.map(|i| screen[i as usize]);
            let xs = sv.map(|v| v.p.x);
            let ys = sv.map(|v| v.p.y);
            let x0 = xs
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
                .ceil()
                .max(0.0);
            let x1 = xs
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
                .floor()
                .min(w as f64 - 1.0);
            let y0 = ys
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
                .ceil()
                .max(0.0);
            let y1 = ys
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
                .floor()
                .min(h as f64 - 1.0);
            (x0 <= x1 && y0 <= y1).then_some((sv, [x0 as i64, x1 as i64, y0 as i64, y1 as i64]))
        })
        .collect();

    let mut buf: Vec<Fragment> = background
        .pixels()
        .iter()
        .map(|&color| Fragment {
            color,
            depth: f64::INFINITY,
        })
        .collect();

    exec.for_each_chunk_mut(&mut buf, BAND_ROWS * w, |band, chunk| {
        let row0 = (band * BAND_ROWS) as i64;
        let row1 = row0 + (chunk.len() / w) as i64 - 1;
        for (sv, [x0, x1, y0, y1]) in &tris {
            if *y1 < row0 || *y0 > row1 {
                continue;
            }
            let pts = sv.map(|v| v.p);
            for y in (*y0).max(row0)..=(*y1).min(row1) {
                let row = &mut chunk[((y - row0) as usize) * w..((y - row0) as usize + 1) * w];
                for x in *x0..=*x1 {
                    let Some(b) = triangle_coverage(&pts, &Point2::new(x as f64, y as f64)) else {
                        continue;
                    };
                    let depth = b[0] * sv[0].depth + b[1] * sv[1].depth + b[2] * sv[2].depth;
                    let frag = &mut row[x as usize];
                    if depth < frag.depth && depth < depth_limit {
                        let mut color = [0.0f32; 3];
                        for (k, c) in color.iter_mut().enumerate() {
                            let v = b[0] * sv[0].color[k] as f64
                                + b[1] * sv[1].color[k] as f64
                                + b[2] * sv[2].color[k] as f64;
                            *c = v.clamp(0.0, 1.0) as f32;
                        }
                        *frag = Fragment { color, depth };
                    }
                }
            }
        }
    });

    let depth: Vec<f64> = buf.iter().map(|f| f.depth).collect();
    let coverage: Vec<bool> = depth.iter().map(|d| d.is_finite()).collect();
    let image = Raster::from_pixels(w, h, buf.into_iter().map(|f| f.color).collect())?;
    Ok(RenderOutput {
        image,
        depth,
        coverage,
    })
}

fn background_layer(
    config: &RenderConfig,
    source: Option<&Raster>,
    w: usize,
    h: usize,
) -> Result<Raster> {
    match config.background {
        Background::Solid(c) => Ok(Raster::filled(w, h, c)),
        Background::SourceImage => {
            let src = source.ok_or_else(|| {
                Error::InvalidInput("source-image background needs the source raster".into())
            })?;
            if src.is_empty() {
                return Err(Error::InvalidInput("empty source raster".into()));
            }
            if (src.width(), src.height()) == (w, h) {
                return Ok(src.clone());
            }
            // nearest-neighbour resample onto the output grid
            let sx = src.width() as f64 / w as f64;
            let sy = src.height() as f64 / h as f64;
            Ok(Raster::from_fn(w, h, |x, y| {
                let u = (((x as f64 + 0.5) * sx) as usize).min(src.width() - 1);
                let v = (((y as f64 + 0.5) * sy) as usize).min(src.height() - 1);
                src.get(u, v)
            }))
        }
    }
}
