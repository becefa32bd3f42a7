//! Procedural face-like test head.
//!
//! A superellipsoid with a nose, brow ridge, eye sockets and lips displaced
//! along +z. The vertex set and the triangulation are exactly mirror
//! symmetric about `x = 0`, and the 68 landmarks sit on grid vertices chosen
//! from fixed angular coordinates, so every oracle in the test suite has
//! known ground truth.

use std::f64::consts::PI;

use crate::annotate::scheme::{self, NUM_LANDMARKS};
use crate::mesh::{back_plane, Mesh, Plane};
use crate::{Error, Point3, Result, Vector3};

/// Resolution giving roughly 5k triangles.
pub const DEFAULT_RESOLUTION: usize = 36;

const SEMI_X: f64 = 0.75;
const SEMI_Y: f64 = 1.0;
const SEMI_Z: f64 = 0.85;
const EXP_LAT: f64 = 0.8;
const EXP_LON: f64 = 0.9;
const NOSE_LAT: f64 = -0.12;

#[derive(Clone, Debug)]
pub struct SyntheticHead {
    pub mesh: Mesh,
    pub landmark_vertex_ids: [u32; NUM_LANDMARKS],
    pub nose_apex: u32,
    /// `x = 0`, normal towards the subject's right (`−x`).
    pub known_bilateral: Plane,
    pub known_back: Plane,
}

impl SyntheticHead {
    pub fn landmark_points(&self) -> Vec<Point3> {
        self.landmark_vertex_ids
            .iter()
            .map(|&i| self.mesh.vertices()[i as usize])
            .collect()
    }

    /// Mirrored landmark vertex pairs, subject's right first.
    pub fn mirror_vertex_pairs(&self) -> Vec<(u32, u32)> {
        scheme::mirror_pairs()
            .into_iter()
            .map(|(r, l)| (self.landmark_vertex_ids[r], self.landmark_vertex_ids[l]))
            .collect()
    }
}

/// Angular position of each landmark as (longitude°, latitude°); negative
/// longitude is the subject's right. Left-side entries are mirrored.
fn landmark_angles(i: usize) -> (f64, f64) {
    const RIGHT_AND_CENTRE: [(usize, f64, f64); 39] = [
        (0, -75.0, -5.0),
        (1, -73.0, -15.0),
        (2, -68.0, -25.0),
        (3, -60.0, -34.0),
        (4, -48.0, -42.0),
        (5, -35.0, -48.0),
        (6, -22.0, -53.0),
        (7, -11.0, -56.0),
        (8, 0.0, -57.0),
        (17, -45.0, 28.0),
        (18, -37.0, 31.0),
        (19, -28.0, 32.0),
        (20, -19.0, 31.0),
        (21, -10.0, 28.0),
        (27, 0.0, 18.0),
        (28, 0.0, 10.0),
        (29, 0.0, 2.0),
        (30, 0.0, f64::NAN), // nose apex, placed on its ring
        (31, -9.0, -14.0),
        (32, -5.0, -16.0),
        (33, 0.0, -17.0),
        (36, -32.0, 15.0),
        (37, -27.0, 18.0),
        (38, -20.0, 18.0),
        (39, -15.0, 15.0),
        (40, -20.0, 12.0),
        (41, -27.0, 12.0),
        (48, -17.0, -32.0),
        (49, -11.0, -28.0),
        (50, -5.0, -27.0),
        (51, 0.0, -28.0),
        (57, 0.0, -38.0),
        (58, -6.0, -37.0),
        (59, -11.0, -35.0),
        (60, -13.0, -32.0),
        (61, -5.0, -30.0),
        (62, 0.0, -31.0),
        (66, 0.0, -33.0),
        (67, -5.0, -33.0),
    ];
    let own = |k: usize| {
        RIGHT_AND_CENTRE
            .iter()
            .find(|e| e.0 == k)
            .map(|e| (e.1, e.2))
    };
    own(i)
        .or_else(|| own(scheme::MIRROR[i]).map(|(lon, lat)| (-lon, lat)))
        .expect("every landmark has a right-side or centre entry")
}

fn spow(v: f64, e: f64) -> f64 {
    v.signum() * v.abs().powf(e)
}

fn gauss(d: f64, sigma: f64) -> f64 {
    (-0.5 * (d / sigma).powi(2)).exp()
}

/// Forward displacement of the face features; even in `lon`.
fn relief(lon: f64, lat: f64, nose_lat: f64) -> f64 {
    let nose = 0.30 * gauss(lon, 0.12) * gauss(lat - nose_lat, 0.20);
    let brow = 0.05 * gauss(lat - 0.45, 0.07) * gauss(lon, 0.55);
    let sockets =
        -0.05 * (gauss(lon - 0.40, 0.11) + gauss(lon + 0.40, 0.11)) * gauss(lat - 0.27, 0.09);
    let lips = 0.03 * gauss(lon, 0.25) * gauss(lat + 0.55, 0.07);
    nose + brow + sockets + lips
}

/// Right-half (`lon ∈ [−π, 0]`) surface point.
fn surface(lon: f64, lat: f64, nose_lat: f64, on_centreline: bool) -> Point3 {
    let (cl, sl) = (lat.cos(), lat.sin());
    let x = if on_centreline {
        0.0
    } else {
        SEMI_X * spow(cl, EXP_LAT) * spow(lon.sin(), EXP_LON)
    };
    let y = SEMI_Y * spow(sl, EXP_LAT);
    let z = SEMI_Z * spow(cl, EXP_LAT) * spow(lon.cos(), EXP_LON) + relief(lon, lat, nose_lat);
    Point3::new(x, y, z)
}

pub fn generate_head(resolution: usize) -> Result<SyntheticHead> {
    if resolution < 8 {
        return Err(Error::InvalidInput(format!(
            "head resolution {resolution} < 8"
        )));
    }
    let nlat = resolution;
    let nlon = 2 * resolution;
    let half = nlon / 2;
    let lat_of = |i: usize| -PI / 2.0 + PI * i as f64 / nlat as f64;
    let lon_of = |j: usize| -PI + 2.0 * PI * j as f64 / nlon as f64;
    let nose_ring = ((NOSE_LAT + PI / 2.0) / (PI / nlat as f64)).round() as usize;
    let nose_lat = lat_of(nose_ring);

    // ring vertices for latitude rings 1..nlat-1, then the two poles
    let ring_len = nlon;
    let vid = |i: usize, j: usize| ((i - 1) * ring_len + (j % nlon)) as u32;
    let mut vertices = Vec::with_capacity((nlat - 1) * ring_len + 2);
    for i in 1..nlat {
        let lat = lat_of(i);
        let ring_start = vertices.len();
        for j in 0..nlon {
            if j <= half {
                vertices.push(surface(lon_of(j), lat, nose_lat, j == 0 || j == half));
            } else {
                let m: Point3 = vertices[ring_start + (nlon - j)];
                vertices.push(Point3::new(-m.x, m.y, m.z));
            }
        }
    }
    let south = vertices.len() as u32;
    vertices.push(surface(0.0, -PI / 2.0, nose_lat, true));
    let north = vertices.len() as u32;
    vertices.push(surface(0.0, PI / 2.0, nose_lat, true));

    let mut triangles = Vec::with_capacity(2 * nlat * nlon);
    for j in 0..nlon {
        let j1 = j + 1;
        triangles.push([south, vid(1, j1), vid(1, j)]);
        for i in 1..nlat - 1 {
            let (a, b, c, d) = (vid(i, j), vid(i, j1), vid(i + 1, j1), vid(i + 1, j));
            // mirrored quads use the mirrored diagonal
            if j < half {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
        triangles.push([north, vid(nlat - 1, j), vid(nlat - 1, j1)]);
    }
    let mesh = Mesh::new(vertices, triangles, None)?;

    let snap = |lon_deg: f64, lat_deg: f64| -> u32 {
        let lat = if lat_deg.is_nan() {
            nose_lat
        } else {
            lat_deg.to_radians()
        };
        let i = ((lat + PI / 2.0) / (PI / nlat as f64))
            .round()
            .clamp(1.0, (nlat - 1) as f64) as usize;
        let jr = ((lon_deg.abs().to_radians()) / (2.0 * PI / nlon as f64)).round() as usize;
        let j = if lon_deg <= 0.0 { half - jr } else { half + jr };
        vid(i, j)
    };
    let landmark_vertex_ids: [u32; NUM_LANDMARKS] = std::array::from_fn(|k| {
        let (lon, lat) = landmark_angles(k);
        snap(lon, lat)
    });
    let nose_apex = vid(nose_ring, half);
    let known_back = back_plane(&mesh, &Vector3::z())?;
    Ok(SyntheticHead {
        mesh,
        landmark_vertex_ids,
        nose_apex,
        known_bilateral: Plane {
            normal: -Vector3::x(),
            offset: 0.0,
        },
        known_back,
    })
}
