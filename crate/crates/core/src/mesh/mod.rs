//! Triangle mesh representation and derived geometry.
//!
//! Canonical mesh frame: +x towards the subject's left, +y up, +z out of the
//! face. All plane and constraint math assumes this frame.

mod bvh;
mod obj;
mod planes;

pub use bvh::{intersect_triangle, Bvh, BARY_EPS};
pub use obj::{parse_obj, serialize_obj};
pub use planes::{back_plane, fit_bilateral_plane, fit_bilateral_plane_points};

use crate::{Error, Point3, Result, Vector3};

/// Linear RGB triple in `[0, 1]`.
pub type Rgb = [f32; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    vertex_colors: Option<Vec<Rgb>>,
    bbox_min: Point3,
    bbox_max: Point3,
}

impl Mesh {
    /// Validates and builds a mesh.
    ///
    /// Rejects empty triangle lists, out-of-range indices, color lists that
    /// do not match the vertex count and triangles whose area is below
    /// `1e-12 * bbox_diag²`.
    pub fn new(
        vertices: Vec<Point3>,
        triangles: Vec<[u32; 3]>,
        vertex_colors: Option<Vec<Rgb>>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if vertices
            .iter()
            .any(|v| !v.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let n = vertices.len();
        if let Some(colors) = &vertex_colors {
            if colors.len() != n {
                return Err(Error::InvalidMesh(format!(
                    "{} vertex colors for {} vertices",
                    colors.len(),
                    n
                )));
            }
        }
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let diag = (hi - lo).norm();
        let min_area = 1e-12 * diag * diag;
        for (ti, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {ti} references vertex {bad} (have {n})"
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            if !(area > min_area) {
                return Err(Error::InvalidMesh(format!("triangle {ti} is degenerate")));
            }
        }
        Ok(Mesh {
            vertices,
            triangles,
            vertex_colors,
            bbox_min: lo,
            bbox_max: hi,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn vertex_colors(&self) -> Option<&[Rgb]> {
        self.vertex_colors.as_deref()
    }

    /// Returns the same geometry with the given per-vertex colors.
    pub fn with_colors(&self, colors: Vec<Rgb>) -> Result<Self> {
        Mesh::new(self.vertices.clone(), self.triangles.clone(), Some(colors))
    }

    pub fn bbox(&self) -> (Point3, Point3) {
        (self.bbox_min, self.bbox_max)
    }

    pub fn bbox_diag(&self) -> f64 {
        (self.bbox_max - self.bbox_min).norm()
    }

    /// Mean of the vertex positions.
    pub fn centroid(&self) -> Point3 {
        let sum = self
            .vertices
            .iter()
            .fold(Vector3::zeros(), |acc, v| acc + v.coords);
        Point3::from(sum / self.vertices.len() as f64)
    }

    pub fn triangle(&self, id: usize) -> [Point3; 3] {
        self.triangles[id].map(|i| self.vertices[i as usize])
    }

    /// Area-weighted vertex normals. Vertices not referenced by any triangle
    /// get `+z`.
    pub fn vertex_normals(&self) -> Vec<Vector3> {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| self.vertices[i as usize]);
            // cross product length is twice the area
            let n = (b - a).cross(&(c - a));
            for &i in tri {
                acc[i as usize] += n;
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vector3::z()
                }
            })
            .collect()
    }

    /// Sorted, deduplicated vertex adjacency lists built from triangle edges.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                adj[u as usize].push(v);
                adj[v as usize].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Oriented plane `normal · x + offset = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: Vector3,
    pub offset: f64,
}

impl Plane {
    /// Normalizes `normal`; `offset` is rescaled so the plane is unchanged.
    pub fn new(normal: Vector3, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::Degenerate("plane normal has zero length".into()));
        }
        Ok(Plane {
            normal: normal / len,
            offset: offset / len,
        })
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) + self.offset
    }

    /// Mirror image of `p` across the plane.
    pub fn reflect(&self, p: &Point3) -> Point3 {
        p - self.normal * (2.0 * self.signed_distance(p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Vector3,
}

impl Ray {
    /// Builds a ray with a unit direction.
    pub fn new(origin: Point3, direction: Vector3) -> Result<Self> {
        let len = direction.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::Degenerate("ray direction has zero length".into()));
        }
        Ok(Ray {
            origin,
            direction: direction / len,
        })
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub triangle_id: u32,
    pub point: Point3,
    pub distance: f64,
    /// Weights of the triangle's three vertices, in index order.
    pub barycentric: [f64; 3],
}

impl Hit {
    /// True when `self` should replace `best` under the nearest-hit rule with
    /// ties going to the lowest triangle id.
    pub(crate) fn beats(&self, best: Option<&Hit>) -> bool {
        match best {
            None => true,
            Some(b) => {
                self.distance < b.distance
                    || (self.distance == b.distance && self.triangle_id < b.triangle_id)
            }
        }
    }
}
