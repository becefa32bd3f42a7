//! Bounding volume hierarchy over mesh triangles.
//!
//! Answers nearest-hit queries identically to an exhaustive scan: the same
//! triangle test is used on both paths and node culling is conservative, so
//! the only thing the tree changes is how many triangles get tested.

use super::{Hit, Mesh, Ray};
use crate::{Exec, Point3, Vector3};

const LEAF_SIZE: usize = 4;
/// Slack on the barycentric range so rays through shared edges and
/// vertices cannot slip between neighbouring triangles.
pub const BARY_EPS: f64 = 1e-9;

/// Möller–Trumbore ray/triangle test. Returns `(t, u, v)` with `t >= 0`,
/// where `u`, `v` are the weights of the second and third vertex.
///
/// `det_eps` is the cutoff on the absolute determinant below which the ray
/// is treated as parallel to the triangle. The barycentric bounds are
/// widened by [`BARY_EPS`].
pub fn intersect_triangle(ray: &Ray, tri: &[Point3; 3], det_eps: f64) -> Option<(f64, f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.direction.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < det_eps {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.direction.dot(&q) * inv;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t >= 0.0).then_some((t, u, v))
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Point3,
    max: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    fn padded(mut self, pad: f64) -> Self {
        let d = Vector3::repeat(pad);
        self.min -= d;
        self.max += d;
        self
    }

    /// Entry distance of the ray into the box, if it enters before `t_max`.
    fn entry(&self, origin: &Point3, inv_dir: &Vector3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let inv = inv_dir[a];
            let (near, far) = if inv.is_infinite() {
                // parallel to the slab: inside or never
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            } else {
                let ta = (self.min[a] - origin[a]) * inv;
                let tb = (self.max[a] - origin[a]) * inv;
                if ta <= tb {
                    (ta, tb)
                } else {
                    (tb, ta)
                }
            };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: u32, len: u32 },
    Inner { bounds: Aabb, left: u32, right: u32 },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Immutable acceleration structure borrowing its mesh.
#[derive(Clone, Debug)]
pub struct Bvh<'m> {
    mesh: &'m Mesh,
    nodes: Vec<Node>,
    order: Vec<u32>,
    det_eps: f64,
}

impl<'m> Bvh<'m> {
    /// Median-split build along the longest centroid axis.
    pub fn build(mesh: &'m Mesh) -> Self {
        let diag = mesh.bbox_diag();
        let pad = 1e-9 * diag.max(f64::MIN_POSITIVE);
        let tri_boxes: Vec<Aabb> = (0..mesh.triangles().len())
            .map(|i| {
                let mut b = Aabb::empty();
                mesh.triangle(i).iter().for_each(|p| b.grow(p));
                b.padded(pad)
            })
            .collect();
        let centroids: Vec<Point3> = tri_boxes
            .iter()
            .map(|b| Point3::from((b.min.coords + b.max.coords) * 0.5))
            .collect();
        let mut order: Vec<u32> = (0..tri_boxes.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tri_boxes.len() / LEAF_SIZE + 1);
        build_node(&mut nodes, &mut order, 0, &tri_boxes, &centroids);
        Bvh {
            mesh,
            nodes,
            order,
            det_eps: 1e-9 * diag * diag,
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    /// Determinant cutoff used by the triangle test.
    pub fn det_eps(&self) -> f64 {
        self.det_eps
    }

    pub(crate) fn hit_triangle(&self, ray: &Ray, id: u32) -> Option<Hit> {
        let tri = self.mesh.triangle(id as usize);
        intersect_triangle(ray, &tri, self.det_eps).map(|(t, u, v)| {
            let (u, v) = (u.max(0.0), v.max(0.0));
            let w = (1.0 - u - v).max(0.0);
            let sum = u + v + w;
            Hit {
                triangle_id: id,
                point: ray.at(t),
                distance: t,
                barycentric: [w / sum, u / sum, v / sum],
            }
        })
    }

    /// Nearest intersection; equal distances go to the lowest triangle id.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let inv_dir = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<Hit> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        self.nodes[0]
            .bounds()
            .entry(&ray.origin, &inv_dir, f64::INFINITY)?;
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let limit = best.as_ref().map_or(f64::INFINITY, |h| h.distance);
            match &self.nodes[ni as usize] {
                Node::Leaf { bounds, start, len } => {
                    if bounds.entry(&ray.origin, &inv_dir, limit).is_none() {
                        continue;
                    }
                    for &tid in &self.order[*start as usize..(*start + *len) as usize] {
                        if let Some(h) = self.hit_triangle(ray, tid) {
                            if h.beats(best.as_ref()) {
                                best = Some(h);
                            }
                        }
                    }
                }
                Node::Inner {
                    bounds,
                    left,
                    right,
                } => {
                    if bounds.entry(&ray.origin, &inv_dir, limit).is_none() {
                        continue;
                    }
                    let tl =
                        self.nodes[*left as usize]
                            .bounds()
                            .entry(&ray.origin, &inv_dir, limit);
                    let tr =
                        self.nodes[*right as usize]
                            .bounds()
                            .entry(&ray.origin, &inv_dir, limit);
                    // push the farther child first so the nearer one is visited first
                    match (tl, tr) {
                        (Some(a), Some(b)) => {
                            if a <= b {
                                stack.push(*right);
                                stack.push(*left);
                            } else {
                                stack.push(*left);
                                stack.push(*right);
                            }
                        }
                        (Some(_), None) => stack.push(*left),
                        (None, Some(_)) => stack.push(*right),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }

    /// Exhaustive scan over every triangle, with the same tie rule as
    /// [`Bvh::intersect`].
    pub fn intersect_brute_force(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for id in 0..self.mesh.triangles().len() as u32 {
            if let Some(h) = self.hit_triangle(ray, id) {
                if h.beats(best.as_ref()) {
                    best = Some(h);
                }
            }
        }
        best
    }

    /// Batch query, one result per ray in input order.
    pub fn intersect_many(&self, rays: &[Ray], exec: Exec) -> Vec<Option<Hit>> {
        exec.map_slice(rays, |r| self.intersect(r))
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    start: usize,
    boxes: &[Aabb],
    centroids: &[Point3],
) -> u32 {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in order.iter() {
        bounds.merge(&boxes[t as usize]);
        cbounds.grow(&centroids[t as usize]);
    }
    let index = nodes.len() as u32;
    let extent = cbounds.max - cbounds.min;
    if order.len() <= LEAF_SIZE || extent.max() <= 0.0 {
        nodes.push(Node::Leaf {
            bounds,
            start: start as u32,
            len: order.len() as u32,
        });
        return index;
    }
    let axis = extent.imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    // placeholder, patched once children exist
    nodes.push(Node::Leaf {
        bounds,
        start: 0,
        len: 0,
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(nodes, lo, start, boxes, centroids);
    let right = build_node(nodes, hi, start + mid, boxes, centroids);
    nodes[index as usize] = Node::Inner {
        bounds,
        left,
        right,
    };
    index
}
