//! Per-vertex color baking from the source image.
//!
//! Each vertex is projected orthographically under the source pose and takes
//! the color of the nearest source pixel. No depth test is done: occluded
//! vertices are baked too, since the view constraints keep them hidden.
//! Vertices projecting outside the image inherit the color of the nearest
//! textured vertex along mesh edges (breadth-first).

use std::collections::VecDeque;

use crate::mesh::{Mesh, Rgb};
use crate::pose::{Camera, RigidPose};
use crate::raster::Raster;
use crate::{Error, Exec, Point2, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ColoredMesh {
    pub mesh: Mesh,
    pub colors: Vec<Rgb>,
    /// `true` where the color came straight from a source pixel.
    pub textured: Vec<bool>,
}

impl ColoredMesh {
    /// Wraps a mesh that already carries vertex colors.
    pub fn from_mesh_colors(mesh: Mesh) -> Result<Self> {
        let colors = mesh
            .vertex_colors()
            .ok_or_else(|| Error::InvalidInput("mesh has no vertex colors".into()))?
            .to_vec();
        let textured = vec![true; colors.len()];
        Ok(ColoredMesh {
            mesh,
            colors,
            textured,
        })
    }

    /// Mesh copy carrying the baked colors, e.g. for OBJ export.
    pub fn to_mesh(&self) -> Result<Mesh> {
        self.mesh.with_colors(self.colors.clone())
    }
}

/// Nearest pixel to a continuous pixel position, rounding half away from
/// zero on both axes. `None` when outside the raster.
pub fn nearest_pixel(p: &Point2, width: usize, height: usize) -> Option<(usize, usize)> {
    let (u, v) = (p.x.round(), p.y.round());
    if u >= 0.0 && v >= 0.0 && u < width as f64 && v < height as f64 {
        Some((u as usize, v as usize))
    } else {
        None
    }
}

pub fn bake_vertex_colors(
    mesh: &Mesh,
    image: &Raster,
    pose: &RigidPose,
    camera: &Camera,
) -> Result<ColoredMesh> {
    bake_vertex_colors_with(mesh, image, pose, camera, Exec::default())
}

pub fn bake_vertex_colors_with(
    mesh: &Mesh,
    image: &Raster,
    pose: &RigidPose,
    camera: &Camera,
    exec: Exec,
) -> Result<ColoredMesh> {
    if image.is_empty() {
        return Err(Error::Bake("empty image".into()));
    }
    let samples: Vec<Option<Rgb>> = exec.map_slice(mesh.vertices(), |v| {
        let px = camera.project(&pose.transform_point(v));
        nearest_pixel(&px, image.width(), image.height()).map(|(u, v)| image.get(u, v))
    });
    if samples.iter().all(Option::is_none) {
        return Err(Error::Bake(
            "no vertex projects inside the image (check pose and scale)".into(),
        ));
    }
    let textured: Vec<bool> = samples.iter().map(Option::is_some).collect();
    let colors = fill_untextured(mesh, samples);
    Ok(ColoredMesh {
        mesh: mesh.clone(),
        colors,
        textured,
    })
}

/// Multi-source BFS from all textured vertices. Components with no
/// textured vertex get the mean textured color.
fn fill_untextured(mesh: &Mesh, samples: Vec<Option<Rgb>>) -> Vec<Rgb> {
    let mut colors = samples;
    let adj = mesh.adjacency();
    let mut queue: VecDeque<u32> = colors
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_some())
        .map(|(i, _)| i as u32)
        .collect();
    while let Some(i) = queue.pop_front() {
        let c = colors[i as usize];
        for &j in &adj[i as usize] {
            if colors[j as usize].is_none() {
                colors[j as usize] = c;
                queue.push_back(j);
            }
        }
    }
    let (sum, n) = colors
        .iter()
        .flatten()
        .fold(([0.0f64; 3], 0usize), |(s, n), c| {
            (
                [s[0] + c[0] as f64, s[1] + c[1] as f64, s[2] + c[2] as f64],
                n + 1,
            )
        });
    let mean = sum.map(|v| (v / n.max(1) as f64) as f32);
    colors.into_iter().map(|c| c.unwrap_or(mean)).collect()
}
