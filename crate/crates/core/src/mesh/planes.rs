use nalgebra::{Matrix3, SymmetricEigen};

use super::{Mesh, Plane};
use crate::{Error, Point3, Result, Vector3};

/// Bilateral symmetry plane from mirrored vertex index pairs of `mesh`.
pub fn fit_bilateral_plane(mesh: &Mesh, pairs: &[(u32, u32)]) -> Result<Plane> {
    let n = mesh.vertices().len();
    let points = pairs
        .iter()
        .map(|&(a, b)| {
            if a as usize >= n || b as usize >= n {
                return Err(Error::InvalidInput(format!(
                    "landmark pair ({a}, {b}) out of range for {n} vertices"
                )));
            }
            Ok((mesh.vertices()[a as usize], mesh.vertices()[b as usize]))
        })
        .collect::<Result<Vec<_>>>()?;
    fit_bilateral_plane_points(&points)
}

/// Bilateral symmetry plane from mirrored 3D point pairs.
///
/// The normal is the dominant direction of the pair difference vectors
/// (principal eigenvector of their scatter matrix) and the plane passes
/// through the mean of the pair midpoints. The normal is oriented so the
/// first point of the first pair lies on the positive side.
pub fn fit_bilateral_plane_points(pairs: &[(Point3, Point3)]) -> Result<Plane> {
    if pairs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 mirrored pairs, got {}",
            pairs.len()
        )));
    }
    let k = pairs.len() as f64;
    let mids: Vec<Vector3> = pairs
        .iter()
        .map(|(a, b)| (a.coords + b.coords) * 0.5)
        .collect();
    let mean_mid = mids.iter().sum::<Vector3>() / k;

    let mut diff_scatter = Matrix3::zeros();
    let mut mid_scatter = Matrix3::zeros();
    for ((a, b), m) in pairs.iter().zip(&mids) {
        let d = a - b;
        diff_scatter += d * d.transpose();
        let c = m - mean_mid;
        mid_scatter += c * c.transpose();
    }

    let diff_eig = SymmetricEigen::new(diff_scatter);
    let (imax, &lmax) = diff_eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("3 eigenvalues");
    let scale = pairs
        .iter()
        .map(|(a, b)| a.coords.norm().max(b.coords.norm()))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    if !(lmax > 1e-24 * scale * scale) {
        return Err(Error::Degenerate("mirrored pairs coincide".into()));
    }

    // midpoints must span the plane, otherwise its in-plane extent is unknown
    let mut mid_vals: Vec<f64> = SymmetricEigen::new(mid_scatter)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    mid_vals.sort_by(|a, b| b.total_cmp(a));
    if !(mid_vals[1] > 1e-12 * mid_vals[0].max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("pair midpoints are collinear".into()));
    }

    let mut normal: Vector3 = diff_eig.eigenvectors.column(imax).into_owned();
    normal.normalize_mut();
    let mut offset = -normal.dot(&mean_mid);
    if normal.dot(&pairs[0].0.coords) + offset < 0.0 {
        normal = -normal;
        offset = -offset;
    }
    Ok(Plane { normal, offset })
}

/// Plane through the mesh centroid facing away from `frontal_axis`.
pub fn back_plane(mesh: &Mesh, frontal_axis: &Vector3) -> Result<Plane> {
    let len = frontal_axis.norm();
    if !(len > 0.0) {
        return Err(Error::Degenerate("frontal axis has zero length".into()));
    }
    let normal = -frontal_axis / len;
    let offset = -normal.dot(&mesh.centroid().coords);
    Ok(Plane { normal, offset })
}
