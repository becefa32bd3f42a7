//! Wavefront OBJ subset: `v` (3 or 6 floats) and `f` lines. Everything else
//! (normals, texture coordinates, groups, materials) is ignored.

use std::fmt::Write as _;

use super::{Mesh, Rgb};
use crate::{Error, Point3, Result};

pub fn parse_obj(text: &[u8]) -> Result<Mesh> {
    let text = std::str::from_utf8(text).map_err(|e| Error::ObjSyntax {
        line: 0,
        msg: format!("not utf-8: {e}"),
    })?;
    let mut vertices = Vec::new();
    let mut colors: Vec<Rgb> = Vec::new();
    let mut colored: Option<bool> = None;
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let syntax = |msg: String| Error::ObjSyntax { line: line_no, msg };
        match tag {
            "v" => {
                let vals = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| syntax(format!("bad vertex coordinate: {e}")))?;
                let has_color = match vals.len() {
                    3 => false,
                    6 => true,
                    n => return Err(syntax(format!("vertex needs 3 or 6 values, got {n}"))),
                };
                if *colored.get_or_insert(has_color) != has_color {
                    return Err(syntax("mixed colored and uncolored vertices".into()));
                }
                vertices.push(Point3::new(vals[0], vals[1], vals[2]));
                if has_color {
                    colors.push([vals[3] as f32, vals[4] as f32, vals[5] as f32]);
                }
            }
            "f" => {
                let idx = tokens
                    .map(|t| t.split('/').next().unwrap_or("").parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| syntax(format!("bad face index: {e}")))?;
                if idx.len() < 3 {
                    return Err(syntax(format!(
                        "face needs at least 3 indices, got {}",
                        idx.len()
                    )));
                }
                faces.push((line_no, idx));
            }
            _ => {}
        }
    }

    let count = vertices.len();
    let resolve = |line: usize, index: i64| -> Result<u32> {
        // 1-based; negative indices count back from the last vertex
        let abs = if index > 0 {
            index - 1
        } else {
            count as i64 + index
        };
        if index == 0 || abs < 0 || abs >= count as i64 {
            return Err(Error::ObjIndex { line, index, count });
        }
        Ok(abs as u32)
    };
    let mut triangles = Vec::new();
    for (line, idx) in faces {
        let idx = idx
            .into_iter()
            .map(|i| resolve(line, i))
            .collect::<Result<Vec<_>>>()?;
        for k in 1..idx.len() - 1 {
            triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    if triangles.is_empty() {
        return Err(Error::InvalidMesh("obj contains no faces".into()));
    }
    let colors = (colored == Some(true)).then_some(colors);
    Mesh::new(vertices, triangles, colors)
}

/// Writes `v x y z [r g b]` lines followed by 1-based `f` lines.
///
/// Numbers use the shortest decimal form that parses back to the same
/// value, so `parse_obj(serialize_obj(m)) == m` for every finite mesh.
pub fn serialize_obj(mesh: &Mesh) -> String {
    let mut out = String::with_capacity(mesh.vertices().len() * 48);
    let colors = mesh.vertex_colors();
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = write!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        if let Some(c) = colors {
            let [r, g, b] = c[i];
            let _ = write!(out, " {:?} {:?} {:?}", r, g, b);
        }
        out.push('\n');
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_mesh() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3").unwrap();
        assert_eq!(m.vertices().len(), 3);
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        assert!(m.vertex_colors().is_none());
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn index_out_of_range() {
        let err = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9").unwrap_err();
        match err {
            Error::ObjIndex { line, index, count } => {
                assert_eq!((line, index, count), (4, 9, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slashes_colors_comments_and_negative_indices() {
        let src = b"# head\nv 0 0 0 1 0 0\nv 1 0 0 0 1 0\nvn 0 0 1\nv 0 1 0 0 0 1 # c\nf -3/1/1 -2/2/1 -1/3/1\n";
        let m = parse_obj(src).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        assert_eq!(m.vertex_colors().unwrap()[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        match parse_obj(b"v 0 0 0\nv 1 x 0\n").unwrap_err() {
            Error::ObjSyntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n").unwrap_err() {
            Error::ObjSyntax { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_obj(b"v 0 0 0\nv 1 0 0 1 1 1\n"),
            Err(Error::ObjSyntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_obj(b"v 0 0 0\n"),
            Err(Error::InvalidMesh(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip(
            pts in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6, -1e6f64..1e6), 3..40),
            colored in any::<bool>(),
        ) {
            // fan over a guaranteed non-degenerate anchor triangle
            let mut vertices = vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1e7, 0.0, 0.0),
                Point3::new(0.0, 1e7, 0.0),
            ];
            vertices.extend(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)));
            let mut triangles = vec![[0u32, 1, 2]];
            for i in 3..vertices.len() as u32 {
                let t = [0, 1, i];
                let [a, b, c] = t.map(|k| vertices[k as usize]);
                if (b - a).cross(&(c - a)).norm() > 1e-3 {
                    triangles.push(t);
                }
            }
            let colors = colored.then(|| {
                (0..vertices.len()).map(|i| [i as f32 / 7.0 % 1.0, 0.25, 1.0 / 3.0]).collect()
            });
            let m = Mesh::new(vertices, triangles, colors).unwrap();
            let back = parse_obj(serialize_obj(&m).as_bytes()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
