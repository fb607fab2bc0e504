//! Wavefront OBJ subset: `v` and `f` records only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::liegroup::Vec3;

/// Significant digits used for written coordinates.
pub const OBJ_DIGITS: usize = 9;

/// Rounds to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses")
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses OBJ text. Polygons are fan-triangulated; normals, texture
/// coordinates and unknown records are ignored.
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let col_of = |tok: &str| tok.as_ptr() as usize - raw.as_ptr() as usize + 1;
        match tag {
            "v" => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, raw.len() + 1, "vertex needs 3 coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| parse_err(line_no, col_of(tok), format!("bad number `{tok}`")))?;
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let mut idx = Vec::new();
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| parse_err(line_no, col_of(tok), format!("bad index `{tok}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(parse_err(
                            line_no,
                            col_of(tok),
                            format!("index {i} out of range"),
                        ));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err(line_no, 1, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    parse_obj(&text)
}

/// Serializes named meshes into one OBJ document with `g` groups.
pub fn obj_string(groups: &[(&str, &TriMesh)]) -> String {
    obj_string_with_digits(groups, OBJ_DIGITS)
}

/// [`obj_string`] with a chosen number of significant digits per coordinate.
pub fn obj_string_with_digits(groups: &[(&str, &TriMesh)], digits: usize) -> String {
    let mut out = String::new();
    let mut base = 1;
    for (name, mesh) in groups {
        if groups.len() > 1 || !name.is_empty() {
            let _ = writeln!(out, "g {name}");
        }
        for v in mesh.vertices() {
            let _ = writeln!(
                out,
                "v {} {} {}",
                round_significant(v.x, digits),
                round_significant(v.y, digits),
                round_significant(v.z, digits)
            );
        }
        for f in mesh.faces() {
            let _ = writeln!(out, "f {} {} {}", f[0] + base, f[1] + base, f[2] + base);
        }
        base += mesh.vertices().len();
    }
    out
}

pub fn write_obj(path: &Path, groups: &[(&str, &TriMesh)]) -> Result<()> {
    fs::write(path, obj_string(groups))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn quad_is_fan_triangulated() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n")
            .unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn roundtrip_within_digits() {
        let m = primitives::icosphere(Vec3::new(0.1, 0.2, 0.3), 1.0 / 3.0, 1);
        let back = parse_obj(&obj_string(&[("s", &m)])).unwrap();
        assert_eq!(back.faces(), m.faces());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn reports_line_and_column() {
        match parse_obj("v 0 0 0\nv 1 x 0\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 5)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").is_err());
    }

    #[test]
    fn significant_digit_rounding() {
        assert_eq!(round_significant(1.0 / 3.0, 9), 0.333333333);
        assert_eq!(round_significant(123456.789012, 4), 123500.0);
        assert_eq!(round_significant(0.0, 9), 0.0);
    }
}
