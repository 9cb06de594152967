//! ASCII STL reading and writing. A file may hold several solids.

use std::fmt::Write as _;
use std::path::Path;

use super::WorldError;
use crate::geom::{triangle_normal, Triangle, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct StlSolid {
    pub name: String,
    pub triangles: Vec<Triangle>,
}

pub fn parse_stl(text: &str) -> Result<Vec<StlSolid>, WorldError> {
    let err = |line: usize, message: &str| WorldError::Stl { line: line + 1, message: message.to_string() };
    let mut solids = Vec::new();
    let mut current: Option<StlSolid> = None;
    let mut verts: Vec<Vec3> = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next().unwrap_or_default() {
            "solid" => {
                if current.is_some() {
                    return Err(err(n, "nested solid"));
                }
                current = Some(StlSolid { name: parts.collect::<Vec<_>>().join(" "), triangles: Vec::new() });
            }
            "endsolid" => {
                let solid = current.take().ok_or_else(|| err(n, "endsolid without solid"))?;
                solids.push(solid);
            }
            "facet" | "outer" => {
                if current.is_none() {
                    return Err(err(n, "facet outside solid"));
                }
                verts.clear();
            }
            "vertex" => {
                let coords: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
                let coords = coords.map_err(|_| err(n, "non-numeric vertex"))?;
                if coords.len() != 3 {
                    return Err(err(n, "vertex needs three coordinates"));
                }
                verts.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            "endloop" => {
                if verts.len() != 3 {
                    return Err(err(n, "facet must have exactly three vertices"));
                }
            }
            "endfacet" => {
                let solid = current.as_mut().ok_or_else(|| err(n, "endfacet outside solid"))?;
                if verts.len() != 3 {
                    return Err(err(n, "facet must have exactly three vertices"));
                }
                solid.triangles.push([verts[0], verts[1], verts[2]]);
                verts.clear();
            }
            other => return Err(err(n, &format!("unexpected keyword {other:?}"))),
        }
    }
    if current.is_some() {
        return Err(err(text.lines().count(), "missing endsolid"));
    }
    Ok(solids)
}

pub fn read_stl(path: &Path) -> Result<Vec<StlSolid>, WorldError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => WorldError::FileNotFound(path.display().to_string()),
        _ => WorldError::Io(e),
    })?;
    parse_stl(&text)
}

/// Writes solids with shortest round-trip float formatting.
pub fn write_stl(solids: &[StlSolid]) -> String {
    let mut out = String::new();
    for solid in solids {
        let _ = writeln!(out, "solid {}", solid.name);
        for tri in &solid.triangles {
            let n = triangle_normal(tri);
            let _ = writeln!(out, "  facet normal {:?} {:?} {:?}", n.x, n.y, n.z);
            out.push_str("    outer loop\n");
            for v in tri {
                let _ = writeln!(out, "      vertex {:?} {:?} {:?}", v.x, v.y, v.z);
            }
            out.push_str("    endloop\n  endfacet\n");
        }
        let _ = writeln!(out, "endsolid {}", solid.name);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::box_mesh;

    #[test]
    fn round_trips_exactly() {
        let solids = vec![
            StlSolid { name: "cube".into(), triangles: box_mesh([1.0, 2.0, 0.3]) },
            StlSolid { name: "prop_7".into(), triangles: box_mesh([0.1, 0.2, 0.7]) },
        ];
        let back = parse_stl(&write_stl(&solids)).unwrap();
        assert_eq!(back, solids);
    }

    #[test]
    fn rejects_bad_facets() {
        let text = "solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nendloop\nendfacet\nendsolid x\n";
        assert!(matches!(parse_stl(text), Err(WorldError::Stl { .. })));
        assert!(parse_stl("solid x\n").is_err());
    }
}
