//! ASCII Wavefront OBJ input and output for triangle meshes.
//!
//! Only `v` and `f` records carry data. Comments, blank lines and the usual
//! auxiliary records (`vn`, `vt`, `o`, `g`, `s`, material statements) are
//! skipped. Face corners may use the `i/t/n` form; only the vertex index is
//! kept. Negative indices count back from the latest vertex.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

const SKIPPED: [&str; 8] = ["vn", "vt", "vp", "o", "g", "s", "usemtl", "mtllib"];

pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let err = |line: usize, message: String| Error::ObjParse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(err(
                        line_no,
                        format!("vertex needs 3 coordinates, got {}", coords.len()),
                    ));
                }
                let mut p = [0.0; 3];
                for (slot, tok) in p.iter_mut().zip(&coords) {
                    *slot = tok
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(line_no, format!("invalid coordinate `{tok}`")))?;
                }
                positions.push(Point::from(p));
            }
            "f" => {
                let corners: Vec<&str> = tokens.collect();
                if corners.len() != 3 {
                    return Err(err(
                        line_no,
                        format!("non-triangular face with {} vertices", corners.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (slot, tok) in tri.iter_mut().zip(&corners) {
                    let first = tok.split('/').next().unwrap_or("");
                    let idx: i64 = first
                        .parse()
                        .map_err(|_| err(line_no, format!("invalid face index `{tok}`")))?;
                    let resolved = match idx {
                        i if i > 0 => i - 1,
                        i if i < 0 => positions.len() as i64 + i,
                        _ => return Err(err(line_no, "face index 0 is not valid".into())),
                    };
                    if resolved < 0 || resolved as usize >= positions.len() {
                        return Err(err(line_no, format!("face index {idx} out of range")));
                    }
                    *slot = resolved as usize;
                }
                triangles.push(tri);
            }
            t if SKIPPED.contains(&t) => {}
            t => return Err(err(line_no, format!("unsupported record `{t}`"))),
        }
    }
    if triangles.is_empty() {
        return Err(err(text.lines().count().max(1), "no faces".into()));
    }
    TriMesh::new(positions, triangles)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_obj(&text, path)
}

pub fn write_obj<W: Write>(mesh: &TriMesh, out: &mut W) -> std::io::Result<()> {
    for p in mesh.positions() {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    write_obj(mesh, &mut out).map_err(io)?;
    out.flush().map_err(io)
}
