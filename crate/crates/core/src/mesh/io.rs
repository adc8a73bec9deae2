//! Triangle-style `.node` / `.ele` text files.
//!
//! ```text
//! # <file>.node
//! <#vertices> 2 <#attributes> <#boundary markers>
//! <index> <x> <y> [attributes...] [marker]
//! ...
//! # <file>.ele
//! <#triangles> 3 <#attributes>
//! <index> <v1> <v2> <v3> [attributes...]
//! ```
//!
//! `#` starts a comment; blank lines are ignored. Indices are consecutive
//! and the numbering base (0 or 1) is taken from the first vertex line; the
//! element file must use the same base. Extra attributes and markers are
//! accepted and discarded.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Point, PrimalMesh};
use crate::error::{Error, Result};

/// `base.node` and `base.ele`.
pub fn mesh_paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("node"), base.with_extension("ele"))
}

pub fn read_triangle_mesh(base: &Path) -> Result<PrimalMesh> {
    let (node_path, ele_path) = mesh_paths(base);
    let nodes = fs::read_to_string(&node_path)?;
    let eles = fs::read_to_string(&ele_path)?;
    parse_triangle_mesh(
        &nodes,
        &node_path.display().to_string(),
        &eles,
        &ele_path.display().to_string(),
    )
}

pub fn parse_triangle_mesh(nodes: &str, node_name: &str, eles: &str, ele_name: &str) -> Result<PrimalMesh> {
    let (vertices, base) = parse_nodes(nodes, node_name)?;
    let triangles = parse_elements(eles, ele_name, base, vertices.len())?;
    PrimalMesh::new(vertices, triangles)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, path: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("expected {what}, found `{tok}`")))
}

fn parse_nodes(text: &str, path: &str) -> Result<(Vec<Point>, usize)> {
    let mut lines = data_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing header"))?;
    if header.len() < 2 {
        return Err(parse_err(path, hl, "header needs <#vertices> <dimension>"));
    }
    let n: usize = parse_num(header[0], path, hl, "vertex count")?;
    let dim: usize = parse_num(header[1], path, hl, "dimension")?;
    if dim != 2 {
        return Err(parse_err(
            path,
            hl,
            format!("only 2D meshes are supported, got dimension {dim}"),
        ));
    }
    let mut vertices = Vec::with_capacity(n);
    let mut base = 0;
    for (count, (ln, tok)) in lines.by_ref().take(n).enumerate() {
        if tok.len() < 3 {
            return Err(parse_err(path, ln, "vertex line needs <index> <x> <y>"));
        }
        let index: usize = parse_num(tok[0], path, ln, "vertex index")?;
        if count == 0 {
            if index > 1 {
                return Err(parse_err(path, ln, "first vertex index must be 0 or 1"));
            }
            base = index;
        }
        if index != base + count {
            return Err(parse_err(
                path,
                ln,
                format!("expected vertex index {}, found {index}", base + count),
            ));
        }
        let x: f64 = parse_num(tok[1], path, ln, "x coordinate")?;
        let y: f64 = parse_num(tok[2], path, ln, "y coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(parse_err(path, ln, "non-finite coordinate"));
        }
        vertices.push(Point::new(x, y));
    }
    if vertices.len() != n {
        return Err(parse_err(
            path,
            hl,
            format!("header announces {n} vertices, found {}", vertices.len()),
        ));
    }
    Ok((vertices, base))
}

fn parse_elements(text: &str, path: &str, base: usize, nv: usize) -> Result<Vec<[usize; 3]>> {
    let mut lines = data_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing header"))?;
    let n: usize = parse_num(header[0], path, hl, "triangle count")?;
    if let Some(tok) = header.get(1) {
        let per: usize = parse_num(tok, path, hl, "nodes per triangle")?;
        if per != 3 {
            return Err(parse_err(
                path,
                hl,
                format!("only linear triangles are supported, got {per} nodes"),
            ));
        }
    }
    let mut triangles = Vec::with_capacity(n);
    for (count, (ln, tok)) in lines.by_ref().take(n).enumerate() {
        if tok.len() < 4 {
            return Err(parse_err(path, ln, "triangle line needs <index> <v1> <v2> <v3>"));
        }
        let index: usize = parse_num(tok[0], path, ln, "triangle index")?;
        if index != base + count {
            return Err(parse_err(
                path,
                ln,
                format!("expected triangle index {}, found {index}", base + count),
            ));
        }
        let mut t = [0usize; 3];
        for (slot, s) in t.iter_mut().zip(&tok[1..4]) {
            let v: usize = parse_num(s, path, ln, "vertex index")?;
            if v < base || v - base >= nv {
                return Err(parse_err(path, ln, format!("vertex {v} out of range")));
            }
            *slot = v - base;
        }
        triangles.push(t);
    }
    if triangles.len() != n {
        return Err(parse_err(
            path,
            hl,
            format!("header announces {n} triangles, found {}", triangles.len()),
        ));
    }
    Ok(triangles)
}

/// Renders the `.node` and `.ele` contents (0-based).
pub fn format_triangle_mesh(mesh: &PrimalMesh) -> (String, String) {
    let mut nodes = format!("{} 2 0 0\n", mesh.n_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(nodes, "{i} {:?} {:?}", p.x, p.y);
    }
    let mut eles = format!("{} 3 0\n", mesh.n_triangles());
    for (k, t) in mesh.triangles().iter().enumerate() {
        let _ = writeln!(eles, "{k} {} {} {}", t[0], t[1], t[2]);
    }
    (nodes, eles)
}

pub fn write_triangle_mesh(mesh: &PrimalMesh, base: &Path) -> Result<()> {
    let (node_path, ele_path) = mesh_paths(base);
    let (nodes, eles) = format_triangle_mesh(mesh);
    fs::write(node_path, nodes)?;
    fs::write(ele_path, eles)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;

    const NODES: &str = "# unit square\n4 2 0 1\n1 0 0 1\n2 1 0 1\n3 1 1 1\n4 0 1 1\n";
    const ELES: &str = "2 3 0\n1 1 2 3\n2 1 3 4 # second\n";

    #[test]
    fn parses_one_based_files() {
        let m = parse_triangle_mesh(NODES, "sq.node", ELES, "sq.ele").unwrap();
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.n_edges(), 5);
    }

    #[test]
    fn round_trip_through_text() {
        let m = structured_unit_square(3).unwrap();
        let (n, e) = format_triangle_mesh(&m);
        let back = parse_triangle_mesh(&n, "a.node", &e, "a.ele").unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
    }

    #[test]
    fn reports_line_of_bad_token() {
        let bad = "4 2 0 0\n0 0 0\n1 1 zero\n2 1 1\n3 0 1\n";
        match parse_triangle_mesh(bad, "bad.node", ELES, "e") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_vertex() {
        let eles = "1 3 0\n1 1 2 9\n";
        assert!(matches!(
            parse_triangle_mesh(NODES, "n", eles, "e"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn rejects_short_file() {
        let nodes = "5 2 0 0\n0 0 0\n1 1 0\n";
        assert!(parse_triangle_mesh(nodes, "n", ELES, "e").is_err());
    }
}
