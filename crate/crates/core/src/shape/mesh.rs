use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A triangle surface mesh. Vertices are in millimetres; faces index vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v as usize >= n) {
                return Err(Error::FormatError(format!("face {i} indexes past {n} vertices")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::FormatError(format!("face {i} is degenerate: {f:?}")));
            }
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::FormatError("non-finite vertex coordinate".into()));
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Serializes to the `CSM1` text format.
    pub fn to_csm(&self) -> String {
        let mut out = format!("CSM1 {} {}\n", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0], f[1], f[2]);
        }
        out
    }

    /// Serializes to Wavefront OBJ (1-based faces).
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }

    /// Parses the `CSM1` text format:
    /// a `CSM1 <N> <F>` header, N `v x y z` lines, then F `f i j k` lines (0-based).
    pub fn parse_csm(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::FormatError("empty mesh file".into()))?;
        let mut head = header.split_whitespace();
        if head.next() != Some("CSM1") {
            return Err(Error::FormatError(format!("bad mesh header '{header}'")));
        }
        let n: usize = parse_num(head.next(), "vertex count")?;
        let f: usize = parse_num(head.next(), "face count")?;
        let mut vertices = Vec::with_capacity(n);
        let mut faces = Vec::with_capacity(f);
        for line in lines {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") if vertices.len() < n && faces.is_empty() => vertices.push([
                    parse_num(it.next(), "x")?,
                    parse_num(it.next(), "y")?,
                    parse_num(it.next(), "z")?,
                ]),
                Some("f") if vertices.len() == n && faces.len() < f => faces.push([
                    parse_num(it.next(), "i")?,
                    parse_num(it.next(), "j")?,
                    parse_num(it.next(), "k")?,
                ]),
                _ => return Err(Error::FormatError(format!("unexpected mesh line '{line}'"))),
            }
            if it.next().is_some() {
                return Err(Error::FormatError(format!("trailing tokens in '{line}'")));
            }
        }
        if vertices.len() != n || faces.len() != f {
            return Err(Error::FormatError(format!(
                "header declares {n} vertices / {f} faces, found {} / {}",
                vertices.len(),
                faces.len()
            )));
        }
        Self::new(vertices, faces)
    }

    /// Wavefront OBJ: `v` and triangular `f` records (1-based, `i/t/n` accepted).
    pub fn parse_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for line in text.lines().map(str::trim) {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => vertices.push([
                    parse_num(it.next(), "x")?,
                    parse_num(it.next(), "y")?,
                    parse_num(it.next(), "z")?,
                ]),
                Some("f") => {
                    let idx: Vec<u32> = it
                        .map(|tok| {
                            let first = tok.split('/').next().unwrap_or_default();
                            let i: u32 = parse_num(Some(first), "face index")?;
                            i.checked_sub(1)
                                .ok_or_else(|| Error::FormatError("OBJ face index 0".into()))
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::FormatError("only triangular OBJ faces are supported".into()));
                    }
                    faces.push([idx[0], idx[1], idx[2]]);
                }
                _ => {}
            }
        }
        Self::new(vertices, faces)
    }

    /// ASCII PLY with `x y z` leading each vertex row and `3 i j k` face rows.
    pub fn parse_ply(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim);
        if lines.next() != Some("ply") {
            return Err(Error::FormatError("missing 'ply' magic".into()));
        }
        let (mut n, mut f) = (0usize, 0usize);
        loop {
            let line = lines
                .next()
                .ok_or_else(|| Error::FormatError("unterminated PLY header".into()))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["format", fmt, ..] if *fmt != "ascii" => {
                    return Err(Error::FormatError("only ASCII PLY is supported".into()))
                }
                ["element", "vertex", c] => n = parse_num(Some(c), "vertex count")?,
                ["element", "face", c] => f = parse_num(Some(c), "face count")?,
                ["end_header"] => break,
                _ => {}
            }
        }
        let mut body = lines.filter(|l| !l.is_empty());
        let mut vertices = Vec::with_capacity(n);
        for _ in 0..n {
            let line = body.next().ok_or_else(|| Error::FormatError("truncated PLY vertices".into()))?;
            let mut it = line.split_whitespace();
            vertices.push([
                parse_num(it.next(), "x")?,
                parse_num(it.next(), "y")?,
                parse_num(it.next(), "z")?,
            ]);
        }
        let mut faces = Vec::with_capacity(f);
        for _ in 0..f {
            let line = body.next().ok_or_else(|| Error::FormatError("truncated PLY faces".into()))?;
            let mut it = line.split_whitespace();
            let count: usize = parse_num(it.next(), "face arity")?;
            if count != 3 {
                return Err(Error::FormatError("only triangular PLY faces are supported".into()));
            }
            faces.push([
                parse_num(it.next(), "i")?,
                parse_num(it.next(), "j")?,
                parse_num(it.next(), "k")?,
            ]);
        }
        Self::new(vertices, faces)
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::FormatError(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::FormatError(format!("cannot parse {what} from '{tok}'")))
}

/// Reads a mesh, choosing the parser from the file extension (`csm`, `obj`, `ply`).
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
    let parsed = match ext.to_ascii_lowercase().as_str() {
        "obj" => TriangleMesh::parse_obj(&text),
        "ply" => TriangleMesh::parse_ply(&text),
        _ => TriangleMesh::parse_csm(&text),
    };
    parsed.map_err(|e| match e {
        Error::FormatError(msg) => Error::FormatError(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes `obj` for that extension and `CSM1` otherwise.
pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
    let text = if ext.eq_ignore_ascii_case("obj") { mesh.to_obj() } else { mesh.to_csm() };
    std::fs::write(path, text)?;
    Ok(())
}
