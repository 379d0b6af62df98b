//! Plain-text mesh formats.
//!
//! Native format (whitespace separated, `#` starts a comment):
//!
//! ```text
//! E B F              element, boundary facet and facet counts
//! V                  vertex count
//! x y                V lines
//! a b c              E lines, counter-clockwise vertex indices (0-based)
//! a b ep lp em lm t  F lines: sorted vertex pair, plus side (element, local
//!                    facet), minus side (-1 -1 on the boundary), boundary
//!                    tag (0 for interior facets)
//! ```
//!
//! The Triangle `.node`/`.ele` pair is also accepted; facets are rebuilt and
//! clockwise triangles are reoriented.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{signed_area, Mesh, Point, DEFAULT_BOUNDARY_TAG};
use crate::error::MeshError;

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.num_elements(),
        mesh.num_boundary_facets(),
        mesh.num_facets()
    );
    let _ = writeln!(s, "{}", mesh.num_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {}", v[0], v[1]);
    }
    for e in mesh.elements() {
        let _ = writeln!(s, "{} {} {}", e[0], e[1], e[2]);
    }
    for f in mesh.facets() {
        let (em, lm) = f
            .minus
            .map(|m| (m.element as i64, m.local as i64))
            .unwrap_or((-1, -1));
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {}",
            f.vertices[0],
            f.vertices[1],
            f.plus.element,
            f.plus.local,
            em,
            lm,
            f.boundary_tag.unwrap_or(0)
        );
    }
    s
}

struct Tokens<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                let toks: Vec<&str> = l.split_whitespace().collect();
                (!toks.is_empty()).then_some((i + 1, toks))
            })
            .collect();
        Self { lines, pos: 0 }
    }

    fn next_line(&mut self, min_len: usize) -> Result<(usize, Vec<&'a str>), MeshError> {
        let (line, toks) = self.lines.get(self.pos).cloned().ok_or(MeshError::Parse {
            line: 0,
            msg: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        if toks.len() < min_len {
            return Err(MeshError::Parse {
                line,
                msg: format!("expected at least {min_len} fields"),
            });
        }
        Ok((line, toks))
    }
}

fn parse<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("cannot parse `{tok}`"),
    })
}

pub fn read_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut t = Tokens::new(text);
    let (line, h) = t.next_line(3)?;
    let ne: usize = parse(h[0], line)?;
    let nb: usize = parse(h[1], line)?;
    let nf: usize = parse(h[2], line)?;
    let (line, v) = t.next_line(1)?;
    let nv: usize = parse(v[0], line)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, toks) = t.next_line(2)?;
        vertices.push([parse(toks[0], line)?, parse(toks[1], line)?]);
    }
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, toks) = t.next_line(3)?;
        elements.push([
            parse(toks[0], line)?,
            parse(toks[1], line)?,
            parse(toks[2], line)?,
        ]);
    }
    let mut tags = HashMap::new();
    for _ in 0..nf {
        let (line, toks) = t.next_line(7)?;
        let a: usize = parse(toks[0], line)?;
        let b: usize = parse(toks[1], line)?;
        let tag: u32 = parse(toks[6], line)?;
        tags.insert([a.min(b), a.max(b)], tag);
    }

    let mesh = Mesh::with_boundary_tags(vertices, elements, |key| {
        tags.get(&key).copied().unwrap_or(DEFAULT_BOUNDARY_TAG)
    })?;
    if mesh.num_facets() != nf || mesh.num_boundary_facets() != nb || tags.len() != nf {
        return Err(MeshError::Parse {
            line: 1,
            msg: format!(
                "header declares {nb} boundary / {nf} facets, connectivity yields {} / {}",
                mesh.num_boundary_facets(),
                mesh.num_facets()
            ),
        });
    }
    Ok(mesh)
}

/// Reads a Triangle `.node` / `.ele` pair given as text. Index base (0 or 1)
/// is taken from the first vertex number.
pub fn read_triangle(node: &str, ele: &str) -> Result<Mesh, MeshError> {
    let mut t = Tokens::new(node);
    let (line, h) = t.next_line(1)?;
    let nv: usize = parse(h[0], line)?;
    let mut base = None;
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, toks) = t.next_line(3)?;
        let id: usize = parse(toks[0], line)?;
        let b = *base.get_or_insert(id);
        if id != b + vertices.len() {
            return Err(MeshError::Parse {
                line,
                msg: "vertices must be numbered consecutively".into(),
            });
        }
        vertices.push([parse(toks[1], line)?, parse(toks[2], line)?]);
    }
    let base = base.unwrap_or(0);

    let mut t = Tokens::new(ele);
    let (line, h) = t.next_line(1)?;
    let ne: usize = parse(h[0], line)?;
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, toks) = t.next_line(4)?;
        let mut el = [0usize; 3];
        for (i, e) in el.iter_mut().enumerate() {
            let raw: usize = parse(toks[i + 1], line)?;
            *e = raw.checked_sub(base).ok_or(MeshError::Parse {
                line,
                msg: format!("vertex index {raw} below base {base}"),
            })?;
            if *e >= vertices.len() {
                return Err(MeshError::VertexOutOfRange {
                    index: *e,
                    count: vertices.len(),
                });
            }
        }
        if signed_area(vertices[el[0]], vertices[el[1]], vertices[el[2]]) < 0.0 {
            el.swap(1, 2);
        }
        elements.push(el);
    }
    Mesh::new(vertices, elements)
}

impl Mesh {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, write_mesh(self))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        read_mesh(&std::fs::read_to_string(path)?)
    }

    pub fn load_triangle(node: impl AsRef<Path>, ele: impl AsRef<Path>) -> Result<Self, MeshError> {
        read_triangle(
            &std::fs::read_to_string(node)?,
            &std::fs::read_to_string(ele)?,
        )
    }
}
