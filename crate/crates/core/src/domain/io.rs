//! Plain-text mesh format.
//!
//! ```text
//! dim 2
//! nodes 3
//! 0 0
//! 1 0
//! 0 1
//! elements 1
//! 0 1 2
//! facets 1
//! DIRICHLET 0 1
//! cracks 0
//! ```
//!
//! Lines starting with `#` are ignored. Crack lines read `a b segment`.

use std::io::{BufRead, Write};

use super::{BoundaryFacet, BoundaryTag, CrackFacet, CrackedMesh, MeshBlueprint};
use crate::error::{Error, Result};

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_tokens(&mut self) -> Result<Vec<String>> {
        loop {
            let line = self.inner.next().ok_or_else(|| {
                Error::Format(format!(
                    "unexpected end of mesh after line {}",
                    self.line_no
                ))
            })??;
            self.line_no += 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(t.split_whitespace().map(str::to_owned).collect());
        }
    }

    fn header(&mut self, key: &str) -> Result<usize> {
        let tok = self.next_tokens()?;
        if tok.len() != 2 || tok[0] != key {
            return Err(Error::Format(format!(
                "line {}: expected `{key} <count>`",
                self.line_no
            )));
        }
        self.parse(&tok[1])
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| Error::Format(format!("line {}: cannot parse `{s}`", self.line_no)))
    }
}

pub fn read_blueprint(reader: impl BufRead) -> Result<MeshBlueprint> {
    let mut lines = Lines {
        inner: reader.lines(),
        line_no: 0,
    };
    let dim = lines.header("dim")?;
    if !(dim == 1 || dim == 2) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let n_nodes = lines.header("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let tok = lines.next_tokens()?;
        if tok.len() != dim {
            return Err(Error::Format(format!(
                "line {}: expected {dim} coordinates",
                lines.line_no
            )));
        }
        let x: f64 = lines.parse(&tok[0])?;
        let y: f64 = if dim == 2 { lines.parse(&tok[1])? } else { 0.0 };
        nodes.push([x, y]);
    }
    let n_el = lines.header("elements")?;
    let mut elements = Vec::with_capacity(n_el);
    for _ in 0..n_el {
        let tok = lines.next_tokens()?;
        if tok.len() != dim + 1 {
            return Err(Error::Format(format!(
                "line {}: expected {} node indices",
                lines.line_no,
                dim + 1
            )));
        }
        elements.push(
            tok.iter()
                .map(|s| lines.parse(s))
                .collect::<Result<Vec<usize>>>()?,
        );
    }
    let n_f = lines.header("facets")?;
    let mut boundary_facets = Vec::with_capacity(n_f);
    for _ in 0..n_f {
        let tok = lines.next_tokens()?;
        if tok.len() != dim + 1 {
            return Err(Error::Format(format!(
                "line {}: expected tag and {dim} node indices",
                lines.line_no
            )));
        }
        let tag = match tok[0].as_str() {
            "DIRICHLET" => BoundaryTag::Dirichlet,
            "NEUMANN" => BoundaryTag::Neumann,
            other => {
                return Err(Error::Format(format!(
                    "line {}: unknown facet tag `{other}`",
                    lines.line_no
                )))
            }
        };
        let nodes = tok[1..]
            .iter()
            .map(|s| lines.parse(s))
            .collect::<Result<Vec<usize>>>()?;
        boundary_facets.push(BoundaryFacet { nodes, tag });
    }
    let n_c = lines.header("cracks")?;
    let mut crack_facets = Vec::with_capacity(n_c);
    for _ in 0..n_c {
        let tok = lines.next_tokens()?;
        if tok.len() != 3 {
            return Err(Error::Format(format!(
                "line {}: expected `a b segment`",
                lines.line_no
            )));
        }
        crack_facets.push(CrackFacet {
            a: lines.parse(&tok[0])?,
            b: lines.parse(&tok[1])?,
            segment: lines.parse(&tok[2])?,
        });
    }
    Ok(MeshBlueprint {
        dim,
        nodes,
        elements,
        boundary_facets,
        crack_facets,
    })
}

fn tag_name(tag: BoundaryTag) -> &'static str {
    match tag {
        BoundaryTag::Dirichlet => "DIRICHLET",
        BoundaryTag::Neumann => "NEUMANN",
    }
}

fn write_common(
    out: &mut impl Write,
    dim: usize,
    nodes: &[[f64; 2]],
    elements: &[Vec<usize>],
    facets: &[BoundaryFacet],
) -> std::io::Result<()> {
    writeln!(out, "dim {dim}")?;
    writeln!(out, "nodes {}", nodes.len())?;
    for x in nodes {
        if dim == 1 {
            writeln!(out, "{:.17e}", x[0])?;
        } else {
            writeln!(out, "{:.17e} {:.17e}", x[0], x[1])?;
        }
    }
    writeln!(out, "elements {}", elements.len())?;
    for el in elements {
        let s: Vec<String> = el.iter().map(|p| p.to_string()).collect();
        writeln!(out, "{}", s.join(" "))?;
    }
    writeln!(out, "facets {}", facets.len())?;
    for f in facets {
        let s: Vec<String> = f.nodes.iter().map(|p| p.to_string()).collect();
        writeln!(out, "{} {}", tag_name(f.tag), s.join(" "))?;
    }
    Ok(())
}

pub fn write_blueprint(bp: &MeshBlueprint, out: &mut impl Write) -> std::io::Result<()> {
    write_common(out, bp.dim, &bp.nodes, &bp.elements, &bp.boundary_facets)?;
    writeln!(out, "cracks {}", bp.crack_facets.len())?;
    for c in &bp.crack_facets {
        writeln!(out, "{} {} {}", c.a, c.b, c.segment)?;
    }
    Ok(())
}

/// Writes the cut mesh followed by a `crack_pairs` block of
/// `plus minus segment[,segment]` lines.
pub fn write_mesh(mesh: &CrackedMesh, out: &mut impl Write) -> std::io::Result<()> {
    write_common(
        out,
        mesh.dim,
        &mesh.nodes,
        &mesh.elements,
        &mesh.boundary_facets,
    )?;
    writeln!(out, "cracks {}", mesh.crack_facets.len())?;
    for c in &mesh.crack_facets {
        writeln!(out, "{} {} {}", c.a, c.b, c.segment)?;
    }
    writeln!(out, "crack_pairs {}", mesh.crack_pairs.len())?;
    for p in &mesh.crack_pairs {
        let s: Vec<String> = p.segments.iter().map(|s| s.to_string()).collect();
        writeln!(out, "{} {} {}", p.plus, p.minus, s.join(","))?;
    }
    Ok(())
}
