//! Gmsh MSH 2.2 ASCII reader and writer.
//!
//! Only the sections `$MeshFormat`, `$PhysicalNames`, `$Nodes` and
//! `$Elements` are interpreted; anything else is skipped. Boundary facets are
//! classified by their physical group through a [`TagMap`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryTag, Mesh};
use crate::error::{Error, Result};

/// Physical-group ids for each boundary role.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagMap {
    #[serde(default)]
    pub excitation: Vec<i64>,
    #[serde(default)]
    pub absorbing: Vec<i64>,
    #[serde(default)]
    pub neumann: Vec<i64>,
}

impl Default for TagMap {
    /// The numbering used by [`write_msh`]: 1 excitation, 2 absorbing, 3 Neumann.
    fn default() -> Self {
        TagMap {
            excitation: vec![1],
            absorbing: vec![2],
            neumann: vec![3],
        }
    }
}

impl TagMap {
    fn lookup(&self, physical: i64) -> Option<BoundaryTag> {
        if self.excitation.contains(&physical) {
            Some(BoundaryTag::Excitation)
        } else if self.absorbing.contains(&physical) {
            Some(BoundaryTag::Absorbing)
        } else if self.neumann.contains(&physical) {
            Some(BoundaryTag::Neumann)
        } else {
            None
        }
    }

    fn physical(&self, tag: BoundaryTag) -> i64 {
        let ids = match tag {
            BoundaryTag::Excitation => &self.excitation,
            BoundaryTag::Absorbing => &self.absorbing,
            BoundaryTag::Neumann => &self.neumann,
        };
        ids.first().copied().unwrap_or(0)
    }
}

/// Physical id written for volume elements.
const VOLUME_PHYSICAL: i64 = 10;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    current: usize,
}

impl<'a> Lines<'a> {
    fn next_nonempty(&mut self) -> Option<&'a str> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() {
                self.current = i + 1;
                return Some(t);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        let line = self.current;
        self.next_nonempty().ok_or_else(|| Error::Msh {
            line,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Msh {
            line: self.current,
            msg: msg.into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines<'_>, tok: Option<&str>, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| lines.err(format!("malformed {what}")))
}

struct RawElement {
    kind: u32,
    physical: i64,
    nodes: Vec<usize>,
}

pub fn read_msh(path: impl AsRef<Path>, tags: &TagMap) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_msh(&text, tags)
}

/// Parses MSH 2.2 ASCII text.
///
/// Tetrahedra make a 3D mesh with triangle facets; otherwise triangles are the
/// elements and 2-node lines the facets. Points, and lines in 3D meshes, are
/// ignored.
pub fn parse_msh(text: &str, tags: &TagMap) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        current: 0,
    };
    let mut node_index: HashMap<usize, usize> = HashMap::new();
    let mut nodes: Vec<[f64; 3]> = Vec::new();
    let mut raw: Vec<RawElement> = Vec::new();
    let mut seen_nodes = false;
    let mut seen_elements = false;

    while let Some(header) = lines.next_nonempty() {
        match header {
            "$MeshFormat" => {
                let fmt = lines.expect("format line")?;
                let mut it = fmt.split_whitespace();
                let version: f64 = parse_num(&lines, it.next(), "version")?;
                let file_type: i32 = parse_num(&lines, it.next(), "file type")?;
                if !(2.0..3.0).contains(&version) || file_type != 0 {
                    return Err(lines.err(format!(
                        "unsupported format {fmt:?}, only 2.2 ASCII is read"
                    )));
                }
                close_section(&mut lines, "$EndMeshFormat")?;
            }
            "$PhysicalNames" => {
                let tok = lines.expect("count")?;
                let n: usize = parse_num(&lines, Some(tok), "count")?;
                for _ in 0..n {
                    lines.expect("physical name")?;
                }
                close_section(&mut lines, "$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let tok = lines.expect("node count")?;
                let n: usize = parse_num(&lines, Some(tok), "node count")?;
                nodes.reserve(n);
                for _ in 0..n {
                    let l = lines.expect("node")?;
                    let mut it = l.split_whitespace();
                    let id: usize = parse_num(&lines, it.next(), "node id")?;
                    let mut p = [0.0; 3];
                    for v in p.iter_mut() {
                        *v = parse_num(&lines, it.next(), "node coordinate")?;
                    }
                    if node_index.insert(id, nodes.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    nodes.push(p);
                }
                close_section(&mut lines, "$EndNodes")?;
                seen_nodes = true;
            }
            "$Elements" => {
                let tok = lines.expect("element count")?;
                let n: usize = parse_num(&lines, Some(tok), "element count")?;
                raw.reserve(n);
                for _ in 0..n {
                    let l = lines.expect("element")?;
                    let tok: Vec<&str> = l.split_whitespace().collect();
                    if tok.len() < 3 {
                        return Err(lines.err("malformed element line"));
                    }
                    let kind: u32 = parse_num(&lines, Some(tok[1]), "element type")?;
                    let ntags: usize = parse_num(&lines, Some(tok[2]), "tag count")?;
                    let nn = match kind {
                        1 => 2,
                        2 => 3,
                        4 => 4,
                        15 => 1,
                        other => {
                            return Err(lines.err(format!("unknown element type {other}")));
                        }
                    };
                    if tok.len() != 3 + ntags + nn {
                        return Err(lines.err("malformed element line"));
                    }
                    let physical: i64 = if ntags > 0 {
                        parse_num(&lines, Some(tok[3]), "physical tag")?
                    } else {
                        0
                    };
                    let ids = tok[3 + ntags..]
                        .iter()
                        .map(|t| parse_num::<usize>(&lines, Some(t), "node id"))
                        .collect::<Result<Vec<_>>>()?;
                    raw.push(RawElement {
                        kind,
                        physical,
                        nodes: ids,
                    });
                }
                close_section(&mut lines, "$EndElements")?;
                seen_elements = true;
            }
            other if other.starts_with("$End") => {
                return Err(lines.err(format!("unexpected {other}")));
            }
            other if other.starts_with('$') => {
                let end = format!("$End{}", &other[1..]);
                loop {
                    if lines.expect(&end)? == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(format!("expected a section header, got {other:?}"))),
        }
    }
    if !seen_nodes {
        return Err(lines.err("missing $Nodes section"));
    }
    if !seen_elements {
        return Err(lines.err("missing $Elements section"));
    }

    let dim = if raw.iter().any(|r| r.kind == 4) { 3 } else { 2 };
    let (volume_kind, facet_kind) = if dim == 3 { (4, 2) } else { (2, 1) };
    let map_id = |id: usize| -> Result<usize> {
        node_index.get(&id).copied().ok_or_else(|| {
            Error::Mesh(format!("dangling reference: node id {id} is not defined"))
        })
    };

    let mut elements = Vec::new();
    let mut facets = Vec::new();
    for r in &raw {
        if r.kind == volume_kind {
            for &id in &r.nodes {
                elements.push(map_id(id)?);
            }
        } else if r.kind == facet_kind {
            let tag = tags.lookup(r.physical).ok_or_else(|| {
                Error::Mesh(format!(
                    "boundary facet with physical group {} has no tag mapping",
                    r.physical
                ))
            })?;
            let ids = r.nodes.iter().map(|&id| map_id(id)).collect::<Result<Vec<_>>>()?;
            facets.push((ids, tag));
        }
    }
    Mesh::new(dim, nodes, elements, facets)
}

fn close_section(lines: &mut Lines<'_>, end: &str) -> Result<()> {
    let l = lines.expect(end)?;
    if l != end {
        return Err(lines.err(format!("expected {end}, got {l:?}")));
    }
    Ok(())
}

/// Serializes a mesh as MSH 2.2 ASCII using `tags` for the physical ids.
///
/// Coordinates are written in shortest round-trip form, so parsing the
/// output reproduces the mesh exactly.
pub fn write_msh(mesh: &Mesh, tags: &TagMap) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(out, "$Nodes\n{}", mesh.n_nodes());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(out, "{} {} {} {}", i + 1, p[0], p[1], p[2]);
    }
    out.push_str("$EndNodes\n");
    let (volume_kind, facet_kind) = if mesh.dim() == 3 { (4, 2) } else { (2, 1) };
    let _ = writeln!(out, "$Elements\n{}", mesh.n_facets() + mesh.n_elements());
    let mut id = 1;
    for f in 0..mesh.n_facets() {
        let phys = tags.physical(mesh.facet_tag(f));
        let _ = write!(out, "{id} {facet_kind} 2 {phys} {phys}");
        for &n in mesh.facet(f) {
            let _ = write!(out, " {}", n + 1);
        }
        out.push('\n');
        id += 1;
    }
    for e in 0..mesh.n_elements() {
        let _ = write!(out, "{id} {volume_kind} 2 {VOLUME_PHYSICAL} {VOLUME_PHYSICAL}");
        for &n in mesh.element(e) {
            let _ = write!(out, " {}", n + 1);
        }
        out.push('\n');
        id += 1;
    }
    out.push_str("$EndElements\n");
    out
}
