//! Simplicial meshes: triangles in 2D, tetrahedra in 3D.
//!
//! A [`Mesh`] owns node coordinates, element connectivity and the tagged
//! boundary facets. Per-element measures and the (constant) gradients of the
//! P1 basis functions are computed once at construction, as is the
//! facet-to-element adjacency. The mesh is immutable afterwards.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod generate;
pub mod msh;

pub use generate::{
    generate_channel, generate_channel_reference, generate_square, generate_square_reference,
};
pub use msh::{parse_msh, read_msh, write_msh, TagMap};

/// Role of a boundary facet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    /// Inhomogeneous Dirichlet data (the wave source).
    Excitation,
    /// Absorbing boundary condition.
    Absorbing,
    /// Homogeneous Neumann (rigid wall or symmetry plane).
    Neumann,
}

/// Geometry of one boundary facet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacetGeom {
    /// Unit outward normal; the z component is zero in 2D.
    pub normal: [f64; 3],
    /// Edge length in 2D, face area in 3D.
    pub measure: f64,
    /// The element the facet belongs to.
    pub element: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<[f64; 3]>,
    elements: Vec<usize>,
    facets: Vec<usize>,
    facet_tags: Vec<BoundaryTag>,
    facet_elements: Vec<usize>,
    measures: Vec<f64>,
    gradients: Vec<[f64; 3]>,
}

/// Simplices with |det| below this fraction of (edge scale)^dim are rejected.
const DEGENERACY_TOL: f64 = 1e-12;

impl Mesh {
    /// Builds and validates a mesh.
    ///
    /// `elements` is flat with stride `dim + 1`, each facet lists `dim` node ids.
    /// Negatively oriented elements are reordered; degenerate ones are rejected.
    pub fn new(
        dim: usize,
        nodes: Vec<[f64; 3]>,
        mut elements: Vec<usize>,
        facets: Vec<(Vec<usize>, BoundaryTag)>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Mesh(format!("unsupported dimension {dim}")));
        }
        let nv = dim + 1;
        if elements.is_empty() {
            return Err(Error::Mesh("no volume elements".into()));
        }
        if elements.len() % nv != 0 {
            return Err(Error::Mesh(format!(
                "connectivity length {} is not a multiple of {nv}",
                elements.len()
            )));
        }
        let n_nodes = nodes.len();
        if let Some(&bad) = elements.iter().find(|&&id| id >= n_nodes) {
            return Err(Error::Mesh(format!(
                "dangling reference: element node {bad} but only {n_nodes} nodes"
            )));
        }

        let n_el = elements.len() / nv;
        let mut measures = Vec::with_capacity(n_el);
        let mut gradients = Vec::with_capacity(n_el * nv);
        for e in 0..n_el {
            let conn = &mut elements[e * nv..(e + 1) * nv];
            let mut det = simplex_det(dim, &nodes, conn);
            if det < 0.0 {
                conn.swap(0, 1);
                det = -det;
            }
            let scale = max_edge(&nodes, conn).powi(dim as i32);
            if !(det > DEGENERACY_TOL * scale) {
                return Err(Error::Mesh(format!("element {e} is degenerate")));
            }
            measures.push(det / factorial(dim));
            basis_gradients(dim, &nodes, conn, &mut gradients);
        }

        let mut faces: HashMap<Vec<usize>, (usize, u8)> = HashMap::new();
        for e in 0..n_el {
            let conn = &elements[e * nv..(e + 1) * nv];
            for skip in 0..nv {
                let mut key: Vec<usize> = (0..nv).filter(|&k| k != skip).map(|k| conn[k]).collect();
                key.sort_unstable();
                faces
                    .entry(key)
                    .and_modify(|entry| entry.1 += 1)
                    .or_insert((e, 1));
            }
        }

        let mut flat_facets = Vec::with_capacity(facets.len() * dim);
        let mut facet_tags = Vec::with_capacity(facets.len());
        let mut facet_elements = Vec::with_capacity(facets.len());
        for (f, (fnodes, tag)) in facets.into_iter().enumerate() {
            if fnodes.len() != dim {
                return Err(Error::Mesh(format!(
                    "facet {f} has {} nodes, expected {dim}",
                    fnodes.len()
                )));
            }
            if let Some(&bad) = fnodes.iter().find(|&&id| id >= n_nodes) {
                return Err(Error::Mesh(format!(
                    "dangling reference: facet {f} node {bad} but only {n_nodes} nodes"
                )));
            }
            let mut key = fnodes.clone();
            key.sort_unstable();
            match faces.get(&key) {
                None => {
                    return Err(Error::Mesh(format!(
                        "facet {f} {fnodes:?} does not match any element face"
                    )))
                }
                Some(&(_, count)) if count > 1 => {
                    return Err(Error::Mesh(format!(
                        "facet {f} {fnodes:?} is an interior face shared by {count} elements"
                    )))
                }
                Some(&(e, _)) => {
                    flat_facets.extend_from_slice(&fnodes);
                    facet_tags.push(tag);
                    facet_elements.push(e);
                }
            }
        }

        Ok(Mesh {
            dim,
            nodes,
            elements,
            facets: flat_facets,
            facet_tags,
            facet_elements,
            measures,
            gradients,
        })
    }

    /// Reassigns every facet tag from its centroid and current tag.
    pub fn retagged(mut self, f: impl Fn(&[f64; 3], BoundaryTag) -> BoundaryTag) -> Self {
        for i in 0..self.facet_tags.len() {
            let c = self.facet_centroid(i);
            self.facet_tags[i] = f(&c, self.facet_tags[i]);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.measures.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facet_tags.len()
    }

    /// Nodes per element.
    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &[f64; 3] {
        &self.nodes[id]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.elements[e * nv..(e + 1) * nv]
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    pub fn facet_tag(&self, f: usize) -> BoundaryTag {
        self.facet_tags[f]
    }

    pub fn facet_element(&self, f: usize) -> usize {
        self.facet_elements[f]
    }

    /// Ids of the facets carrying `tag`.
    pub fn facets_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_facets()).filter(move |&f| self.facet_tags[f] == tag)
    }

    /// Sorted, deduplicated node ids lying on facets with `tag`.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .facets_with_tag(tag)
            .flat_map(|f| self.facet(f).iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Area (2D) or volume (3D) of element `e`.
    pub fn element_measure(&self, e: usize) -> f64 {
        self.measures[e]
    }

    /// Gradients of the element's P1 basis functions, in local vertex order.
    pub fn basis_gradients(&self, e: usize) -> &[[f64; 3]] {
        let nv = self.dim + 1;
        &self.gradients[e * nv..(e + 1) * nv]
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        centroid(&self.nodes, self.element(e))
    }

    pub fn facet_centroid(&self, f: usize) -> [f64; 3] {
        centroid(&self.nodes, self.facet(f))
    }

    /// Sum of all element measures.
    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Outward unit normal, measure and owning element of facet `f`.
    pub fn facet_geometry(&self, f: usize) -> FacetGeom {
        let ids = self.facet(f);
        let p0 = self.nodes[ids[0]];
        let (mut normal, measure) = if self.dim == 2 {
            let t = sub(&self.nodes[ids[1]], &p0);
            let len = norm(&t);
            ([t[1] / len, -t[0] / len, 0.0], len)
        } else {
            let c = cross(&sub(&self.nodes[ids[1]], &p0), &sub(&self.nodes[ids[2]], &p0));
            let len = norm(&c);
            ([c[0] / len, c[1] / len, c[2] / len], 0.5 * len)
        };
        let element = self.facet_elements[f];
        let opposite = self
            .element(element)
            .iter()
            .copied()
            .find(|id| !ids.contains(id))
            .expect("element has a vertex off its own facet");
        let inward = sub(&self.nodes[opposite], &p0);
        if dot(&normal, &inward) > 0.0 {
            normal.iter_mut().for_each(|v| *v = -*v);
        }
        FacetGeom {
            normal,
            measure,
            element,
        }
    }

    /// Elements owning at least one facet with `tag`, ascending.
    pub fn elements_on_boundary(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut els: Vec<usize> = self
            .facets_with_tag(tag)
            .map(|f| self.facet_elements[f])
            .collect();
        els.sort_unstable();
        els.dedup();
        els
    }
}

fn centroid(nodes: &[[f64; 3]], ids: &[usize]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for &id in ids {
        for k in 0..3 {
            c[k] += nodes[id][k];
        }
    }
    c.map(|v| v / ids.len() as f64)
}

pub(crate) fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn max_edge(nodes: &[[f64; 3]], conn: &[usize]) -> f64 {
    let mut m: f64 = 0.0;
    for a in 0..conn.len() {
        for b in a + 1..conn.len() {
            m = m.max(norm(&sub(&nodes[conn[a]], &nodes[conn[b]])));
        }
    }
    m
}

/// Signed determinant of the edge matrix [p1-p0, ..., pd-p0].
fn simplex_det(dim: usize, nodes: &[[f64; 3]], conn: &[usize]) -> f64 {
    let p0 = nodes[conn[0]];
    let e1 = sub(&nodes[conn[1]], &p0);
    let e2 = sub(&nodes[conn[2]], &p0);
    if dim == 2 {
        e1[0] * e2[1] - e1[1] * e2[0]
    } else {
        let e3 = sub(&nodes[conn[3]], &p0);
        dot(&e1, &cross(&e2, &e3))
    }
}

fn basis_gradients(dim: usize, nodes: &[[f64; 3]], conn: &[usize], out: &mut Vec<[f64; 3]>) {
    let p0 = nodes[conn[0]];
    let e1 = sub(&nodes[conn[1]], &p0);
    let e2 = sub(&nodes[conn[2]], &p0);
    if dim == 2 {
        // rows of the inverse of [[e1x, e2x], [e1y, e2y]]
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        let g1 = [e2[1] / det, -e2[0] / det, 0.0];
        let g2 = [-e1[1] / det, e1[0] / det, 0.0];
        out.push([-g1[0] - g2[0], -g1[1] - g2[1], 0.0]);
        out.push(g1);
        out.push(g2);
    } else {
        let e3 = sub(&nodes[conn[3]], &p0);
        let det = dot(&e1, &cross(&e2, &e3));
        let g1 = cross(&e2, &e3).map(|v| v / det);
        let g2 = cross(&e3, &e1).map(|v| v / det);
        let g3 = cross(&e1, &e2).map(|v| v / det);
        out.push([
            -g1[0] - g2[0] - g3[0],
            -g1[1] - g2[1] - g3[1],
            -g1[2] - g2[2] - g3[2],
        ]);
        out.push(g1);
        out.push(g2);
        out.push(g3);
    }
}
