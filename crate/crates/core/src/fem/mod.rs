//! P1 finite-element operators.

mod assembly;
mod boundary;
pub mod sparse;

pub use assembly::{
    assemble_laplacian, assemble_mass, assemble_source, dirichlet_rhs, simplex_moment,
    tensor_action, DirichletData, TensorMatrix,
};
pub use boundary::{abc_factor, assemble_abc_vector, AbcMatrix};
pub use sparse::{CsrMatrix, ElementScatter, Restriction};

pub(crate) use assembly::tensor_action_into;
pub(crate) use boundary::abc_vector_into;

use serde::{Deserialize, Serialize};

use crate::mesh::{BoundaryTag, Mesh};
use crate::{Error, Result};

/// Material constants of the medium.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPhys", into = "RawPhys")]
pub struct PhysParams {
    c: f64,
    b: f64,
    rho: f64,
    b_over_a: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhys {
    c: f64,
    b: f64,
    rho: f64,
    b_over_a: f64,
}

impl TryFrom<RawPhys> for PhysParams {
    type Error = Error;
    fn try_from(r: RawPhys) -> Result<Self> {
        PhysParams::new(r.c, r.b, r.rho, r.b_over_a)
    }
}

impl From<PhysParams> for RawPhys {
    fn from(p: PhysParams) -> Self {
        RawPhys {
            c: p.c,
            b: p.b,
            rho: p.rho,
            b_over_a: p.b_over_a,
        }
    }
}

impl PhysParams {
    pub fn new(c: f64, b: f64, rho: f64, b_over_a: f64) -> Result<Self> {
        let ok = c.is_finite()
            && c > 0.0
            && rho.is_finite()
            && rho > 0.0
            && b.is_finite()
            && b >= 0.0
            && b_over_a.is_finite()
            && b_over_a >= 0.0;
        if !ok {
            return Err(Error::Config(format!(
                "invalid medium: c = {c}, b = {b}, rho = {rho}, B/A = {b_over_a} \
                 (need c > 0, rho > 0, b >= 0, B/A >= 0)"
            )));
        }
        Ok(PhysParams { c, b, rho, b_over_a })
    }

    /// Water at room temperature.
    pub fn water() -> Self {
        PhysParams {
            c: 1500.0,
            b: 6e-9,
            rho: 1000.0,
            b_over_a: 5.0,
        }
    }

    /// Same medium with the quadratic nonlinearity switched off (k = 0).
    ///
    /// B/A = -2 is outside the physical range, so this bypasses `new`.
    pub fn linearized(self) -> Self {
        PhysParams {
            b_over_a: -2.0,
            ..self
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn b_over_a(&self) -> f64 {
        self.b_over_a
    }

    /// δ = b/c²
    pub fn delta(&self) -> f64 {
        self.b / (self.c * self.c)
    }

    /// k = (B/A + 2)/c²
    pub fn k(&self) -> f64 {
        (self.b_over_a + 2.0) / (self.c * self.c)
    }
}

/// Split of the nodes into strongly imposed (excitation) and free ones.
#[derive(Clone, Debug, PartialEq)]
pub struct DofPartition {
    dirichlet: Vec<usize>,
    interior: Vec<usize>,
    is_dirichlet: Vec<bool>,
}

impl DofPartition {
    pub fn new(mesh: &Mesh) -> Self {
        Self::from_dirichlet(mesh.n_nodes(), mesh.boundary_nodes(BoundaryTag::Excitation))
    }

    pub fn from_dirichlet(n: usize, mut dirichlet: Vec<usize>) -> Self {
        dirichlet.sort_unstable();
        dirichlet.dedup();
        let mut is_dirichlet = vec![false; n];
        for &d in &dirichlet {
            is_dirichlet[d] = true;
        }
        let interior = (0..n).filter(|&i| !is_dirichlet[i]).collect();
        DofPartition {
            dirichlet,
            interior,
            is_dirichlet,
        }
    }

    pub fn dirichlet(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.is_dirichlet[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.is_dirichlet.len()
    }
}

pub(crate) fn check_len(v: &[f64], expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected,
            actual: v.len(),
        })
    }
}
