use super::sparse::{CsrMatrix, ElementScatter};
use super::{check_len, DofPartition, PhysParams};
use crate::mesh::{dot, factorial, Mesh};
use crate::Result;

/// ∫_K λ_0^{p_0} ⋯ λ_d^{p_d} for a d-simplex of measure `measure`.
pub fn simplex_moment(dim: usize, measure: f64, powers: &[usize]) -> f64 {
    let total: usize = powers.iter().sum();
    let num: f64 = powers.iter().map(|&p| factorial(p)).product();
    factorial(dim) * measure * num / factorial(dim + total)
}

/// ∫_K N_a N_b = |K|(1+δ_ab)/((d+1)(d+2))
fn mass_entry(dim: usize, measure: f64, same: bool) -> f64 {
    let base = measure / ((dim + 1) * (dim + 2)) as f64;
    if same {
        2.0 * base
    } else {
        base
    }
}

/// Consistent mass matrix M_ij = ∫ N_i N_j.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let mut m = CsrMatrix::with_mesh_pattern(mesh);
    let scatter = ElementScatter::new(mesh, &m);
    let nv = mesh.nodes_per_element();
    let vals = m.values_mut();
    for e in 0..mesh.n_elements() {
        let meas = mesh.element_measure(e);
        let slots = scatter.element(e);
        for a in 0..nv {
            for b in 0..nv {
                vals[slots[a * nv + b]] += mass_entry(mesh.dim(), meas, a == b);
            }
        }
    }
    m
}

/// Laplacian L_ij = ∫ ∇N_i·∇N_j; stiffness is c²L and damping bL.
pub fn assemble_laplacian(mesh: &Mesh) -> CsrMatrix {
    let mut l = CsrMatrix::with_mesh_pattern(mesh);
    let scatter = ElementScatter::new(mesh, &l);
    let nv = mesh.nodes_per_element();
    let vals = l.values_mut();
    for e in 0..mesh.n_elements() {
        let meas = mesh.element_measure(e);
        let grads = mesh.basis_gradients(e);
        let slots = scatter.element(e);
        for a in 0..nv {
            for b in 0..nv {
                vals[slots[a * nv + b]] += meas * dot(&grads[a], &grads[b]);
            }
        }
    }
    l
}

/// d!|K|/(d+3)!, the moment ∫N_aN_bN_c for three distinct indices.
fn cubic_unit(dim: usize, measure: f64) -> f64 {
    factorial(dim) * measure / factorial(dim + 3)
}

/// T[w,v]_i = k Σ_K Σ_ab w_a v_b ∫_K N_a N_b N_i.
///
/// Per element, Σ_ab w_a v_b (1 + δ_ab + δ_ai + δ_bi + 2δ_abi) collapses to
/// sums of the local values, so no quadrature is needed.
pub fn tensor_action(mesh: &Mesh, w: &[f64], v: &[f64], phys: &PhysParams) -> Result<Vec<f64>> {
    let n = mesh.n_nodes();
    check_len(w, n)?;
    check_len(v, n)?;
    let mut out = vec![0.0; n];
    let k = phys.k();
    if k == 0.0 {
        return Ok(out);
    }
    tensor_action_into(mesh, w, v, k, &mut out);
    Ok(out)
}

pub(crate) fn tensor_action_into(mesh: &Mesh, w: &[f64], v: &[f64], k: f64, out: &mut [f64]) {
    let dim = mesh.dim();
    for e in 0..mesh.n_elements() {
        let conn = mesh.element(e);
        let (mut sw, mut sv, mut swv) = (0.0, 0.0, 0.0);
        for &a in conn {
            sw += w[a];
            sv += v[a];
            swv += w[a] * v[a];
        }
        let scale = k * cubic_unit(dim, mesh.element_measure(e));
        let common = sw * sv + swv;
        for &i in conn {
            out[i] += scale * (common + w[i] * sv + v[i] * sw + 2.0 * w[i] * v[i]);
        }
    }
}

/// The matrix W(v) with W(v)·w = T[w, v], for lagging v in fixed-point passes.
///
/// W(v)_ia = k Σ_K c_K (S_v + v_a + v_i + δ_ai (S_v + 2v_i)), which is symmetric.
#[derive(Clone, Debug)]
pub struct TensorMatrix {
    scatter: ElementScatter,
}

impl TensorMatrix {
    /// `pattern` must contain the element coupling pattern of `mesh`.
    pub fn new(mesh: &Mesh, pattern: &CsrMatrix) -> Self {
        TensorMatrix {
            scatter: ElementScatter::new(mesh, pattern),
        }
    }

    /// Adds `scale`·W(v) into `out`.
    pub fn add_to(&self, mesh: &Mesh, v: &[f64], k: f64, scale: f64, out: &mut CsrMatrix) {
        if k == 0.0 || scale == 0.0 {
            return;
        }
        let dim = mesh.dim();
        let nv = mesh.nodes_per_element();
        let vals = out.values_mut();
        let mut local = [0.0; 4];
        for e in 0..mesh.n_elements() {
            let conn = mesh.element(e);
            let mut sv = 0.0;
            for (l, &a) in local.iter_mut().zip(conn) {
                *l = v[a];
                sv += v[a];
            }
            let c = scale * k * cubic_unit(dim, mesh.element_measure(e));
            let slots = self.scatter.element(e);
            for i in 0..nv {
                for a in 0..nv {
                    let mut w = sv + local[a] + local[i];
                    if a == i {
                        w += sv + 2.0 * local[i];
                    }
                    vals[slots[i * nv + a]] += c * w;
                }
            }
        }
    }
}

/// Load vector ∫ f N_i of a field given by its nodal samples (M·f).
pub fn assemble_source(mass: &CsrMatrix, f_nodal: &[f64]) -> Result<Vec<f64>> {
    check_len(f_nodal, mass.dim())?;
    Ok(mass.apply(f_nodal))
}

/// Prescribed values on the Dirichlet nodes, in `DofPartition::dirichlet` order.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletData {
    pub g: Vec<f64>,
    pub g_dot: Vec<f64>,
    pub g_ddot: Vec<f64>,
}

impl DirichletData {
    /// The same value set on every Dirichlet node.
    pub fn uniform(n: usize, g: f64, g_dot: f64, g_ddot: f64) -> Self {
        DirichletData {
            g: vec![g; n],
            g_dot: vec![g_dot; n],
            g_ddot: vec![g_ddot; n],
        }
    }
}

/// Load on the interior rows produced by the Dirichlet values:
/// F_I = −M_ID g̈ − c²L_ID g − bL_ID ġ + T_DDI[g̈, ġ].
///
/// The tensor term carries a plus sign because it enters the residual as −T.
pub fn dirichlet_rhs(
    mesh: &Mesh,
    mass: &CsrMatrix,
    laplacian: &CsrMatrix,
    phys: &PhysParams,
    partition: &DofPartition,
    data: &DirichletData,
) -> Result<Vec<f64>> {
    let n = mesh.n_nodes();
    let nd = partition.dirichlet().len();
    check_len(&data.g, nd)?;
    check_len(&data.g_dot, nd)?;
    check_len(&data.g_ddot, nd)?;
    let scatter = |vals: &[f64]| {
        let mut full = vec![0.0; n];
        for (&d, &x) in partition.dirichlet().iter().zip(vals) {
            full[d] = x;
        }
        full
    };
    let (g, gd, gdd) = (scatter(&data.g), scatter(&data.g_dot), scatter(&data.g_ddot));
    let mg = mass.apply(&gdd);
    let lg = laplacian.apply(&g);
    let lgd = laplacian.apply(&gd);
    let t = tensor_action(mesh, &gdd, &gd, phys)?;
    let c2 = phys.c() * phys.c();
    Ok(partition
        .interior()
        .iter()
        .map(|&i| -mg[i] - c2 * lg[i] - phys.b() * lgd[i] + t[i])
        .collect())
}
