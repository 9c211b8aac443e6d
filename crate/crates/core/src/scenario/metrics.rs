use std::collections::HashMap;

use crate::fem::{check_len, CsrMatrix, PhysParams};
use crate::integrator::Trajectory;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Pressure u = ρψ_t.
pub fn pressure_field(psi_dot: &[f64], rho: f64) -> Vec<f64> {
    psi_dot.iter().map(|v| rho * v).collect()
}

/// Absolute node-matching tolerance for reference restriction (m).
pub const NODE_MATCH_TOL: f64 = 1e-12;

/// Index of each truncated-mesh node in the reference mesh.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMap {
    map: Vec<usize>,
}

impl NodeMap {
    /// Matches every node of `mesh` to a node of `reference` within
    /// `NODE_MATCH_TOL`.
    pub fn new(mesh: &Mesh, reference: &Mesh) -> Result<Self> {
        // bucket size well above the tolerance, so a match is in a neighbouring cell
        const CELL: f64 = 1e-9;
        let key = |p: &[f64; 3]| p.map(|v| (v / CELL).floor() as i64);
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::with_capacity(reference.n_nodes());
        for (i, p) in reference.nodes().iter().enumerate() {
            buckets.entry(key(p)).or_default().push(i);
        }
        let mut map = Vec::with_capacity(mesh.n_nodes());
        let mut missing = Vec::new();
        for (i, p) in mesh.nodes().iter().enumerate() {
            let k = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(cands) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &c in cands {
                                let q = reference.node(c);
                                let d = (0..3).map(|j| (p[j] - q[j]).abs()).fold(0.0, f64::max);
                                if d <= NODE_MATCH_TOL {
                                    found = Some(c);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            match found {
                Some(c) => map.push(c),
                None => {
                    missing.push(i);
                    map.push(usize::MAX);
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::NodeMismatch {
                count: missing.len(),
                first: missing.into_iter().take(10).collect(),
            });
        }
        Ok(NodeMap { map })
    }

    pub fn identity(n: usize) -> Self {
        NodeMap { map: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, values_on_reference: &[f64]) -> Vec<f64> {
        self.map.iter().map(|&i| values_on_reference[i]).collect()
    }
}

/// Copies reference values onto the nodes of `mesh`.
pub fn restrict_reference(psi_ref: &[f64], reference: &Mesh, mesh: &Mesh) -> Result<Vec<f64>> {
    check_len(psi_ref, reference.n_nodes())?;
    Ok(NodeMap::new(mesh, reference)?.apply(psi_ref))
}

/// ‖a − b‖_M and ‖b‖_M.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormPair {
    pub error: f64,
    pub reference: f64,
}

impl NormPair {
    /// `None` when the reference norm vanishes.
    pub fn relative(&self) -> Option<f64> {
        (self.reference > 0.0).then(|| self.error / self.reference)
    }
}

pub fn l2_norms(a: &[f64], b: &[f64], mass: &CsrMatrix) -> Result<NormPair> {
    check_len(a, mass.dim())?;
    check_len(b, mass.dim())?;
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(NormPair {
        error: mass.quadratic_form(&diff).max(0.0).sqrt(),
        reference: mass.quadratic_form(b).max(0.0).sqrt(),
    })
}

/// √((a−b)ᵀM(a−b)) / √(bᵀMb); the absolute error when ‖b‖_M = 0.
pub fn relative_l2_error(a: &[f64], b: &[f64], mass: &CsrMatrix) -> Result<f64> {
    let n = l2_norms(a, b, mass)?;
    Ok(n.relative().unwrap_or(n.error))
}

/// Relative L²(0,T; L²(Ω)) error from per-snapshot norm pairs, by the
/// composite trapezoid rule in time.
pub fn space_time_from_norms(times: &[f64], norms: &[NormPair]) -> Result<f64> {
    if times.len() != norms.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            actual: norms.len(),
        });
    }
    let mut err = 0.0;
    let mut reference = 0.0;
    for k in 1..times.len() {
        let h = 0.5 * (times[k] - times[k - 1]);
        err += h * (norms[k].error.powi(2) + norms[k - 1].error.powi(2));
        reference += h * (norms[k].reference.powi(2) + norms[k - 1].reference.powi(2));
    }
    Ok(if reference > 0.0 {
        (err / reference).sqrt()
    } else {
        0.0
    })
}

/// (e_ψ, e_u) between two trajectories on the same mesh.
pub fn space_time_error(traj: &Trajectory, reference: &Trajectory, mass: &CsrMatrix, rho: f64) -> Result<(f64, f64)> {
    if traj.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: traj.len(),
        });
    }
    if traj.times.iter().zip(&reference.times).any(|(a, b)| (a - b).abs() > 1e-9 * b.abs().max(1e-30)) {
        return Err(Error::Config("trajectories are sampled at different times".into()));
    }
    let mut np = Vec::with_capacity(traj.len());
    let mut nu = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        np.push(l2_norms(&traj.psi[k], &reference.psi[k], mass)?);
        let u = pressure_field(&traj.psi_dot[k], rho);
        let u_ref = pressure_field(&reference.psi_dot[k], rho);
        nu.push(l2_norms(&u, &u_ref, mass)?);
    }
    Ok((
        space_time_from_norms(&reference.times, &np)?,
        space_time_from_norms(&reference.times, &nu)?,
    ))
}

/// (e_base − e_new)/e_base
pub fn improvement(e_base: f64, e_new: f64) -> f64 {
    if e_base == 0.0 {
        0.0
    } else {
        (e_base - e_new) / e_base
    }
}

/// E₀ = ½(Σ M_ij (α₀ψ_t)_i (α₀ψ_t)_j + ψᵀLψ), α₀ = √(1/c² − (k/2)ψ_t) clamped at 0.
pub fn energy_diagnostic(
    psi: &[f64],
    psi_dot: &[f64],
    mass: &CsrMatrix,
    laplacian: &CsrMatrix,
    phys: &PhysParams,
) -> f64 {
    let inv_c2 = 1.0 / (phys.c() * phys.c());
    let half_k = 0.5 * phys.k();
    let w: Vec<f64> = psi_dot
        .iter()
        .map(|&v| (inv_c2 - half_k * v).max(0.0).sqrt() * v)
        .collect();
    0.5 * (mass.quadratic_form(&w) + laplacian.quadratic_form(psi))
}
