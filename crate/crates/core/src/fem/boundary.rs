use super::sparse::CsrMatrix;
use super::{check_len, PhysParams};
use crate::abc::{AbsorbingBoundary, AngleField};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Below this, 1 − σkψ_t is treated as zero instead of failing.
const CLAMP: f64 = 1e-14;

/// √(1 − σkv), or `None` when the argument is not positive.
pub fn abc_factor(sigma: f64, k: f64, v: f64) -> Option<f64> {
    let arg = 1.0 - sigma * k * v;
    if arg <= 0.0 || arg.is_nan() {
        None
    } else if arg < CLAMP {
        Some(0.0)
    } else {
        Some(arg.sqrt())
    }
}

/// Quadrature on a facet: barycentric points and weights summing to 1.
fn facet_rule(dim: usize) -> &'static [([f64; 3], f64)] {
    const G: f64 = 0.211_324_865_405_187_1; // (1 − 1/√3)/2
    const EDGE: [([f64; 3], f64); 2] = [([1.0 - G, G, 0.0], 0.5), ([G, 1.0 - G, 0.0], 0.5)];
    const A: f64 = 2.0 / 3.0;
    const B: f64 = 1.0 / 6.0;
    const FACE: [([f64; 3], f64); 3] = [
        ([A, B, B], 1.0 / 3.0),
        ([B, A, B], 1.0 / 3.0),
        ([B, B, A], 1.0 / 3.0),
    ];
    if dim == 2 {
        &EDGE
    } else {
        &FACE
    }
}

fn facet_scale(theta_deg: f64, c: f64, measure: f64) -> f64 {
    // cos 90° is not exactly zero in floating point
    if theta_deg >= 90.0 {
        0.0
    } else {
        c * theta_deg.to_radians().cos() * measure
    }
}

/// A_i = ∫_Γabc c √(1 − σkψ_t) ψ_t cos θ N_i dS
pub fn assemble_abc_vector(
    mesh: &Mesh,
    boundary: &AbsorbingBoundary,
    psi_dot: &[f64],
    angles: &AngleField,
    sigma: f64,
    phys: &PhysParams,
) -> Result<Vec<f64>> {
    check_len(psi_dot, mesh.n_nodes())?;
    let mut out = vec![0.0; mesh.n_nodes()];
    abc_vector_into(mesh, boundary, psi_dot, angles, sigma, phys, 1.0, &mut out)?;
    Ok(out)
}

/// Adds `scale`·A(ψ_t) into `out`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn abc_vector_into(
    mesh: &Mesh,
    boundary: &AbsorbingBoundary,
    psi_dot: &[f64],
    angles: &AngleField,
    sigma: f64,
    phys: &PhysParams,
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    if angles.len() != boundary.len() {
        return Err(Error::LengthMismatch {
            expected: boundary.len(),
            actual: angles.len(),
        });
    }
    let rule = facet_rule(mesh.dim());
    let k = phys.k();
    for (&f, &slot) in boundary.facets().iter().zip(boundary.facet_slots()) {
        let s = scale * facet_scale(angles.theta[slot], phys.c(), mesh.facet_geometry(f).measure);
        if s == 0.0 {
            continue;
        }
        let nodes = mesh.facet(f);
        for (lam, w) in rule {
            let v: f64 = nodes.iter().zip(lam).map(|(&n, l)| l * psi_dot[n]).sum();
            let factor = abc_factor(sigma, k, v).ok_or(Error::AbcDegeneracy {
                facet: f,
                value: 1.0 - sigma * k * v,
            })?;
            let q = s * w * factor * v;
            for (&n, l) in nodes.iter().zip(lam) {
                out[n] += q * l;
            }
        }
    }
    Ok(())
}

/// Boundary matrix D(v*) with D(v*)·v* = A(v*): the ABC vector with its
/// square-root factor frozen at v*.
#[derive(Clone, Debug)]
pub struct AbcMatrix {
    slots: Vec<usize>,
    measures: Vec<f64>,
}

impl AbcMatrix {
    /// `pattern` must contain the element coupling pattern of `mesh`.
    pub fn new(mesh: &Mesh, boundary: &AbsorbingBoundary, pattern: &CsrMatrix) -> Self {
        let nf = mesh.dim();
        let mut slots = Vec::with_capacity(boundary.facets().len() * nf * nf);
        let mut measures = Vec::with_capacity(boundary.facets().len());
        for &f in boundary.facets() {
            let nodes = mesh.facet(f);
            for &a in nodes {
                for &b in nodes {
                    slots.push(pattern.index_of(a, b).expect("facet pair in element pattern"));
                }
            }
            measures.push(mesh.facet_geometry(f).measure);
        }
        AbcMatrix { slots, measures }
    }

    /// Adds `scale`·D(v*) into `out`.
    #[allow(clippy::too_many_arguments)]
    pub fn add_to(
        &self,
        mesh: &Mesh,
        boundary: &AbsorbingBoundary,
        v_lag: &[f64],
        angles: &AngleField,
        sigma: f64,
        phys: &PhysParams,
        scale: f64,
        out: &mut CsrMatrix,
    ) -> Result<()> {
        let nf = mesh.dim();
        let rule = facet_rule(nf);
        let k = phys.k();
        let vals = out.values_mut();
        for (idx, (&f, &slot)) in boundary.facets().iter().zip(boundary.facet_slots()).enumerate() {
            let s = scale * facet_scale(angles.theta[slot], phys.c(), self.measures[idx]);
            if s == 0.0 {
                continue;
            }
            let nodes = mesh.facet(f);
            let slots = &self.slots[idx * nf * nf..(idx + 1) * nf * nf];
            for (lam, w) in rule {
                let v: f64 = nodes.iter().zip(lam).map(|(&n, l)| l * v_lag[n]).sum();
                let factor = abc_factor(sigma, k, v).ok_or(Error::AbcDegeneracy {
                    facet: f,
                    value: 1.0 - sigma * k * v,
                })?;
                let q = s * w * factor;
                for a in 0..nf {
                    for b in 0..nf {
                        vals[slots[a * nf + b]] += q * lam[a] * lam[b];
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::AbsorbingBoundary;
    use crate::mesh::{generate_channel, BoundaryTag};
    use approx::assert_relative_eq;

    fn one_edge() -> Mesh {
        // 3-4-5 triangle, absorbing hypotenuse of length 5
        Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [0.0, 3.0, 0.0]],
            vec![0, 1, 2],
            vec![(vec![1, 2], BoundaryTag::Absorbing)],
        )
        .unwrap()
    }

    #[test]
    fn linear_constant_velocity() {
        let mesh = one_edge();
        let b = AbsorbingBoundary::new(&mesh);
        let phys = PhysParams::new(1500.0, 0.0, 1000.0, 5.0).unwrap();
        let v0 = 0.02;
        let a = assemble_abc_vector(&mesh, &b, &[v0; 3], &AngleField::new(1), 0.0, &phys).unwrap();
        assert_eq!(a[0], 0.0);
        assert_relative_eq!(a[1], 1500.0 * v0 * 2.5, max_relative = 1e-14);
        assert_relative_eq!(a[2], 1500.0 * v0 * 2.5, max_relative = 1e-14);
    }

    #[test]
    fn grazing_angle_gives_zero() {
        let mesh = one_edge();
        let b = AbsorbingBoundary::new(&mesh);
        let a = assemble_abc_vector(&mesh, &b, &[1.0; 3], &AngleField::uniform(1, 90.0), 0.5, &PhysParams::water())
            .unwrap();
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonlinear_factor_scales_entries() {
        let mesh = one_edge();
        let b = AbsorbingBoundary::new(&mesh);
        let phys = PhysParams::new(1.0, 0.0, 1.0, 0.0).unwrap(); // k = 2
        let v0 = 0.3;
        let lin = assemble_abc_vector(&mesh, &b, &[v0; 3], &AngleField::new(1), 0.0, &phys).unwrap();
        let half = assemble_abc_vector(&mesh, &b, &[v0; 3], &AngleField::new(1), 0.5, &phys).unwrap();
        let expected = (1.0 - 2.0 * v0 / 2.0f64).sqrt();
        assert_relative_eq!(half[1] / lin[1], expected, max_relative = 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form_for_linear_velocity() {
        // σ = 0: integrand is linear·linear, which 2-point Gauss integrates exactly
        let mesh = one_edge();
        let b = AbsorbingBoundary::new(&mesh);
        let phys = PhysParams::new(2.0, 0.0, 1.0, 0.0).unwrap();
        let v = [0.0, 1.0, 3.0];
        let a = assemble_abc_vector(&mesh, &b, &v, &AngleField::uniform(1, 60.0), 0.0, &phys).unwrap();
        let l = 5.0;
        let scale = 2.0 * 0.5 * l / 6.0;
        assert_relative_eq!(a[1], scale * (2.0 * 1.0 + 3.0), max_relative = 1e-13);
        assert_relative_eq!(a[2], scale * (1.0 + 2.0 * 3.0), max_relative = 1e-13);
    }

    #[test]
    fn degeneracy_and_clamp() {
        assert_eq!(abc_factor(1.0, 1.0, 1.0), None);
        assert_eq!(abc_factor(1.0, 1.0, 2.0), None);
        assert_eq!(abc_factor(1.0, 1.0, 1.0 - 1e-15), Some(0.0));
        assert_eq!(abc_factor(0.0, 1.0, 1e9), Some(1.0));
        let mesh = one_edge();
        let b = AbsorbingBoundary::new(&mesh);
        let phys = PhysParams::new(1.0, 0.0, 1.0, 0.0).unwrap();
        let err = assemble_abc_vector(&mesh, &b, &[1.0; 3], &AngleField::new(1), 1.0, &phys).unwrap_err();
        assert!(err.to_string().starts_with("ABC degeneracy"));
    }

    #[test]
    fn support_is_on_absorbing_nodes() {
        let mesh = generate_channel(0.01, 0.01, 20.0, 0.001).unwrap();
        let b = AbsorbingBoundary::new(&mesh);
        let v: Vec<f64> = mesh.nodes().iter().map(|p| 1.0 + p[0] * 50.0).collect();
        let a = assemble_abc_vector(&mesh, &b, &v, &AngleField::new(b.len()), 0.5, &PhysParams::water()).unwrap();
        for (i, &x) in a.iter().enumerate() {
            if !b.contains_node(i) {
                assert_eq!(x, 0.0);
            }
        }
        assert!(a.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn matrix_reproduces_vector() {
        for mesh in [
            generate_channel(0.01, 0.01, 35.0, 0.002).unwrap(),
            Mesh::new(
                3,
                vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                vec![0, 1, 2, 3],
                vec![(vec![1, 2, 3], BoundaryTag::Absorbing), (vec![0, 1, 2], BoundaryTag::Absorbing)],
            )
            .unwrap(),
        ] {
            let b = AbsorbingBoundary::new(&mesh);
            let phys = PhysParams::new(1.0, 0.0, 1.0, 0.0).unwrap();
            let v: Vec<f64> = mesh.nodes().iter().map(|p| 0.1 + 0.2 * p[0] - 0.1 * p[1] + 0.05 * p[2]).collect();
            let angles = AngleField::uniform(b.len(), 25.0);
            let mut d = CsrMatrix::with_mesh_pattern(&mesh);
            AbcMatrix::new(&mesh, &b, &d).add_to(&mesh, &b, &v, &angles, 0.5, &phys, 1.0, &mut d).unwrap();
            assert!(d.asymmetry() < 1e-15);
            let dv = d.apply(&v);
            let a = assemble_abc_vector(&mesh, &b, &v, &angles, 0.5, &phys).unwrap();
            for (x, y) in dv.iter().zip(&a) {
                assert!((x - y).abs() < 1e-14 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn face_rule_integrates_quadratics() {
        // ∫_T λ_a λ_b = |T|(1+δ_ab)/12
        let rule = facet_rule(3);
        for a in 0..3 {
            for b in 0..3 {
                let q: f64 = rule.iter().map(|(l, w)| w * l[a] * l[b]).sum();
                let exact = if a == b { 2.0 / 12.0 } else { 1.0 / 12.0 };
                assert_relative_eq!(q, exact, max_relative = 1e-14);
            }
        }
    }
}
