//! Self-adaptive incidence angle for the absorbing boundary.

use serde::{Deserialize, Serialize};

use crate::fem::check_len;
use crate::mesh::{dot, norm, BoundaryTag, Mesh};
use crate::{Error, Result};

/// The absorbing part of the boundary: its facets, the elements that own
/// them, and one outward normal per element.
#[derive(Clone, Debug)]
pub struct AbsorbingBoundary {
    facets: Vec<usize>,
    facet_slot: Vec<usize>,
    elements: Vec<usize>,
    normals: Vec<[f64; 3]>,
    on_boundary: Vec<bool>,
}

impl AbsorbingBoundary {
    pub fn new(mesh: &Mesh) -> Self {
        let facets: Vec<usize> = mesh.facets_with_tag(BoundaryTag::Absorbing).collect();
        let elements = mesh.elements_on_boundary(BoundaryTag::Absorbing);
        let mut sums = vec![[0.0; 3]; elements.len()];
        let mut facet_slot = Vec::with_capacity(facets.len());
        let mut on_boundary = vec![false; mesh.n_nodes()];
        for &f in &facets {
            let geom = mesh.facet_geometry(f);
            let slot = elements.binary_search(&geom.element).expect("owner is listed");
            facet_slot.push(slot);
            for k in 0..3 {
                sums[slot][k] += geom.measure * geom.normal[k];
            }
            for &n in mesh.facet(f) {
                on_boundary[n] = true;
            }
        }
        // Elements touching the boundary with several facets get the
        // area-weighted mean direction.
        let normals = sums
            .into_iter()
            .map(|s| {
                let l = norm(&s);
                if l > 0.0 {
                    s.map(|v| v / l)
                } else {
                    s
                }
            })
            .collect();
        AbsorbingBoundary {
            facets,
            facet_slot,
            elements,
            normals,
            on_boundary,
        }
    }

    /// Absorbing facet ids.
    pub fn facets(&self) -> &[usize] {
        &self.facets
    }

    /// Index into the element list for each entry of `facets()`.
    pub fn facet_slots(&self) -> &[usize] {
        &self.facet_slot
    }

    /// Elements owning at least one absorbing facet, ascending.
    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn normal(&self, slot: usize) -> &[f64; 3] {
        &self.normals[slot]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Whether a node lies on an absorbing facet.
    pub fn contains_node(&self, node: usize) -> bool {
        self.on_boundary[node]
    }
}

/// Where the p₁ switch takes its reference amplitude from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeReference {
    /// A known amplitude, usually that of the excitation signal.
    Fixed(f64),
    /// Running maximum of |ψ| over nodes off the absorbing boundary.
    InteriorMax,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleConfig {
    pub p1: f64,
    pub p2: f64,
    pub reference: AmplitudeReference,
    pub adaptive: bool,
    /// Angle in degrees used everywhere when `adaptive` is off.
    pub fixed_theta: f64,
}

impl AngleConfig {
    pub const DEFAULT_P1: f64 = 0.1;
    pub const DEFAULT_P2: f64 = 0.5;

    pub fn adaptive(reference: AmplitudeReference) -> Self {
        AngleConfig {
            p1: Self::DEFAULT_P1,
            p2: Self::DEFAULT_P2,
            reference,
            adaptive: true,
            fixed_theta: 0.0,
        }
    }

    pub fn fixed(theta_deg: f64) -> Self {
        AngleConfig {
            p1: Self::DEFAULT_P1,
            p2: Self::DEFAULT_P2,
            reference: AmplitudeReference::InteriorMax,
            adaptive: false,
            fixed_theta: theta_deg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        if !frac(self.p1) || !frac(self.p2) {
            return Err(Error::Config(format!(
                "p1 = {} and p2 = {} must lie in [0, 1]",
                self.p1, self.p2
            )));
        }
        if !(0.0..=90.0).contains(&self.fixed_theta) {
            return Err(Error::Config(format!(
                "fixed angle {}° outside [0°, 90°]",
                self.fixed_theta
            )));
        }
        if let AmplitudeReference::Fixed(a) = self.reference {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(format!("reference amplitude {a} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Per absorbing-element angle state, indexed like `AbsorbingBoundary::elements`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleField {
    /// Degrees, in [0, 90].
    pub theta: Vec<f64>,
    pub enabled: Vec<bool>,
    /// Largest gradient norm seen so far; `None` until the first sample.
    pub grad_hist_max: Vec<Option<f64>>,
    /// θ of the previous step.
    pub last_theta: Vec<f64>,
    /// Running reference amplitude for `AmplitudeReference::InteriorMax`.
    pub interior_max: f64,
}

impl AngleField {
    /// θ = 0°, nothing enabled, empty history.
    pub fn new(n: usize) -> Self {
        AngleField {
            theta: vec![0.0; n],
            enabled: vec![false; n],
            grad_hist_max: vec![None; n],
            last_theta: vec![0.0; n],
            interior_max: 0.0,
        }
    }

    /// Field for a fixed angle everywhere.
    pub fn uniform(n: usize, theta_deg: f64) -> Self {
        AngleField {
            theta: vec![theta_deg; n],
            last_theta: vec![theta_deg; n],
            ..Self::new(n)
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Constant gradient of the P1 interpolant of `psi` on element `e`.
pub fn element_gradient(mesh: &Mesh, psi: &[f64], e: usize) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (grad, &node) in mesh.basis_gradients(e).iter().zip(mesh.element(e)) {
        for k in 0..3 {
            g[k] += psi[node] * grad[k];
        }
    }
    g
}

/// arccos(|g·n|/|g|) in degrees.
pub fn angle_from_gradient(grad: &[f64; 3], normal: &[f64; 3]) -> Result<f64> {
    let gn = norm(grad);
    if gn == 0.0 || !gn.is_finite() {
        return Err(Error::ZeroGradient);
    }
    let c = (dot(grad, normal).abs() / (gn * norm(normal))).min(1.0);
    Ok(c.acos().to_degrees())
}

/// One step of the angle algorithm.
///
/// `psi_n` drives the amplitude switch, `psi_prev` (one step older) the
/// gradient direction. The gradient history is only sampled once an element
/// is enabled, and an empty history holds the previous angle.
pub fn update_angles(
    mesh: &Mesh,
    boundary: &AbsorbingBoundary,
    psi_n: &[f64],
    psi_prev: &[f64],
    field: &AngleField,
    cfg: &AngleConfig,
) -> Result<AngleField> {
    check_len(psi_n, mesh.n_nodes())?;
    check_len(psi_prev, mesh.n_nodes())?;
    if field.len() != boundary.len() {
        return Err(Error::LengthMismatch {
            expected: boundary.len(),
            actual: field.len(),
        });
    }
    let mut next = field.clone();
    next.last_theta.clone_from(&field.theta);
    if !cfg.adaptive {
        next.theta.iter_mut().for_each(|t| *t = cfg.fixed_theta);
        return Ok(next);
    }
    let reference = match cfg.reference {
        AmplitudeReference::Fixed(a) => a,
        AmplitudeReference::InteriorMax => {
            let m = psi_n
                .iter()
                .enumerate()
                .filter(|&(i, _)| !boundary.contains_node(i))
                .fold(0.0_f64, |acc, (_, v)| acc.max(v.abs()));
            next.interior_max = field.interior_max.max(m);
            next.interior_max
        }
    };
    let threshold = cfg.p1 * reference;
    for (slot, &e) in boundary.elements().iter().enumerate() {
        if !next.enabled[slot] {
            let peak = mesh
                .element(e)
                .iter()
                .fold(0.0_f64, |acc, &i| acc.max(psi_n[i].abs()));
            // a zero reference never fires: there is nothing to compare against
            next.enabled[slot] = reference > 0.0 && peak > threshold;
        }
        if !next.enabled[slot] {
            next.theta[slot] = 0.0;
            continue;
        }
        let g = element_gradient(mesh, psi_prev, e);
        let gn = norm(&g);
        match field.grad_hist_max[slot] {
            Some(h) if gn > cfg.p2 * h => {
                next.theta[slot] = angle_from_gradient(&g, boundary.normal(slot))?;
            }
            _ => next.theta[slot] = field.theta[slot],
        }
        next.grad_hist_max[slot] = Some(field.grad_hist_max[slot].map_or(gn, |h| h.max(gn)));
    }
    Ok(next)
}

/// Exact incidence angle (degrees) on the top edge of the plate-with-hole
/// octant: arccos((a/2)/√(x² + (a/2)²)).
pub fn analytical_plate_angle(x: f64, a: f64) -> f64 {
    let half = 0.5 * a;
    (half / (x * x + half * half).sqrt()).acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_channel;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_reproduces_linear_fields() {
        let mesh = generate_channel(0.01, 0.01, 20.0, 0.002).unwrap();
        let x: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        let c = vec![3.0; mesh.n_nodes()];
        for e in 0..mesh.n_elements() {
            let g = element_gradient(&mesh, &x, e);
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
            assert!(norm(&element_gradient(&mesh, &c, e)) < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_interpolant_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<[f64; 3]> = (0..3)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0])
            .collect();
        let mesh = Mesh::new(2, pts.clone(), vec![0, 1, 2], vec![]).unwrap();
        let vals = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let g = element_gradient(&mesh, &vals, 0);
        // evaluate the interpolant through barycentric coordinates
        let interp = |bary: [f64; 3]| -> ([f64; 2], f64) {
            let mut p = [0.0; 2];
            let mut v = 0.0;
            for k in 0..3 {
                let n = mesh.element(0)[k];
                p[0] += bary[k] * mesh.node(n)[0];
                p[1] += bary[k] * mesh.node(n)[1];
                v += bary[k] * vals[n];
            }
            (p, v)
        };
        let (p1, v1) = interp([0.2, 0.3, 0.5]);
        let (p2, v2) = interp([0.5, 0.25, 0.25]);
        let dv = g[0] * (p2[0] - p1[0]) + g[1] * (p2[1] - p1[1]);
        assert_relative_eq!(dv, v2 - v1, max_relative = 1e-10);
    }

    #[test]
    fn angle_examples() {
        let n = [0.0, 1.0, 0.0];
        assert!(angle_from_gradient(&[0.0, 2.0, 0.0], &n).unwrap().abs() < 1e-12);
        assert_relative_eq!(angle_from_gradient(&[3.0, 0.0, 0.0], &n).unwrap(), 90.0, epsilon = 1e-12);
        assert_relative_eq!(angle_from_gradient(&[1.0, 1.0, 0.0], &n).unwrap(), 45.0, epsilon = 1e-12);
        let a = angle_from_gradient(&[0.3, -0.8, 0.0], &n).unwrap();
        let b = angle_from_gradient(&[-3.0, 8.0, 0.0], &n).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
        assert!(matches!(angle_from_gradient(&[0.0; 3], &n), Err(Error::ZeroGradient)));
    }

    #[test]
    fn plate_angle_examples() {
        assert_eq!(analytical_plate_angle(0.0, 0.08), 0.0);
        assert_relative_eq!(analytical_plate_angle(0.04, 0.08), 45.0, epsilon = 1e-12);
        assert_relative_eq!(analytical_plate_angle(0.02, 0.08), 26.565051177077986, epsilon = 1e-12);
        let mut last = -1.0;
        for i in 0..=40 {
            let t = analytical_plate_angle(i as f64 * 0.001, 0.08);
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn multi_facet_normal_is_area_weighted() {
        // one triangle with two absorbing edges of unequal length
        let mesh = Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![0, 1, 2],
            vec![
                (vec![0, 1], BoundaryTag::Absorbing),
                (vec![2, 0], BoundaryTag::Absorbing),
                (vec![1, 2], BoundaryTag::Neumann),
            ],
        )
        .unwrap();
        let b = AbsorbingBoundary::new(&mesh);
        assert_eq!(b.elements(), &[0]);
        let expected = [-1.0 / 5f64.sqrt(), -2.0 / 5f64.sqrt(), 0.0];
        for k in 0..3 {
            assert!((b.normal(0)[k] - expected[k]).abs() < 1e-12);
        }
    }

    fn plane_wave(mesh: &Mesh, phi_deg: f64, kappa: f64, phase: f64) -> Vec<f64> {
        let (s, c) = phi_deg.to_radians().sin_cos();
        mesh.nodes()
            .iter()
            .map(|p| (kappa * (p[0] * s + p[1] * c) + phase).sin())
            .collect()
    }

    #[test]
    fn switch_stays_closed_for_small_fields() {
        let mesh = generate_channel(0.01, 0.01, 0.0, 0.001).unwrap();
        let b = AbsorbingBoundary::new(&mesh);
        let cfg = AngleConfig::adaptive(AmplitudeReference::Fixed(1.0));
        let psi: Vec<f64> = plane_wave(&mesh, 30.0, 600.0, 0.0).iter().map(|v| 0.09 * v).collect();
        let mut field = AngleField::new(b.len());
        for _ in 0..3 {
            field = update_angles(&mesh, &b, &psi, &psi, &field, &cfg).unwrap();
        }
        assert!(field.enabled.iter().all(|&e| !e));
        assert!(field.theta.iter().all(|&t| t == 0.0));
        assert!(field.grad_hist_max.iter().all(Option::is_none));
    }

    #[test]
    fn plane_wave_angle_is_recovered() {
        let mesh = generate_channel(0.01, 0.01, 0.0, 0.0001).unwrap();
        let b = AbsorbingBoundary::new(&mesh);
        let cfg = AngleConfig::adaptive(AmplitudeReference::Fixed(1.0));
        let phi = 35.0;
        let kappa = 2.0 * std::f64::consts::PI / 0.02;
        let mut field = AngleField::new(b.len());
        let mut prev = vec![0.0; mesh.n_nodes()];
        for step in 0..20 {
            let psi = plane_wave(&mesh, phi, kappa, 0.5 * step as f64);
            field = update_angles(&mesh, &b, &psi, &prev, &field, &cfg).unwrap();
            prev = psi;
        }
        let enabled: Vec<f64> = field
            .theta
            .iter()
            .zip(&field.enabled)
            .filter(|(_, &e)| e)
            .map(|(&t, _)| t)
            .collect();
        assert!(enabled.len() > b.len() / 2);
        let computed = enabled.iter().filter(|&&t| t != 0.0).count();
        assert!(computed > enabled.len() / 2);
        for t in enabled.iter().filter(|&&t| t != 0.0) {
            assert!((t - phi).abs() < 2.0, "θ = {t}");
        }
    }

    /// Two boundary elements, scripted gradient and amplitude sequence.
    #[test]
    fn scripted_branches() {
        let mesh = generate_channel(0.004, 0.004, 0.0, 0.002).unwrap();
        let b = AbsorbingBoundary::new(&mesh);
        assert_eq!(b.len(), 2);
        let cfg = AngleConfig::adaptive(AmplitudeReference::Fixed(1.0));
        let field_of = |amp: f64, gx: f64, gy: f64| -> Vec<f64> {
            mesh.nodes().iter().map(|p| amp + gx * p[0] + gy * p[1]).collect()
        };
        let mut field = AngleField::new(b.len());
        // 1: below the switch
        let quiet = field_of(0.05, 0.0, 0.0);
        field = update_angles(&mesh, &b, &quiet, &quiet, &field, &cfg).unwrap();
        assert_eq!(field.enabled, vec![false, false]);
        // 2: switch fires; empty history holds θ = 0
        let loud = field_of(0.5, 10.0, 10.0);
        field = update_angles(&mesh, &b, &loud, &loud, &field, &cfg).unwrap();
        assert_eq!(field.enabled, vec![true, true]);
        assert_eq!(field.theta, vec![0.0, 0.0]);
        let h = field.grad_hist_max[0].unwrap();
        assert_relative_eq!(h, 200f64.sqrt(), max_relative = 1e-9);
        // 3: gradient above p2·history → compute 45°
        field = update_angles(&mesh, &b, &loud, &loud, &field, &cfg).unwrap();
        for &t in &field.theta {
            assert_relative_eq!(t, 45.0, epsilon = 1e-9);
        }
        // 4: weak gradient, different direction → hold 45°, switch stays on
        let weak = field_of(0.0, 0.0, 1.0);
        field = update_angles(&mesh, &b, &weak, &weak, &field, &cfg).unwrap();
        assert_eq!(field.enabled, vec![true, true]);
        for &t in &field.theta {
            assert_relative_eq!(t, 45.0, epsilon = 1e-9);
        }
        assert_relative_eq!(field.grad_hist_max[0].unwrap(), h, max_relative = 1e-12);
        // 5: strong normal gradient → recompute to 0°, history grows
        let normal = field_of(0.0, 0.0, 40.0);
        field = update_angles(&mesh, &b, &normal, &normal, &field, &cfg).unwrap();
        for &t in &field.theta {
            assert!(t.abs() < 1e-9);
        }
        assert_relative_eq!(field.grad_hist_max[1].unwrap(), 40.0, max_relative = 1e-9);
    }

    #[test]
    fn angles_bounded_and_scale_invariant() {
        let mesh = generate_channel(0.01, 0.01, 30.0, 0.001).unwrap();
        let b = AbsorbingBoundary::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let seq: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let run = |scale: f64| {
            let cfg = AngleConfig::adaptive(AmplitudeReference::Fixed(scale));
            let mut field = AngleField::new(b.len());
            let mut prev = vec![0.0; mesh.n_nodes()];
            for s in &seq {
                let psi: Vec<f64> = s.iter().map(|v| scale * v).collect();
                field = update_angles(&mesh, &b, &psi, &prev, &field, &cfg).unwrap();
                assert!(field.theta.iter().all(|t| (0.0..=90.0).contains(t)));
                prev = psi;
            }
            field.theta
        };
        let base = run(1.0);
        let scaled = run(37.5);
        for (a, b) in base.iter().zip(&scaled) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_mode_ignores_field() {
        let mesh = generate_channel(0.01, 0.01, 10.0, 0.002).unwrap();
        let b = AbsorbingBoundary::new(&mesh);
        let psi = vec![1.0; mesh.n_nodes()];
        let f = update_angles(&mesh, &b, &psi, &psi, &AngleField::new(b.len()), &AngleConfig::fixed(50.0)).unwrap();
        assert!(f.theta.iter().all(|&t| t == 50.0));
        assert!(f.enabled.iter().all(|&e| !e));
    }

    #[test]
    fn interior_reference_tracks_running_max() {
        let mesh = generate_channel(0.01, 0.01, 0.0, 0.002).unwrap();
        let b = AbsorbingBoundary::new(&mesh);
        let cfg = AngleConfig::adaptive(AmplitudeReference::InteriorMax);
        let mut psi = vec![0.0; mesh.n_nodes()];
        let inner = (0..mesh.n_nodes()).find(|&i| !b.contains_node(i)).unwrap();
        psi[inner] = 2.0;
        let f = update_angles(&mesh, &b, &psi, &psi, &AngleField::new(b.len()), &cfg).unwrap();
        assert_eq!(f.interior_max, 2.0);
        psi[inner] = 1.0;
        let f = update_angles(&mesh, &b, &psi, &psi, &f, &cfg).unwrap();
        assert_eq!(f.interior_max, 2.0);
    }
}
