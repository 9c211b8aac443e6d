//! Structured generators for the channel and square domains.
//!
//! Each generator has a `_reference` twin that builds an enlarged domain on
//! the same lattice: every node of the truncated mesh is reproduced
//! bit-for-bit, and so is the connectivity inside the truncated region. The
//! reference solution can then be restricted by plain node identification.

use super::{BoundaryTag, Mesh};
use crate::error::{Error, Result};

/// Height of the tilted top edge above `x`.
fn channel_top(width: f64, length: f64, tan_tilt: f64, x: f64) -> f64 {
    length + (x - 0.5 * width) * tan_tilt
}

struct ChannelLattice {
    nx: usize,
    ny: usize,
    /// Rows of the band of constant thickness `h` under the tilted edge.
    band: usize,
    h: f64,
    xs: Vec<f64>,
    tops: Vec<f64>,
}

impl ChannelLattice {
    /// Height of node row `j` in column `i`. The top `band` rows follow the
    /// tilted edge at constant vertical spacing, so the absorbing elements all
    /// have the same shape; the rows below stretch to fill each column.
    fn y(&self, i: usize, j: usize) -> f64 {
        let lower = self.ny - self.band;
        if j <= lower {
            (self.tops[i] - self.band as f64 * self.h) * j as f64 / lower as f64
        } else {
            self.tops[i] - (self.ny - j) as f64 * self.h
        }
    }
}

fn channel_lattice(width: f64, length: f64, tilt_deg: f64, h: f64) -> Result<ChannelLattice> {
    if !(width > 0.0 && length > 0.0 && h > 0.0) {
        return Err(Error::Mesh("channel width, length and h must be positive".into()));
    }
    if !(0.0..90.0).contains(&tilt_deg) {
        return Err(Error::Mesh(format!("tilt angle {tilt_deg}° outside [0°, 90°)")));
    }
    let tan_tilt = tilt_deg.to_radians().tan();
    let low = channel_top(width, length, tan_tilt, 0.0);
    let high = channel_top(width, length, tan_tilt, width);
    if low <= 0.0 {
        return Err(Error::Mesh(format!(
            "tilted edge leaves the channel: height {low} at x = 0"
        )));
    }
    if h > width || 2.0 * h > low {
        return Err(Error::Mesh(format!(
            "h = {h} larger than the domain extent ({width} x {low})"
        )));
    }
    let nx = (width / h).ceil() as usize;
    let band = ((0.25 * low / h).floor() as usize).max(1);
    let ny = band + ((high - band as f64 * h) / h).ceil() as usize;
    let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();
    let tops = xs
        .iter()
        .map(|&x| channel_top(width, length, tan_tilt, x))
        .collect();
    Ok(ChannelLattice {
        nx,
        ny,
        band,
        h,
        xs,
        tops,
    })
}

/// Splits the quads of an `(nx+1) x (rows+1)` node grid, alternating the
/// diagonal with the parity of `i + j + parity_offset`.
fn split_quads(nx: usize, rows: usize, id: impl Fn(usize, usize) -> usize, parity_offset: i64) -> Vec<usize> {
    let mut el = Vec::with_capacity(6 * nx * rows);
    for j in 0..rows {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i as i64 + j as i64 + parity_offset).rem_euclid(2) == 0 {
                el.extend_from_slice(&[a, b, c, a, c, d]);
            } else {
                el.extend_from_slice(&[a, b, d, b, c, d]);
            }
        }
    }
    el
}

/// Channel of the given width whose bottom edge is the excitation and whose
/// top edge, tilted by `tilt_deg`, is absorbing. `length` is the height at
/// mid-width. Sides are Neumann walls.
///
/// Nodes sit on vertical columns; each column is divided into the same
/// number of rows, so the top facets lie exactly on the tilted line. A band
/// of rows of thickness `h` runs parallel to the tilted edge.
pub fn generate_channel(width: f64, length: f64, tilt_deg: f64, h: f64) -> Result<Mesh> {
    let lat = channel_lattice(width, length, tilt_deg, h)?;
    let (nx, ny) = (lat.nx, lat.ny);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([lat.xs[i], lat.y(i, j), 0.0]);
        }
    }
    let elements = split_quads(nx, ny, id, 0);
    let mut facets = Vec::new();
    for i in 0..nx {
        facets.push((vec![id(i, 0), id(i + 1, 0)], BoundaryTag::Excitation));
        facets.push((vec![id(i, ny), id(i + 1, ny)], BoundaryTag::Absorbing));
    }
    for j in 0..ny {
        facets.push((vec![id(0, j), id(0, j + 1)], BoundaryTag::Neumann));
        facets.push((vec![id(nx, j), id(nx, j + 1)], BoundaryTag::Neumann));
    }
    Mesh::new(2, nodes, elements, facets)
}

/// The channel of [`generate_channel`] continued upward by `extension`
/// beyond the highest point of the tilted edge, closed by a horizontal
/// absorbing edge.
pub fn generate_channel_reference(
    width: f64,
    length: f64,
    tilt_deg: f64,
    h: f64,
    extension: f64,
) -> Result<Mesh> {
    if !(extension > 0.0) {
        return Err(Error::Mesh("reference extension must be positive".into()));
    }
    let lat = channel_lattice(width, length, tilt_deg, h)?;
    let (nx, ny) = (lat.nx, lat.ny);
    let top = lat.tops[nx] + extension;
    let ne = ((top - lat.tops[0]) / h).ceil() as usize;
    let rows = ny + ne;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (rows + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([lat.xs[i], lat.y(i, j), 0.0]);
        }
    }
    for j in 1..=ne {
        for i in 0..=nx {
            let y = lat.tops[i] + (top - lat.tops[i]) * j as f64 / ne as f64;
            nodes.push([lat.xs[i], y, 0.0]);
        }
    }
    let elements = split_quads(nx, rows, id, 0);
    let mut facets = Vec::new();
    for i in 0..nx {
        facets.push((vec![id(i, 0), id(i + 1, 0)], BoundaryTag::Excitation));
        facets.push((vec![id(i, rows), id(i + 1, rows)], BoundaryTag::Absorbing));
    }
    for j in 0..rows {
        facets.push((vec![id(0, j), id(0, j + 1)], BoundaryTag::Neumann));
        facets.push((vec![id(nx, j), id(nx, j + 1)], BoundaryTag::Neumann));
    }
    Mesh::new(2, nodes, elements, facets)
}

/// Square `(0, side)^2` with every edge absorbing, for volumetric sources.
pub fn generate_square(side: f64, h: f64) -> Result<Mesh> {
    square_lattice(side, h, 0)
}

/// The square of [`generate_square`] padded by at least `margin` on every
/// side, lattice-aligned with it.
pub fn generate_square_reference(side: f64, h: f64, margin: f64) -> Result<Mesh> {
    if !(margin > 0.0) {
        return Err(Error::Mesh("reference margin must be positive".into()));
    }
    let n = square_cells(side, h)?;
    let pad = (margin / (side / n as f64)).ceil() as usize;
    square_lattice(side, h, pad)
}

fn square_cells(side: f64, h: f64) -> Result<usize> {
    if !(side > 0.0 && h > 0.0) {
        return Err(Error::Mesh("square side and h must be positive".into()));
    }
    if h > side {
        return Err(Error::Mesh(format!("h = {h} larger than the domain extent {side}")));
    }
    Ok((side / h).ceil() as usize)
}

fn square_lattice(side: f64, h: f64, pad: usize) -> Result<Mesh> {
    let n = square_cells(side, h)?;
    let m = n + 2 * pad;
    let coord = |k: usize| side * (k as f64 - pad as f64) / n as f64;
    let id = |i: usize, j: usize| j * (m + 1) + i;
    let mut nodes = Vec::with_capacity((m + 1) * (m + 1));
    for j in 0..=m {
        for i in 0..=m {
            nodes.push([coord(i), coord(j), 0.0]);
        }
    }
    let elements = split_quads(m, m, id, -2 * pad as i64);
    let mut facets = Vec::new();
    for k in 0..m {
        facets.push((vec![id(k, 0), id(k + 1, 0)], BoundaryTag::Absorbing));
        facets.push((vec![id(k, m), id(k + 1, m)], BoundaryTag::Absorbing));
        facets.push((vec![id(0, k), id(0, k + 1)], BoundaryTag::Absorbing));
        facets.push((vec![id(m, k), id(m, k + 1)], BoundaryTag::Absorbing));
    }
    Mesh::new(2, nodes, elements, facets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cross, dot, norm, sub};
    use approx::assert_relative_eq;

    fn top_normals(mesh: &Mesh) -> Vec<[f64; 3]> {
        mesh.facets_with_tag(BoundaryTag::Absorbing)
            .map(|f| mesh.facet_geometry(f).normal)
            .collect()
    }

    #[test]
    fn untilted_top_normals_point_up() {
        let mesh = generate_channel(0.02, 0.03, 0.0, 1e-3).unwrap();
        for n in top_normals(&mesh) {
            assert_relative_eq!(n[0], 0.0, epsilon = 1e-15);
            assert_relative_eq!(n[1], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn tilted_top_normals_make_the_tilt_angle() {
        let mesh = generate_channel(0.02, 0.03, 50.0, 1e-3).unwrap();
        let normals = top_normals(&mesh);
        assert_eq!(normals.len(), 20);
        for n in normals {
            let angle = n[1].clamp(-1.0, 1.0).acos().to_degrees();
            assert!((angle - 50.0).abs() < 1e-9, "{angle}");
            assert!(n[0] < 0.0);
        }
    }

    #[test]
    fn desk_channel_resolution_is_valid() {
        let lambda = 1500.0 / 210e3;
        let h = lambda / 12.0;
        let mesh = generate_channel(0.02, 0.03, 20.0, h).unwrap();
        assert!(mesh.n_elements() > 0);
        assert_eq!(mesh.facets_with_tag(BoundaryTag::Excitation).count(), (0.02 / h).ceil() as usize);
    }

    #[test]
    fn area_matches_trapezoid() {
        for tilt in [0.0, 20.0, 50.0] {
            let mesh = generate_channel(0.02, 0.03, tilt, 7e-4).unwrap();
            assert_relative_eq!(mesh.total_measure(), 0.02 * 0.03, max_relative = 1e-10);
        }
    }

    #[test]
    fn normals_orthogonal_to_facets() {
        let mesh = generate_channel(0.02, 0.03, 35.0, 1e-3).unwrap();
        for f in 0..mesh.n_facets() {
            let ids = mesh.facet(f);
            let t = sub(mesh.node(ids[1]), mesh.node(ids[0]));
            let g = mesh.facet_geometry(f);
            assert!(dot(&g.normal, &t).abs() < 1e-12 * norm(&t));
            assert!(cross(&g.normal, &[0.0, 0.0, 1.0])[2].abs() < 1e-15);
        }
    }

    #[test]
    fn absorbing_elements_are_congruent() {
        let mesh = generate_channel(0.02, 0.03, 50.0, 5e-4).unwrap();
        let areas: Vec<f64> = mesh
            .elements_on_boundary(BoundaryTag::Absorbing)
            .into_iter()
            .map(|e| mesh.element_measure(e))
            .collect();
        assert_eq!(areas.len(), 40);
        for a in &areas {
            assert_relative_eq!(*a, 0.5 * 5e-4 * 5e-4, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_channels() {
        assert!(generate_channel(0.02, 0.03, 0.0, 0.05).is_err());
        assert!(generate_channel(0.02, 0.03, 90.0, 1e-3).is_err());
        assert!(generate_channel(0.02, 0.005, 60.0, 1e-4).is_err());
        assert!(generate_channel(-1.0, 0.03, 0.0, 1e-3).is_err());
    }

    #[test]
    fn reference_channel_contains_truncated_lattice() {
        let mesh = generate_channel(0.02, 0.03, 50.0, 1e-3).unwrap();
        let reference = generate_channel_reference(0.02, 0.03, 50.0, 1e-3, 0.01).unwrap();
        assert_eq!(&reference.nodes()[..mesh.n_nodes()], mesh.nodes());
        let n = mesh.n_elements() * 3;
        for e in 0..mesh.n_elements() {
            assert_eq!(mesh.element(e), reference.element(e));
        }
        assert!(reference.n_elements() * 3 > n);
        let top = reference
            .facets_with_tag(BoundaryTag::Absorbing)
            .map(|f| reference.facet_centroid(f)[1])
            .fold(f64::NAN, f64::max);
        assert!(top >= 0.03 + 0.01 * 50f64.to_radians().tan() + 0.01 - 1e-12);
    }

    #[test]
    fn reference_square_contains_truncated_lattice() {
        let mesh = generate_square(0.03, 1e-3).unwrap();
        let reference = generate_square_reference(0.03, 1e-3, 0.004).unwrap();
        let mut found = 0;
        for p in mesh.nodes() {
            if reference.nodes().iter().any(|q| q == p) {
                found += 1;
            }
        }
        assert_eq!(found, mesh.n_nodes());
        assert_relative_eq!(reference.total_measure(), 0.038 * 0.038, max_relative = 1e-10);
        assert_relative_eq!(mesh.total_measure(), 0.03 * 0.03, max_relative = 1e-10);
    }
}
