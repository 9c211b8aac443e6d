use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::metrics::{improvement, space_time_from_norms, NormPair};
use super::run::{AngleRow, ErrorRow};
use crate::mesh::Mesh;
use crate::{Error, Result};

pub const ERROR_HEADER: &str =
    "step,t,rel_err_psi,rel_err_u,energy,err_norm_psi,ref_norm_psi,err_norm_u,ref_norm_u";
pub const ANGLE_HEADER: &str = "step,t,element,cx,cy,theta_deg,enabled";

/// 17 significant digits.
fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

pub fn error_csv(rows: &[ErrorRow]) -> String {
    let mut out = String::with_capacity(200 * (rows.len() + 1));
    out.push_str(ERROR_HEADER);
    out.push('\n');
    for r in rows {
        write!(out, "{},", r.step).unwrap();
        for (i, v) in [
            r.t,
            r.rel_err_psi,
            r.rel_err_u,
            r.energy,
            r.psi.error,
            r.psi.reference,
            r.u.error,
            r.u.reference,
        ]
        .into_iter()
        .enumerate()
        {
            if i > 0 {
                out.push(',');
            }
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn angle_csv(rows: &[AngleRow]) -> String {
    let mut out = String::with_capacity(120 * (rows.len() + 1));
    out.push_str(ANGLE_HEADER);
    out.push('\n');
    for r in rows {
        write!(out, "{},", r.step).unwrap();
        num(&mut out, r.t);
        write!(out, ",{},", r.element).unwrap();
        num(&mut out, r.centroid[0]);
        out.push(',');
        num(&mut out, r.centroid[1]);
        out.push(',');
        num(&mut out, r.theta_deg);
        writeln!(out, ",{}", u8::from(r.enabled)).unwrap();
    }
    out
}

#[derive(Deserialize)]
struct RawRow {
    step: usize,
    t: f64,
    rel_err_psi: f64,
    rel_err_u: f64,
    energy: f64,
    #[serde(default)]
    err_norm_psi: Option<f64>,
    #[serde(default)]
    ref_norm_psi: Option<f64>,
    #[serde(default)]
    err_norm_u: Option<f64>,
    #[serde(default)]
    ref_norm_u: Option<f64>,
}

/// Parses an error report. The four norm columns are optional; without them
/// the relative errors stand in for the error norms against a unit reference.
pub fn parse_error_csv(text: &str) -> Result<Vec<ErrorRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<RawRow>() {
        let r = rec.map_err(|e| Error::Config(format!("error CSV: {e}")))?;
        rows.push(ErrorRow {
            step: r.step,
            t: r.t,
            rel_err_psi: r.rel_err_psi,
            rel_err_u: r.rel_err_u,
            energy: r.energy,
            psi: NormPair {
                error: r.err_norm_psi.unwrap_or(r.rel_err_psi),
                reference: r.ref_norm_psi.unwrap_or(1.0),
            },
            u: NormPair {
                error: r.err_norm_u.unwrap_or(r.rel_err_u),
                reference: r.ref_norm_u.unwrap_or(1.0),
            },
        });
    }
    Ok(rows)
}

pub fn read_error_csv(path: impl AsRef<Path>) -> Result<Vec<ErrorRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_error_csv(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Space-time errors (e_ψ, e_u) of a report.
pub fn aggregate(rows: &[ErrorRow]) -> Result<(f64, f64)> {
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let p: Vec<NormPair> = rows.iter().map(|r| r.psi).collect();
    let u: Vec<NormPair> = rows.iter().map(|r| r.u).collect();
    Ok((space_time_from_norms(&times, &p)?, space_time_from_norms(&times, &u)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub base: (f64, f64),
    pub new: (f64, f64),
    /// (e_base − e_new)/e_base for ψ and u.
    pub improvement_psi: f64,
    pub improvement_u: f64,
}

/// Compares two reports sampled on the same step grid.
pub fn compare(base: &[ErrorRow], new: &[ErrorRow]) -> Result<Comparison> {
    if base.is_empty() || new.is_empty() {
        return Err(Error::Config("cannot compare an empty error report".into()));
    }
    if base.len() != new.len() || base.iter().zip(new).any(|(a, b)| a.step != b.step) {
        return Err(Error::Config(format!(
            "error reports are on different step grids ({} vs {} rows)",
            base.len(),
            new.len()
        )));
    }
    let b = aggregate(base)?;
    let n = aggregate(new)?;
    Ok(Comparison {
        base: b,
        new: n,
        improvement_psi: improvement(b.0, n.0),
        improvement_u: improvement(b.1, n.1),
    })
}

/// Legacy ASCII VTK unstructured grid with point fields.
pub fn vtk_string(mesh: &Mesh, title: &str, fields: &[(&str, &[f64])]) -> Result<String> {
    for (_, f) in fields {
        crate::fem::check_len(f, mesh.n_nodes())?;
    }
    let nv = mesh.nodes_per_element();
    let ne = mesh.n_elements();
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "{}", title.lines().next().unwrap_or("")).unwrap();
    writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {} double", mesh.n_nodes()).unwrap();
    for p in mesh.nodes() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]).unwrap();
    }
    writeln!(out, "CELLS {} {}", ne, ne * (nv + 1)).unwrap();
    for e in 0..ne {
        write!(out, "{nv}").unwrap();
        for &n in mesh.element(e) {
            write!(out, " {n}").unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "CELL_TYPES {ne}").unwrap();
    // 5 = VTK_TRIANGLE, 10 = VTK_TETRA
    let ty = if mesh.dim() == 2 { 5 } else { 10 };
    for _ in 0..ne {
        writeln!(out, "{ty}").unwrap();
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.n_nodes()).unwrap();
        for (name, f) in fields {
            writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
            for v in f.iter() {
                writeln!(out, "{v:.16e}").unwrap();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_square;

    fn rows(scale: f64) -> Vec<ErrorRow> {
        (0..4)
            .map(|k| ErrorRow {
                step: 2 * k,
                t: k as f64 * 0.5,
                rel_err_psi: scale,
                rel_err_u: 2.0 * scale,
                energy: 1.0 / 3.0,
                psi: NormPair {
                    error: scale * (k + 1) as f64,
                    reference: (k + 1) as f64,
                },
                u: NormPair {
                    error: 2.0 * scale * (k + 1) as f64,
                    reference: (k + 1) as f64,
                },
            })
            .collect()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = rows(0.1);
        let text = error_csv(&r);
        assert!(text.starts_with(ERROR_HEADER));
        assert!(!text.contains('\r'));
        assert_eq!(parse_error_csv(&text).unwrap(), r);
    }

    #[test]
    fn compare_examples() {
        let c = compare(&rows(0.05), &rows(0.02)).unwrap();
        assert!((c.improvement_psi - 0.6).abs() < 1e-14);
        assert!((c.improvement_u - 0.6).abs() < 1e-14);
        let same = compare(&rows(0.05), &rows(0.05)).unwrap();
        assert_eq!(same.improvement_psi, 0.0);
        assert!(compare(&[], &rows(0.05)).is_err());
        assert!(compare(&rows(0.05)[..3], &rows(0.05)).is_err());
        assert!(parse_error_csv(ERROR_HEADER).unwrap().is_empty());
    }

    #[test]
    fn minimal_columns_are_accepted() {
        let text = "step,t,rel_err_psi,rel_err_u,energy\n0,0,0.5,0.25,0\n1,1,0.5,0.25,0\n";
        let r = parse_error_csv(text).unwrap();
        let (p, u) = aggregate(&r).unwrap();
        assert!((p - 0.5).abs() < 1e-15 && (u - 0.25).abs() < 1e-15);
        assert!(parse_error_csv("step,t\n0,0\n").is_err());
    }

    #[test]
    fn vtk_layout() {
        let mesh = generate_square(1.0, 0.5).unwrap();
        let psi: Vec<f64> = (0..mesh.n_nodes()).map(|i| i as f64).collect();
        let s = vtk_string(&mesh, "t", &[("psi", &psi), ("u", &psi)]).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains(&format!("CELLS {} {}", mesh.n_elements(), 4 * mesh.n_elements())));
        let types = s.split("CELL_TYPES").nth(1).unwrap();
        assert!(types.lines().skip(1).take(mesh.n_elements()).all(|l| l == "5"));
        assert!(s.contains("SCALARS u double 1"));
        assert!(vtk_string(&mesh, "t", &[("psi", &psi[1..])]).is_err());
    }
}
