use std::time::{Duration, Instant};

use super::config::{Scenario, Variant};
use super::metrics::{energy_diagnostic, l2_norms, pressure_field, space_time_from_norms, NodeMap, NormPair};
use super::signal::{excitation_signal, gaussian_source};
use crate::abc::AngleConfig;
use crate::integrator::{Integrator, RunStats, State, Trajectory};
use crate::mesh::{BoundaryTag, Mesh};
use crate::Result;

/// Early-time guard: relative errors are reported as 0 while the reference
/// norm is below this fraction of its natural scale.
pub const EARLY_GUARD: f64 = 1e-12;

/// Fraction of the peak reference amplitude that marks wave arrival at Γ_abc.
pub const ARRIVAL_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub snapshot_stride: usize,
    /// Record the angle field every this many snapshots (0 = never).
    pub angle_every: usize,
    /// Keep every this many snapshots of the run, e.g. for VTK output (0 = none).
    pub keep_every: usize,
}

impl RunOptions {
    pub fn from_scenario(s: &Scenario) -> Self {
        RunOptions {
            snapshot_stride: s.output.snapshot_stride,
            angle_every: 1,
            keep_every: s.output.vtk_every,
        }
    }
}

/// Attaches the scenario's excitation and source to a fresh integrator.
pub fn build_integrator<'m>(s: &Scenario, mesh: &'m Mesh, sigma: f64, cfg: AngleConfig) -> Result<Integrator<'m>> {
    let mut integ = Integrator::new(mesh, s.physics, s.scheme()?, sigma, cfg)?;
    if let Some(e) = s.excitation.clone() {
        integ = integ.with_excitation(Box::new(move |t| excitation_signal(t, e.amplitude, e.frequency)));
    }
    if let Some(spec) = s.source.clone() {
        integ = integ.with_source(Box::new(move |x, t| gaussian_source(x[0], x[1], t, &spec)));
    }
    Ok(integ)
}

/// Reference solution on the enlarged domain, restricted to the truncated mesh.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub trajectory: Trajectory,
    /// Index into the snapshots at which the wave first reaches Γ_abc.
    pub arrival: Option<usize>,
    pub stats: RunStats,
    pub wall: Duration,
}

impl ReferenceSolution {
    /// Uses a run on the truncated mesh itself as the reference.
    pub fn from_trajectory(mesh: &Mesh, trajectory: Trajectory) -> Self {
        let arrival = arrival_index(mesh, &trajectory);
        ReferenceSolution {
            trajectory,
            arrival,
            stats: RunStats::default(),
            wall: Duration::ZERO,
        }
    }
}

fn arrival_index(mesh: &Mesh, traj: &Trajectory) -> Option<usize> {
    let nodes = mesh.boundary_nodes(BoundaryTag::Absorbing);
    let peak = traj
        .psi
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return None;
    }
    traj.psi
        .iter()
        .position(|p| nodes.iter().any(|&i| p[i].abs() >= ARRIVAL_FRACTION * peak))
}

/// Runs the enlarged-domain problem with the plain linear condition at 0°
/// on its far boundary, recording snapshots on the nodes of `mesh`.
pub fn run_reference(s: &Scenario, mesh: &Mesh, reference: &Mesh, opts: &RunOptions) -> Result<ReferenceSolution> {
    let map = NodeMap::new(mesh, reference)?;
    let mut integ = build_integrator(s, reference, 0.0, AngleConfig::fixed(0.0))?;
    let mut traj = Trajectory::new(opts.snapshot_stride);
    let start = Instant::now();
    let mut state = integ.initial_state();
    integ.consistent_acceleration(&mut state)?;
    let (_, stats) = integ.run(state, |st, _| {
        if st.step % traj.stride == 0 {
            traj.push(st.step, st.t, map.apply(&st.psi), map.apply(&st.psi_dot));
        }
        Ok(())
    })?;
    let wall = start.elapsed();
    log::info!(
        "reference: {} nodes, {} steps in {:.2?}",
        reference.n_nodes(),
        stats.steps,
        wall
    );
    let arrival = arrival_index(mesh, &traj);
    Ok(ReferenceSolution {
        trajectory: traj,
        arrival,
        stats,
        wall,
    })
}

/// One line of an error report.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorRow {
    pub step: usize,
    pub t: f64,
    pub rel_err_psi: f64,
    pub rel_err_u: f64,
    pub energy: f64,
    pub psi: NormPair,
    pub u: NormPair,
}

/// Snapshot of the angle on one absorbing element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleRow {
    pub step: usize,
    pub t: f64,
    pub element: usize,
    pub centroid: [f64; 3],
    pub theta_deg: f64,
    pub enabled: bool,
}

#[derive(Clone, Debug)]
pub struct VariantReport {
    pub variant: Variant,
    pub rows: Vec<ErrorRow>,
    pub e_psi: f64,
    pub e_u: f64,
    /// Largest per-snapshot relative errors from wave arrival on.
    pub peak_psi: f64,
    pub peak_u: f64,
    pub angles: Vec<AngleRow>,
    pub trajectory: Option<Trajectory>,
    pub stats: RunStats,
    /// Time spent inside the stepping loop, excluding error evaluation.
    pub step_time: Duration,
}

fn relative_guarded(n: &NormPair, scale: f64) -> f64 {
    if n.reference == 0.0 || n.reference < EARLY_GUARD * scale {
        0.0
    } else {
        n.error / n.reference
    }
}

/// Natural magnitudes of ψ and u used by the early-time guard.
fn guard_scales(s: &Scenario) -> (f64, f64) {
    let (amp, f) = match (&s.excitation, &s.source) {
        (Some(e), _) => (e.amplitude.abs(), e.frequency),
        (None, Some(src)) => (src.amplitude.abs(), src.frequency),
        _ => (0.0, 0.0),
    };
    (amp, s.physics.rho() * amp * 2.0 * std::f64::consts::PI * f)
}

/// Runs one ABC variant on `mesh`; with a reference, error rows are filled in.
pub fn run_variant(
    s: &Scenario,
    mesh: &Mesh,
    variant: Variant,
    reference: Option<&ReferenceSolution>,
    opts: &RunOptions,
) -> Result<VariantReport> {
    let cfg = s.angle_config(&variant);
    let mut integ = build_integrator(s, mesh, variant.sigma, cfg)?;
    let stride = reference.map_or(opts.snapshot_stride, |r| r.trajectory.stride);
    let rho = s.physics.rho();
    let (guard_psi, guard_u) = guard_scales(s);

    let mut rows = Vec::new();
    let mut angles = Vec::new();
    let mut traj = (opts.keep_every > 0).then(|| Trajectory::new(stride));
    let mut snapshot = 0usize;
    let mut eval_time = Duration::ZERO;

    let mut record = |st: &State, integ: &Integrator| -> Result<()> {
        if st.step % stride != 0 {
            return Ok(());
        }
        let t0 = Instant::now();
        let energy = energy_diagnostic(&st.psi, &st.psi_dot, integ.mass(), integ.laplacian(), integ.phys());
        let mut row = ErrorRow {
            step: st.step,
            t: st.t,
            energy,
            ..Default::default()
        };
        if let Some(r) = reference {
            let rt = &r.trajectory;
            let k = snapshot;
            if k >= rt.len() || rt.steps[k] != st.step {
                return Err(crate::Error::Config(format!(
                    "reference has no snapshot for step {}",
                    st.step
                )));
            }
            row.psi = l2_norms(&st.psi, &rt.psi[k], integ.mass())?;
            let u = pressure_field(&st.psi_dot, rho);
            let u_ref = pressure_field(&rt.psi_dot[k], rho);
            row.u = l2_norms(&u, &u_ref, integ.mass())?;
            row.rel_err_psi = relative_guarded(&row.psi, guard_psi);
            row.rel_err_u = relative_guarded(&row.u, guard_u);
        }
        rows.push(row);
        if opts.angle_every > 0 && snapshot % opts.angle_every == 0 {
            let b = integ.boundary();
            for (slot, &e) in b.elements().iter().enumerate() {
                angles.push(AngleRow {
                    step: st.step,
                    t: st.t,
                    element: e,
                    centroid: integ.mesh().element_centroid(e),
                    theta_deg: st.angles.theta[slot],
                    enabled: st.angles.enabled[slot],
                });
            }
        }
        if let Some(tr) = traj.as_mut().filter(|_| snapshot % opts.keep_every == 0) {
            tr.push(st.step, st.t, st.psi.clone(), st.psi_dot.clone());
        }
        snapshot += 1;
        eval_time += t0.elapsed();
        Ok(())
    };

    let start = Instant::now();
    let mut state = integ.initial_state();
    integ.consistent_acceleration(&mut state)?;
    let (_, stats) = integ.run(state, &mut record)?;
    let step_time = start.elapsed().saturating_sub(eval_time);
    log::info!("{variant}: {} steps, stepping took {:.2?}", stats.steps, step_time);

    let (mut e_psi, mut e_u, mut peak_psi, mut peak_u) = (0.0, 0.0, 0.0, 0.0);
    if let Some(r) = reference {
        let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
        let np: Vec<NormPair> = rows.iter().map(|r| r.psi).collect();
        let nu: Vec<NormPair> = rows.iter().map(|r| r.u).collect();
        e_psi = space_time_from_norms(&times, &np)?;
        e_u = space_time_from_norms(&times, &nu)?;
        let from = r.arrival.unwrap_or(rows.len());
        for row in rows.iter().skip(from) {
            peak_psi = f64::max(peak_psi, row.rel_err_psi);
            peak_u = f64::max(peak_u, row.rel_err_u);
        }
    }
    Ok(VariantReport {
        variant,
        rows,
        e_psi,
        e_u,
        peak_psi,
        peak_u,
        angles,
        trajectory: traj,
        stats,
        step_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(tilt: f64) -> Scenario {
        let text = format!(
            r#"
[mesh]
kind = "channel"
width = 0.004
length = 0.004
tilt_deg = {tilt}
h = 0.0004
[reference]
kind = "channel"
[physics]
c = 1500.0
b = 6e-9
rho = 1000.0
b_over_a = 5.0
[excitation]
amplitude = 0.01
frequency = 210e3
[time]
steps_per_period = 50
n_steps = 120
[output]
snapshot_stride = 2
"#
        );
        Scenario::from_toml(&text, ".").unwrap()
    }

    #[test]
    fn reference_against_itself_is_exact() {
        let s = small(0.0);
        let mesh = s.build_mesh().unwrap();
        let opts = RunOptions::from_scenario(&s);
        let base = run_variant(&s, &mesh, Variant::fixed(0.0, 0.0), None, &opts).unwrap();
        assert!(base.rows.iter().all(|r| r.rel_err_psi == 0.0));
        let mut o = opts;
        o.keep_every = 1;
        let again = run_variant(&s, &mesh, Variant::fixed(0.0, 0.0), None, &o).unwrap();
        let r = ReferenceSolution::from_trajectory(&mesh, again.trajectory.unwrap());
        let cmp = run_variant(&s, &mesh, Variant::fixed(0.0, 0.0), Some(&r), &opts).unwrap();
        assert_eq!(cmp.e_psi, 0.0);
        assert_eq!(cmp.e_u, 0.0);
        assert_eq!(cmp.rows.len(), 61);
    }

    #[test]
    fn truncation_error_is_small_but_nonzero() {
        let s = small(20.0);
        let mesh = s.build_mesh().unwrap();
        let refm = s.build_reference_mesh().unwrap().unwrap();
        let opts = RunOptions::from_scenario(&s);
        let r = run_reference(&s, &mesh, &refm, &opts).unwrap();
        assert!(r.arrival.is_some());
        let rep = run_variant(&s, &mesh, "1/2:adaptive".parse().unwrap(), Some(&r), &opts).unwrap();
        assert!(rep.e_psi > 0.0 && rep.e_psi < 0.5, "{}", rep.e_psi);
        assert!(rep.rows.iter().all(|r| r.rel_err_psi >= 0.0 && r.rel_err_u >= 0.0));
        assert!(!rep.angles.is_empty());
    }

    #[test]
    fn sign_flip_leaves_errors_unchanged() {
        let s = small(20.0);
        let mesh = s.build_mesh().unwrap();
        let refm = s.build_reference_mesh().unwrap().unwrap();
        let opts = RunOptions::from_scenario(&s);
        let r = run_reference(&s, &mesh, &refm, &opts).unwrap();
        let mut o = opts;
        o.keep_every = 1;
        let rep = run_variant(&s, &mesh, Variant::fixed(0.5, 0.0), Some(&r), &o).unwrap();
        let tr = rep.trajectory.unwrap();
        let m = crate::fem::assemble_mass(&mesh);
        let neg = |v: &Vec<f64>| v.iter().map(|x| -x).collect::<Vec<_>>();
        for k in 0..tr.len() {
            let a = l2_norms(&tr.psi[k], &r.trajectory.psi[k], &m).unwrap();
            let b = l2_norms(&neg(&tr.psi[k]), &neg(&r.trajectory.psi[k]), &m).unwrap();
            assert_eq!(a, b);
        }
    }
}
