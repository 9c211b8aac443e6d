use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use westervelt::mesh::{BoundaryTag, Mesh};
use westervelt::scenario::{
    angle_csv, compare, error_csv, pressure_field, read_error_csv, run_reference, run_variant, vtk_string,
    ReferenceSolution, RunOptions, Scenario, Variant, VariantReport,
};

#[derive(Parser)]
#[command(name = "westervelt", version, about = "Nonlinear acoustics with self-adaptive absorbing boundaries")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario: reference, then each ABC variant, with error reports.
    Run(RunArgs),
    /// Compare two error CSVs and print the improvement of the second over the first.
    Compare {
        base: PathBuf,
        new: PathBuf,
    },
    /// Run one variant without a reference and dump the angle field as CSV.
    Angles(AnglesArgs),
    /// Print mesh statistics for a scenario.
    MeshInfo {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `<sigma>:<adaptive|degrees>`, e.g. `1/2:adaptive` or `0:0`. Defaults to the scenario's [abc].
    #[arg(long = "variant")]
    variants: Vec<Variant>,
    /// Worker threads for running variants side by side.
    #[arg(long, env = "WESTERVELT_THREADS", default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Skip the reference run even if the scenario defines one.
    #[arg(long)]
    no_reference: bool,
}

#[derive(Args)]
struct AnglesArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Compare { base, new } => cmd_compare(&base, &new),
        Cmd::Angles(a) => cmd_angles(a),
        Cmd::MeshInfo { scenario } => cmd_mesh_info(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input, 3 for numerical failure, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<westervelt::Error>()) {
        Some(w) if w.is_numerical() => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn load(path: &Path, stride: Option<usize>) -> Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(k) = stride {
        if k == 0 {
            return Err(westervelt::Error::Config("--snapshot-stride must be at least 1".into()).into());
        }
        s.output.snapshot_stride = k;
    }
    Ok(s)
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let s = load(&a.scenario, a.snapshot_stride)?;
    let variants = if a.variants.is_empty() {
        vec![Variant::from_abc(&s.abc)?]
    } else {
        a.variants.clone()
    };
    let mut labels: Vec<String> = variants.iter().map(Variant::label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != variants.len() {
        bail!(westervelt::Error::Config("duplicate --variant".into()));
    }
    let mesh = s.build_mesh()?;
    let reference_mesh = if a.no_reference { None } else { s.build_reference_mesh()? };
    let opts = RunOptions::from_scenario(&s);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.max(1))
        .build()
        .context("building thread pool")?;

    let (reference, reports) = pool.install(|| -> Result<_> {
        let reference = reference_mesh
            .as_ref()
            .map(|rm| run_reference(&s, &mesh, rm, &opts))
            .transpose()?;
        let reports: Vec<VariantReport> = variants
            .par_iter()
            .map(|&v| run_variant(&s, &mesh, v, reference.as_ref(), &opts))
            .collect::<westervelt::Result<_>>()?;
        Ok((reference, reports))
    })?;

    write_outputs(&a.out, &s, &mesh, reference.as_ref(), &reports)?;
    println!("{:<28} {:>12} {:>12} {:>12} {:>12} {:>10}", "variant", "e_psi", "e_u", "peak_psi", "peak_u", "step time");
    for r in &reports {
        println!(
            "{:<28} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.2}s",
            r.variant.to_string(),
            r.e_psi,
            r.e_u,
            r.peak_psi,
            r.peak_u,
            r.step_time.as_secs_f64()
        );
    }
    Ok(())
}

/// Writes everything into a scratch directory next to `out`, then swaps it in.
fn write_outputs(
    out: &Path,
    s: &Scenario,
    mesh: &Mesh,
    reference: Option<&ReferenceSolution>,
    reports: &[VariantReport],
) -> Result<()> {
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    let name = out.file_name().context("--out needs a directory name")?.to_string_lossy();
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    let write = |p: PathBuf, text: String| fs::write(&p, text).with_context(|| format!("writing {}", p.display()));
    fs::create_dir_all(&tmp)?;

    let mut summary = String::from("variant,e_psi,e_u,peak_psi,peak_u,steps,max_fixed_point_iterations\n");
    for r in reports {
        let dir = tmp.join(r.variant.label());
        fs::create_dir_all(&dir)?;
        write(dir.join("errors.csv"), error_csv(&r.rows))?;
        write(dir.join("angles.csv"), angle_csv(&r.angles))?;
        if let Some(tr) = &r.trajectory {
            let vdir = dir.join("vtk");
            fs::create_dir_all(&vdir)?;
            for k in 0..tr.len() {
                let u = pressure_field(&tr.psi_dot[k], s.physics.rho());
                let title = format!("{} {} step {} t={:e}", s.name, r.variant, tr.steps[k], tr.times[k]);
                let text = vtk_string(mesh, &title, &[("psi", &tr.psi[k]), ("u", &u)])?;
                write(vdir.join(format!("step_{:06}.vtk", tr.steps[k])), text)?;
            }
        }
        summary.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            r.variant,
            r.e_psi,
            r.e_u,
            r.peak_psi,
            r.peak_u,
            r.stats.steps,
            r.stats.max_fixed_point_iterations
        ));
    }
    write(tmp.join("summary.csv"), summary)?;
    if let Some(r) = reference {
        let arrival = r.arrival.map(|k| r.trajectory.steps[k].to_string()).unwrap_or_default();
        write(tmp.join("reference.csv"), format!("snapshots,arrival_step\n{},{}\n", r.trajectory.len(), arrival))?;
    }

    if out.exists() {
        fs::remove_dir_all(out).with_context(|| format!("replacing {}", out.display()))?;
    }
    fs::rename(&tmp, out).with_context(|| format!("moving results to {}", out.display()))?;
    log::info!("results in {}", out.display());
    Ok(())
}

fn cmd_compare(base: &Path, new: &Path) -> Result<()> {
    let b = read_error_csv(base)?;
    let n = read_error_csv(new)?;
    let c = compare(&b, &n)?;
    println!("{:<10} {:>14} {:>14}", "", "e_psi", "e_u");
    println!("{:<10} {:>14.6e} {:>14.6e}", "base", c.base.0, c.base.1);
    println!("{:<10} {:>14.6e} {:>14.6e}", "new", c.new.0, c.new.1);
    println!(
        "improvement: {:.2} % in psi, {:.2} % in u",
        100.0 * c.improvement_psi,
        100.0 * c.improvement_u
    );
    Ok(())
}

fn cmd_angles(a: AnglesArgs) -> Result<()> {
    let s = load(&a.scenario, a.snapshot_stride)?;
    let v = match a.variant {
        Some(v) => v,
        None => Variant::from_abc(&s.abc)?,
    };
    let mesh = s.build_mesh()?;
    let mut opts = RunOptions::from_scenario(&s);
    opts.keep_every = 0;
    let r = run_variant(&s, &mesh, v, None, &opts)?;
    let text = angle_csv(&r.angles);
    match a.out {
        Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn describe(label: &str, m: &Mesh) {
    let (mut hmin, mut hmax) = (f64::INFINITY, 0.0f64);
    for e in 0..m.n_elements() {
        let el = m.element(e);
        for (i, &a) in el.iter().enumerate() {
            for &b in &el[i + 1..] {
                let (p, q) = (m.node(a), m.node(b));
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                hmin = hmin.min(d);
                hmax = hmax.max(d);
            }
        }
    }
    println!("{label}:");
    println!("  dimension      {}", m.dim());
    println!("  nodes          {}", m.n_nodes());
    println!("  elements       {}", m.n_elements());
    println!("  measure        {:.6e}", m.total_measure());
    println!("  edge length    {hmin:.3e} .. {hmax:.3e}");
    for (name, tag) in [
        ("excitation", BoundaryTag::Excitation),
        ("absorbing", BoundaryTag::Absorbing),
        ("neumann", BoundaryTag::Neumann),
    ] {
        println!(
            "  {name:<14} {} facets, {} nodes",
            m.facets_with_tag(tag).count(),
            m.boundary_nodes(tag).len()
        );
    }
}

fn cmd_mesh_info(path: &Path) -> Result<()> {
    let s = load(path, None)?;
    describe("mesh", &s.build_mesh()?);
    if let Some(r) = s.build_reference_mesh()? {
        describe("reference", &r);
    }
    Ok(())
}
