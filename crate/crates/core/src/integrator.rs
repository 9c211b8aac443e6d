//! Generalized-α time stepping with a fixed-point loop for the quasilinear
//! bulk term and the nonlinear absorbing boundary.

use log::{debug, trace};

use crate::abc::{update_angles, AbsorbingBoundary, AngleConfig, AngleField};
use crate::fem::{
    abc_vector_into, assemble_laplacian, assemble_mass, tensor_action_into, AbcMatrix, CsrMatrix,
    DofPartition, PhysParams, Restriction, TensorMatrix,
};
use crate::mesh::Mesh;
use crate::solver::{solve_spd_into, SolveOptions};
use crate::{Error, Result};

/// Generalized-α and Newmark constants derived from the spectral radius ρ∞.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenAlpha {
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// α_m = (2ρ∞−1)/(1+ρ∞), α_f = ρ∞/(1+ρ∞), β = 1/(1+ρ∞)², γ = ½(3−ρ∞)/(1+ρ∞).
pub fn scheme_params(rho_inf: f64) -> Result<GenAlpha> {
    if !(0.0..=1.0).contains(&rho_inf) {
        return Err(Error::Config(format!("rho_inf = {rho_inf} outside [0, 1]")));
    }
    let r1 = 1.0 + rho_inf;
    Ok(GenAlpha {
        alpha_m: (2.0 * rho_inf - 1.0) / r1,
        alpha_f: rho_inf / r1,
        beta: 1.0 / (r1 * r1),
        gamma: 0.5 * (3.0 - rho_inf) / r1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeParams {
    rho_inf: f64,
    coeffs: GenAlpha,
    pub dt: f64,
    pub n_steps: usize,
    pub tol: f64,
    pub kappa_max: usize,
}

impl SchemeParams {
    pub const DEFAULT_TOL: f64 = 1e-6;
    pub const DEFAULT_KAPPA_MAX: usize = 100;

    pub fn new(rho_inf: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("time step {dt} must be positive")));
        }
        Ok(SchemeParams {
            rho_inf,
            coeffs: scheme_params(rho_inf)?,
            dt,
            n_steps,
            tol: Self::DEFAULT_TOL,
            kappa_max: Self::DEFAULT_KAPPA_MAX,
        })
    }

    pub fn rho_inf(&self) -> f64 {
        self.rho_inf
    }

    pub fn alpha_m(&self) -> f64 {
        self.coeffs.alpha_m
    }

    pub fn alpha_f(&self) -> f64 {
        self.coeffs.alpha_f
    }

    pub fn beta(&self) -> f64 {
        self.coeffs.beta
    }

    pub fn gamma(&self) -> f64 {
        self.coeffs.gamma
    }

    pub fn end_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub psi: Vec<f64>,
    pub psi_dot: Vec<f64>,
    pub psi_ddot: Vec<f64>,
    /// ψ one step earlier, needed by the angle update.
    pub psi_prev: Vec<f64>,
    pub t: f64,
    pub step: usize,
    pub angles: AngleField,
}

impl State {
    /// Quiescent medium at t = 0.
    pub fn zero(n_nodes: usize, n_boundary: usize) -> Self {
        State {
            psi: vec![0.0; n_nodes],
            psi_dot: vec![0.0; n_nodes],
            psi_ddot: vec![0.0; n_nodes],
            psi_prev: vec![0.0; n_nodes],
            t: 0.0,
            step: 0,
            angles: AngleField::new(n_boundary),
        }
    }
}

/// Newmark predictors for a given new acceleration.
pub fn newmark_update(
    psi: &[f64],
    psi_dot: &[f64],
    psi_ddot: &[f64],
    psi_ddot_new: &[f64],
    dt: f64,
    beta: f64,
    gamma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = psi.len();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    newmark_into(psi, psi_dot, psi_ddot, psi_ddot_new, dt, beta, gamma, &mut p, &mut v);
    (p, v)
}

#[allow(clippy::too_many_arguments)]
fn newmark_into(
    psi: &[f64],
    psi_dot: &[f64],
    psi_ddot: &[f64],
    a: &[f64],
    dt: f64,
    beta: f64,
    gamma: f64,
    p_out: &mut [f64],
    v_out: &mut [f64],
) {
    let dt2 = dt * dt;
    for i in 0..psi.len() {
        p_out[i] = psi[i] + dt * psi_dot[i] + dt2 * ((0.5 - beta) * psi_ddot[i] + beta * a[i]);
        v_out[i] = psi_dot[i] + dt * ((1.0 - gamma) * psi_ddot[i] + gamma * a[i]);
    }
}

/// Dirichlet trace g(t) with its first two time derivatives, the same on all
/// excitation nodes.
pub type Excitation = Box<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>;
/// Volumetric source f(x, t).
pub type Source = Box<dyn Fn(&[f64; 3], f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub fixed_point_iterations: usize,
    pub solver_iterations: usize,
}

/// Assembled operators and scratch space for stepping one problem.
pub struct Integrator<'m> {
    mesh: &'m Mesh,
    phys: PhysParams,
    scheme: SchemeParams,
    sigma: f64,
    angle_cfg: AngleConfig,
    excitation: Option<Excitation>,
    source: Option<Source>,
    solve_opts: SolveOptions,
    mass: CsrMatrix,
    laplacian: CsrMatrix,
    base: CsrMatrix,
    work: CsrMatrix,
    reduced: CsrMatrix,
    tensor: TensorMatrix,
    abc_matrix: AbcMatrix,
    boundary: AbsorbingBoundary,
    partition: DofPartition,
    restriction: Restriction,
}

impl<'m> Integrator<'m> {
    pub fn new(
        mesh: &'m Mesh,
        phys: PhysParams,
        scheme: SchemeParams,
        sigma: f64,
        angle_cfg: AngleConfig,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::Config(format!("sigma = {sigma} outside [0, 1]")));
        }
        angle_cfg.validate()?;
        let mass = assemble_mass(mesh);
        let laplacian = assemble_laplacian(mesh);
        let boundary = AbsorbingBoundary::new(mesh);
        let partition = DofPartition::new(mesh);
        let tensor = TensorMatrix::new(mesh, &mass);
        let abc_matrix = AbcMatrix::new(mesh, &boundary, &mass);
        let restriction = Restriction::new(&mass, partition.interior());
        let (dt, a) = (scheme.dt, scheme.coeffs);
        let c_damp = (1.0 - a.alpha_f) * a.gamma * dt;
        let c_stiff = (1.0 - a.alpha_f) * a.beta * dt * dt;
        let mut base = mass.zeros_like();
        base.set_linear_combination(
            1.0 - a.alpha_m,
            &mass,
            c_damp * phys.b() + c_stiff * phys.c() * phys.c(),
            &laplacian,
        );
        let work = base.clone();
        let reduced = restriction.restrict_matrix(&base);
        Ok(Integrator {
            mesh,
            phys,
            scheme,
            sigma,
            angle_cfg,
            excitation: None,
            source: None,
            solve_opts: SolveOptions::default(),
            mass,
            laplacian,
            base,
            work,
            reduced,
            tensor,
            abc_matrix,
            boundary,
            partition,
            restriction,
        })
    }

    pub fn with_excitation(mut self, g: Excitation) -> Self {
        self.excitation = Some(g);
        self
    }

    pub fn with_source(mut self, f: Source) -> Self {
        self.source = Some(f);
        self
    }

    pub fn with_solve_options(mut self, opts: SolveOptions) -> Self {
        self.solve_opts = opts;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    pub fn boundary(&self) -> &AbsorbingBoundary {
        &self.boundary
    }

    pub fn partition(&self) -> &DofPartition {
        &self.partition
    }

    pub fn scheme(&self) -> &SchemeParams {
        &self.scheme
    }

    pub fn phys(&self) -> &PhysParams {
        &self.phys
    }

    /// Zero initial data, with the angle field sized for this mesh.
    pub fn initial_state(&self) -> State {
        let mut s = State::zero(self.mesh.n_nodes(), self.boundary.len());
        if !self.angle_cfg.adaptive {
            s.angles = AngleField::uniform(self.boundary.len(), self.angle_cfg.fixed_theta);
        }
        s
    }

    fn dirichlet(&self, t: f64) -> (f64, f64, f64) {
        self.excitation.as_ref().map_or((0.0, 0.0, 0.0), |g| g(t))
    }

    fn source_load(&self, t: f64) -> Option<Vec<f64>> {
        self.source.as_ref().map(|f| {
            let nodal: Vec<f64> = self.mesh.nodes().iter().map(|x| f(x, t)).collect();
            self.mass.apply(&nodal)
        })
    }

    /// Residual of the semi-discrete system at given (ψ̈, ψ̇, ψ), interior rows
    /// only; Dirichlet rows are zeroed.
    #[allow(clippy::too_many_arguments)]
    fn residual(
        &self,
        acc: &[f64],
        vel: &[f64],
        pos: &[f64],
        angles: &AngleField,
        load: Option<&[f64]>,
        scratch: &mut [f64],
        out: &mut [f64],
    ) -> Result<()> {
        let (b, c2) = (self.phys.b(), self.phys.c() * self.phys.c());
        self.mass.mul_vec(acc, out);
        for i in 0..scratch.len() {
            scratch[i] = b * vel[i] + c2 * pos[i];
        }
        let mut lap = vec![0.0; out.len()];
        self.laplacian.mul_vec(scratch, &mut lap);
        for (o, l) in out.iter_mut().zip(&lap) {
            *o += l;
        }
        let k = self.phys.k();
        if k != 0.0 {
            let mut t = vec![0.0; out.len()];
            tensor_action_into(self.mesh, acc, vel, k, &mut t);
            out.iter_mut().zip(&t).for_each(|(o, t)| *o -= t);
        }
        abc_vector_into(self.mesh, &self.boundary, vel, angles, self.sigma, &self.phys, 1.0, out)?;
        if let Some(f) = load {
            out.iter_mut().zip(f).for_each(|(o, f)| *o -= f);
        }
        for &d in self.partition.dirichlet() {
            out[d] = 0.0;
        }
        Ok(())
    }

    /// Acceleration consistent with the equation at the state's time, for
    /// states set up with nonzero initial data.
    pub fn consistent_acceleration(&mut self, state: &mut State) -> Result<()> {
        let n = self.mesh.n_nodes();
        let (_, _, gdd) = self.dirichlet(state.t);
        let mut acc = vec![0.0; n];
        for &d in self.partition.dirichlet() {
            acc[d] = gdd;
        }
        let load = self.source_load(state.t);
        let mut r = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        self.residual(&acc, &state.psi_dot, &state.psi, &state.angles, load.as_deref(), &mut scratch, &mut r)?;
        self.work.set_linear_combination(1.0, &self.mass, 0.0, &self.laplacian);
        self.tensor.add_to(self.mesh, &state.psi_dot, self.phys.k(), -1.0, &mut self.work);
        self.restriction.restrict_into(&self.work, &mut self.reduced);
        let rhs: Vec<f64> = self.restriction.restrict_vec(&r).iter().map(|v| -v).collect();
        let mut delta = vec![0.0; rhs.len()];
        solve_spd_into(&self.reduced, &rhs, &mut delta, &self.solve_opts)?;
        for (&i, dv) in self.partition.interior().iter().zip(&delta) {
            acc[i] += dv;
        }
        state.psi_ddot = acc;
        Ok(())
    }

    /// Advances one step.
    pub fn step(&mut self, state: &State) -> Result<(State, StepStats)> {
        self.step_inner(state).map_err(|e| Error::AtStep {
            step: state.step + 1,
            t: state.t + self.scheme.dt,
            source: Box::new(e),
        })
    }

    fn step_inner(&mut self, state: &State) -> Result<(State, StepStats)> {
        let n = self.mesh.n_nodes();
        let GenAlpha {
            alpha_m,
            alpha_f,
            beta,
            gamma,
        } = self.scheme.coeffs;
        let dt = self.scheme.dt;
        let angles = update_angles(
            self.mesh,
            &self.boundary,
            &state.psi,
            &state.psi_prev,
            &state.angles,
            &self.angle_cfg,
        )?;
        let t_new = state.t + dt;
        let t_f = t_new - alpha_f * dt;
        let (g, gd, gdd) = self.dirichlet(t_new);
        let load = self.source_load(t_f);

        let mut a = state.psi_ddot.clone();
        for &d in self.partition.dirichlet() {
            a[d] = gdd;
        }
        let (mut p_new, mut v_new) = (vec![0.0; n], vec![0.0; n]);
        let (mut acc_m, mut vel_f, mut pos_f) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut r = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        let n_int = self.partition.interior().len();
        let mut rhs = vec![0.0; n_int];
        let mut delta = vec![0.0; n_int];
        let c1 = 1.0 - alpha_m;
        let c_damp = (1.0 - alpha_f) * gamma * dt;
        let k = self.phys.k();
        let mut stats = StepStats::default();
        let mut converged = false;
        let mut last_change = f64::INFINITY;

        for kappa in 1..=self.scheme.kappa_max {
            newmark_into(
                &state.psi,
                &state.psi_dot,
                &state.psi_ddot,
                &a,
                dt,
                beta,
                gamma,
                &mut p_new,
                &mut v_new,
            );
            for &d in self.partition.dirichlet() {
                p_new[d] = g;
                v_new[d] = gd;
            }
            for i in 0..n {
                acc_m[i] = c1 * a[i] + alpha_m * state.psi_ddot[i];
                vel_f[i] = (1.0 - alpha_f) * v_new[i] + alpha_f * state.psi_dot[i];
                pos_f[i] = (1.0 - alpha_f) * p_new[i] + alpha_f * state.psi[i];
            }
            self.residual(&acc_m, &vel_f, &pos_f, &angles, load.as_deref(), &mut scratch, &mut r)?;

            self.work.values_mut().copy_from_slice(self.base.values());
            self.tensor.add_to(self.mesh, &vel_f, k, -c1, &mut self.work);
            self.abc_matrix.add_to(
                self.mesh,
                &self.boundary,
                &vel_f,
                &angles,
                self.sigma,
                &self.phys,
                c_damp,
                &mut self.work,
            )?;
            self.restriction.restrict_into(&self.work, &mut self.reduced);
            for (rh, &i) in rhs.iter_mut().zip(self.partition.interior()) {
                *rh = -r[i];
            }
            delta.iter_mut().for_each(|d| *d = 0.0);
            let s = solve_spd_into(&self.reduced, &rhs, &mut delta, &self.solve_opts)?;
            stats.solver_iterations += s.iterations;
            stats.fixed_point_iterations = kappa;

            let mut dn = 0.0;
            let mut an = 0.0;
            for (&i, dv) in self.partition.interior().iter().zip(&delta) {
                a[i] += dv;
                dn += dv * dv;
                an += a[i] * a[i];
            }
            last_change = dn.sqrt() / an.sqrt().max(1e-30);
            trace!("step {} pass {kappa}: increment {last_change:e}", state.step + 1);
            if last_change < self.scheme.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::FixedPointDivergence {
                step: state.step + 1,
                iterations: self.scheme.kappa_max,
                increment: last_change,
            });
        }
        newmark_into(
            &state.psi,
            &state.psi_dot,
            &state.psi_ddot,
            &a,
            dt,
            beta,
            gamma,
            &mut p_new,
            &mut v_new,
        );
        for &d in self.partition.dirichlet() {
            p_new[d] = g;
            v_new[d] = gd;
        }
        debug!(
            "step {}: {} fixed-point passes, {} solver iterations",
            state.step + 1,
            stats.fixed_point_iterations,
            stats.solver_iterations
        );
        Ok((
            State {
                psi: p_new,
                psi_dot: v_new,
                psi_ddot: a,
                psi_prev: state.psi.clone(),
                t: t_new,
                step: state.step + 1,
                angles,
            },
            stats,
        ))
    }

    /// Runs `n_steps` steps from `state`, calling `observe` on the initial and
    /// every subsequent state.
    pub fn run<F>(&mut self, mut state: State, mut observe: F) -> Result<(State, RunStats)>
    where
        F: FnMut(&State, &Self) -> Result<()>,
    {
        observe(&state, self)?;
        let mut stats = RunStats::default();
        for _ in 0..self.scheme.n_steps {
            let (next, s) = self.step(&state)?;
            stats.record(s);
            state = next;
            observe(&state, self)?;
        }
        Ok((state, stats))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub max_fixed_point_iterations: usize,
    pub total_fixed_point_iterations: usize,
    pub total_solver_iterations: usize,
}

impl RunStats {
    fn record(&mut self, s: StepStats) {
        self.steps += 1;
        self.max_fixed_point_iterations = self.max_fixed_point_iterations.max(s.fixed_point_iterations);
        self.total_fixed_point_iterations += s.fixed_point_iterations;
        self.total_solver_iterations += s.solver_iterations;
    }
}

/// Strided snapshots of ψ and ψ̇.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub stride: usize,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
    pub psi_dot: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(stride: usize) -> Self {
        Trajectory {
            stride: stride.max(1),
            ..Default::default()
        }
    }

    /// Keeps the state if its step is a multiple of the stride.
    pub fn record(&mut self, state: &State) {
        if state.step % self.stride == 0 {
            self.push(state.step, state.t, state.psi.clone(), state.psi_dot.clone());
        }
    }

    pub fn push(&mut self, step: usize, t: f64, psi: Vec<f64>, psi_dot: Vec<f64>) {
        self.steps.push(step);
        self.times.push(t);
        self.psi.push(psi);
        self.psi_dot.push(psi_dot);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}
