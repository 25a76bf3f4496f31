//! The implicit time-stepping scheme.
//!
//! Step `j` solves
//! `(M / tau^2 + K_C + g_0 K_B) u_j = M (2 u_{j-1} - u_{j-2}) / tau^2
//!     + g_0 K_B u_0 - K_B sum_{k<j} tau dg_{j-k} (u_k - u_0) + F_j + N_j`
//! on the admissible space of step `j`, with the Dirichlet datum lifted by
//! its nodal interpolant.

mod checkpoint;
mod residual;
mod trajectory;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use residual::{default_test_family, generalized_residual, ResidualReport, TestFunction};
pub use trajectory::DiscreteTrajectory;

use crate::assembly::{
    dirichlet_samples, load_vector, neumann_vector, AssemblyOrder, DirichletSamples,
    InitialDisplacement, Operators,
};
use crate::domain::{space_at, ConstrainedSpace};
use crate::error::{Error, Result};
use crate::kernel::{sample_grid, KernelSamples};
use crate::linalg::{combine, matvec, quad, restrict, LinearSolver, SpdSolver};
use crate::problem::Problem;

/// How the memory sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum HistoryMode {
    /// Exact sum over all stored states, `O(n)` work per step.
    Full,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SolverConfig {
    pub n: usize,
    pub linear: LinearSolver,
    pub history: HistoryMode,
    /// Sequential, fixed-order reductions in the memory sum.
    pub deterministic: bool,
    pub order: AssemblyOrder,
}

impl SolverConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            linear: LinearSolver::Direct,
            history: HistoryMode::Full,
            deterministic: true,
            order: AssemblyOrder::Natural,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("step count must be at least 1".into()));
        }
        if let LinearSolver::Cg { tol, max_iter } = self.linear {
            if !(tol > 0.0 && tol < 1.0) || max_iter == 0 {
                return Err(Error::Domain(format!(
                    "iterative solver needs 0 < tol < 1 and max_iter > 0, got {tol}, {max_iter}"
                )));
            }
        }
        Ok(())
    }
}

/// Grid samples of the data.
#[derive(Debug, Clone)]
pub struct TimeData {
    pub dirichlet: DirichletSamples,
    /// `(f_j, v)` for `j = 0..n`; entry 0 is unused and zero.
    pub loads: Vec<DVector<f64>>,
    /// `(N(j tau), v)_N` for `j = 0..n`.
    pub tractions: Vec<DVector<f64>>,
}

/// Everything the scheme needs on a fixed grid.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub problem: Problem,
    pub n: usize,
    pub tau: f64,
    pub ops: Operators,
    pub samples: KernelSamples,
    pub time: TimeData,
    pub u0: DVector<f64>,
    pub u1: DVector<f64>,
    pub spaces: Vec<ConstrainedSpace>,
}

impl Discretization {
    pub fn new(problem: &Problem, n: usize, order: AssemblyOrder) -> Result<Self> {
        let samples = sample_grid(&problem.kernel, n, problem.t_final)?;
        Self::with_samples(problem, samples, n, order)
    }

    pub fn with_samples(
        problem: &Problem,
        samples: KernelSamples,
        n: usize,
        order: AssemblyOrder,
    ) -> Result<Self> {
        let tau = problem.t_final / n as f64;
        if samples.n != n || (samples.tau - tau).abs() > 1e-14 * tau {
            return Err(Error::GridMismatch(format!(
                "kernel sampled with n = {}, tau = {}; scheme uses n = {n}, tau = {tau}",
                samples.n, samples.tau
            )));
        }
        if !samples.visc.approx_eq(&problem.material.viscous, 1e-14) {
            return Err(Error::GridMismatch(
                "kernel samples carry a different viscosity tensor".into(),
            ));
        }
        let mesh = &problem.mesh;
        let data = &problem.data;
        let ops = Operators::assemble(mesh, &problem.material, order)?;
        let dirichlet = dirichlet_samples(data, mesh, n, problem.t_final);
        let mut loads = vec![DVector::zeros(mesh.n_dofs())];
        loads.extend((1..=n).map(|j| load_vector(data, mesh, &ops.mass, j, tau)));
        let tractions = (0..=n)
            .map(|j| neumann_vector(data, mesh, &ops.neumann_mass, j, tau))
            .collect();
        let spaces: Vec<ConstrainedSpace> = (0..=n)
            .map(|j| space_at(mesh, &problem.schedule, j, tau))
            .collect();
        let u0 = match &data.u0 {
            InitialDisplacement::Field(f) => f.nodal(mesh, 0.0),
            InitialDisplacement::Elastostatic => {
                elastostatic(problem, &ops, &spaces[0], &dirichlet.z[0])?
            }
        };
        let gap = &u0 - &dirichlet.z[0];
        let scale = u0.amax().max(dirichlet.z[0].amax()).max(1.0);
        if spaces[0]
            .dirichlet_dofs
            .iter()
            .any(|&d| gap[d].abs() > 1e-12 * scale)
        {
            return Err(Error::Precondition(
                "initial displacement does not match the Dirichlet datum at t = 0".into(),
            ));
        }
        let u1 = data.u1.nodal(mesh, 0.0);
        Ok(Self {
            problem: problem.clone(),
            n,
            tau,
            ops,
            samples,
            time: TimeData {
                dirichlet,
                loads,
                tractions,
            },
            u0,
            u1,
            spaces,
        })
    }

    /// `M / tau^2 + K_C + g_0 K_B` on all dofs.
    pub fn system_matrix(&self) -> CsrMatrix<f64> {
        let t2 = 1.0 / (self.tau * self.tau);
        combine(&[
            (t2, &self.ops.mass),
            (1.0, &self.ops.stiff_elastic),
            (self.samples.values[0], &self.ops.stiff_viscous),
        ])
    }

    /// `F_j + N_j`
    pub fn forcing(&self, j: usize) -> DVector<f64> {
        &self.time.loads[j] + &self.time.tractions[j]
    }
}

/// Equilibrium of the elastic operator with the data at `t = 0`.
fn elastostatic(
    problem: &Problem,
    ops: &Operators,
    space: &ConstrainedSpace,
    z0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mesh = &problem.mesh;
    let data = &problem.data;
    let f0 = matvec(&ops.mass, &data.body_force.nodal(mesh, 0.0));
    let n0 = matvec(&ops.neumann_mass, &data.traction.nodal(mesh, 0.0));
    let rhs = f0 + n0 - matvec(&ops.stiff_elastic, z0);
    let k = restrict(&ops.stiff_elastic, space);
    let solver = SpdSolver::new(k, LinearSolver::Direct).map_err(|e| {
        Error::Precondition(format!(
            "elastostatic initial state is not unique ({e}); add a Dirichlet boundary"
        ))
    })?;
    let (w, _) = solver
        .solve(&space.reduce(&rhs))
        .map_err(|reason| Error::Solve { step: 0, reason })?;
    Ok(z0 + space.expand(&w))
}

/// `sum_k c_k (u_k - u_0)` over `k = 1..j-1` with `c_k = tau dg_{j-k}`.
pub(crate) fn memory_sum(
    u: &[DVector<f64>],
    samples: &KernelSamples,
    j: usize,
    deterministic: bool,
) -> DVector<f64> {
    let tau = samples.tau;
    let n = u[0].len();
    let term = |k: usize| (&u[k] - &u[0]) * (tau * samples.first_diffs[j - k]);
    if deterministic || j < 64 {
        let mut s = DVector::zeros(n);
        for k in 1..j {
            s.axpy(tau * samples.first_diffs[j - k], &u[k], 1.0);
            s.axpy(-tau * samples.first_diffs[j - k], &u[0], 1.0);
        }
        s
    } else {
        (1..j)
            .into_par_iter()
            .map(term)
            .reduce(|| DVector::zeros(n), |a, b| a + b)
    }
}

/// Mutable state of a run in progress.
pub struct StepContext {
    disc: Discretization,
    config: SolverConfig,
    system: CsrMatrix<f64>,
    solver: Option<(Vec<usize>, SpdSolver)>,
    u_minus1: DVector<f64>,
    u: Vec<DVector<f64>>,
    factorizations: usize,
    residuals: Vec<f64>,
}

impl StepContext {
    pub fn init(problem: &Problem, samples: KernelSamples, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let disc = Discretization::with_samples(problem, samples, config.n, config.order)?;
        Ok(Self::from_discretization(disc, config))
    }

    /// Samples the problem's own kernel on the configured grid.
    pub fn for_problem(problem: &Problem, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let disc = Discretization::new(problem, config.n, config.order)?;
        Ok(Self::from_discretization(disc, config))
    }

    pub fn from_discretization(disc: Discretization, config: &SolverConfig) -> Self {
        let system = disc.system_matrix();
        let u_minus1 = &disc.u0 - &disc.u1 * disc.tau;
        let u = vec![disc.u0.clone()];
        Self {
            disc,
            config: config.clone(),
            system,
            solver: None,
            u_minus1,
            u,
            factorizations: 0,
            residuals: vec![0.0],
        }
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// Index of the last computed state.
    pub fn current_step(&self) -> usize {
        self.u.len() - 1
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.u
    }

    pub fn state_before_start(&self) -> &DVector<f64> {
        &self.u_minus1
    }

    /// Computes `u_j`; steps must be taken in order.
    pub fn step_solve(&mut self, j: usize) -> Result<&DVector<f64>> {
        if j != self.u.len() || j > self.disc.n {
            return Err(Error::Precondition(format!(
                "step {j} requested, next step is {} of {}",
                self.u.len(),
                self.disc.n
            )));
        }
        let d = &self.disc;
        let space = &d.spaces[j];
        let rebuild = match &self.solver {
            Some((ties, _)) => *ties != space.tie_constraints,
            None => true,
        };
        if rebuild {
            let reduced = restrict(&self.system, space);
            let solver = SpdSolver::new(reduced, self.config.linear)
                .map_err(|reason| Error::Solve { step: j, reason })?;
            self.solver = Some((space.tie_constraints.clone(), solver));
            self.factorizations += 1;
        }
        let tau = d.tau;
        let prev2 = if j == 1 {
            &self.u_minus1
        } else {
            &self.u[j - 2]
        };
        let inertia = (&self.u[j - 1] * 2.0 - prev2) / (tau * tau);
        let hist = memory_sum(&self.u, &d.samples, j, self.config.deterministic);
        let visc_arg = &d.u0 * d.samples.values[0] - hist;
        let z = &d.time.dirichlet.z[j];
        let rhs =
            matvec(&d.ops.mass, &inertia) + matvec(&d.ops.stiff_viscous, &visc_arg) + d.forcing(j)
                - matvec(&self.system, z);
        let (_, solver) = self.solver.as_ref().expect("solver built above");
        let (w, res) = solver
            .solve(&space.reduce(&rhs))
            .map_err(|reason| Error::Solve { step: j, reason })?;
        if !res.is_finite() {
            return Err(Error::Solve {
                step: j,
                reason: "non-finite solution".into(),
            });
        }
        self.residuals.push(res);
        self.u.push(z + space.expand(&w));
        Ok(&self.u[j])
    }

    pub fn run(mut self) -> Result<(Discretization, DiscreteTrajectory)> {
        for j in self.u.len()..=self.disc.n {
            self.step_solve(j)?;
        }
        let traj = DiscreteTrajectory::from_states(
            self.disc.tau,
            self.u_minus1,
            self.u,
            &self.disc.u1,
            self.disc.spaces.clone(),
        )
        .with_solver_stats(self.factorizations, self.residuals);
        Ok((self.disc, traj))
    }

    pub(crate) fn restore_states(&mut self, u_minus1: DVector<f64>, u: Vec<DVector<f64>>) {
        self.u_minus1 = u_minus1;
        self.residuals = vec![0.0; u.len()];
        self.u = u;
        self.solver = None;
    }
}

/// Runs a problem to the final time.
pub fn solve(
    problem: &Problem,
    config: &SolverConfig,
) -> Result<(Discretization, DiscreteTrajectory)> {
    StepContext::for_problem(problem, config)?.run()
}

/// Residual of the step-`j` equation tested with `v` (a full vector in the
/// step-`j` space), relative to the size of the individual terms.
pub fn variational_residual(
    disc: &Discretization,
    traj: &DiscreteTrajectory,
    j: usize,
    v: &DVector<f64>,
) -> f64 {
    let ops = &disc.ops;
    let s = &disc.samples;
    let inertia = quad(&ops.mass, &traj.d2u[j], v);
    let elastic = quad(&ops.stiff_elastic, &traj.u[j], v);
    let mut mem_arg = (&traj.u[j] - &traj.u[0]) * s.values[0];
    for k in 1..=j {
        mem_arg.axpy(
            s.tau * s.first_diffs[j - k],
            &(&traj.u[k] - &traj.u[0]),
            1.0,
        );
    }
    let memory = quad(&ops.stiff_viscous, &mem_arg, v);
    let load = disc.forcing(j).dot(v);
    let scale = inertia.abs() + elastic.abs() + memory.abs() + load.abs() + 1e-300;
    (inertia + elastic + memory - load).abs() / scale
}
