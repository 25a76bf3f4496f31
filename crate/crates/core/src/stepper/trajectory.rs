use std::io::Write;

use nalgebra::DVector;

use crate::domain::ConstrainedSpace;

/// Computed states with their difference quotients and interpolants.
#[derive(Debug, Clone)]
pub struct DiscreteTrajectory {
    pub n: usize,
    pub tau: f64,
    /// `u_{-1} = u_0 - tau u_1`
    pub u_minus1: DVector<f64>,
    /// `u_j`, `j = 0..n`
    pub u: Vec<DVector<f64>>,
    /// `du_0 = u_1`, `du_j = (u_j - u_{j-1}) / tau`
    pub du: Vec<DVector<f64>>,
    /// `d2u_j = (du_j - du_{j-1}) / tau`, zero at `j = 0`
    pub d2u: Vec<DVector<f64>>,
    pub spaces: Vec<ConstrainedSpace>,
    /// Number of matrix factorizations during the run.
    pub factorizations: usize,
    /// Relative algebraic residual of every step.
    pub solve_residuals: Vec<f64>,
}

impl DiscreteTrajectory {
    pub fn from_states(
        tau: f64,
        u_minus1: DVector<f64>,
        u: Vec<DVector<f64>>,
        u1: &DVector<f64>,
        spaces: Vec<ConstrainedSpace>,
    ) -> Self {
        let n = u.len() - 1;
        let mut du = vec![u1.clone()];
        for j in 1..=n {
            du.push((&u[j] - &u[j - 1]) / tau);
        }
        let mut d2u = vec![DVector::zeros(u1.len())];
        for j in 1..=n {
            d2u.push((&du[j] - &du[j - 1]) / tau);
        }
        Self {
            n,
            tau,
            u_minus1,
            u,
            du,
            d2u,
            spaces,
            factorizations: 0,
            solve_residuals: vec![0.0; n + 1],
        }
    }

    pub(crate) fn with_solver_stats(mut self, factorizations: usize, residuals: Vec<f64>) -> Self {
        self.factorizations = factorizations;
        self.solve_residuals = residuals;
        self
    }

    /// Recomputes the difference quotients after `u` was edited.
    pub fn refresh(&mut self) {
        let u1 = self.du[0].clone();
        let fresh = Self::from_states(
            self.tau,
            self.u_minus1.clone(),
            self.u.clone(),
            &u1,
            self.spaces.clone(),
        );
        self.du = fresh.du;
        self.d2u = fresh.d2u;
    }

    pub fn final_time(&self) -> f64 {
        self.n as f64 * self.tau
    }

    /// Interval index `j` with `t` in `((j-1) tau, j tau]` and the local
    /// coordinate in `(0, 1]`; `(0, 0)` at `t = 0`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        if t <= 0.0 {
            return (0, 0.0);
        }
        let x = t / self.tau;
        let mut j = x.ceil() as usize;
        j = j.clamp(1, self.n);
        let theta = (x - (j - 1) as f64).clamp(0.0, 1.0);
        (j, theta)
    }

    /// Piecewise affine interpolant of the states.
    pub fn affine(&self, t: f64) -> DVector<f64> {
        match self.locate(t) {
            (0, _) => self.u[0].clone(),
            (j, th) => &self.u[j - 1] + (&self.u[j] - &self.u[j - 1]) * th,
        }
    }

    /// Right-continuous piecewise constant interpolant: `u_j` on `((j-1) tau, j tau]`.
    pub fn right(&self, t: f64) -> &DVector<f64> {
        match self.locate(t) {
            (0, _) => &self.u[0],
            (j, _) => &self.u[j],
        }
    }

    /// `u_{j-1}` on `((j-1) tau, j tau]`.
    pub fn left(&self, t: f64) -> &DVector<f64> {
        match self.locate(t) {
            (0, _) => &self.u[0],
            (j, _) => &self.u[j - 1],
        }
    }

    /// Piecewise affine interpolant of the velocities `du_j`.
    pub fn velocity(&self, t: f64) -> DVector<f64> {
        match self.locate(t) {
            (0, _) => self.du[0].clone(),
            (j, th) => &self.du[j - 1] + (&self.du[j] - &self.du[j - 1]) * th,
        }
    }

    pub fn velocity_right(&self, t: f64) -> &DVector<f64> {
        match self.locate(t) {
            (0, _) => &self.du[0],
            (j, _) => &self.du[j],
        }
    }

    pub fn velocity_left(&self, t: f64) -> &DVector<f64> {
        match self.locate(t) {
            (0, _) => &self.du[0],
            (j, _) => &self.du[j - 1],
        }
    }

    /// Column text: `step time value_0 value_1 ...` every `stride` steps and at the end.
    pub fn write_snapshots(&self, stride: usize, out: &mut impl Write) -> std::io::Result<()> {
        let stride = stride.max(1);
        writeln!(out, "# step time dof_values")?;
        for j in 0..=self.n {
            if j % stride != 0 && j != self.n {
                continue;
            }
            write!(out, "{j} {:.17e}", j as f64 * self.tau)?;
            for v in self.u[j].iter() {
                write!(out, " {v:.17e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
