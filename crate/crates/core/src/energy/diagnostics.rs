//! Norm bounds and continuity checks on a computed trajectory.

use nalgebra::DVector;
use rayon::prelude::*;

use super::check_grid;
use crate::error::{Error, Result};
use crate::linalg::{combine, matvec, quad, restrict, LinearSolver, SpdSolver};
use crate::stepper::{DiscreteTrajectory, Discretization};

/// Deviation of the first states from the initial data.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InitialContinuity {
    /// `|u_j - u_0|` for `j = 0..=m`
    pub displacement: Vec<f64>,
    /// `|du_j - u_1|` for `j = 0..=m`
    pub velocity: Vec<f64>,
    /// `max_j |u_j - u_0| / t_j`
    pub displacement_rate: f64,
    /// `max_j |du_j - u_1| / t_j`
    pub velocity_rate: f64,
}

impl InitialContinuity {
    pub fn max_displacement(&self) -> f64 {
        self.displacement.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_velocity(&self) -> f64 {
        self.velocity.iter().fold(0.0, |a, &b| a.max(b))
    }
}

fn h_norm(disc: &Discretization, v: &DVector<f64>) -> f64 {
    quad(&disc.ops.mass, v, v).max(0.0).sqrt()
}

fn strain_norm(disc: &Discretization, v: &DVector<f64>) -> f64 {
    quad(&disc.ops.stiff_identity, v, v).max(0.0).sqrt()
}

/// Deviations over the first `min(10, n)` steps.
pub fn initial_continuity_check(
    disc: &Discretization,
    traj: &DiscreteTrajectory,
) -> Result<InitialContinuity> {
    check_grid(disc, traj)?;
    let m = traj.n.min(10);
    let mut out = InitialContinuity {
        displacement: Vec::with_capacity(m + 1),
        velocity: Vec::with_capacity(m + 1),
        displacement_rate: 0.0,
        velocity_rate: 0.0,
    };
    for j in 0..=m {
        let du = h_norm(disc, &(&traj.u[j] - &traj.u[0]));
        let dv = h_norm(disc, &(&traj.du[j] - &disc.u1));
        out.displacement.push(du);
        out.velocity.push(dv);
        if j > 0 {
            let t = j as f64 * traj.tau;
            out.displacement_rate = out.displacement_rate.max(du / t);
            out.velocity_rate = out.velocity_rate.max(dv / t);
        }
    }
    Ok(out)
}

/// `alpha_j(v) = (du_j, v) + sum_k [P(t_j - t_{k-1}) - P(t_j - t_k)] (B e(u_k - u_0), e v)`
/// where `P` is the primitive of the kernel profile. One row per step `0..=n`,
/// one column per panel vector.
pub fn alpha_series(
    disc: &Discretization,
    traj: &DiscreteTrajectory,
    panel: &[DVector<f64>],
) -> Result<Vec<Vec<f64>>> {
    check_grid(disc, traj)?;
    let k = &disc.problem.kernel;
    let tau = traj.tau;
    let t = |j: usize| j as f64 * tau;
    let mv: Vec<DVector<f64>> = panel.iter().map(|v| matvec(&disc.ops.mass, v)).collect();
    let bv: Vec<DVector<f64>> = panel
        .iter()
        .map(|v| matvec(&disc.ops.stiff_viscous, v))
        .collect();
    let visc = !disc.samples.visc.is_zero();
    let mem: Vec<Vec<f64>> = (0..=traj.n)
        .map(|j| {
            let d = &traj.u[j] - &traj.u[0];
            bv.iter().map(|b| d.dot(b)).collect()
        })
        .collect();
    Ok((0..=traj.n)
        .into_par_iter()
        .map(|j| {
            (0..panel.len())
                .map(|c| {
                    let mut a = traj.du[j].dot(&mv[c]);
                    if visc {
                        for kk in 1..=j {
                            a += (k.primitive1(t(j) - t(kk - 1)) - k.primitive1(t(j) - t(kk)))
                                * mem[kk][c];
                        }
                    }
                    a
                })
                .collect()
        })
        .collect())
}

/// `sum_j tau |d2u_j|^2` in the norm dual to `M + K_I` on the initial space.
pub fn second_derivative_bound(disc: &Discretization, traj: &DiscreteTrajectory) -> Result<f64> {
    check_grid(disc, traj)?;
    let space = &disc.spaces[0];
    let s = restrict(
        &combine(&[(1.0, &disc.ops.mass), (1.0, &disc.ops.stiff_identity)]),
        space,
    );
    let solver = SpdSolver::new(s, LinearSolver::Direct)
        .map_err(|reason| Error::Solve { step: 0, reason })?;
    let mut total = 0.0;
    for j in 1..=traj.n {
        let r = space.reduce(&matvec(&disc.ops.mass, &traj.d2u[j]));
        let (x, _) = solver
            .solve(&r)
            .map_err(|reason| Error::Solve { step: j, reason })?;
        total += traj.tau * r.dot(&x);
    }
    Ok(total)
}

/// `max_j (|du_j| + |e u_j|)`
pub fn uniform_bound(disc: &Discretization, traj: &DiscreteTrajectory) -> Result<f64> {
    check_grid(disc, traj)?;
    Ok((0..=traj.n).fold(0.0, |a, j| {
        a.max(h_norm(disc, &traj.du[j]) + strain_norm(disc, &traj.u[j]))
    }))
}
