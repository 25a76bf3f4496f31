//! Energy bookkeeping of the scheme and of its continuous-time interpolants.
//!
//! All kernel quadratic forms are expressed through
//! `Q[j][k] = (B e(u_j - u_k), e(u_j - u_k))`, with index 0 standing for the
//! initial state.

mod continuous;
mod diagnostics;

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

pub use continuous::{continuous_energy, total_work, ContinuousEnergy, EnergyQuadrature, WorkForm};
pub use diagnostics::{
    alpha_series, initial_continuity_check, second_derivative_bound, uniform_bound,
    InitialContinuity,
};

use crate::error::{Error, Result};
use crate::linalg::{matvec, quad};
use crate::stepper::{DiscreteTrajectory, Discretization};

/// Lower triangle of the pairwise viscous distances between states.
pub(crate) struct PairForms {
    rows: Vec<Vec<f64>>,
}

impl PairForms {
    pub(crate) fn new(disc: &Discretization, traj: &DiscreteTrajectory) -> Self {
        if disc.samples.visc.is_zero() {
            return Self {
                rows: (0..=traj.n).map(|j| vec![0.0; j + 1]).collect(),
            };
        }
        let bu: Vec<DVector<f64>> = traj
            .u
            .par_iter()
            .map(|u| matvec(&disc.ops.stiff_viscous, u))
            .collect();
        let rows = (0..=traj.n)
            .into_par_iter()
            .map(|j| {
                (0..=j)
                    .map(|k| {
                        let mut s = 0.0;
                        for ((a, b), (ba, bb)) in traj.u[j]
                            .iter()
                            .zip(traj.u[k].iter())
                            .zip(bu[j].iter().zip(bu[k].iter()))
                        {
                            s += (a - b) * (ba - bb);
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub(crate) fn get(&self, j: usize, k: usize) -> f64 {
        if k <= j {
            self.rows[j][k]
        } else {
            self.rows[k][j]
        }
    }
}

/// Terms of the discrete energy balance at one step. History and
/// `tau^2` entries are cumulative up to the step.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct LedgerRow {
    pub step: usize,
    pub time: f64,
    /// `|du_i|^2 / 2`
    pub kinetic: f64,
    /// `(C eu_i, eu_i) / 2`
    pub elastic: f64,
    /// `g_i Q[i][0] / 2`
    pub memory: f64,
    /// `-sum_j tau dg_{i-j+1} Q[i][j] / 2`
    pub history_current: f64,
    /// `-sum_j tau dg_j Q[j][0] / 2`
    pub history_initial: f64,
    /// `sum_j sum_k tau^2 d2g_{j-k+1} Q[j][k] / 2`
    pub history_double: f64,
    pub tau2_inertia: f64,
    pub tau2_elastic: f64,
    pub tau2_memory: f64,
    pub tau2_history: f64,
    /// `sum_j tau L_j`
    pub work: f64,
    pub lhs: f64,
    /// `E(0) + work`
    pub rhs: f64,
    /// `(lhs - rhs) / scale`
    pub equality_residual: f64,
    /// `rhs - kinetic - elastic`
    pub margin: f64,
    /// `rhs - kinetic - elastic - memory - history terms`
    pub energy_margin: f64,
}

impl LedgerRow {
    pub fn dissipation(&self) -> f64 {
        self.history_initial + self.history_double
    }

    /// Terms that the scheme guarantees to be nonnegative.
    pub fn signed_terms(&self) -> [(&'static str, f64); 10] {
        [
            ("kinetic", self.kinetic),
            ("elastic", self.elastic),
            ("memory", self.memory),
            ("history_current", self.history_current),
            ("history_initial", self.history_initial),
            ("history_double", self.history_double),
            ("tau2_inertia", self.tau2_inertia),
            ("tau2_elastic", self.tau2_elastic),
            ("tau2_memory", self.tau2_memory),
            ("tau2_history", self.tau2_history),
        ]
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EnergyLedger {
    pub initial_energy: f64,
    /// `E(0) + max |work| + 1e-14`
    pub scale: f64,
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn max_equality_residual(&self) -> f64 {
        self.rows
            .iter()
            .fold(0.0, |a, r| a.max(r.equality_residual.abs()))
    }

    /// Smallest margin relative to the scale.
    pub fn min_margin(&self) -> f64 {
        self.rows
            .iter()
            .fold(f64::INFINITY, |a, r| a.min(r.margin / self.scale))
    }

    pub fn min_energy_margin(&self) -> f64 {
        self.rows
            .iter()
            .fold(f64::INFINITY, |a, r| a.min(r.energy_margin / self.scale))
    }

    /// Most negative nonnegativity-tagged term relative to the scale, with its name.
    pub fn worst_sign(&self) -> (&'static str, f64) {
        let mut worst = ("none", f64::INFINITY);
        for r in &self.rows {
            for (name, v) in r.signed_terms() {
                if v / self.scale < worst.1 {
                    worst = (name, v / self.scale);
                }
            }
        }
        worst
    }

    /// Columns `step t kinetic elastic memory dissipation work margin`.
    pub fn write_table(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "# step t kinetic elastic memory dissipation work margin"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                r.step,
                r.time,
                r.kinetic,
                r.elastic,
                r.memory,
                r.dissipation(),
                r.work,
                r.margin
            )?;
        }
        Ok(())
    }
}

pub(crate) fn check_grid(disc: &Discretization, traj: &DiscreteTrajectory) -> Result<()> {
    if traj.n != disc.n
        || traj.n != disc.samples.n
        || (traj.tau - disc.samples.tau).abs() > 1e-14 * traj.tau
    {
        return Err(Error::GridMismatch(format!(
            "trajectory (n = {}, tau = {}) and kernel samples (n = {}, tau = {}) differ",
            traj.n, traj.tau, disc.samples.n, disc.samples.tau
        )));
    }
    Ok(())
}

/// `E(0) = |u_1|^2 / 2 + (C eu_0, eu_0) / 2`
pub fn initial_energy(disc: &Discretization) -> f64 {
    0.5 * quad(&disc.ops.mass, &disc.u1, &disc.u1)
        + 0.5 * quad(&disc.ops.stiff_elastic, &disc.u0, &disc.u0)
}

/// Evaluates every term of the discrete energy balance from the stored states.
pub fn discrete_energy_audit(
    disc: &Discretization,
    traj: &DiscreteTrajectory,
) -> Result<EnergyLedger> {
    check_grid(disc, traj)?;
    let n = traj.n;
    let tau = traj.tau;
    let s = &disc.samples;
    let (g, dg, d2g) = (&s.values, &s.first_diffs, &s.second_diffs);
    let ops = &disc.ops;
    let q = PairForms::new(disc, traj);
    let dz = &disc.time.dirichlet.dz;
    let moving = dz[1..].iter().any(|v| v.amax() != 0.0);
    let visc = !s.visc.is_zero();

    let work_terms: Vec<f64> = (1..=n)
        .into_par_iter()
        .map(|j| {
            let rel = &traj.du[j] - &dz[j];
            let mut l = disc.forcing(j).dot(&rel);
            if moving {
                l += quad(&ops.mass, &traj.d2u[j], &dz[j]);
                l += quad(&ops.stiff_elastic, &traj.u[j], &dz[j]);
                if visc {
                    let bdz = matvec(&ops.stiff_viscous, &dz[j]);
                    let y = |k: usize| (&traj.u[k] - &traj.u[0]).dot(&bdz);
                    let yj = y(j);
                    l += g[j - 1] * yj;
                    for k in 1..j {
                        l += tau * dg[j - k] * (y(k) - yj);
                    }
                }
            }
            tau * l
        })
        .collect();

    let e0 = initial_energy(disc);
    let mut rows = Vec::with_capacity(n);
    let mut acc = LedgerRow::default();
    for i in 1..=n {
        let kinetic = 0.5 * quad(&ops.mass, &traj.du[i], &traj.du[i]);
        let elastic = 0.5 * quad(&ops.stiff_elastic, &traj.u[i], &traj.u[i]);
        let memory = 0.5 * g[i] * q.get(i, 0);
        let history_current = -0.5
            * (1..=i)
                .map(|j| tau * dg[i - j + 1] * q.get(i, j))
                .sum::<f64>();
        acc.history_initial += -0.5 * tau * dg[i] * q.get(i, 0);
        acc.history_double += 0.5
            * (1..=i)
                .map(|k| tau * tau * d2g[i - k + 1] * q.get(i, k))
                .sum::<f64>();
        let step_sq = q.get(i, i - 1);
        acc.tau2_inertia += 0.5 * tau * tau * quad(&ops.mass, &traj.d2u[i], &traj.d2u[i]);
        acc.tau2_elastic += 0.5 * tau * tau * quad(&ops.stiff_elastic, &traj.du[i], &traj.du[i]);
        acc.tau2_memory += 0.5 * g[i - 1] * step_sq;
        acc.tau2_history += -0.5 * (1..=i).map(|k| tau * dg[i - k]).sum::<f64>() * step_sq;
        acc.work += work_terms[i - 1];
        let energy =
            kinetic + elastic + memory + history_current + acc.history_initial + acc.history_double;
        let lhs = energy + acc.tau2_inertia + acc.tau2_elastic + acc.tau2_memory + acc.tau2_history;
        let rhs = e0 + acc.work;
        rows.push(LedgerRow {
            step: i,
            time: i as f64 * tau,
            kinetic,
            elastic,
            memory,
            history_current,
            lhs,
            rhs,
            margin: rhs - kinetic - elastic,
            energy_margin: rhs - energy,
            ..acc
        });
    }
    let max_work = rows.iter().fold(0.0f64, |a, r| a.max(r.work.abs()));
    let scale = e0 + max_work + 1e-14;
    for r in &mut rows {
        r.equality_residual = (r.lhs - r.rhs) / scale;
    }
    Ok(EnergyLedger {
        initial_energy: e0,
        scale,
        rows,
    })
}

#[cfg(test)]
mod tests;
