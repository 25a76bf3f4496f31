//! Energy, dissipation and total work of the interpolated trajectory.
//!
//! The displacement enters through its right-continuous piecewise constant
//! interpolant and the velocity through the piecewise affine one, so that
//! kernel integrals reduce to cell integrals of the kernel and its
//! primitives.

use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_grid, initial_energy, PairForms};
use crate::assembly::data::gauss3;
use crate::error::Result;
use crate::linalg::{matvec, quad};
use crate::stepper::{DiscreteTrajectory, Discretization};

/// Rule for the kernel integrals in the energy and dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EnergyQuadrature {
    /// Exact cell integrals of the kernel against the piecewise constant states.
    Product,
    /// Left-endpoint rule with the closed-form first and second derivatives.
    LeftEndpoint,
}

/// How the kernel part of the total work is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum WorkForm {
    /// Kernel and its derivative paired with the velocity of the datum.
    Standard,
    /// Convolution paired with the velocity and acceleration of the datum.
    Convolved,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ContinuousEnergy {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub work: f64,
    /// `E(0) + work - energy - dissipation`
    pub margin: f64,
}

/// Energy and dissipation at every grid time, with the standard total work.
pub fn continuous_energy(
    disc: &Discretization,
    traj: &DiscreteTrajectory,
    rule: EnergyQuadrature,
) -> Result<Vec<ContinuousEnergy>> {
    check_grid(disc, traj)?;
    let k = &disc.problem.kernel;
    let n = traj.n;
    let tau = traj.tau;
    let t = |j: usize| j as f64 * tau;
    let g = |x: f64| k.scalar(x).expect("nonnegative time");
    let dg = |x: f64| k.scalar_d1(x).expect("nonnegative time");
    let d2g = |x: f64| k.scalar_d2(x).expect("nonnegative time");
    let q = PairForms::new(disc, traj);
    let work = total_work(disc, traj, WorkForm::Standard)?;
    let e0 = initial_energy(disc);
    let ops = &disc.ops;

    // cumulative dissipation
    let mut diss = vec![0.0; n + 1];
    for j in 1..=n {
        let mut d = match rule {
            EnergyQuadrature::Product => -0.5 * (g(t(j)) - g(t(j - 1))) * q.get(j, 0),
            EnergyQuadrature::LeftEndpoint => -0.5 * tau * dg(t(j - 1)) * q.get(j, 0),
        };
        for kk in 1..j {
            let w = match rule {
                EnergyQuadrature::Product => {
                    g(t(j) - t(kk - 1)) - g(t(j - 1) - t(kk - 1)) - g(t(j) - t(kk))
                        + g(t(j - 1) - t(kk))
                }
                EnergyQuadrature::LeftEndpoint => tau * tau * d2g(t(j - 1) - t(kk - 1)),
            };
            d += 0.5 * w * q.get(j, kk);
        }
        diss[j] = diss[j - 1] + d;
    }

    Ok((1..=n)
        .map(|i| {
            let mut energy = 0.5 * quad(&ops.mass, &traj.du[i], &traj.du[i])
                + 0.5 * quad(&ops.stiff_elastic, &traj.u[i], &traj.u[i])
                + 0.5 * g(t(i)) * q.get(i, 0);
            for j in 1..=i {
                let w = match rule {
                    EnergyQuadrature::Product => g(t(i) - t(j - 1)) - g(t(i) - t(j)),
                    EnergyQuadrature::LeftEndpoint => tau * dg(t(i) - t(j - 1)),
                };
                energy -= 0.5 * w * q.get(i, j);
            }
            ContinuousEnergy {
                step: i,
                time: t(i),
                energy,
                dissipation: diss[i],
                work: work[i],
                margin: e0 + work[i] - energy - diss[i],
            }
        })
        .collect())
}

/// Total work at every grid time, `W(0) = 0`.
pub fn total_work(
    disc: &Discretization,
    traj: &DiscreteTrajectory,
    form: WorkForm,
) -> Result<Vec<f64>> {
    check_grid(disc, traj)?;
    let p = &disc.problem;
    let mesh = &p.mesh;
    let data = &p.data;
    let kern = &p.kernel;
    let ops = &disc.ops;
    let n = traj.n;
    let tau = traj.tau;
    let t = |j: usize| j as f64 * tau;
    let zs = &disc.time.dirichlet;
    let moving = !data.dirichlet.is_zero();
    let zdot: Vec<DVector<f64>> = if moving {
        (0..=n)
            .map(|j| data.dirichlet.nodal_d1(mesh, t(j)))
            .collect()
    } else {
        vec![DVector::zeros(disc.u0.len()); n + 1]
    };
    let visc = moving && !disc.samples.visc.is_zero();

    // terms accumulated over the cells
    let mut cell = vec![0.0; n + 1];
    for j in 1..=n {
        let mut c = tau * disc.time.loads[j].dot(&traj.du[j]);
        let wprev = &traj.u[j - 1] - &zs.z[j - 1];
        c -= (&disc.time.tractions[j] - &disc.time.tractions[j - 1]).dot(&wprev);
        if moving {
            if !data.body_force.is_zero() {
                for (s, w) in gauss3(t(j - 1), t(j)) {
                    let f = data.body_force.nodal(mesh, s);
                    c -= w * quad(&ops.mass, &f, &data.dirichlet.nodal_d1(mesh, s));
                }
            }
            c -= quad(&ops.mass, &traj.du[j], &(&zdot[j] - &zdot[j - 1]));
            c += tau * quad(&ops.stiff_elastic, &traj.u[j], &zs.dz[j]);
        }
        cell[j] = c;
    }

    let y = |k: usize, bv: &DVector<f64>| (&traj.u[k] - &traj.u[0]).dot(bv);
    let p1 = |x: f64| kern.primitive1(x);
    let p2 = |x: f64| kern.primitive2(x);
    if visc && form == WorkForm::Standard {
        let extra: Vec<f64> = (1..=n)
            .into_par_iter()
            .map(|j| {
                let bdz = matvec(&ops.stiff_viscous, &zs.dz[j]);
                let yj = y(j, &bdz);
                let mut c = (p1(t(j)) - p1(t(j - 1))) * yj;
                for k in 1..j {
                    let w = p1(t(j) - t(k - 1)) - p1(t(j - 1) - t(k - 1)) - p1(t(j) - t(k))
                        + p1(t(j - 1) - t(k));
                    c += w * (y(k, &bdz) - yj);
                }
                c
            })
            .collect();
        for j in 1..=n {
            cell[j] += extra[j - 1];
        }
    }
    if visc && form == WorkForm::Convolved {
        let extra: Vec<f64> = (1..=n)
            .into_par_iter()
            .map(|j| {
                let acc = (&zdot[j] - &zdot[j - 1]) / tau;
                let ba = matvec(&ops.stiff_viscous, &acc);
                let mut c = p2(tau) * y(j, &ba);
                for k in 1..j {
                    let w = p2(t(j) - t(k - 1)) - p2(t(j - 1) - t(k - 1)) - p2(t(j) - t(k))
                        + p2(t(j - 1) - t(k));
                    c += w * y(k, &ba);
                }
                -c
            })
            .collect();
        for j in 1..=n {
            cell[j] += extra[j - 1];
        }
    }

    let w0 = &traj.u[0] - &zs.z[0];
    let base0 = -disc.time.tractions[0].dot(&w0)
        - if moving {
            quad(&ops.mass, &disc.u1, &zdot[0])
        } else {
            0.0
        };
    let mut out = vec![0.0; n + 1];
    let mut running = 0.0;
    for i in 1..=n {
        running += cell[i];
        let wi = &traj.u[i] - &zs.z[i];
        let mut w = running + base0 + disc.time.tractions[i].dot(&wi);
        if moving {
            w += quad(&ops.mass, &traj.du[i], &zdot[i]);
        }
        if visc && form == WorkForm::Convolved {
            let bz = matvec(&ops.stiff_viscous, &zdot[i]);
            for k in 1..=i {
                w += (p1(t(i) - t(k - 1)) - p1(t(i) - t(k))) * y(k, &bz);
            }
        }
        out[i] = w;
    }
    Ok(out)
}
