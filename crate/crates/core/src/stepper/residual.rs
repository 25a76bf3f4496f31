//! Space-time weak-form residual of a trajectory.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::{DiscreteTrajectory, Discretization};
use crate::assembly::data::gauss3;
use crate::error::{Error, Result};
use crate::linalg::{matvec, quad};

/// `sin(mode pi t / T) psi`, which vanishes at both ends of the time interval.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub mode: usize,
    pub psi: DVector<f64>,
}

impl TestFunction {
    fn b(&self, t: f64, t_final: f64) -> f64 {
        (self.mode as f64 * PI * t / t_final).sin()
    }

    fn db(&self, t: f64, t_final: f64) -> f64 {
        let w = self.mode as f64 * PI / t_final;
        w * (w * t).cos()
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ResidualReport {
    /// Residual for each test function.
    pub values: Vec<f64>,
    pub max_abs: f64,
}

/// Modes `1..=5` times two smooth spatial fields of the initial space,
/// each normalised in `M + K_I`.
pub fn default_test_family(disc: &Discretization) -> Vec<TestFunction> {
    let mesh = &disc.problem.mesh;
    let space = &disc.spaces[0];
    let nc = mesh.ncomp();
    let fields: [Box<dyn Fn([f64; 2]) -> Vec<f64>>; 2] = [
        Box::new(move |x| {
            (0..nc)
                .map(|c| (PI * x[0] + 0.3 * c as f64).sin() * (0.5 + x[1]))
                .collect()
        }),
        Box::new(move |x| {
            (0..nc)
                .map(|c| (2.0 * PI * x[0]).cos() * (1.0 + 0.2 * c as f64) + x[1] * x[1])
                .collect()
        }),
    ];
    let mut out = Vec::new();
    for f in &fields {
        let raw = mesh.interpolate(f);
        let psi = space.expand(&space.coordinates(&raw));
        let norm =
            (quad(&disc.ops.mass, &psi, &psi) + quad(&disc.ops.stiff_identity, &psi, &psi)).sqrt();
        if norm == 0.0 {
            continue;
        }
        let psi = psi / norm;
        for mode in 1..=5 {
            out.push(TestFunction {
                mode,
                psi: psi.clone(),
            });
        }
    }
    out
}

/// Evaluates
/// `-int (u', phi') + int (C eu, e phi) - int int g(t-r) (B (eu(r) - eu_0), e phi'(t)) - int (f, phi) - int (N, phi)_N`
/// with the piecewise affine interpolant of the states.
pub fn generalized_residual(
    disc: &Discretization,
    traj: &DiscreteTrajectory,
    family: &[TestFunction],
) -> Result<ResidualReport> {
    if traj.n != disc.n {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} steps, discretization {}",
            traj.n, disc.n
        )));
    }
    let mut values = Vec::with_capacity(family.len());
    for tf in family {
        if !disc.spaces[0].contains(&tf.psi, 1e-12) {
            return Err(Error::Precondition(format!(
                "test function of mode {} is not admissible at every time",
                tf.mode
            )));
        }
        values.push(residual_one(disc, traj, tf));
    }
    let max_abs = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(ResidualReport { values, max_abs })
}

fn residual_one(disc: &Discretization, traj: &DiscreteTrajectory, tf: &TestFunction) -> f64 {
    let p = &disc.problem;
    let big_t = p.t_final;
    let tau = disc.tau;
    let n = disc.n;
    let m_psi = matvec(&disc.ops.mass, &tf.psi);
    let c_psi = matvec(&disc.ops.stiff_elastic, &tf.psi);
    let b_psi = matvec(&disc.ops.stiff_viscous, &tf.psi);
    let n_psi = matvec(&disc.ops.neumann_mass, &tf.psi);
    let elastic: Vec<f64> = traj.u.iter().map(|u| u.dot(&c_psi)).collect();
    let memory: Vec<f64> = traj
        .u
        .iter()
        .map(|u| (u - &traj.u[0]).dot(&b_psi))
        .collect();
    let with_force = !p.data.body_force.is_zero();
    let with_traction = !p.data.traction.is_zero();
    let mut r = 0.0;
    for j in 1..=n {
        let (a, b) = ((j - 1) as f64 * tau, j as f64 * tau);
        r -= traj.du[j].dot(&m_psi) * (tf.b(b, big_t) - tf.b(a, big_t));
        for (t, w) in gauss3(a, b) {
            let th = (t - a) / tau;
            let bt = tf.b(t, big_t);
            r += w * bt * (elastic[j - 1] + th * (elastic[j] - elastic[j - 1]));
            r -= w * tf.db(t, big_t) * p.kernel.convolve_linear(tau, &memory, t);
            if with_force {
                r -= w * bt * p.data.body_force.nodal(&p.mesh, t).dot(&m_psi);
            }
            if with_traction {
                r -= w * bt * p.data.traction.nodal(&p.mesh, t).dot(&n_psi);
            }
        }
    }
    r
}
