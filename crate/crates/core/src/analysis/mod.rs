//! Numerical studies: shrinking the kernel shift, positivity of the memory
//! form, uniqueness for a fixed crack, and convergence against closed forms.

use std::f64::consts::PI;

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{
    AssemblyOrder, Field, InitialDisplacement, Material, ProblemData, SpaceFn, TimeFn,
};
use crate::domain::{build_mesh, CrackSchedule, GeometrySpec, Side};
use crate::energy::discrete_energy_audit;
use crate::error::{Error, Result};
use crate::kernel::{kernel_positivity_matrix, KernelProfile, RegularizedKernel};
use crate::linalg::quad;
use crate::problem::Problem;
use crate::stepper::{solve, DiscreteTrajectory, Discretization, SolverConfig};
use crate::tensor::SymTensor;

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepReport {
    pub n: usize,
    /// `eps0 2^-k`
    pub epsilons: Vec<f64>,
    /// `max_j |u_j(eps_k) - u_j(eps_{k+1})|`
    pub diffs_sup: Vec<f64>,
    /// `(sum_j tau |e(u_j(eps_k) - u_j(eps_{k+1}))|^2)^(1/2)`
    pub diffs_strain: Vec<f64>,
    /// Smallest relative discrete energy margin of each run.
    pub energy_margins: Vec<f64>,
}

impl SweepReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.diffs_sup.windows(2).all(|w| w[1] < w[0])
    }

    /// `log2` of successive ratios of the sup differences.
    pub fn rates(&self) -> Vec<f64> {
        self.diffs_sup
            .windows(2)
            .map(|w| (w[0] / w[1]).log2())
            .collect()
    }
}

/// Runs the problem for `eps0 2^-k`, `k = 0..levels`, at a fixed step count.
pub fn epsilon_sweep(problem: &Problem, eps0: f64, levels: usize, n: usize) -> Result<SweepReport> {
    if levels < 2 {
        return Err(Error::Domain(format!(
            "a sweep needs at least 2 levels, got {levels}"
        )));
    }
    let epsilons: Vec<f64> = (0..levels).map(|k| eps0 * 0.5f64.powi(k as i32)).collect();
    let runs: Vec<(Discretization, DiscreteTrajectory, f64)> = epsilons
        .par_iter()
        .map(|&eps| {
            let fail = |e: Error| Error::Solve {
                step: 0,
                reason: format!("run with shift {eps} failed: {e}"),
            };
            let mut p = problem.clone();
            p.kernel = p.kernel.with_epsilon(eps).map_err(fail)?;
            let (disc, traj) = solve(&p, &SolverConfig::new(n)).map_err(fail)?;
            let margin = discrete_energy_audit(&disc, &traj)
                .map_err(fail)?
                .min_energy_margin();
            Ok((disc, traj, margin))
        })
        .collect::<Result<_>>()?;
    let mut diffs_sup = Vec::new();
    let mut diffs_strain = Vec::new();
    for w in runs.windows(2) {
        let (disc, a, _) = &w[0];
        let b = &w[1].1;
        let (sup, strain) = trajectory_distance(disc, a, b);
        diffs_sup.push(sup);
        diffs_strain.push(strain);
    }
    Ok(SweepReport {
        n,
        epsilons,
        diffs_sup,
        diffs_strain,
        energy_margins: runs.iter().map(|r| r.2).collect(),
    })
}

/// Sup over steps of the mass norm, and the time-integrated strain norm.
pub fn trajectory_distance(
    disc: &Discretization,
    a: &DiscreteTrajectory,
    b: &DiscreteTrajectory,
) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut strain = 0.0;
    for j in 0..=a.n {
        let d = &a.u[j] - &b.u[j];
        sup = sup.max(quad(&disc.ops.mass, &d, &d).max(0.0).sqrt());
        if j > 0 {
            strain += a.tau * quad(&disc.ops.stiff_identity, &d, &d).max(0.0);
        }
    }
    (sup, strain.sqrt())
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PositivityRow {
    pub n: usize,
    pub min_eigenvalue: f64,
    /// Largest eigenvalue magnitude.
    pub norm: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IdentityCheck {
    pub coarse_n: usize,
    pub coarse_residual: f64,
    pub fine_residual: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PositivityReport {
    pub rows: Vec<PositivityRow>,
    pub identity: IdentityCheck,
}

impl PositivityReport {
    pub fn worst_relative_eigenvalue(&self) -> f64 {
        self.rows.iter().fold(f64::INFINITY, |a, r| {
            a.min(r.min_eigenvalue / r.norm.max(f64::MIN_POSITIVE))
        })
    }

    pub fn passes(&self) -> bool {
        self.worst_relative_eigenvalue() >= -1e-10 && self.identity.ratio >= 1.5
    }
}

/// Smallest eigenvalue of the discrete double-convolution form for
/// `n = 8, 16, ..., n_max` on `[0, t_final]`, plus the splitting identity for
/// `e^-t` on a random path at 128 and 256 steps.
pub fn positivity_test(
    kernel: &RegularizedKernel,
    n_max: usize,
    t_final: f64,
    seed: u64,
) -> Result<PositivityReport> {
    if n_max < 8 {
        return Err(Error::Domain(format!(
            "largest size must be at least 8, got {n_max}"
        )));
    }
    let mut sizes = Vec::new();
    let mut n = 8;
    while n <= n_max {
        sizes.push(n);
        n *= 2;
    }
    let rows = sizes
        .par_iter()
        .map(|&n| {
            let q = kernel_positivity_matrix(kernel, n, t_final / n as f64)?;
            let eig = SymmetricEigen::new(q).eigenvalues;
            Ok(PositivityRow {
                n,
                min_eigenvalue: eig.min(),
                norm: eig.amax(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let exp = RegularizedKernel::smooth(
        KernelProfile::Exponential { beta: 1.0 },
        0.0,
        SymTensor::scalar(1.0),
    )?;
    Ok(PositivityReport {
        rows,
        identity: identity_check(&exp, 128, t_final, seed)?,
    })
}

/// Random smooth scalar path, the same for every resolution.
fn random_path(seed: u64, t_final: f64) -> impl Fn(f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (1..=4)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    move |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, (a, ph))| a * ((m + 1) as f64 * PI * t / t_final + ph).sin())
            .sum::<f64>()
            + 0.3
    }
}

/// `|lhs - rhs|` of the splitting of `int (d/dr (K * v)) v` into the three
/// kernel terms, with rectangle rules on `n` steps.
pub fn identity_residual(
    kernel: &RegularizedKernel,
    n: usize,
    t_final: f64,
    seed: u64,
) -> Result<f64> {
    let v = random_path(seed, t_final);
    let tau = t_final / n as f64;
    let vs: Vec<f64> = (0..=n).map(|j| v(j as f64 * tau)).collect();
    let k0 = kernel.scalar(0.0)?;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for j in 1..=n {
        let tj = j as f64 * tau;
        let mut inner = k0 * vs[j];
        for k in 1..j {
            let dk = kernel.scalar_d1(tj - k as f64 * tau)?;
            inner += tau * dk * vs[k];
            rhs -= 0.5 * tau * tau * dk * (vs[j] - vs[k]).powi(2);
        }
        lhs += tau * vs[j] * inner;
        rhs += 0.5 * tau * (kernel.scalar(t_final - tj)? + kernel.scalar(tj)?) * vs[j] * vs[j];
    }
    Ok((lhs - rhs).abs())
}

pub fn identity_check(
    kernel: &RegularizedKernel,
    coarse_n: usize,
    t_final: f64,
    seed: u64,
) -> Result<IdentityCheck> {
    let coarse_residual = identity_residual(kernel, coarse_n, t_final, seed)?;
    let fine_residual = identity_residual(kernel, 2 * coarse_n, t_final, seed)?;
    Ok(IdentityCheck {
        coarse_n,
        coarse_residual,
        fine_residual,
        ratio: coarse_residual / fine_residual,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct UniquenessReport {
    /// `max_j |u_j(A) - u_j(B)|`
    pub max_difference: f64,
    /// `max_j |u_j(A)|`
    pub scale: f64,
    pub relative: f64,
}

/// Runs a fixed-crack problem with the reference configuration and with
/// `variant`, and compares the trajectories.
pub fn uniqueness_check(problem: &Problem, variant: &SolverConfig) -> Result<UniquenessReport> {
    if !problem.has_fixed_crack() {
        return Err(Error::Precondition(
            "uniqueness is only asserted when the crack does not grow on [0, T]".into(),
        ));
    }
    let reference = SolverConfig::new(variant.n);
    let (ra, rb) = rayon::join(|| solve(problem, &reference), || solve(problem, variant));
    let ((disc, a), (_, b)) = (ra?, rb?);
    let norm = |v: &DVector<f64>| quad(&disc.ops.mass, v, v).max(0.0).sqrt();
    let mut max_difference = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..=a.n {
        max_difference = max_difference.max(norm(&(&a.u[j] - &b.u[j])));
        scale = scale.max(norm(&a.u[j]));
    }
    Ok(UniquenessReport {
        max_difference,
        scale,
        relative: if scale > 0.0 {
            max_difference / scale
        } else {
            max_difference
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum OracleCase {
    /// `sin(pi x) cos(omega_h t)` on a fixed bar without memory, where
    /// `omega_h` is the lowest frequency of the spatial discretization.
    Wave,
    /// Bar at rest under constant loads, against the closed-form displacement.
    Static,
    /// Rigid motion `u0 + t c` driven through the boundary.
    Translation,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub case: OracleCase,
    pub steps: Vec<usize>,
    /// Mass-norm error at the final time, relative to the exact solution there.
    pub errors: Vec<f64>,
    /// `log2(e_n / e_2n)` for consecutive entries.
    pub rates: Vec<f64>,
}

impl ConvergenceReport {
    pub fn min_rate(&self) -> f64 {
        self.rates.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().fold(0.0, |a, &b| a.max(b))
    }
}

const WAVE_ELEMENTS: usize = 40;

fn oracle_problem(
    case: OracleCase,
) -> Result<(Problem, Box<dyn Fn(&Problem, f64) -> DVector<f64> + Sync>)> {
    let zero_visc = SymTensor::scalar(0.0);
    let none = RegularizedKernel::smooth(
        KernelProfile::Constant { value: 1.0 },
        0.0,
        zero_visc.clone(),
    )?;
    match case {
        OracleCase::Wave => {
            let mesh = build_mesh(&GeometrySpec::Interval {
                length: 1.0,
                elements: WAVE_ELEMENTS,
                dirichlet: vec![Side::Left, Side::Right],
            })?;
            let mut data = ProblemData::zero();
            let shape = SpaceFn::SinX { k: PI, phase: 0.0 };
            data.u0 = InitialDisplacement::Field(Field::single(
                vec![1.0],
                shape.clone(),
                TimeFn::constant(),
            ));
            let p = Problem::new(
                mesh,
                CrackSchedule::never(),
                Material::new(SymTensor::scalar(1.0), zero_visc)?,
                none,
                data,
                1.0,
            )?;
            let h = 1.0 / WAVE_ELEMENTS as f64;
            let c = (PI * h).cos();
            let omega = ((6.0 / (h * h)) * (1.0 - c) / (2.0 + c)).sqrt();
            Ok((
                p,
                Box::new(move |p: &Problem, t: f64| {
                    p.mesh
                        .interpolate(|x| vec![(PI * x[0]).sin() * (omega * t).cos()])
                }),
            ))
        }
        OracleCase::Static => {
            let mesh = build_mesh(&GeometrySpec::Interval {
                length: 1.0,
                elements: 16,
                dirichlet: vec![Side::Left],
            })?;
            let (stiff, f, traction, shift) = (2.0, 0.8, -0.3, 0.25);
            let mut data = ProblemData::zero();
            data.body_force = Field::single(vec![f], SpaceFn::Const, TimeFn::constant());
            data.traction = Field::single(vec![traction], SpaceFn::Const, TimeFn::constant());
            data.dirichlet = Field::single(vec![shift], SpaceFn::Const, TimeFn::constant());
            data.u0 = InitialDisplacement::Elastostatic;
            let visc = SymTensor::scalar(0.7);
            let k =
                crate::kernel::FractionalKernel::new(0.3, visc.clone(), 1.0)?.regularize(0.02)?;
            let p = Problem::new(
                mesh,
                CrackSchedule::never(),
                Material::new(SymTensor::scalar(stiff), visc)?,
                k,
                data,
                1.0,
            )?;
            // -stiff u'' = f, u(0) = shift, stiff u'(1) = traction
            Ok((
                p,
                Box::new(move |p: &Problem, _t: f64| {
                    p.mesh.interpolate(|x| {
                        vec![shift + (f * (x[0] - 0.5 * x[0] * x[0]) + traction * x[0]) / stiff]
                    })
                }),
            ))
        }
        OracleCase::Translation => {
            let mesh = build_mesh(&GeometrySpec::Rectangle {
                width: 1.0,
                height: 1.0,
                nx: 4,
                ny: 4,
                dirichlet: vec![Side::Left, Side::Bottom],
                cracks: vec![],
            })?;
            let (a, c) = ([0.1, -0.2], [0.3, 0.15]);
            let mut data = ProblemData::zero();
            data.u0 = InitialDisplacement::Field(Field::single(
                a.to_vec(),
                SpaceFn::Const,
                TimeFn::constant(),
            ));
            data.u1 = Field::single(c.to_vec(), SpaceFn::Const, TimeFn::constant());
            data.dirichlet = Field {
                terms: vec![
                    crate::assembly::Term {
                        amplitude: a.to_vec(),
                        space: SpaceFn::Const,
                        time: TimeFn::constant(),
                    },
                    crate::assembly::Term {
                        amplitude: c.to_vec(),
                        space: SpaceFn::Const,
                        time: TimeFn::Poly(vec![0.0, 1.0]),
                    },
                ],
            };
            let visc = SymTensor::isotropic(0.2, 0.3);
            let k =
                crate::kernel::FractionalKernel::new(0.5, visc.clone(), 1.0)?.regularize(0.01)?;
            let p = Problem::new(
                mesh,
                CrackSchedule::never(),
                Material::new(SymTensor::isotropic(1.0, 1.0), visc)?,
                k,
                data,
                1.0,
            )?;
            Ok((
                p,
                Box::new(move |p: &Problem, t: f64| {
                    p.mesh
                        .interpolate(|_| vec![a[0] + t * c[0], a[1] + t * c[1]])
                }),
            ))
        }
    }
}

/// Errors at the final time against the closed form for each step count.
/// For the static and translation cases the error is the largest over all steps.
pub fn manufactured_convergence(case: OracleCase, steps: &[usize]) -> Result<ConvergenceReport> {
    let (problem, exact) = oracle_problem(case)?;
    let errors = steps
        .par_iter()
        .map(|&n| {
            let (disc, traj) = solve(&problem, &SolverConfig::new(n))?;
            let norm = |v: &DVector<f64>| quad(&disc.ops.mass, v, v).max(0.0).sqrt();
            let js: Vec<usize> = match case {
                OracleCase::Wave => vec![n],
                _ => (0..=n).collect(),
            };
            Ok(js
                .into_iter()
                .map(|j| {
                    let e = exact(&problem, j as f64 * traj.tau);
                    norm(&(&traj.u[j] - &e)) / norm(&e).max(f64::MIN_POSITIVE)
                })
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let rates = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceReport {
        case,
        steps: steps.to_vec(),
        errors,
        rates,
    })
}

/// Permuted element order with the direct solver.
pub fn permuted_config(n: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        order: AssemblyOrder::Permuted(seed),
        ..SolverConfig::new(n)
    }
}
