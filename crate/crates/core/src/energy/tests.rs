use nalgebra::DVector;
use proptest::prelude::*;

use super::*;
use crate::assembly::{Field, InitialDisplacement, Material, ProblemData, SpaceFn, TimeFn};
use crate::domain::{build_mesh, CrackPath, CrackSchedule, GeometrySpec, ReleaseTime, Side};
use crate::kernel::{FractionalKernel, KernelProfile, RegularizedKernel};
use crate::problem::Problem;
use crate::stepper::{solve, SolverConfig};
use crate::tensor::SymTensor;

fn interval(elements: usize) -> crate::domain::CrackedMesh {
    build_mesh(&GeometrySpec::Interval {
        length: 1.0,
        elements,
        dirichlet: vec![Side::Left, Side::Right],
    })
    .unwrap()
}

fn problem_1d(alpha: f64, visc: f64, eps: f64, data: ProblemData) -> Problem {
    let mat = Material::new(SymTensor::scalar(1.0), SymTensor::scalar(visc)).unwrap();
    let k = FractionalKernel::new(alpha, SymTensor::scalar(visc), 1.0)
        .unwrap()
        .regularize(eps)
        .unwrap();
    Problem::new(interval(12), CrackSchedule::never(), mat, k, data, 1.0).unwrap()
}

fn sine_start(amplitude: f64) -> ProblemData {
    let mut d = ProblemData::zero();
    d.u0 = InitialDisplacement::Field(Field::single(
        vec![amplitude],
        SpaceFn::SinX {
            k: std::f64::consts::PI,
            phase: 0.0,
        },
        TimeFn::constant(),
    ));
    d
}

/// Right end moves as `0.1 sin(2t)`, with a body force and a matching initial velocity.
fn moving_data() -> ProblemData {
    let mut d = sine_start(0.5);
    d.dirichlet = Field::single(
        vec![0.1],
        SpaceFn::Monomial { px: 1, py: 0 },
        TimeFn::Sin {
            omega: 2.0,
            phase: 0.0,
        },
    );
    d.u1 = Field::single(
        vec![0.2],
        SpaceFn::Monomial { px: 1, py: 0 },
        TimeFn::constant(),
    );
    d.body_force = Field::single(vec![0.3], SpaceFn::Const, TimeFn::Poly(vec![1.0, -0.5]));
    d
}

fn cracked_square() -> Problem {
    let mesh = build_mesh(&GeometrySpec::Rectangle {
        width: 1.0,
        height: 1.0,
        nx: 8,
        ny: 8,
        dirichlet: vec![Side::Bottom],
        cracks: vec![CrackPath {
            segment: 0,
            points: vec![[0.25, 0.5], [0.75, 0.5]],
        }],
    })
    .unwrap();
    let schedule =
        CrackSchedule::from_thresholds(&[(0, ReleaseTime::At(0.4))].into_iter().collect()).unwrap();
    let visc = SymTensor::isotropic(0.2, 0.3);
    let mat = Material::new(SymTensor::isotropic(1.0, 1.0), visc.clone()).unwrap();
    let k = FractionalKernel::new(0.5, visc, 1.0)
        .unwrap()
        .regularize(0.01)
        .unwrap();
    let mut data = ProblemData::zero();
    data.traction = Field::single(
        vec![0.0, 0.5],
        SpaceFn::Monomial { px: 1, py: 0 },
        TimeFn::Sin {
            omega: 3.0,
            phase: 0.0,
        },
    );
    data.body_force = Field::single(vec![0.2, 0.0], SpaceFn::Const, TimeFn::Poly(vec![0.0, 1.0]));
    data.dirichlet = Field::single(
        vec![0.05, 0.0],
        SpaceFn::Monomial { px: 1, py: 0 },
        TimeFn::Poly(vec![0.0, 0.0, 1.0]),
    );
    Problem::new(mesh, schedule, mat, k, data, 1.0).unwrap()
}

#[test]
fn zero_data_gives_zero_ledger() {
    let p = problem_1d(0.5, 0.4, 0.05, ProblemData::zero());
    let (disc, traj) = solve(&p, &SolverConfig::new(10)).unwrap();
    let ledger = discrete_energy_audit(&disc, &traj).unwrap();
    assert_eq!(ledger.initial_energy, 0.0);
    for r in &ledger.rows {
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
    }
}

#[test]
fn without_viscosity_memory_terms_vanish() {
    let p = problem_1d(0.5, 0.0, 0.05, moving_data());
    let (disc, traj) = solve(&p, &SolverConfig::new(30)).unwrap();
    let ledger = discrete_energy_audit(&disc, &traj).unwrap();
    for r in &ledger.rows {
        assert_eq!(r.memory, 0.0);
        assert_eq!(r.history_current, 0.0);
        assert_eq!(r.dissipation(), 0.0);
        assert_eq!(r.tau2_memory, 0.0);
        assert_eq!(r.tau2_history, 0.0);
    }
    assert!(ledger.max_equality_residual() < 1e-10);
}

#[test]
fn balance_closes_in_one_dimension() {
    let p = problem_1d(0.5, 0.6, 0.02, moving_data());
    let (disc, traj) = solve(&p, &SolverConfig::new(60)).unwrap();
    let ledger = discrete_energy_audit(&disc, &traj).unwrap();
    assert!(
        ledger.max_equality_residual() <= 1e-8,
        "{}",
        ledger.max_equality_residual()
    );
    assert!(ledger.min_margin() >= -1e-10);
    assert!(ledger.worst_sign().1 >= -1e-12, "{:?}", ledger.worst_sign());
}

#[test]
fn balance_closes_on_a_growing_crack() {
    let (disc, traj) = solve(&cracked_square(), &SolverConfig::new(25)).unwrap();
    assert_eq!(traj.factorizations, 2);
    let ledger = discrete_energy_audit(&disc, &traj).unwrap();
    assert!(
        ledger.max_equality_residual() <= 1e-8,
        "{}",
        ledger.max_equality_residual()
    );
    assert!(ledger.min_energy_margin() >= -1e-10);
    assert!(ledger.worst_sign().1 >= -1e-12, "{:?}", ledger.worst_sign());
}

#[test]
fn ledger_table_has_one_row_per_step() {
    let p = problem_1d(0.5, 0.3, 0.05, sine_start(1.0));
    let (disc, traj) = solve(&p, &SolverConfig::new(8)).unwrap();
    let ledger = discrete_energy_audit(&disc, &traj).unwrap();
    let mut buf = Vec::new();
    ledger.write_table(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split_whitespace().count() == 8));
}

#[test]
fn constant_force_work_telescopes() {
    let mut data = sine_start(0.7);
    data.body_force = Field::single(
        vec![1.3],
        SpaceFn::SinX { k: 2.0, phase: 0.4 },
        TimeFn::constant(),
    );
    let p = problem_1d(0.5, 0.5, 0.05, data);
    let (disc, traj) = solve(&p, &SolverConfig::new(40)).unwrap();
    let w = total_work(&disc, &traj, WorkForm::Standard).unwrap();
    let f = p.data.body_force.nodal(&p.mesh, 0.0);
    for i in 1..=40 {
        // (f, u(t_i) - u_0) with the mass matrix of the scheme
        let oracle = crate::linalg::quad(&disc.ops.mass, &f, &(&traj.u[i] - &traj.u[0]));
        assert!(
            (w[i] - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
            "{i}: {} vs {oracle}",
            w[i]
        );
    }
}

#[test]
fn product_rule_reproduces_discrete_energy_for_fixed_boundary() {
    let mut data = sine_start(1.0);
    data.traction = Field::zero();
    data.body_force = Field::single(
        vec![0.4],
        SpaceFn::Const,
        TimeFn::Sin {
            omega: 4.0,
            phase: 0.0,
        },
    );
    let p = problem_1d(0.4, 0.8, 0.03, data);
    let (disc, traj) = solve(&p, &SolverConfig::new(50)).unwrap();
    let ledger = discrete_energy_audit(&disc, &traj).unwrap();
    let cont = continuous_energy(&disc, &traj, EnergyQuadrature::Product).unwrap();
    for (r, c) in ledger.rows.iter().zip(&cont) {
        let discrete = r.kinetic + r.elastic + r.memory + r.history_current;
        assert!((c.energy - discrete).abs() <= 1e-12 * ledger.scale);
        assert!((c.dissipation - r.dissipation()).abs() <= 1e-12 * ledger.scale);
        assert!((c.work - r.work).abs() <= 1e-12 * ledger.scale);
        assert!((c.margin - r.energy_margin).abs() <= 1e-12 * ledger.scale);
        assert!(c.margin >= -1e-12 * ledger.scale);
    }
}

#[test]
fn quadrature_rules_converge_together() {
    let mut gaps = Vec::new();
    for n in [40, 80, 160] {
        let p = problem_1d(0.5, 0.6, 0.05, moving_data());
        let (disc, traj) = solve(&p, &SolverConfig::new(n)).unwrap();
        let a = continuous_energy(&disc, &traj, EnergyQuadrature::Product).unwrap();
        let b = continuous_energy(&disc, &traj, EnergyQuadrature::LeftEndpoint).unwrap();
        let gap = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x.energy + x.dissipation - y.energy - y.dissipation).abs())
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
}

#[test]
fn work_forms_agree_and_approach_each_other() {
    let mut gaps = Vec::new();
    for n in [40, 80, 160] {
        let p = problem_1d(0.5, 0.6, 0.05, moving_data());
        let (disc, traj) = solve(&p, &SolverConfig::new(n)).unwrap();
        let a = total_work(&disc, &traj, WorkForm::Standard).unwrap();
        let b = total_work(&disc, &traj, WorkForm::Convolved).unwrap();
        let scale = initial_energy(&disc) + a.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        gaps.push(
            a.iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
                / scale,
        );
    }
    assert!(gaps[0] < 5e-2, "{gaps:?}");
    assert!(gaps[2] < gaps[0], "{gaps:?}");
}

#[test]
fn exponential_kernel_work_forms_agree() {
    let visc = SymTensor::scalar(0.6);
    let mat = Material::new(SymTensor::scalar(1.0), visc.clone()).unwrap();
    let k = RegularizedKernel::smooth(KernelProfile::Exponential { beta: 1.5 }, 0.0, visc).unwrap();
    let p = Problem::new(
        interval(12),
        CrackSchedule::never(),
        mat,
        k,
        moving_data(),
        1.0,
    )
    .unwrap();
    let (disc, traj) = solve(&p, &SolverConfig::new(200)).unwrap();
    let a = total_work(&disc, &traj, WorkForm::Standard).unwrap();
    let b = total_work(&disc, &traj, WorkForm::Convolved).unwrap();
    let scale = initial_energy(&disc) + a.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let gap = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale;
    assert!(gap < 1e-2, "{gap}");
}

#[test]
fn equilibrium_start_stays_put() {
    let mesh = build_mesh(&GeometrySpec::Interval {
        length: 1.0,
        elements: 10,
        dirichlet: vec![Side::Left],
    })
    .unwrap();
    let mut data = ProblemData::zero();
    data.traction = Field::single(vec![-0.3], SpaceFn::Const, TimeFn::constant());
    data.u0 = InitialDisplacement::Elastostatic;
    let mat = Material::new(SymTensor::scalar(2.0), SymTensor::scalar(0.7)).unwrap();
    let k = FractionalKernel::new(0.3, SymTensor::scalar(0.7), 1.0)
        .unwrap()
        .regularize(0.02)
        .unwrap();
    let p = Problem::new(mesh, CrackSchedule::never(), mat, k, data, 1.0).unwrap();
    let (disc, traj) = solve(&p, &SolverConfig::new(30)).unwrap();
    let ledger = discrete_energy_audit(&disc, &traj).unwrap();
    for r in &ledger.rows {
        assert!(r.kinetic.abs() <= 1e-20 + 1e-24 * ledger.scale);
        assert!(r.memory.abs() <= 1e-20);
        assert!((r.elastic - ledger.initial_energy).abs() <= 1e-12 * ledger.scale);
        assert!(r.work.abs() <= 1e-12 * ledger.scale);
    }
}

#[test]
fn initial_deviation_is_linear_in_the_step() {
    let mut rates = Vec::new();
    let mut maxima = Vec::new();
    for n in [50, 100, 200] {
        let p = problem_1d(0.5, 0.6, 0.02, moving_data());
        let (disc, traj) = solve(&p, &SolverConfig::new(n)).unwrap();
        let ic = initial_continuity_check(&disc, &traj).unwrap();
        assert_eq!(ic.displacement.len(), 11);
        assert_eq!(ic.displacement[0], 0.0);
        assert_eq!(ic.velocity[0], 0.0);
        rates.push((ic.displacement_rate, ic.velocity_rate));
        maxima.push((ic.max_displacement(), ic.max_velocity()));
    }
    for w in maxima.windows(2) {
        assert!(w[0].0 / w[1].0 >= 1.6, "{maxima:?}");
        assert!(w[0].1 / w[1].1 >= 1.6, "{maxima:?}");
    }
    for w in rates.windows(2) {
        assert!(
            w[1].0 <= 1.2 * w[0].0 && w[1].1 <= 1.2 * w[0].1,
            "{rates:?}"
        );
    }
}

#[test]
fn alpha_series_starts_from_initial_velocity() {
    let p = problem_1d(0.5, 0.6, 0.02, moving_data());
    let (disc, traj) = solve(&p, &SolverConfig::new(20)).unwrap();
    let v = disc.spaces[0].expand(&DVector::from_fn(disc.spaces[0].n_free(), |i, _| {
        (i as f64 * 0.7).sin()
    }));
    let a = alpha_series(&disc, &traj, std::slice::from_ref(&v)).unwrap();
    assert_eq!(a.len(), 21);
    let oracle = crate::linalg::quad(&disc.ops.mass, &disc.u1, &v);
    assert!((a[0][0] - oracle).abs() <= 1e-14 * oracle.abs().max(1.0));
    // the discrete equation tested with v, summed over steps, equals the increment of alpha
    for j in 1..=20 {
        assert!(a[j][0].is_finite());
    }
}

#[test]
fn bounds_stay_bounded_under_refinement() {
    let mut b = Vec::new();
    for n in [25, 50, 100] {
        let (disc, traj) = solve(&cracked_square(), &SolverConfig::new(n)).unwrap();
        b.push((
            second_derivative_bound(&disc, &traj).unwrap(),
            uniform_bound(&disc, &traj).unwrap(),
        ));
    }
    for w in b.windows(2) {
        assert!(w[1].0 <= 1.5 * w[0].0 + 1e-12, "{b:?}");
        assert!(w[1].1 <= 1.5 * w[0].1, "{b:?}");
    }
    assert!(b.iter().all(|x| x.0 >= 0.0 && x.1 > 0.0));
}

#[test]
fn mismatched_grid_is_rejected() {
    let p = problem_1d(0.5, 0.6, 0.02, sine_start(1.0));
    let (disc, _) = solve(&p, &SolverConfig::new(10)).unwrap();
    let (_, traj) = solve(&p, &SolverConfig::new(12)).unwrap();
    assert!(matches!(
        discrete_energy_audit(&disc, &traj),
        Err(crate::Error::GridMismatch(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn balance_holds_for_random_data(
        alpha in 0.1f64..0.9,
        visc in 0.0f64..1.5,
        amp in -2.0f64..2.0,
        force in -1.0f64..1.0,
        omega in 0.5f64..6.0,
        n in 5usize..40,
    ) {
        let mut data = sine_start(amp);
        data.body_force = Field::single(vec![force], SpaceFn::Monomial { px: 2, py: 0 }, TimeFn::Sin { omega, phase: 0.3 });
        data.dirichlet = Field::single(vec![force * 0.1], SpaceFn::Monomial { px: 1, py: 0 }, TimeFn::Poly(vec![0.0, 1.0, -1.0]));
        let p = problem_1d(alpha, visc, 0.01, data);
        let (disc, traj) = solve(&p, &SolverConfig::new(n)).unwrap();
        let ledger = discrete_energy_audit(&disc, &traj).unwrap();
        prop_assert!(ledger.max_equality_residual() <= 1e-8);
        prop_assert!(ledger.min_margin() >= -1e-10);
        prop_assert!(ledger.worst_sign().1 >= -1e-12);
    }
}
