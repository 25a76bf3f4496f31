//! Reference problems shared by the studies, the acceptance suite and the CLI.

use crate::assembly::{Field, InitialDisplacement, Material, ProblemData, SpaceFn, TimeFn};
use crate::domain::{build_mesh, CrackPath, CrackSchedule, GeometrySpec, ReleaseTime, Side};
use crate::error::{Error, Result};
use crate::kernel::FractionalKernel;
use crate::problem::Problem;
use crate::tensor::SymTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrackHistory {
    /// The crack is open from the start and never grows.
    Fixed,
    /// Both halves start tied and open at the two given times.
    Growing(f64, f64),
}

/// Unit square clamped at the bottom, with a horizontal crack from
/// `(0.25, 0.5)` to `(0.75, 0.5)` made of two segments, a traction on the
/// free sides, a body force and a slowly moving clamp. `cells` per side must
/// be a multiple of 4.
pub fn cracked_plate(
    cells: usize,
    history: CrackHistory,
    alpha: f64,
    epsilon: f64,
) -> Result<Problem> {
    if cells == 0 || cells % 4 != 0 {
        return Err(Error::Mesh(format!(
            "plate needs a multiple of 4 cells per side, got {cells}"
        )));
    }
    let mesh = build_mesh(&GeometrySpec::Rectangle {
        width: 1.0,
        height: 1.0,
        nx: cells,
        ny: cells,
        dirichlet: vec![Side::Bottom],
        cracks: vec![
            CrackPath {
                segment: 0,
                points: vec![[0.25, 0.5], [0.5, 0.5]],
            },
            CrackPath {
                segment: 1,
                points: vec![[0.5, 0.5], [0.75, 0.5]],
            },
        ],
    })?;
    let schedule = match history {
        CrackHistory::Fixed => CrackSchedule::from_thresholds(
            &[(0, ReleaseTime::At(0.0)), (1, ReleaseTime::At(0.0))]
                .into_iter()
                .collect(),
        )?,
        CrackHistory::Growing(a, b) => CrackSchedule::from_thresholds(
            &[(0, ReleaseTime::At(a)), (1, ReleaseTime::At(b))]
                .into_iter()
                .collect(),
        )?,
    };
    let visc = SymTensor::isotropic(0.2, 0.3);
    let material = Material::new(SymTensor::isotropic(1.0, 1.0), visc.clone())?;
    let kernel = FractionalKernel::new(alpha, visc, 1.0)?.regularize(epsilon)?;
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
    Problem::new(mesh, schedule, material, kernel, data, 1.0)
}

/// Bar on `[0, 1]` clamped at both ends, released from `sin(pi x)` while the
/// right end oscillates and a body force acts.
pub fn bar(elements: usize, alpha: f64, epsilon: f64, viscosity: f64) -> Result<Problem> {
    let mesh = build_mesh(&GeometrySpec::Interval {
        length: 1.0,
        elements,
        dirichlet: vec![Side::Left, Side::Right],
    })?;
    let visc = SymTensor::scalar(viscosity);
    let material = Material::new(SymTensor::scalar(1.0), visc.clone())?;
    let kernel = FractionalKernel::new(alpha, visc, 1.0)?.regularize(epsilon)?;
    let mut data = ProblemData::zero();
    data.u0 = InitialDisplacement::Field(Field::single(
        vec![0.5],
        SpaceFn::SinX {
            k: std::f64::consts::PI,
            phase: 0.0,
        },
        TimeFn::constant(),
    ));
    data.dirichlet = Field::single(
        vec![0.1],
        SpaceFn::Monomial { px: 1, py: 0 },
        TimeFn::Sin {
            omega: 2.0,
            phase: 0.0,
        },
    );
    data.u1 = Field::single(
        vec![0.2],
        SpaceFn::Monomial { px: 1, py: 0 },
        TimeFn::constant(),
    );
    data.body_force = Field::single(vec![0.3], SpaceFn::Const, TimeFn::Poly(vec![1.0, -0.5]));
    Problem::new(mesh, CrackSchedule::never(), material, kernel, data, 1.0)
}

/// Named problems covering fixed and growing cracks in two dimensions and
/// the bar, each with the step count it is audited at.
pub fn fixture_suite() -> Result<Vec<(&'static str, Problem, usize)>> {
    Ok(vec![
        (
            "plate-fixed",
            cracked_plate(16, CrackHistory::Fixed, 0.5, 1e-2)?,
            100,
        ),
        (
            "plate-two-releases",
            cracked_plate(16, CrackHistory::Growing(0.3, 0.6), 0.5, 1e-2)?,
            100,
        ),
        (
            "plate-strong-memory",
            cracked_plate(8, CrackHistory::Growing(0.25, 0.5), 0.2, 1e-3)?,
            80,
        ),
        ("bar", bar(40, 0.5, 1e-2, 0.6)?, 200),
        ("bar-weak-memory", bar(40, 0.8, 1e-1, 1.5)?, 100),
    ])
}
