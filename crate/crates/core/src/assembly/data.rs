//! Analytic data fields built from separable terms `amplitude * space(x) * time(t)`.

use nalgebra::DVector;

use crate::domain::CrackedMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum TimeFn {
    /// `sum_k c_k t^k`
    Poly(Vec<f64>),
    /// `sin(omega t + phase)`
    Sin { omega: f64, phase: f64 },
    /// `exp(rate t)`
    Exp { rate: f64 },
}

impl TimeFn {
    pub fn constant() -> Self {
        TimeFn::Poly(vec![1.0])
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeFn::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
            TimeFn::Sin { omega, phase } => (omega * t + phase).sin(),
            TimeFn::Exp { rate } => (rate * t).exp(),
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match self {
            TimeFn::Poly(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * t + k as f64 * ck),
            TimeFn::Sin { omega, phase } => omega * (omega * t + phase).cos(),
            TimeFn::Exp { rate } => rate * (rate * t).exp(),
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match self {
            TimeFn::Poly(c) => c
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * t + (k * (k - 1)) as f64 * ck),
            TimeFn::Sin { omega, phase } => -omega * omega * (omega * t + phase).sin(),
            TimeFn::Exp { rate } => rate * rate * (rate * t).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum SpaceFn {
    Const,
    /// `x^px y^py`
    Monomial {
        px: u32,
        py: u32,
    },
    /// `sin(kx x + phase)`
    SinX {
        k: f64,
        phase: f64,
    },
    /// `sin(kx x) sin(ky y)`
    SinSin {
        kx: f64,
        ky: f64,
    },
}

impl SpaceFn {
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match *self {
            SpaceFn::Const => 1.0,
            SpaceFn::Monomial { px, py } => x[0].powi(px as i32) * x[1].powi(py as i32),
            SpaceFn::SinX { k, phase } => (k * x[0] + phase).sin(),
            SpaceFn::SinSin { kx, ky } => (kx * x[0]).sin() * (ky * x[1]).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Term {
    pub amplitude: Vec<f64>,
    pub space: SpaceFn,
    pub time: TimeFn,
}

/// A vector field on space-time given as a sum of separable terms.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize)]
pub struct Field {
    pub terms: Vec<Term>,
}

impl Field {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(amplitude: Vec<f64>, space: SpaceFn, time: TimeFn) -> Self {
        Self {
            terms: vec![Term {
                amplitude,
                space,
                time,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.amplitude.iter().all(|a| *a == 0.0))
    }

    pub fn validate(&self, ncomp: usize, name: &str) -> Result<()> {
        for t in &self.terms {
            if t.amplitude.len() != ncomp {
                return Err(Error::Domain(format!(
                    "{name}: amplitude has {} components, expected {ncomp}",
                    t.amplitude.len()
                )));
            }
        }
        Ok(())
    }

    fn eval_with(&self, mesh: &CrackedMesh, tf: impl Fn(&TimeFn) -> f64) -> DVector<f64> {
        let nc = mesh.ncomp();
        let mut v = DVector::zeros(mesh.n_dofs());
        for term in &self.terms {
            let s = tf(&term.time);
            if s == 0.0 {
                continue;
            }
            for (p, x) in mesh.nodes.iter().enumerate() {
                let w = s * term.space.value(*x);
                for c in 0..nc {
                    v[p * nc + c] += w * term.amplitude[c];
                }
            }
        }
        v
    }

    /// Nodal interpolant at time `t`.
    pub fn nodal(&self, mesh: &CrackedMesh, t: f64) -> DVector<f64> {
        self.eval_with(mesh, |f| f.value(t))
    }

    pub fn nodal_d1(&self, mesh: &CrackedMesh, t: f64) -> DVector<f64> {
        self.eval_with(mesh, |f| f.d1(t))
    }

    pub fn nodal_d2(&self, mesh: &CrackedMesh, t: f64) -> DVector<f64> {
        self.eval_with(mesh, |f| f.d2(t))
    }

    /// Nodal interpolant of the 3-point Gauss average over `(a, b)`.
    pub fn nodal_average(&self, mesh: &CrackedMesh, a: f64, b: f64) -> DVector<f64> {
        self.eval_with(mesh, |f| {
            gauss3(a, b)
                .iter()
                .map(|&(t, w)| w * f.value(t))
                .sum::<f64>()
                / (b - a)
        })
    }
}

/// Nodes and weights of the 3-point Gauss rule on `(a, b)`.
pub fn gauss3(a: f64, b: f64) -> [(f64, f64); 3] {
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let d = (0.6f64).sqrt() * h;
    [
        (m - d, h * 5.0 / 9.0),
        (m, h * 8.0 / 9.0),
        (m + d, h * 5.0 / 9.0),
    ]
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum InitialDisplacement {
    Field(Field),
    /// Equilibrium of the elastic operator with the data at `t = 0`.
    Elastostatic,
}

/// Loads, boundary data and initial conditions.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProblemData {
    pub body_force: Field,
    pub traction: Field,
    pub dirichlet: Field,
    pub u0: InitialDisplacement,
    pub u1: Field,
}

impl ProblemData {
    pub fn zero() -> Self {
        Self {
            body_force: Field::zero(),
            traction: Field::zero(),
            dirichlet: Field::zero(),
            u0: InitialDisplacement::Field(Field::zero()),
            u1: Field::zero(),
        }
    }

    pub fn validate(&self, ncomp: usize) -> Result<()> {
        self.body_force.validate(ncomp, "body force")?;
        self.traction.validate(ncomp, "traction")?;
        self.dirichlet.validate(ncomp, "Dirichlet datum")?;
        self.u1.validate(ncomp, "initial velocity")?;
        if let InitialDisplacement::Field(f) = &self.u0 {
            f.validate(ncomp, "initial displacement")?;
        }
        Ok(())
    }
}
