//! A complete initial-boundary value problem on a cracked domain.

use crate::assembly::{Material, ProblemData};
use crate::domain::{check_h3, CrackSchedule, CrackedMesh};
use crate::error::{Error, Result};
use crate::kernel::RegularizedKernel;
use crate::tensor::strain_size;

#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: CrackedMesh,
    pub schedule: CrackSchedule,
    pub material: Material,
    pub kernel: RegularizedKernel,
    pub data: ProblemData,
    pub t_final: f64,
}

impl Problem {
    pub fn new(
        mesh: CrackedMesh,
        schedule: CrackSchedule,
        material: Material,
        kernel: RegularizedKernel,
        data: ProblemData,
        t_final: f64,
    ) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Domain(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        let ns = strain_size(mesh.dim);
        if material.elastic.size() != ns {
            return Err(Error::Domain(format!(
                "elastic tensor has {} strain components, a {}D mesh needs {ns}",
                material.elastic.size(),
                mesh.dim
            )));
        }
        if !kernel.visc().approx_eq(&material.viscous, 1e-14) {
            return Err(Error::Domain(
                "kernel tensor differs from the material viscosity tensor".into(),
            ));
        }
        if !check_h3(&schedule) {
            return Err(Error::Precondition(
                "crack schedule closes a segment after opening it".into(),
            ));
        }
        let known = mesh.segments();
        for e in schedule.events() {
            let s = match *e {
                crate::domain::ScheduleEvent::Open { segment, .. }
                | crate::domain::ScheduleEvent::Close { segment, .. } => segment,
            };
            if !known.contains(&s) {
                return Err(Error::Domain(format!(
                    "schedule refers to unknown crack segment {s}"
                )));
            }
        }
        data.validate(mesh.ncomp())?;
        Ok(Self {
            mesh,
            schedule,
            material,
            kernel,
            data,
            t_final,
        })
    }

    /// Whether the crack set is the same at every time of `[0, T]`.
    pub fn has_fixed_crack(&self) -> bool {
        self.schedule.is_fixed(self.t_final)
    }
}
