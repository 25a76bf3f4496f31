//! Memory kernels, their grid samples and fractional derivative operators.
//!
//! Every kernel is separable: a scalar profile `g(t)` times a viscosity
//! tensor. Sign properties of the tensor-valued kernel therefore reduce to
//! sign properties of the profile plus nonnegativity of the tensor.

mod fractional;
mod gamma;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

pub use fractional::{
    caputo_eval, caputo_eval_vec, riemann_liouville_eval, riemann_liouville_eval_vec,
};
pub use gamma::gamma_fn;

use crate::error::{Error, Result};
use crate::tensor::SymTensor;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alpha must lie in (0,1), got {alpha}"
        )))
    }
}

/// `t^{-alpha} / Gamma(1 - alpha)`
pub fn rho(alpha: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(Error::Singular { t });
    }
    Ok(t.powf(-alpha) / gamma::gamma_unchecked(1.0 - alpha))
}

/// Scalar time profile of a separable kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelProfile {
    /// `t^{-alpha} / Gamma(1 - alpha)`
    Fractional {
        alpha: f64,
    },
    /// `exp(-t / beta) / beta`
    Exponential {
        beta: f64,
    },
    Constant {
        value: f64,
    },
}

impl KernelProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelProfile::Fractional { alpha } => check_alpha(alpha),
            KernelProfile::Exponential { beta } if beta > 0.0 && beta.is_finite() => Ok(()),
            KernelProfile::Exponential { beta } => Err(Error::Domain(format!(
                "exponential time scale must be positive, got {beta}"
            ))),
            KernelProfile::Constant { value } if value >= 0.0 && value.is_finite() => Ok(()),
            KernelProfile::Constant { value } => Err(Error::Domain(format!(
                "constant kernel must be nonnegative, got {value}"
            ))),
        }
    }

    pub fn is_singular_at_zero(&self) -> bool {
        matches!(self, KernelProfile::Fractional { .. })
    }

    fn gamma_factor(alpha: f64, shift: f64) -> f64 {
        gamma::gamma_unchecked(shift - alpha)
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            KernelProfile::Fractional { alpha } => t.powf(-alpha) / Self::gamma_factor(alpha, 1.0),
            KernelProfile::Exponential { beta } => (-t / beta).exp() / beta,
            KernelProfile::Constant { value } => value,
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match *self {
            KernelProfile::Fractional { alpha } => {
                -alpha * t.powf(-alpha - 1.0) / Self::gamma_factor(alpha, 1.0)
            }
            KernelProfile::Exponential { beta } => -(-t / beta).exp() / (beta * beta),
            KernelProfile::Constant { .. } => 0.0,
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match *self {
            KernelProfile::Fractional { alpha } => {
                alpha * (alpha + 1.0) * t.powf(-alpha - 2.0) / Self::gamma_factor(alpha, 1.0)
            }
            KernelProfile::Exponential { beta } => (-t / beta).exp() / (beta * beta * beta),
            KernelProfile::Constant { .. } => 0.0,
        }
    }

    /// `int_0^t g(s) ds`
    pub fn primitive1(&self, t: f64) -> f64 {
        match *self {
            KernelProfile::Fractional { alpha } => {
                t.powf(1.0 - alpha) / Self::gamma_factor(alpha, 2.0)
            }
            KernelProfile::Exponential { beta } => -(-t / beta).exp_m1(),
            KernelProfile::Constant { value } => value * t,
        }
    }

    /// `int_0^t int_0^s g(r) dr ds`
    pub fn primitive2(&self, t: f64) -> f64 {
        match *self {
            KernelProfile::Fractional { alpha } => {
                t.powf(2.0 - alpha) / Self::gamma_factor(alpha, 3.0)
            }
            KernelProfile::Exponential { beta } => t + beta * (-t / beta).exp_m1(),
            KernelProfile::Constant { value } => 0.5 * value * t * t,
        }
    }
}

/// The unregularized fractional kernel `rho(t) B`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalKernel {
    alpha: f64,
    visc: SymTensor,
    horizon: f64,
}

impl FractionalKernel {
    pub fn new(alpha: f64, visc: SymTensor, horizon: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        check_visc(&visc)?;
        Ok(Self {
            alpha,
            visc,
            horizon,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn visc(&self) -> &SymTensor {
        &self.visc
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval(&self, t: f64) -> Result<SymTensor> {
        Ok(self.visc.scaled(rho(self.alpha, t)?))
    }

    /// The shifted kernel `t -> F(t + epsilon)`, for `0 < epsilon < horizon`.
    pub fn regularize(&self, epsilon: f64) -> Result<RegularizedKernel> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "a fractional kernel needs a positive shift, got {epsilon}"
            )));
        }
        if epsilon >= self.horizon {
            return Err(Error::Domain(format!(
                "shift {epsilon} must be smaller than the horizon {}",
                self.horizon
            )));
        }
        Ok(RegularizedKernel {
            profile: KernelProfile::Fractional { alpha: self.alpha },
            epsilon,
            visc: self.visc.clone(),
        })
    }
}

fn check_visc(visc: &SymTensor) -> Result<()> {
    let scale = visc.matrix().amax().max(1e-300);
    if visc.min_eigenvalue() < -1e-12 * scale {
        return Err(Error::Domain("viscosity tensor must be nonnegative".into()));
    }
    Ok(())
}

/// A kernel that is finite on `[0, T]`: a shifted fractional kernel or an
/// explicit smooth profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedKernel {
    profile: KernelProfile,
    epsilon: f64,
    visc: SymTensor,
}

impl RegularizedKernel {
    /// A kernel from an explicit smooth profile, optionally shifted.
    pub fn smooth(profile: KernelProfile, epsilon: f64, visc: SymTensor) -> Result<Self> {
        profile.validate()?;
        if profile.is_singular_at_zero() {
            return Err(Error::Domain(
                "fractional profiles must be built through FractionalKernel::regularize".into(),
            ));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!(
                "shift must be nonnegative, got {epsilon}"
            )));
        }
        check_visc(&visc)?;
        Ok(Self {
            profile,
            epsilon,
            visc,
        })
    }

    pub fn profile(&self) -> KernelProfile {
        self.profile
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn visc(&self) -> &SymTensor {
        &self.visc
    }

    /// Same profile and tensor with a different shift.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if self.profile.is_singular_at_zero() && !(epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "a fractional kernel needs a positive shift, got {epsilon}"
            )));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!(
                "shift must be nonnegative, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!(
                "kernel evaluated at negative time {t}"
            )));
        }
        Ok(())
    }

    /// Scalar factor `g(t + epsilon)`.
    pub fn scalar(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.profile.value(t + self.epsilon))
    }

    pub fn scalar_d1(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.profile.d1(t + self.epsilon))
    }

    pub fn scalar_d2(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.profile.d2(t + self.epsilon))
    }

    pub fn eval(&self, t: f64) -> Result<SymTensor> {
        Ok(self.visc.scaled(self.scalar(t)?))
    }

    /// `int_0^t g(s + epsilon) ds`
    pub fn primitive1(&self, t: f64) -> f64 {
        let e = self.epsilon;
        self.profile.primitive1(t + e) - self.profile.primitive1(e)
    }

    /// `int_0^t int_0^s g(r + epsilon) dr ds`
    pub fn primitive2(&self, t: f64) -> f64 {
        let e = self.epsilon;
        self.profile.primitive2(t + e) - self.profile.primitive2(e) - t * self.profile.primitive1(e)
    }

    /// `int_a^b g(s + epsilon) ds`
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let e = self.epsilon;
        self.profile.primitive1(b + e) - self.profile.primitive1(a + e)
    }

    /// `int_0^t g(t - r + epsilon) y(r) dr` for `y` piecewise linear with
    /// nodal values `y[k]` at `k tau`; `t` must not exceed the last node.
    pub fn convolve_linear(&self, tau: f64, y: &[f64], t: f64) -> f64 {
        let p1 = |x: f64| self.primitive1(x);
        // int_0^x g(s) s ds
        let q = |x: f64| x * self.primitive1(x) - self.primitive2(x);
        let mut acc = 0.0;
        let mut k = 1;
        while k < y.len() && (k as f64 - 1.0) * tau < t {
            let a = (k - 1) as f64 * tau;
            let b = (k as f64 * tau).min(t);
            let slope = (y[k] - y[k - 1]) / tau;
            let (lo, hi) = ((t - b).max(0.0), t - a);
            acc += (y[k - 1] + slope * (t - a)) * (p1(hi) - p1(lo)) - slope * (q(hi) - q(lo));
            k += 1;
        }
        acc
    }
}

/// A kernel evaluator accepted by [`kernel_eval`].
pub enum AnyKernel<'a> {
    Fractional(&'a FractionalKernel),
    Regularized(&'a RegularizedKernel),
}

impl<'a> From<&'a FractionalKernel> for AnyKernel<'a> {
    fn from(k: &'a FractionalKernel) -> Self {
        AnyKernel::Fractional(k)
    }
}

impl<'a> From<&'a RegularizedKernel> for AnyKernel<'a> {
    fn from(k: &'a RegularizedKernel) -> Self {
        AnyKernel::Regularized(k)
    }
}

pub fn kernel_eval<'a>(k: impl Into<AnyKernel<'a>>, t: f64) -> Result<SymTensor> {
    match k.into() {
        AnyKernel::Fractional(f) => f.eval(t),
        AnyKernel::Regularized(r) => r.eval(t),
    }
}

/// Kernel values and difference quotients on the grid `j tau`, `j = 0..n`.
#[derive(Debug, Clone)]
pub struct KernelSamples {
    pub tau: f64,
    pub n: usize,
    /// `g(j tau)`
    pub values: Vec<f64>,
    /// `(g_j - g_{j-1}) / tau`, zero at `j = 0`
    pub first_diffs: Vec<f64>,
    /// `(dg_j - dg_{j-1}) / tau`, zero at `j = 0`
    pub second_diffs: Vec<f64>,
    pub visc: SymTensor,
}

/// Worst-case quadratic-form values of the sampled sign conditions.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SignCertificate {
    /// min over j of min over unit xi of `G_j xi . xi`
    pub min_value_form: f64,
    /// max over j >= 1 of max over unit xi of `dG_j xi . xi`
    pub max_first_form: f64,
    /// min over j >= 2 of min over unit xi of `d2G_j xi . xi`
    pub min_second_form: f64,
    /// magnitude used for relative tolerances
    pub scale: f64,
}

impl SignCertificate {
    pub fn holds(&self, rel_tol: f64) -> bool {
        let floor = -rel_tol * self.scale;
        self.min_value_form >= floor
            && -self.max_first_form >= floor
            && self.min_second_form >= floor
    }
}

impl KernelSamples {
    pub fn tensor_value(&self, j: usize) -> SymTensor {
        self.visc.scaled(self.values[j])
    }

    pub fn tensor_first_diff(&self, j: usize) -> SymTensor {
        self.visc.scaled(self.first_diffs[j])
    }

    pub fn tensor_second_diff(&self, j: usize) -> SymTensor {
        self.visc.scaled(self.second_diffs[j])
    }

    pub fn certificate(&self) -> SignCertificate {
        let eig = SymmetricEigen::new(self.visc.matrix().clone()).eigenvalues;
        let lmin = eig.min();
        let lmax = eig.max();
        // min over unit xi of s * B xi . xi
        let form_min = |s: f64| if s >= 0.0 { s * lmin } else { s * lmax };
        let form_max = |s: f64| if s >= 0.0 { s * lmax } else { s * lmin };
        let min_value_form = self
            .values
            .iter()
            .map(|&s| form_min(s))
            .fold(f64::INFINITY, f64::min);
        let max_first_form = self.first_diffs[1..]
            .iter()
            .map(|&s| form_max(s))
            .fold(f64::NEG_INFINITY, f64::max);
        let min_second_form = if self.n >= 2 {
            self.second_diffs[2..]
                .iter()
                .map(|&s| form_min(s))
                .fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        let amax = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let lscale = lmax.abs().max(lmin.abs());
        let scale = lscale
            * (amax(&self.values)
                + amax(&self.first_diffs)
                + amax(&self.second_diffs[2.min(self.n + 1)..]))
            + 1e-300;
        SignCertificate {
            min_value_form,
            max_first_form,
            min_second_form,
            scale,
        }
    }

    /// Writes the columns `t g dg d2g`.
    pub fn write_table(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# t kernel first_diff second_diff")?;
        for j in 0..=self.n {
            writeln!(
                out,
                "{:.17e} {:.17e} {:.17e} {:.17e}",
                j as f64 * self.tau,
                self.values[j],
                self.first_diffs[j],
                self.second_diffs[j]
            )?;
        }
        Ok(())
    }
}

pub fn sample_grid(k: &RegularizedKernel, n: usize, t_final: f64) -> Result<KernelSamples> {
    if n == 0 {
        return Err(Error::Domain("step count must be at least 1".into()));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::Domain(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    let tau = t_final / n as f64;
    let values = (0..=n)
        .map(|j| k.scalar(j as f64 * tau))
        .collect::<Result<Vec<_>>>()?;
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Singular { t: j as f64 * tau });
    }
    let mut first_diffs = vec![0.0; n + 1];
    for j in 1..=n {
        first_diffs[j] = (values[j] - values[j - 1]) / tau;
    }
    let mut second_diffs = vec![0.0; n + 1];
    for j in 1..=n {
        second_diffs[j] = (first_diffs[j] - first_diffs[j - 1]) / tau;
    }
    Ok(KernelSamples {
        tau,
        n,
        values,
        first_diffs,
        second_diffs,
        visc: k.visc().clone(),
    })
}

/// Toeplitz matrix `tau^2 g(|j - k| tau)` of the discrete double convolution.
pub fn kernel_positivity_matrix(k: &RegularizedKernel, n: usize, tau: f64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Domain("matrix size must be at least 1".into()));
    }
    let diag = (0..n)
        .map(|l| k.scalar(l as f64 * tau).map(|g| tau * tau * g))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| diag[i.abs_diff(j)]))
}
