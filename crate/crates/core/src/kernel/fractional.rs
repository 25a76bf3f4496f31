//! Caputo and Riemann-Liouville derivatives of sampled paths.

use nalgebra::DVector;

use super::check_alpha;
use super::gamma::gamma_unchecked;
use crate::error::{Error, Result};

fn check_path(len: usize, h: f64) -> Result<()> {
    if len < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {len}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!(
            "grid spacing must be positive, got {h}"
        )));
    }
    Ok(())
}

/// L1 scheme: the piecewise-constant derivative of the linear interpolant is
/// integrated exactly against `(t - r)^{-alpha} / Gamma(1 - alpha)`.
pub fn caputo_eval(g: &[f64], h: f64, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_path(g.len(), h)?;
    let n = g.len() - 1;
    let p = 1.0 - alpha;
    let b: Vec<f64> = (0..n)
        .map(|l| ((l + 1) as f64).powf(p) - (l as f64).powf(p))
        .collect();
    let incr: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
    let c = h.powf(-alpha) / gamma_unchecked(2.0 - alpha);
    let mut out = vec![0.0; n + 1];
    for m in 1..=n {
        let s: f64 = (1..=m).map(|k| b[m - k] * incr[k - 1]).sum();
        out[m] = c * s;
    }
    Ok(out)
}

/// Derivative of the fractional integral `I(t) = int_0^t (t-r)^{-alpha} g(r) dr / Gamma(1-alpha)`
/// of the piecewise-linear interpolant. `I` is integrated exactly at the grid
/// nodes and then differentiated by second-order finite differences.
pub fn riemann_liouville_eval(g: &[f64], h: f64, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_path(g.len(), h)?;
    let n = g.len() - 1;
    let p = 1.0 - alpha;
    // weights of g_{k-1} (a) and g_k (b) for cell k at distance l = m - k
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for l in 0..n {
        let lf = l as f64;
        let j0 = ((lf + 1.0).powf(p) - lf.powf(p)) / p;
        let j1 = ((lf + 1.0).powf(p + 1.0) - lf.powf(p + 1.0)) / (p + 1.0);
        a[l] = j1 - lf * j0;
        b[l] = (lf + 1.0) * j0 - j1;
    }
    let c = h.powf(p) / gamma_unchecked(1.0 - alpha);
    let mut integral = vec![0.0; n + 1];
    for m in 1..=n {
        let s: f64 = (1..=m).map(|k| g[k - 1] * a[m - k] + g[k] * b[m - k]).sum();
        integral[m] = c * s;
    }
    let mut out = vec![0.0; n + 1];
    out[0] = (integral[1] - integral[0]) / h;
    for m in 1..n {
        out[m] = (integral[m + 1] - integral[m - 1]) / (2.0 * h);
    }
    out[n] = if n >= 2 {
        (3.0 * integral[n] - 4.0 * integral[n - 1] + integral[n - 2]) / (2.0 * h)
    } else {
        (integral[1] - integral[0]) / h
    };
    Ok(out)
}

fn componentwise(
    g: &[DVector<f64>],
    h: f64,
    alpha: f64,
    op: fn(&[f64], f64, f64) -> Result<Vec<f64>>,
) -> Result<Vec<DVector<f64>>> {
    let dim = g.first().map(|v| v.len()).unwrap_or(0);
    if g.iter().any(|v| v.len() != dim) {
        return Err(Error::Domain(
            "path samples have inconsistent lengths".into(),
        ));
    }
    let mut out = vec![DVector::zeros(dim); g.len()];
    let mut column = vec![0.0; g.len()];
    for c in 0..dim {
        for (dst, v) in column.iter_mut().zip(g) {
            *dst = v[c];
        }
        let d = op(&column, h, alpha)?;
        for (o, v) in out.iter_mut().zip(d) {
            o[c] = v;
        }
    }
    if dim == 0 {
        check_alpha(alpha)?;
        check_path(g.len(), h)?;
    }
    Ok(out)
}

pub fn caputo_eval_vec(g: &[DVector<f64>], h: f64, alpha: f64) -> Result<Vec<DVector<f64>>> {
    componentwise(g, h, alpha, caputo_eval)
}

pub fn riemann_liouville_eval_vec(
    g: &[DVector<f64>],
    h: f64,
    alpha: f64,
) -> Result<Vec<DVector<f64>>> {
    componentwise(g, h, alpha, riemann_liouville_eval)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn simpson(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }

    pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        simpson(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    /// Caputo derivative oracle. The substitution `t - r = w^q`, `q = 1/(1-alpha)`
    /// removes the endpoint singularity.
    pub(crate) fn caputo_oracle(dg: &dyn Fn(f64) -> f64, alpha: f64, t: f64) -> f64 {
        let q = 1.0 / (1.0 - alpha);
        let upper = t.powf(1.0 / q);
        let integrand = |w: f64| q * dg(t - w.powf(q));
        adaptive_simpson(&integrand, 0.0, upper, 1e-12)
            / statrs::function::gamma::gamma(1.0 - alpha)
    }

    fn grid(n: usize, f: impl Fn(f64) -> f64) -> (Vec<f64>, f64) {
        let h = 1.0 / n as f64;
        ((0..=n).map(|i| f(i as f64 * h)).collect(), h)
    }

    #[test]
    fn caputo_of_constant_is_zero() {
        let (g, h) = grid(50, |_| 3.0);
        assert!(caputo_eval(&g, h, 0.4).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn caputo_of_linear_at_one() {
        let (g, h) = grid(2000, |t| t);
        let d = caputo_eval(&g, h, 0.5).unwrap();
        let exact = 2.0 / std::f64::consts::PI.sqrt();
        assert!((d[2000] - exact).abs() < 1e-3);
        let oracle = caputo_oracle(&|_| 1.0, 0.5, 1.0);
        assert!((oracle - exact).abs() < 1e-9);
    }

    #[test]
    fn caputo_of_square_matches_oracle() {
        let (g, h) = grid(2000, |t| t * t);
        let d = caputo_eval(&g, h, 0.3).unwrap();
        let oracle = caputo_oracle(&|r| 2.0 * r, 0.3, 1.0);
        assert!((d[2000] - oracle).abs() < 1e-3 * oracle.abs());
    }

    #[test]
    fn caputo_converges_at_first_order_or_better() {
        let err = |n: usize| {
            let (g, h) = grid(n, |t| (2.0 * t).sin());
            let d = caputo_eval(&g, h, 0.6).unwrap();
            let oracle = caputo_oracle(&|r| 2.0 * (2.0 * r).cos(), 0.6, 1.0);
            (d[n] - oracle).abs()
        };
        let (e1, e2) = (err(200), err(400));
        assert!(e1 / e2 >= 1.9, "{e1} {e2}");
    }

    #[test]
    fn riemann_liouville_trivial_cases() {
        let (g, h) = grid(100, |_| 0.0);
        assert!(riemann_liouville_eval(&g, h, 0.3)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        let (g, h) = grid(2000, |_| 1.0);
        let d = riemann_liouville_eval(&g, h, 0.5).unwrap();
        assert!((d[2000] - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn riemann_liouville_equals_caputo_when_path_starts_at_zero() {
        let (g, h) = grid(2000, |t| t);
        let rl = riemann_liouville_eval(&g, h, 0.5).unwrap();
        let cap = caputo_eval(&g, h, 0.5).unwrap();
        for m in 200..=2000 {
            assert!((rl[m] - cap[m]).abs() < 1e-3);
        }
    }

    #[test]
    fn relation_between_the_two_derivatives() {
        let alpha = 0.4;
        let gf = |t: f64| 1.5 + t.sin();
        let residual = |n: usize| {
            let (g, h) = grid(n, gf);
            let rl = riemann_liouville_eval(&g, h, alpha).unwrap();
            let cap = caputo_eval(&g, h, alpha).unwrap();
            let mut worst: f64 = 0.0;
            for m in n / 10..=n {
                let t = m as f64 * h;
                let r = rl[m] - cap[m] - gf(0.0) * t.powf(-alpha) / gamma_unchecked(1.0 - alpha);
                worst = worst.max(r.abs());
            }
            worst
        };
        let (r1, r2) = (residual(500), residual(1000));
        assert!(r2 < 1e-3);
        assert!(r1 / r2 >= 1.5, "{r1} {r2}");
    }

    #[test]
    fn vector_paths_are_componentwise() {
        let h = 0.01;
        let g: Vec<DVector<f64>> = (0..=100)
            .map(|i| DVector::from_vec(vec![i as f64 * h, 2.0]))
            .collect();
        let d = caputo_eval_vec(&g, h, 0.5).unwrap();
        let scalar = caputo_eval(&g.iter().map(|v| v[0]).collect::<Vec<_>>(), h, 0.5).unwrap();
        for (v, s) in d.iter().zip(&scalar) {
            assert_eq!(v[0], *s);
            assert_eq!(v[1], 0.0);
        }
        assert!(riemann_liouville_eval_vec(&g, h, 0.5).is_ok());
    }

    #[test]
    fn short_paths_are_rejected() {
        assert!(caputo_eval(&[1.0], 0.1, 0.5).is_err());
        assert!(riemann_liouville_eval(&[], 0.1, 0.5).is_err());
        assert!(caputo_eval(&[1.0, 2.0], 0.1, 1.2).is_err());
    }
}
