//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::CsrMatrix;
use statrs::function::gamma::gamma;

use fkv::analysis::{
    epsilon_sweep, manufactured_convergence, permuted_config, positivity_test, uniqueness_check,
    OracleCase,
};
use fkv::energy::{continuous_energy, discrete_energy_audit, uniform_bound, EnergyQuadrature};
use fkv::fixtures::{bar, cracked_plate, fixture_suite, CrackHistory};
use fkv::kernel::{caputo_eval, riemann_liouville_eval, FractionalKernel};
use fkv::stepper::{solve, DiscreteTrajectory, Discretization, SolverConfig};
use fkv::tensor::SymTensor;

const CAPUTO_REL_TOL: f64 = 1e-3;
const CAPUTO_RUNTIME_S: f64 = 2.0;
const EQUALITY_TOL: f64 = 1e-8;
const EQUALITY_RUNTIME_S: f64 = 60.0;
const MARGIN_TOL: f64 = -1e-10;
const SIGN_TOL: f64 = -1e-12;
const SWEEP_RUNTIME_S: f64 = 30.0;
const EIGEN_TOL: f64 = -1e-10;
const IDENTITY_RATIO: f64 = 1.5;
const UNIQUENESS_TOL: f64 = 1e-10;
const WAVE_ORDER: f64 = 0.8;
const EXACT_TOL: f64 = 1e-10;
const BOUND_SPREAD: f64 = 0.10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    let left = (m - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + f(m));
    let right = (b - m) / 6.0 * (f(m) + 4.0 * f(0.5 * (m + b)) + f(b));
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, 0.5 * tol, depth - 1)
    }
}

/// `int_0^t (t - r)^-alpha g'(r) dr / Gamma(1 - alpha)` after `t - r = w^(1/(1-alpha))`.
fn caputo_quadrature(dg: &dyn Fn(f64) -> f64, alpha: f64, t: f64) -> f64 {
    let q = 1.0 / (1.0 - alpha);
    let integrand = |w: f64| q * dg(t - w.powf(q));
    adaptive_simpson(&integrand, 0.0, t.powf(1.0 - alpha), 1e-13, 40) / gamma(1.0 - alpha)
}

fn kernel_calculus() -> Verdict {
    let start = Instant::now();
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut worst = 0.0f64;
    for p in [1i32, 2] {
        let g: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(p)).collect();
        for alpha in [0.3, 0.5, 0.7] {
            let d = caputo_eval(&g, h, alpha).unwrap();
            for m in [n / 4, n / 2, n] {
                let t = m as f64 * h;
                let oracle = caputo_quadrature(&|r| p as f64 * r.powi(p - 1), alpha, t);
                worst = worst.max((d[m] - oracle).abs() / oracle.abs());
            }
        }
    }
    // relation between the two derivatives for a path with g(0) != 0
    let g: Vec<f64> = (0..=n).map(|i| 1.0 + (i as f64 * h).sin()).collect();
    let mut relation = 0.0f64;
    for alpha in [0.3, 0.5, 0.7] {
        let c = caputo_eval(&g, h, alpha).unwrap();
        let r = riemann_liouville_eval(&g, h, alpha).unwrap();
        for m in [n / 4, n / 2, n] {
            let t = m as f64 * h;
            let jump = t.powf(-alpha) / gamma(1.0 - alpha);
            relation = relation.max((r[m] - c[m] - jump).abs() / r[m].abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= CAPUTO_REL_TOL && relation <= CAPUTO_REL_TOL && secs < CAPUTO_RUNTIME_S,
        format!("caputo rel err {worst:.2e}, relation residual {relation:.2e}, {secs:.2}s"),
    )
}

fn mul(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        y[i] = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&j, v)| v * x[j])
            .sum();
    }
    y
}

/// Recomputes both sides of the discrete energy equality from the states,
/// with kernel samples taken directly from `(t + eps)^-alpha / Gamma(1 - alpha)`.
fn independent_equality_residual(
    disc: &Discretization,
    traj: &DiscreteTrajectory,
    alpha: f64,
    eps: f64,
) -> f64 {
    let n = traj.n;
    let tau = traj.tau;
    let g: Vec<f64> = (0..=n)
        .map(|j| (j as f64 * tau + eps).powf(-alpha) / gamma(1.0 - alpha))
        .collect();
    let dg: Vec<f64> = (0..=n)
        .map(|j| if j == 0 { 0.0 } else { (g[j] - g[j - 1]) / tau })
        .collect();
    let d2g: Vec<f64> = (0..=n)
        .map(|j| match j {
            0 => 0.0,
            1 => dg[1] / tau,
            _ => (dg[j] - dg[j - 1]) / tau,
        })
        .collect();
    let ops = &disc.ops;
    let (m, c, b) = (&ops.mass, &ops.stiff_elastic, &ops.stiff_viscous);
    let bu: Vec<DVector<f64>> = traj.u.iter().map(|u| mul(b, u)).collect();
    let q = |j: usize, k: usize| (&traj.u[j] - &traj.u[k]).dot(&(&bu[j] - &bu[k]));
    let form = |a: &CsrMatrix<f64>, x: &DVector<f64>| x.dot(&mul(a, x));
    let dz = &disc.time.dirichlet.dz;
    let e0 = 0.5 * form(m, &disc.u1) + 0.5 * form(c, &disc.u0);

    let mut work = 0.0;
    let mut cumulative = 0.0;
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 1..=n {
        let bdz = mul(b, &dz[i]);
        let y = |k: usize| (&traj.u[k] - &traj.u[0]).dot(&bdz);
        let mut l = disc.forcing(i).dot(&(&traj.du[i] - &dz[i]))
            + traj.d2u[i].dot(&mul(m, &dz[i]))
            + traj.u[i].dot(&mul(c, &dz[i]))
            + g[i - 1] * y(i);
        for k in 1..i {
            l += tau * dg[i - k] * (y(k) - y(i));
        }
        work += tau * l;

        cumulative += -0.5 * tau * dg[i] * q(i, 0);
        for k in 1..=i {
            cumulative += 0.5 * tau * tau * d2g[i - k + 1] * q(i, k);
        }
        let hist: f64 = (1..=i).map(|k| tau * dg[k - 1]).sum();
        cumulative += 0.5 * tau * tau * form(m, &traj.d2u[i])
            + 0.5 * tau * tau * form(c, &traj.du[i])
            + 0.5 * g[i - 1] * q(i, i - 1)
            - 0.5 * hist * q(i, i - 1);
        let current: f64 = (1..=i).map(|j| -0.5 * tau * dg[i - j + 1] * q(i, j)).sum();
        lhs.push(
            0.5 * form(m, &traj.du[i])
                + 0.5 * form(c, &traj.u[i])
                + 0.5 * g[i] * q(i, 0)
                + current
                + cumulative,
        );
        rhs.push(e0 + work);
    }
    let scale = e0 + rhs.iter().map(|r| (r - e0).abs()).fold(0.0, f64::max) + 1e-14;
    lhs.iter()
        .zip(&rhs)
        .map(|(l, r)| (l - r).abs() / scale)
        .fold(0.0, f64::max)
}

fn energy_equality() -> Verdict {
    let start = Instant::now();
    let (alpha, eps) = (0.5, 1e-2);
    let p = cracked_plate(32, CrackHistory::Fixed, alpha, eps).unwrap();
    let (disc, traj) = solve(&p, &SolverConfig::new(200)).unwrap();
    let ledger = discrete_energy_audit(&disc, &traj).unwrap();
    let independent = independent_equality_residual(&disc, &traj, alpha, eps);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        independent <= EQUALITY_TOL
            && ledger.max_equality_residual() <= EQUALITY_TOL
            && secs < EQUALITY_RUNTIME_S,
        format!(
            "{} nodes, n = 200: independent {independent:.2e}, ledger {:.2e}, {secs:.1}s",
            p.mesh.n_nodes(),
            ledger.max_equality_residual()
        ),
    )
}

fn energy_inequality_and_signs() -> (Verdict, Verdict) {
    let mut margin = f64::INFINITY;
    let mut cont_margin = f64::INFINITY;
    let mut sign = (String::new(), f64::INFINITY);
    let mut certificates = true;
    let mut releases = 0;
    for (name, p, n) in fixture_suite().unwrap() {
        let (disc, traj) = solve(&p, &SolverConfig::new(n)).unwrap();
        releases = releases.max(traj.factorizations - 1);
        let ledger = discrete_energy_audit(&disc, &traj).unwrap();
        margin = margin
            .min(ledger.min_margin())
            .min(ledger.min_energy_margin());
        let cont = continuous_energy(&disc, &traj, EnergyQuadrature::Product).unwrap();
        cont_margin = cont
            .iter()
            .fold(cont_margin, |a, c| a.min(c.margin / ledger.scale));
        let (term, v) = ledger.worst_sign();
        if v < sign.1 {
            sign = (format!("{name}/{term}"), v);
        }
        certificates &= disc.samples.certificate().holds(-SIGN_TOL);
    }
    (
        verdict(
            margin >= MARGIN_TOL && releases >= 2,
            format!("min relative margin {margin:.2e} (interpolated {cont_margin:.2e}), up to {releases} release events"),
        ),
        verdict(
            sign.1 >= SIGN_TOL && certificates,
            format!("worst term {} = {:.2e}, kernel certificates hold: {certificates}", sign.0, sign.1),
        ),
    )
}

fn epsilon_limit() -> Verdict {
    let start = Instant::now();
    let p = bar(40, 0.5, 0.1, 0.6).unwrap();
    let r = epsilon_sweep(&p, 0.1, 5, 200).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let diffs: Vec<String> = r.diffs_sup.iter().map(|d| format!("{d:.2e}")).collect();
    verdict(
        r.strictly_decreasing() && r.diffs_sup.len() == 4 && secs < SWEEP_RUNTIME_S,
        format!("diffs [{}], {secs:.1}s", diffs.join(", ")),
    )
}

/// Smallest relative eigenvalue of `tau^2 g(|j - k| tau)` built from the closed-form kernel.
fn toeplitz_min_relative(alpha: f64, eps: f64, n: usize) -> f64 {
    let tau = 1.0 / n as f64;
    let col: Vec<f64> = (0..n)
        .map(|l| tau * tau * (l as f64 * tau + eps).powf(-alpha) / gamma(1.0 - alpha))
        .collect();
    let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| col[i.abs_diff(j)])).eigenvalues;
    eig.min() / eig.amax()
}

fn kernel_positivity() -> Verdict {
    let mut worst = f64::INFINITY;
    let mut oracle = f64::INFINITY;
    let mut ratio = f64::INFINITY;
    for i in 1..=9 {
        let alpha = i as f64 / 10.0;
        let k = FractionalKernel::new(alpha, SymTensor::scalar(1.0), 1.0)
            .unwrap()
            .regularize(1e-3)
            .unwrap();
        let r = positivity_test(&k, 256, 1.0, 2024 + i).unwrap();
        worst = worst.min(r.worst_relative_eigenvalue());
        ratio = ratio.min(r.identity.ratio);
        oracle = oracle.min(toeplitz_min_relative(alpha, 1e-3, 256));
    }
    verdict(
        worst >= EIGEN_TOL && oracle >= EIGEN_TOL && ratio >= IDENTITY_RATIO,
        format!("min relative eigenvalue {worst:.2e} (closed form {oracle:.2e}), identity ratio {ratio:.2}"),
    )
}

fn uniqueness() -> Verdict {
    let p = cracked_plate(16, CrackHistory::Fixed, 0.5, 1e-2).unwrap();
    let r = uniqueness_check(&p, &permuted_config(100, 31)).unwrap();
    let moving = cracked_plate(16, CrackHistory::Growing(0.3, 0.6), 0.5, 1e-2).unwrap();
    let refused = matches!(
        uniqueness_check(&moving, &permuted_config(100, 31)),
        Err(fkv::Error::Precondition(_))
    );
    verdict(
        r.relative <= UNIQUENESS_TOL && refused,
        format!(
            "permuted assembly relative difference {:.2e}, moving crack refused: {refused}",
            r.relative
        ),
    )
}

fn manufactured() -> Verdict {
    let wave = manufactured_convergence(OracleCase::Wave, &[100, 200, 400]).unwrap();
    let stat = manufactured_convergence(OracleCase::Static, &[100, 200, 400]).unwrap();
    let trans = manufactured_convergence(OracleCase::Translation, &[100, 200, 400]).unwrap();
    verdict(
        wave.min_rate() >= WAVE_ORDER
            && stat.max_error() <= EXACT_TOL
            && trans.max_error() <= EXACT_TOL,
        format!(
            "wave order {:.2}, static error {:.1e}, translation error {:.1e}",
            wave.min_rate(),
            stat.max_error(),
            trans.max_error()
        ),
    )
}

fn uniform_bounds() -> Verdict {
    let p = cracked_plate(16, CrackHistory::Growing(0.3, 0.6), 0.5, 1e-2).unwrap();
    let bounds: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&n| {
            let (disc, traj) = solve(&p, &SolverConfig::new(n)).unwrap();
            uniform_bound(&disc, &traj).unwrap()
        })
        .collect();
    let (lo, hi) = bounds
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let spread = (hi - lo) / lo;
    verdict(
        spread < BOUND_SPREAD,
        format!("bounds {bounds:.4?}, spread {:.2}%", 100.0 * spread),
    )
}

fn determinism() -> Verdict {
    let work = tempfile::tempdir().unwrap();
    let config = work.path().join("run.toml");
    std::fs::write(
        &config,
        r#"
[geometry]
kind = "rectangle"
nx = 8
ny = 8
dirichlet = ["bottom"]
releases = { "0" = 0.3, "1" = 0.6 }
cracks = [
  { segment = 0, points = [[0.25, 0.5], [0.5, 0.5]] },
  { segment = 1, points = [[0.5, 0.5], [0.75, 0.5]] },
]

[material]
elastic = { lambda = 1.0, mu = 1.0 }
viscous = { lambda = 0.2, mu = 0.3 }

[kernel]
alpha = 0.5
epsilon = 0.01

[data]
traction = [{ amplitude = [0.0, 0.5], space = { kind = "monomial", px = 1 }, time = { kind = "sin", omega = 3.0 } }]
body_force = [{ amplitude = [0.2, 0.0], time = { kind = "poly", coeffs = [0.0, 1.0] } }]

[discretization]
n = 60
t_final = 1.0
deterministic = true
"#,
    )
    .unwrap();
    let run = |dir: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_fkv"))
            .arg(&config)
            .arg("--out-dir")
            .arg(dir)
            .arg("--workers")
            .arg("4")
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                let bytes = std::fs::read(&p).unwrap();
                let kept: Vec<u8> = String::from_utf8(bytes)
                    .unwrap()
                    .lines()
                    .filter(|l| !l.contains("timestamp"))
                    .flat_map(|l| l.bytes().chain(std::iter::once(b'\n')))
                    .collect();
                (p.file_name().unwrap().to_string_lossy().into_owned(), kept)
            })
            .collect();
        files.sort();
        files
    };
    let (a, b) = (run(&work.path().join("a")), run(&work.path().join("b")));
    let same = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x == y);
    verdict(
        same && a.len() >= 5,
        format!("{} output files compared byte for byte", a.len()),
    )
}

fn main() -> ExitCode {
    let (inequality, signs) = energy_inequality_and_signs();
    let results = [
        ("1 kernel calculus", kernel_calculus()),
        ("2 discrete energy equality", energy_equality()),
        ("3 energy-dissipation inequality", inequality),
        ("4 sign ledger", signs),
        ("5 shift sweep", epsilon_limit()),
        ("6 kernel positivity", kernel_positivity()),
        ("7 uniqueness", uniqueness()),
        ("8 manufactured convergence", manufactured()),
        ("9 uniform bound", uniform_bounds()),
        ("10 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!(
            "{} criterion {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} of {} criteria pass",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
