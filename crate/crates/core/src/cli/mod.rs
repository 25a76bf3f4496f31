//! Configuration-driven runs of the solver and the studies.
//!
//! Every text output starts with the header
//!
//! ```text
//! # fkv 0.1.0
//! # config-sha256: <hex digest of the config file bytes>
//! # mode: RUN
//! # timestamp: unix=1760000000 wall_time_s=1.234
//! ```
//!
//! and JSON summaries carry the same values under `meta`. Only the
//! timestamp line changes between identical runs.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub use config::{parse_config, Discretization as DiscretizationConfig, Mode, Outputs, RunConfig};

use crate::analysis::{
    epsilon_sweep, manufactured_convergence, positivity_test, uniqueness_check, OracleCase,
};
use crate::domain::{build_mesh, write_mesh, CrackSchedule};
use crate::energy::{
    continuous_energy, discrete_energy_audit, second_derivative_bound, uniform_bound,
    EnergyQuadrature,
};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::stepper::{default_test_family, generalized_residual, solve, SolverConfig};

/// Overrides from the command line and the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Result of a property check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value >= threshold,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Sink {
    dir: PathBuf,
    hash: String,
    mode: Mode,
    started: Instant,
    files: Vec<PathBuf>,
}

impl Sink {
    fn stamp(&self) -> String {
        let unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!(
            "unix={unix} wall_time_s={:.3}",
            self.started.elapsed().as_secs_f64()
        )
    }

    fn text(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# fkv {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# config-sha256: {}", self.hash)?;
        writeln!(w, "# mode: {:?}", self.mode)?;
        writeln!(w, "# timestamp: {}", self.stamp())?;
        body(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, report: &impl serde::Serialize, checks: &[Check]) -> Result<()> {
        let value = serde_json::json!({
            "meta": {
                "version": env!("CARGO_PKG_VERSION"),
                "config_sha256": self.hash,
                "mode": format!("{:?}", self.mode),
                "timestamp": self.stamp(),
            },
            "report": report,
            "checks": checks,
        });
        let path = self.dir.join(name);
        let mut text =
            serde_json::to_string_pretty(&value).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }
}

fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    let missing = |what: &str| Error::Config(vec![format!("{what}: missing required block")]);
    let geometry = cfg.geometry.as_ref().ok_or_else(|| missing("geometry"))?;
    let disc = cfg
        .discretization
        .as_ref()
        .ok_or_else(|| missing("discretization"))?;
    let material = cfg.material.clone().ok_or_else(|| missing("material"))?;
    let kernel = cfg.kernel.clone().ok_or_else(|| missing("kernel"))?;
    let mesh = build_mesh(geometry)?;
    let schedule = if cfg.releases.is_empty() {
        CrackSchedule::never()
    } else {
        CrackSchedule::from_thresholds(&cfg.releases)?
    };
    Problem::new(
        mesh,
        schedule,
        material,
        kernel,
        cfg.data.clone(),
        disc.t_final,
    )
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    let d = cfg
        .discretization
        .as_ref()
        .expect("checked by build_problem");
    SolverConfig {
        n: d.n,
        linear: d.linear,
        history: crate::stepper::HistoryMode::Full,
        deterministic: d.deterministic,
        order: d.order,
    }
}

/// Output directory: command line, then `FKV_OUT_DIR`, then the config, then `out`.
pub fn resolve_out_dir(cfg: &RunConfig, overrides: &Overrides, base: &Path) -> PathBuf {
    if let Some(d) = &overrides.out_dir {
        return d.clone();
    }
    if let Some(d) = std::env::var_os("FKV_OUT_DIR") {
        return PathBuf::from(d);
    }
    match &cfg.outputs.dir {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => base.join(d),
        None => base.join("out"),
    }
}

/// Runs the configured mode and writes its artifacts.
pub fn execute(
    cfg: &RunConfig,
    config_text: &str,
    base: &Path,
    overrides: &Overrides,
) -> Result<Outcome> {
    let dir = resolve_out_dir(cfg, overrides, base);
    std::fs::create_dir_all(&dir)?;
    let mut sink = Sink {
        dir: dir.clone(),
        hash: config_hash(config_text),
        mode: cfg.mode,
        started: Instant::now(),
        files: Vec::new(),
    };
    let seed = overrides.seed.unwrap_or(cfg.seed);
    let checks = match cfg.mode {
        Mode::Run => run_mode(cfg, &mut sink)?,
        Mode::Sweep => sweep_mode(cfg, &mut sink)?,
        Mode::Convergence => convergence_mode(cfg, &mut sink)?,
        Mode::Uniqueness => uniqueness_mode(cfg, seed, &mut sink)?,
        Mode::Positivity => positivity_mode(cfg, seed, &mut sink)?,
    };
    Ok(Outcome {
        out_dir: dir,
        files: sink.files,
        checks,
    })
}

#[derive(serde::Serialize)]
struct RunSummary {
    nodes: usize,
    dofs: usize,
    steps: usize,
    tau: f64,
    factorizations: usize,
    max_solve_residual: f64,
    initial_energy: f64,
    max_equality_residual: f64,
    min_margin: f64,
    min_energy_margin: f64,
    worst_sign_term: &'static str,
    worst_sign_value: f64,
    kernel_certificate_holds: bool,
    min_continuous_margin: f64,
    generalized_residual: f64,
    second_derivative_bound: f64,
    uniform_bound: f64,
}

fn run_mode(cfg: &RunConfig, sink: &mut Sink) -> Result<Vec<Check>> {
    let problem = build_problem(cfg)?;
    let (disc, traj) = solve(&problem, &solver_config(cfg))?;
    let ledger = discrete_energy_audit(&disc, &traj)?;
    let cont = continuous_energy(&disc, &traj, EnergyQuadrature::Product)?;
    let family = default_test_family(&disc);
    let residual = generalized_residual(&disc, &traj, &family)?;
    let cert = disc.samples.certificate();
    let (worst_name, worst) = ledger.worst_sign();
    let min_cont = cont
        .iter()
        .fold(f64::INFINITY, |a, c| a.min(c.margin / ledger.scale));
    let summary = RunSummary {
        nodes: problem.mesh.n_nodes(),
        dofs: problem.mesh.n_dofs(),
        steps: traj.n,
        tau: traj.tau,
        factorizations: traj.factorizations,
        max_solve_residual: traj.solve_residuals.iter().fold(0.0, |a: f64, &b| a.max(b)),
        initial_energy: ledger.initial_energy,
        max_equality_residual: ledger.max_equality_residual(),
        min_margin: ledger.min_margin(),
        min_energy_margin: ledger.min_energy_margin(),
        worst_sign_term: worst_name,
        worst_sign_value: worst,
        kernel_certificate_holds: cert.holds(1e-12),
        min_continuous_margin: min_cont,
        generalized_residual: residual.max_abs,
        second_derivative_bound: second_derivative_bound(&disc, &traj)?,
        uniform_bound: uniform_bound(&disc, &traj)?,
    };
    let checks = vec![
        Check::at_most(
            "energy_equality_residual",
            summary.max_equality_residual,
            1e-8,
        ),
        Check::at_least("energy_margin", summary.min_margin, -1e-10),
        Check::at_least("sign_ledger", worst, -1e-12),
        Check::at_least(
            "kernel_certificate",
            if summary.kernel_certificate_holds {
                1.0
            } else {
                0.0
            },
            1.0,
        ),
    ];
    let o = &cfg.outputs;
    if o.ledger {
        sink.text("ledger.txt", |w| ledger.write_table(&mut WriteRef(w)))?;
    }
    if o.continuous {
        sink.text("continuous_energy.txt", |w| {
            writeln!(w, "# step t energy dissipation work margin")?;
            for c in &cont {
                writeln!(
                    w,
                    "{} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                    c.step, c.time, c.energy, c.dissipation, c.work, c.margin
                )?;
            }
            Ok(())
        })?;
    }
    if o.snapshots {
        let stride = o.snapshot_stride.unwrap_or((traj.n / 50).max(1));
        sink.text("snapshots.txt", |w| {
            traj.write_snapshots(stride, &mut WriteRef(w))
        })?;
    }
    if o.kernel_table {
        sink.text("kernel.txt", |w| disc.samples.write_table(&mut WriteRef(w)))?;
    }
    if o.mesh {
        sink.text("mesh.txt", |w| write_mesh(&problem.mesh, &mut WriteRef(w)))?;
    }
    sink.json("summary.json", &summary, &checks)?;
    Ok(checks)
}

fn sweep_mode(cfg: &RunConfig, sink: &mut Sink) -> Result<Vec<Check>> {
    let problem = build_problem(cfg)?;
    let n = cfg.discretization.as_ref().map(|d| d.n).unwrap_or(200);
    let report = epsilon_sweep(&problem, cfg.sweep_eps0, cfg.sweep_levels, n)?;
    let checks = vec![
        Check::at_least(
            "diffs_strictly_decreasing",
            if report.strictly_decreasing() {
                1.0
            } else {
                0.0
            },
            1.0,
        ),
        Check::at_least(
            "energy_margin",
            report
                .energy_margins
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b)),
            -1e-10,
        ),
    ];
    sink.text("sweep.txt", |w| {
        writeln!(w, "# level epsilon diff_sup diff_strain energy_margin")?;
        for (k, eps) in report.epsilons.iter().enumerate() {
            let d = |v: &Vec<f64>| {
                v.get(k)
                    .map(|x| format!("{x:.17e}"))
                    .unwrap_or_else(|| "nan".into())
            };
            writeln!(
                w,
                "{k} {eps:.17e} {} {} {:.17e}",
                d(&report.diffs_sup),
                d(&report.diffs_strain),
                report.energy_margins[k]
            )?;
        }
        Ok(())
    })?;
    sink.json("sweep.json", &report, &checks)?;
    Ok(checks)
}

fn convergence_mode(cfg: &RunConfig, sink: &mut Sink) -> Result<Vec<Check>> {
    let report = manufactured_convergence(cfg.convergence_case, &cfg.convergence_steps)?;
    let checks = vec![match cfg.convergence_case {
        OracleCase::Wave => Check::at_least("observed_order", report.min_rate(), 0.8),
        _ => Check::at_most("exactness", report.max_error(), 1e-10),
    }];
    sink.text("convergence.txt", |w| {
        writeln!(w, "# n error")?;
        for (n, e) in report.steps.iter().zip(&report.errors) {
            writeln!(w, "{n} {e:.17e}")?;
        }
        Ok(())
    })?;
    sink.json("convergence.json", &report, &checks)?;
    Ok(checks)
}

fn uniqueness_mode(cfg: &RunConfig, seed: u64, sink: &mut Sink) -> Result<Vec<Check>> {
    let problem = build_problem(cfg)?;
    let variant = SolverConfig {
        order: crate::assembly::AssemblyOrder::Permuted(seed),
        ..solver_config(cfg)
    };
    let report = uniqueness_check(&problem, &variant)?;
    let checks = vec![Check::at_most(
        "relative_difference",
        report.relative,
        1e-10,
    )];
    sink.json("uniqueness.json", &report, &checks)?;
    Ok(checks)
}

fn positivity_mode(cfg: &RunConfig, seed: u64, sink: &mut Sink) -> Result<Vec<Check>> {
    let kernel = cfg
        .kernel
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["kernel: missing required block".into()]))?;
    let t_final = cfg
        .discretization
        .as_ref()
        .map(|d| d.t_final)
        .unwrap_or(1.0);
    let report = positivity_test(kernel, cfg.positivity_n_max, t_final, seed)?;
    let checks = vec![
        Check::at_least(
            "relative_min_eigenvalue",
            report.worst_relative_eigenvalue(),
            -1e-10,
        ),
        Check::at_least("identity_ratio", report.identity.ratio, 1.5),
    ];
    sink.text("eigenvalues.txt", |w| {
        writeln!(w, "# n min_eigenvalue norm")?;
        for r in &report.rows {
            writeln!(w, "{} {:.17e} {:.17e}", r.n, r.min_eigenvalue, r.norm)?;
        }
        Ok(())
    })?;
    sink.json("positivity.json", &report, &checks)?;
    Ok(checks)
}

/// Adapts a trait object to the `impl Write` parameters of the writers.
struct WriteRef<'a>(&'a mut dyn Write);

impl Write for WriteRef<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.write(buf)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.0.flush()
    }
}
