//! Run configuration in TOML, validated in one pass that reports every problem.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use toml::{Table, Value};

use crate::analysis::OracleCase;
use crate::assembly::{
    AssemblyOrder, Field, InitialDisplacement, Material, ProblemData, SpaceFn, Term, TimeFn,
};
use crate::domain::{read_blueprint, CrackPath, GeometrySpec, ReleaseTime, SegmentId, Side};
use crate::kernel::{FractionalKernel, KernelProfile, RegularizedKernel};
use crate::linalg::LinearSolver;
use crate::tensor::SymTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Mode {
    Run,
    Sweep,
    Convergence,
    Uniqueness,
    Positivity,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RUN" => Some(Mode::Run),
            "SWEEP" => Some(Mode::Sweep),
            "CONVERGENCE" => Some(Mode::Convergence),
            "UNIQUENESS" => Some(Mode::Uniqueness),
            "POSITIVITY" => Some(Mode::Positivity),
            _ => None,
        }
    }

    fn needs_problem(self) -> bool {
        matches!(self, Mode::Run | Mode::Sweep | Mode::Uniqueness)
    }
}

#[derive(Debug, Clone)]
pub struct Outputs {
    pub dir: Option<PathBuf>,
    pub snapshot_stride: Option<usize>,
    pub snapshots: bool,
    pub ledger: bool,
    pub kernel_table: bool,
    pub mesh: bool,
    pub continuous: bool,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub n: usize,
    pub t_final: f64,
    pub linear: LinearSolver,
    pub deterministic: bool,
    pub order: AssemblyOrder,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub geometry: Option<GeometrySpec>,
    pub releases: BTreeMap<SegmentId, ReleaseTime>,
    pub material: Option<Material>,
    pub kernel: Option<RegularizedKernel>,
    pub data: ProblemData,
    pub discretization: Option<Discretization>,
    pub outputs: Outputs,
    pub sweep_eps0: f64,
    pub sweep_levels: usize,
    pub convergence_case: OracleCase,
    pub convergence_steps: Vec<usize>,
    pub seed: u64,
    pub positivity_n_max: usize,
    pub warnings: Vec<String>,
}

struct Report {
    errors: Vec<String>,
    warnings: Vec<String>,
    strict: bool,
}

impl Report {
    fn err(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }
}

/// A table whose keys are marked as they are read.
struct Block<'a> {
    path: String,
    table: &'a Table,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Block<'a> {
    fn new(path: impl Into<String>, table: &'a Table) -> Self {
        Self {
            path: path.into(),
            table,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_owned()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(k.to_owned());
        self.table.get(k)
    }

    fn f64(&self, r: &mut Report, k: &str) -> Option<f64> {
        match self.get(k)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            v => {
                r.err(
                    &self.key(k),
                    format!("expected a number, found {}", v.type_str()),
                );
                None
            }
        }
    }

    fn f64_req(&self, r: &mut Report, k: &str) -> Option<f64> {
        if self.table.get(k).is_none() {
            r.err(&self.key(k), "missing required number");
        }
        self.f64(r, k)
    }

    fn f64_or(&self, r: &mut Report, k: &str, default: f64) -> f64 {
        self.f64(r, k).unwrap_or(default)
    }

    fn usize(&self, r: &mut Report, k: &str) -> Option<usize> {
        match self.get(k)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            v => {
                r.err(
                    &self.key(k),
                    format!("expected a nonnegative integer, found {v}"),
                );
                None
            }
        }
    }

    fn usize_req(&self, r: &mut Report, k: &str) -> Option<usize> {
        if self.table.get(k).is_none() {
            r.err(&self.key(k), "missing required integer");
        }
        self.usize(r, k)
    }

    fn bool_or(&self, r: &mut Report, k: &str, default: bool) -> bool {
        match self.get(k) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                r.err(&self.key(k), format!("expected true or false, found {v}"));
                default
            }
        }
    }

    fn str(&self, r: &mut Report, k: &str) -> Option<&'a str> {
        match self.get(k)? {
            Value::String(s) => Some(s),
            v => {
                r.err(
                    &self.key(k),
                    format!("expected a string, found {}", v.type_str()),
                );
                None
            }
        }
    }

    fn sub(&self, r: &mut Report, k: &str) -> Option<Block<'a>> {
        match self.get(k)? {
            Value::Table(t) => Some(Block::new(self.key(k), t)),
            v => {
                r.err(
                    &self.key(k),
                    format!("expected a table, found {}", v.type_str()),
                );
                None
            }
        }
    }

    fn finish(&self, r: &mut Report) {
        let used = self.used.borrow();
        for k in self.table.keys().filter(|k| !used.contains(*k)) {
            let msg = format!("{}: unknown key", self.key(k));
            if r.strict {
                r.errors.push(msg);
            } else {
                r.warnings.push(msg);
            }
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn numbers(r: &mut Report, path: &str, v: &Value) -> Option<Vec<f64>> {
    let arr = match v {
        Value::Array(a) => a,
        _ => {
            r.err(path, "expected an array of numbers");
            return None;
        }
    };
    let out: Option<Vec<f64>> = arr.iter().map(number).collect();
    if out.is_none() {
        r.err(path, "expected an array of numbers");
    }
    out
}

fn point(r: &mut Report, path: &str, v: &Value) -> Option<[f64; 2]> {
    let p = numbers(r, path, v)?;
    if p.len() != 2 {
        r.err(
            path,
            format!("a point has 2 coordinates, found {}", p.len()),
        );
        return None;
    }
    Some([p[0], p[1]])
}

fn sides(r: &mut Report, b: &Block, k: &str) -> Vec<Side> {
    let Some(v) = b.get(k) else { return Vec::new() };
    let Value::Array(a) = v else {
        r.err(&b.key(k), "expected an array of side names");
        return Vec::new();
    };
    let mut out = Vec::new();
    for s in a {
        match s.as_str() {
            Some("left") => out.push(Side::Left),
            Some("right") => out.push(Side::Right),
            Some("bottom") => out.push(Side::Bottom),
            Some("top") => out.push(Side::Top),
            _ => r.err(
                &b.key(k),
                format!("unknown side {s}; expected left, right, bottom or top"),
            ),
        }
    }
    out
}

fn geometry(
    r: &mut Report,
    b: Block,
    base: &Path,
) -> (Option<GeometrySpec>, BTreeMap<SegmentId, ReleaseTime>) {
    let mut releases = BTreeMap::new();
    if let Some(rel) = b.sub(r, "releases") {
        for (k, v) in rel.table {
            rel.used.borrow_mut().insert(k.clone());
            let path = rel.key(k);
            let Ok(seg) = k.parse::<SegmentId>() else {
                r.err(&path, "segment ids are nonnegative integers");
                continue;
            };
            match v {
                Value::String(s) if s == "never" => {
                    releases.insert(seg, ReleaseTime::Never);
                }
                v => match number(v) {
                    Some(t) if t >= 0.0 && t.is_finite() => {
                        releases.insert(seg, ReleaseTime::At(t));
                    }
                    _ => r.err(
                        &path,
                        "release time must be a nonnegative number or \"never\"",
                    ),
                },
            }
        }
        rel.finish(r);
    }
    let spec = match b.str(r, "kind") {
        Some("interval") => {
            let length = b.f64_or(r, "length", 1.0);
            let elements = b.usize_req(r, "elements");
            let dirichlet = sides(r, &b, "dirichlet");
            if !(length > 0.0) {
                r.err(&b.key("length"), "must be positive");
            }
            if elements == Some(0) {
                r.err(&b.key("elements"), "must be at least 1");
            }
            elements.map(|elements| GeometrySpec::Interval {
                length,
                elements,
                dirichlet,
            })
        }
        Some("rectangle") => {
            let width = b.f64_or(r, "width", 1.0);
            let height = b.f64_or(r, "height", 1.0);
            let nx = b.usize_req(r, "nx");
            let ny = b.usize_req(r, "ny");
            let dirichlet = sides(r, &b, "dirichlet");
            if !(width > 0.0 && height > 0.0) {
                r.err(&b.path, "width and height must be positive");
            }
            if nx == Some(0) || ny == Some(0) {
                r.err(&b.path, "nx and ny must be at least 1");
            }
            let mut cracks = Vec::new();
            match b.get("cracks") {
                None => {}
                Some(Value::Array(list)) => {
                    for (i, c) in list.iter().enumerate() {
                        let path = format!("{}[{i}]", b.key("cracks"));
                        let Value::Table(t) = c else {
                            r.err(&path, "expected a table with segment and points");
                            continue;
                        };
                        let cb = Block::new(path.clone(), t);
                        let segment = cb.usize_req(r, "segment");
                        let pts: Option<Vec<[f64; 2]>> = match cb.get("points") {
                            Some(Value::Array(a)) => {
                                a.iter().map(|p| point(r, &cb.key("points"), p)).collect()
                            }
                            _ => {
                                r.err(&cb.key("points"), "expected an array of [x, y] points");
                                None
                            }
                        };
                        cb.finish(r);
                        if let (Some(segment), Some(points)) = (segment, pts) {
                            if points.len() < 2 {
                                r.err(&path, "a crack path needs at least 2 points");
                            }
                            cracks.push(CrackPath {
                                segment: segment as SegmentId,
                                points,
                            });
                        }
                    }
                }
                Some(_) => r.err(&b.key("cracks"), "expected an array of tables"),
            }
            match (nx, ny) {
                (Some(nx), Some(ny)) => Some(GeometrySpec::Rectangle {
                    width,
                    height,
                    nx,
                    ny,
                    dirichlet,
                    cracks,
                }),
                _ => None,
            }
        }
        Some("file") => match b.str(r, "path") {
            Some(p) => {
                let full = base.join(p);
                match std::fs::File::open(&full) {
                    Ok(f) => match read_blueprint(std::io::BufReader::new(f)) {
                        Ok(bp) => Some(GeometrySpec::Blueprint(bp)),
                        Err(e) => {
                            r.err(&b.key("path"), format!("{}: {e}", full.display()));
                            None
                        }
                    },
                    Err(e) => {
                        r.err(&b.key("path"), format!("{}: {e}", full.display()));
                        None
                    }
                }
            }
            None => {
                r.err(&b.key("path"), "missing mesh file path");
                None
            }
        },
        Some(other) => {
            r.err(
                &b.key("kind"),
                format!("unknown geometry `{other}`; expected interval, rectangle or file"),
            );
            None
        }
        None => {
            r.err(&b.key("kind"), "missing geometry kind");
            None
        }
    };
    b.finish(r);
    (spec, releases)
}

fn tensor(r: &mut Report, path: &str, v: &Value) -> Option<SymTensor> {
    if let Some(x) = number(v) {
        return Some(SymTensor::scalar(x));
    }
    match v {
        Value::Table(t) => {
            let b = Block::new(path, t);
            let lambda = b.f64_req(r, "lambda");
            let mu = b.f64_req(r, "mu");
            b.finish(r);
            Some(SymTensor::isotropic(lambda?, mu?))
        }
        Value::Array(rows) => {
            let parsed: Option<Vec<Vec<f64>>> =
                rows.iter().map(|row| numbers(r, path, row)).collect();
            let parsed = parsed?;
            let n = parsed.len();
            if n != 3 || parsed.iter().any(|row| row.len() != 3) {
                r.err(
                    path,
                    "a tensor matrix must be 3x3 in (e11, e22, sqrt2 e12) coordinates",
                );
                return None;
            }
            match SymTensor::from_matrix(DMatrix::from_fn(3, 3, |i, j| parsed[i][j])) {
                Ok(t) => Some(t),
                Err(e) => {
                    r.err(path, e);
                    None
                }
            }
        }
        _ => {
            r.err(path, "expected a number, {lambda, mu} or a 3x3 matrix");
            None
        }
    }
}

fn material(r: &mut Report, b: Block) -> Option<Material> {
    let elastic = b
        .get("elastic")
        .and_then(|v| tensor(r, &b.key("elastic"), v));
    if b.table.get("elastic").is_none() {
        r.err(&b.key("elastic"), "missing elasticity tensor");
    }
    let viscous = match b.get("viscous") {
        Some(v) => tensor(r, &b.key("viscous"), v),
        None => {
            r.err(&b.key("viscous"), "missing viscosity tensor");
            None
        }
    };
    b.finish(r);
    match Material::new(elastic?, viscous?) {
        Ok(m) => Some(m),
        Err(e) => {
            r.err(&b.path, e);
            None
        }
    }
}

fn kernel(
    r: &mut Report,
    b: Block,
    visc: Option<&SymTensor>,
    t_final: f64,
) -> Option<RegularizedKernel> {
    let profile = b.str(r, "profile").unwrap_or("fractional");
    let epsilon = b.f64(r, "epsilon");
    let visc = visc.cloned().unwrap_or_else(|| SymTensor::scalar(1.0));
    let out = match profile {
        "fractional" => {
            let alpha = b.f64_req(r, "alpha");
            if let Some(a) = alpha {
                if !(a > 0.0 && a < 1.0) {
                    r.err(
                        &b.key("alpha"),
                        format!("{a} is outside the open interval (0, 1)"),
                    );
                }
            }
            match epsilon {
                None => r.err(
                    &b.key("epsilon"),
                    "a fractional kernel needs a positive shift",
                ),
                Some(e) if !(e > 0.0 && e < t_final) => r.err(
                    &b.key("epsilon"),
                    format!("{e} is outside the open interval (0, T = {t_final})"),
                ),
                _ => {}
            }
            match (alpha, epsilon) {
                (Some(a), Some(e)) if a > 0.0 && a < 1.0 && e > 0.0 && e < t_final => {
                    FractionalKernel::new(a, visc, t_final)
                        .and_then(|k| k.regularize(e))
                        .ok()
                }
                _ => None,
            }
        }
        "exponential" => {
            let beta = b.f64_req(r, "beta");
            build_smooth(
                r,
                &b,
                beta.map(|beta| KernelProfile::Exponential { beta }),
                epsilon,
                visc,
            )
        }
        "constant" => {
            let value = b.f64_req(r, "value");
            build_smooth(
                r,
                &b,
                value.map(|value| KernelProfile::Constant { value }),
                epsilon,
                visc,
            )
        }
        other => {
            r.err(
                &b.key("profile"),
                format!("unknown profile `{other}`; expected fractional, exponential or constant"),
            );
            None
        }
    };
    b.finish(r);
    out
}

fn build_smooth(
    r: &mut Report,
    b: &Block,
    profile: Option<KernelProfile>,
    epsilon: Option<f64>,
    visc: SymTensor,
) -> Option<RegularizedKernel> {
    match RegularizedKernel::smooth(profile?, epsilon.unwrap_or(0.0), visc) {
        Ok(k) => Some(k),
        Err(e) => {
            r.err(&b.path, e);
            None
        }
    }
}

fn space_fn(r: &mut Report, path: &str, v: Option<&Value>) -> Option<SpaceFn> {
    match v {
        None => Some(SpaceFn::Const),
        Some(Value::String(s)) if s == "const" => Some(SpaceFn::Const),
        Some(Value::Table(t)) => {
            let b = Block::new(path, t);
            let out = match b.str(r, "kind") {
                Some("const") => Some(SpaceFn::Const),
                Some("monomial") => Some(SpaceFn::Monomial {
                    px: b.usize(r, "px").unwrap_or(0) as u32,
                    py: b.usize(r, "py").unwrap_or(0) as u32,
                }),
                Some("sin_x") => Some(SpaceFn::SinX {
                    k: b.f64_req(r, "k").unwrap_or(0.0),
                    phase: b.f64_or(r, "phase", 0.0),
                }),
                Some("sin_sin") => Some(SpaceFn::SinSin {
                    kx: b.f64_req(r, "kx").unwrap_or(0.0),
                    ky: b.f64_req(r, "ky").unwrap_or(0.0),
                }),
                other => {
                    r.err(&b.key("kind"), format!("unknown space preset {other:?}; expected const, monomial, sin_x or sin_sin"));
                    None
                }
            };
            b.finish(r);
            out
        }
        Some(_) => {
            r.err(path, "expected \"const\" or a table with a kind");
            None
        }
    }
}

fn time_fn(r: &mut Report, path: &str, v: Option<&Value>) -> Option<TimeFn> {
    match v {
        None => Some(TimeFn::constant()),
        Some(Value::String(s)) if s == "const" => Some(TimeFn::constant()),
        Some(Value::Table(t)) => {
            let b = Block::new(path, t);
            let out = match b.str(r, "kind") {
                Some("poly") => match b.get("coeffs") {
                    Some(v) => numbers(r, &b.key("coeffs"), v).map(TimeFn::Poly),
                    None => {
                        r.err(&b.key("coeffs"), "missing polynomial coefficients");
                        None
                    }
                },
                Some("sin") => Some(TimeFn::Sin {
                    omega: b.f64_req(r, "omega").unwrap_or(0.0),
                    phase: b.f64_or(r, "phase", 0.0),
                }),
                Some("exp") => Some(TimeFn::Exp {
                    rate: b.f64_req(r, "rate").unwrap_or(0.0),
                }),
                other => {
                    r.err(
                        &b.key("kind"),
                        format!("unknown time preset {other:?}; expected poly, sin or exp"),
                    );
                    None
                }
            };
            b.finish(r);
            out
        }
        Some(_) => {
            r.err(path, "expected \"const\" or a table with a kind");
            None
        }
    }
}

fn field(r: &mut Report, path: &str, v: Option<&Value>) -> Field {
    let Some(v) = v else { return Field::zero() };
    let Value::Array(list) = v else {
        r.err(path, "expected an array of terms");
        return Field::zero();
    };
    let mut terms = Vec::new();
    for (i, t) in list.iter().enumerate() {
        let tp = format!("{path}[{i}]");
        let Value::Table(tab) = t else {
            r.err(&tp, "a term is a table with amplitude, space and time");
            continue;
        };
        let b = Block::new(tp.clone(), tab);
        let amplitude = match b.get("amplitude") {
            Some(v) => numbers(r, &b.key("amplitude"), v),
            None => {
                r.err(&b.key("amplitude"), "missing amplitude");
                None
            }
        };
        let space = space_fn(r, &b.key("space"), b.get("space"));
        let time = time_fn(r, &b.key("time"), b.get("time"));
        b.finish(r);
        if let (Some(amplitude), Some(space), Some(time)) = (amplitude, space, time) {
            terms.push(Term {
                amplitude,
                space,
                time,
            });
        }
    }
    Field { terms }
}

fn data(r: &mut Report, b: Block) -> ProblemData {
    let mut d = ProblemData::zero();
    d.body_force = field(r, &b.key("body_force"), b.get("body_force"));
    d.traction = field(r, &b.key("traction"), b.get("traction"));
    d.dirichlet = field(r, &b.key("dirichlet"), b.get("dirichlet"));
    d.u1 = field(r, &b.key("u1"), b.get("u1"));
    d.u0 = match b.get("u0") {
        Some(Value::String(s)) if s == "elastostatic" => InitialDisplacement::Elastostatic,
        other => InitialDisplacement::Field(field(r, &b.key("u0"), other)),
    };
    b.finish(r);
    d
}

fn discretization(r: &mut Report, b: Block) -> Option<Discretization> {
    let n = b.usize_req(r, "n");
    let t_final = b.f64_req(r, "t_final");
    if n == Some(0) {
        r.err(&b.key("n"), "must be at least 1");
    }
    if let Some(t) = t_final {
        if !(t > 0.0 && t.is_finite()) {
            r.err(&b.key("t_final"), "must be positive");
        }
    }
    let tol = b.f64_or(r, "linear_tol", 1e-12);
    let max_iter = b.usize(r, "max_iter").unwrap_or(10_000);
    let linear = match b.str(r, "solver").unwrap_or("direct") {
        "direct" => LinearSolver::Direct,
        "cg" => {
            if !(tol > 0.0 && tol < 1.0) {
                r.err(&b.key("linear_tol"), format!("{tol} is outside (0, 1)"));
            }
            LinearSolver::Cg { tol, max_iter }
        }
        other => {
            r.err(
                &b.key("solver"),
                format!("unknown solver `{other}`; expected direct or cg"),
            );
            LinearSolver::Direct
        }
    };
    let deterministic = b.bool_or(r, "deterministic", true);
    let order = match b.str(r, "order").unwrap_or("natural") {
        "natural" => AssemblyOrder::Natural,
        "permuted" => AssemblyOrder::Permuted(b.usize(r, "order_seed").unwrap_or(0) as u64),
        other => {
            r.err(
                &b.key("order"),
                format!("unknown assembly order `{other}`; expected natural or permuted"),
            );
            AssemblyOrder::Natural
        }
    };
    b.finish(r);
    Some(Discretization {
        n: n.filter(|&n| n > 0)?,
        t_final: t_final.filter(|t| *t > 0.0 && t.is_finite())?,
        linear,
        deterministic,
        order,
    })
}

fn outputs(r: &mut Report, b: Option<Block>) -> Outputs {
    let Some(b) = b else {
        return Outputs {
            dir: None,
            snapshot_stride: None,
            snapshots: true,
            ledger: true,
            kernel_table: true,
            mesh: true,
            continuous: true,
        };
    };
    let out = Outputs {
        dir: b.str(r, "dir").map(PathBuf::from),
        snapshot_stride: b.usize(r, "snapshot_stride").filter(|&s| s > 0),
        snapshots: b.bool_or(r, "snapshots", true),
        ledger: b.bool_or(r, "ledger", true),
        kernel_table: b.bool_or(r, "kernel_table", true),
        mesh: b.bool_or(r, "mesh", true),
        continuous: b.bool_or(r, "continuous", true),
    };
    b.finish(r);
    out
}

/// Parses and validates a configuration. `base` resolves relative paths and
/// `mode` overrides the mode in the file.
pub fn parse_config(
    text: &str,
    base: &Path,
    mode: Option<Mode>,
    strict: bool,
) -> Result<RunConfig, Vec<String>> {
    let root: Table =
        toml::from_str(text).map_err(|e| vec![format!("config is not valid TOML: {e}")])?;
    let mut r = Report {
        errors: Vec::new(),
        warnings: Vec::new(),
        strict,
    };
    let top = Block::new("", &root);
    let file_mode = match top.str(&mut r, "mode") {
        None => Mode::Run,
        Some(s) => Mode::parse(s).unwrap_or_else(|| {
            r.err("mode", format!("unknown mode `{s}`; expected RUN, SWEEP, CONVERGENCE, UNIQUENESS or POSITIVITY"));
            Mode::Run
        }),
    };
    let mode = mode.unwrap_or(file_mode);

    let disc = match top.sub(&mut r, "discretization") {
        Some(b) => discretization(&mut r, b),
        None => {
            if mode.needs_problem() || mode == Mode::Positivity {
                r.err("discretization", "missing required block");
            }
            None
        }
    };
    let t_final = disc.as_ref().map(|d| d.t_final).unwrap_or(1.0);
    let (geometry, releases) = match top.sub(&mut r, "geometry") {
        Some(b) => geometry(&mut r, b, base),
        None => {
            if mode.needs_problem() {
                r.err("geometry", "missing required block");
            }
            (None, BTreeMap::new())
        }
    };
    for (seg, rt) in &releases {
        if let ReleaseTime::At(t) = rt {
            if *t > t_final {
                r.warnings.push(format!(
                    "geometry.releases.{seg}: release at {t} is after T = {t_final}; the segment never opens within the horizon"
                ));
            }
        }
    }
    let material = match top.sub(&mut r, "material") {
        Some(b) => material(&mut r, b),
        None => {
            if mode.needs_problem() {
                r.err("material", "missing required block");
            }
            None
        }
    };
    let kernel = match top.sub(&mut r, "kernel") {
        Some(b) => kernel(&mut r, b, material.as_ref().map(|m| &m.viscous), t_final),
        None => {
            if mode.needs_problem() || mode == Mode::Positivity {
                r.err("kernel", "missing required block");
            }
            None
        }
    };
    let data = match top.sub(&mut r, "data") {
        Some(b) => data(&mut r, b),
        None => ProblemData::zero(),
    };
    let out_block = top.sub(&mut r, "outputs");
    let outputs = outputs(&mut r, out_block);

    let (mut sweep_eps0, mut sweep_levels) = (0.1, 5);
    if let Some(b) = top.sub(&mut r, "sweep") {
        sweep_eps0 = b.f64_or(&mut r, "eps0", sweep_eps0);
        sweep_levels = b.usize(&mut r, "levels").unwrap_or(sweep_levels);
        if !(sweep_eps0 > 0.0 && sweep_eps0 < t_final) {
            r.err(
                "sweep.eps0",
                format!("{sweep_eps0} is outside (0, T = {t_final})"),
            );
        }
        if sweep_levels < 2 {
            r.err("sweep.levels", "a sweep needs at least 2 levels");
        }
        b.finish(&mut r);
    }
    let (mut case, mut steps) = (OracleCase::Wave, vec![100, 200, 400]);
    if let Some(b) = top.sub(&mut r, "convergence") {
        match b.str(&mut r, "case") {
            None | Some("wave") => {}
            Some("static") => case = OracleCase::Static,
            Some("translation") => case = OracleCase::Translation,
            Some(other) => r.err(
                "convergence.case",
                format!("unknown case `{other}`; expected wave, static or translation"),
            ),
        }
        if let Some(v) = b.get("steps") {
            match numbers(&mut r, "convergence.steps", v) {
                Some(s) if s.len() >= 2 && s.iter().all(|x| *x >= 1.0 && x.fract() == 0.0) => {
                    steps = s.into_iter().map(|x| x as usize).collect()
                }
                Some(_) => r.err("convergence.steps", "needs at least 2 positive integers"),
                None => {}
            }
        }
        b.finish(&mut r);
    }
    let mut seed = 1;
    let mut positivity_n_max = 256;
    if let Some(b) = top.sub(&mut r, "uniqueness") {
        seed = b.usize(&mut r, "seed").unwrap_or(1) as u64;
        b.finish(&mut r);
    }
    if let Some(b) = top.sub(&mut r, "positivity") {
        positivity_n_max = b.usize(&mut r, "n_max").unwrap_or(positivity_n_max);
        if positivity_n_max < 8 {
            r.err("positivity.n_max", "must be at least 8");
        }
        b.finish(&mut r);
    }
    top.finish(&mut r);

    if !r.errors.is_empty() {
        return Err(r.errors);
    }
    Ok(RunConfig {
        mode,
        geometry,
        releases,
        material,
        kernel,
        data,
        discretization: disc,
        outputs,
        sweep_eps0,
        sweep_levels,
        convergence_case: case,
        convergence_steps: steps,
        seed,
        positivity_n_max,
        warnings: r.warnings,
    })
}
